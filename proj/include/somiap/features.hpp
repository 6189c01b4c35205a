#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "somiap/imagecore.hpp"

namespace somiap {

struct Keypoint {
    double x = 0.0;  ///< level-0 coordinates
    double y = 0.0;
    int level = 0;
    double angle = 0.0;  ///< radians in [0, 2pi)
    double response = 0.0;

    bool operator==(const Keypoint&) const = default;
};

/// 256-bit binary descriptor, bit i at word i / 64, position 63 - i % 64.
struct Descriptor {
    std::array<std::uint64_t, 4> words{};

    bool bit(int i) const { return (words[static_cast<std::size_t>(i / 64)] >> (63 - i % 64)) & 1U; }
    std::string to_hex() const;
    static Descriptor from_hex(std::string_view hex);

    bool operator==(const Descriptor&) const = default;
};

int hamming(const Descriptor& a, const Descriptor& b);

struct DescriptorSet {
    std::vector<Keypoint> keypoints;
    std::vector<Descriptor> descriptors;

    std::size_t size() const { return descriptors.size(); }
    bool empty() const { return descriptors.empty(); }

    bool operator==(const DescriptorSet&) const = default;
};

struct OrbParams {
    int max_features = 500;
    int levels = 8;
    double scale_factor = 1.2;
    int fast_threshold = 20;
    double harris_k = 0.04;
};

/// FAST-9 segment test on the radius-3 Bresenham circle with 3x3 non-maximum
/// suppression of the FAST score. Keypoints come back in raster order at level
/// 0 with `response` set to the FAST score.
std::vector<Keypoint> detect_fast(const GrayImage& img, int threshold);

/// Largest threshold for which (x, y) is still a FAST-9 corner, or 0 if it is
/// not a corner at threshold 1.
int fast_score(const GrayImage& img, int x, int y);

/// Oriented FAST keypoints plus rotated BRIEF descriptors over an image
/// pyramid. Keypoints are ordered by Harris response (descending), then by
/// level and position. Throws ContractError if the shorter side is < 32.
DescriptorSet orb_detect_describe(const GrayImage& img, const OrbParams& params = {});

struct DescriptorMatch {
    int query = 0;
    int train = 0;
    int distance = 0;
    bool good = false;

    bool operator==(const DescriptorMatch&) const = default;
};

struct MatchReport {
    std::vector<DescriptorMatch> pairs;
    int good_count = 0;
};

/// Nearest-neighbour matching by Hamming distance with Lowe's ratio test
/// (d1 < ratio * d2; a single train descriptor counts d2 as 256). Equal
/// distances resolve to the lowest train index.
MatchReport match_descriptors(const DescriptorSet& query, const DescriptorSet& train, double ratio = 0.75);

}  // namespace somiap
