#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "somiap/imagecore.hpp"

namespace somiap {

enum class HashAlgo { DhashGray, DhashColor, PhashGray, PhashColor };

inline constexpr std::array<HashAlgo, 4> kAllHashAlgos = {HashAlgo::DhashGray, HashAlgo::DhashColor,
                                                          HashAlgo::PhashGray, HashAlgo::PhashColor};

/// "dhash_gray", "dhash_color", "phash_gray", "phash_color".
std::string_view to_string(HashAlgo algo);
std::optional<HashAlgo> parse_hash_algo(std::string_view name);

/// 64 for gray algorithms, 192 for color ones.
int bit_width(HashAlgo algo);
bool is_color(HashAlgo algo);

/// Threshold operating points shipped as defaults (dhash gray 34, dhash color
/// 36, pHash gray 23, pHash color 23).
int default_threshold(HashAlgo algo);

/// Fixed-width bit string. Bit i lives in word i / 64 at position
/// 63 - i % 64, so the hex form reads MSB-first.
class HashDigest {
public:
    HashDigest() = default;
    explicit HashDigest(HashAlgo algo);
    HashDigest(HashAlgo algo, std::span<const std::uint64_t> words);

    HashAlgo algo() const { return algo_; }
    int bits() const { return bit_width(algo_); }
    std::span<const std::uint64_t> words() const { return {words_.data(), static_cast<std::size_t>(bits() / 64)}; }

    bool bit(int i) const { return (words_[static_cast<std::size_t>(i / 64)] >> (63 - i % 64)) & 1U; }
    void set_bit(int i, bool on);
    int popcount() const;

    /// `algo:hex`, e.g. "phash_gray:00ff..." (16 or 48 lowercase hex digits).
    std::string to_string() const;
    static HashDigest parse(std::string_view text);

    bool operator==(const HashDigest&) const = default;

private:
    HashAlgo algo_ = HashAlgo::DhashGray;
    std::array<std::uint64_t, 3> words_{};
};

/// Resize to 9x8, bit(y*8+x) = I(x+1,y) > I(x,y).
std::uint64_t dhash_bits(const PlaneView& plane);

/// Resize to 32x32, DCT-II, compare the top-left 8x8 block against the mean
/// of its 63 AC coefficients.
std::uint64_t phash_bits(const PlaneView& plane);

HashDigest dhash_gray(const GrayImage& img);
HashDigest phash_gray(const GrayImage& img);

enum class HashBase { Dhash, Phash };

/// Base hash on the R, G and B planes, concatenated R|G|B.
HashDigest color_hash(const ColorImage& img, HashBase base);

/// Dispatches on the algorithm; gray algorithms convert with to_gray first.
HashDigest compute_hash(const ColorImage& img, HashAlgo algo);

/// Popcount of XOR. Throws ContractError on algorithm mismatch.
int hamming(const HashDigest& a, const HashDigest& b);

struct CalibrationReport {
    HashAlgo algo = HashAlgo::DhashGray;
    double weight_similar = 0.0;
    double weight_different = 0.0;
    int threshold = 0;
    double accuracy = 0.0;
};

/// Picks the integer threshold T in [0, bit_width] maximising accuracy of the
/// rule "similar iff distance <= T"; ties go to the smallest T.
CalibrationReport calibrate_distances(HashAlgo algo, std::span<const int> similar, std::span<const int> different);

/// Same scan, but either list may be empty (its weight is reported as 0).
CalibrationReport calibrate_scan(HashAlgo algo, std::span<const int> similar, std::span<const int> different);

using ImagePair = std::pair<ColorImage, ColorImage>;

CalibrationReport calibrate(std::span<const ImagePair> similar, std::span<const ImagePair> different, HashAlgo algo);

}  // namespace somiap
