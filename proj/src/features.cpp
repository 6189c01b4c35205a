#include "somiap/features.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numbers>

#include "somiap/error.hpp"

namespace somiap {

namespace {

struct PatternPair {
    int x1, y1, x2, y2;
};

constexpr PatternPair kPattern[256] = {
#include "orb_pattern.inc"
};

constexpr int kCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

constexpr int kArc = 9;
constexpr int kPatchRadius = 15;
constexpr int kAngleBins = 30;
// Keeps the rotated sampling disk, its 5x5 smoothing box and the 7x7 Harris
// window inside the level image.
constexpr int kEdge = kPatchRadius + 4;

bool is_corner(const GrayImage& img, int x, int y, int t) {
    const int p = img.at(x, y);
    int brighter = 0;
    int darker = 0;
    // Walk the circle twice so arcs that wrap around are counted.
    for (int i = 0; i < 16 + kArc - 1; ++i) {
        const auto& o = kCircle[i % 16];
        const int v = img.at(x + o[0], y + o[1]);
        if (v > p + t) {
            ++brighter;
            darker = 0;
        } else if (v < p - t) {
            ++darker;
            brighter = 0;
        } else {
            brighter = darker = 0;
        }
        if (brighter >= kArc || darker >= kArc) return true;
    }
    return false;
}

}  // namespace

std::string Descriptor::to_hex() const {
    std::string out;
    out.reserve(64);
    for (const auto w : words) {
        char buf[17];
        auto [end, ec] = std::to_chars(buf, buf + 16, w, 16);
        const auto len = static_cast<std::size_t>(end - buf);
        out.append(16 - len, '0');
        out.append(buf, len);
    }
    return out;
}

Descriptor Descriptor::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw ParseError("descriptor: expected 64 hex digits");
    Descriptor d;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto chunk = hex.substr(i * 16, 16);
        auto [ptr, ec] = std::from_chars(chunk.data(), chunk.data() + 16, d.words[i], 16);
        if (ec != std::errc() || ptr != chunk.data() + 16) throw ParseError("descriptor: invalid hex");
    }
    return d;
}

int hamming(const Descriptor& a, const Descriptor& b) {
    int d = 0;
    for (std::size_t i = 0; i < 4; ++i) d += std::popcount(a.words[i] ^ b.words[i]);
    return d;
}

int fast_score(const GrayImage& img, int x, int y) {
    if (!is_corner(img, x, y, 1)) return 0;
    int lo = 1;  // corner at lo
    int hi = 255;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (is_corner(img, x, y, mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

namespace {

/// FAST corners with suppression inside [border, dim - border).
std::vector<std::pair<int, int>> fast_corners(const GrayImage& img, int threshold, int border) {
    const int w = img.width();
    const int h = img.height();
    std::vector<std::pair<int, int>> out;
    if (w < 2 * border + 1 || h < 2 * border + 1) return out;

    std::vector<int> score(static_cast<std::size_t>(w) * h, 0);
    for (int y = border; y < h - border; ++y)
        for (int x = border; x < w - border; ++x)
            if (is_corner(img, x, y, threshold)) score[static_cast<std::size_t>(y) * w + x] = fast_score(img, x, y);

    for (int y = border; y < h - border; ++y) {
        for (int x = border; x < w - border; ++x) {
            const int s = score[static_cast<std::size_t>(y) * w + x];
            if (s == 0) continue;
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1 && keep; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int n = score[static_cast<std::size_t>(y + dy) * w + (x + dx)];
                    // Equal scores: the earlier pixel in raster order survives.
                    const bool earlier = dy < 0 || (dy == 0 && dx < 0);
                    if (n > s || (n == s && earlier)) keep = false;
                }
            if (keep) out.emplace_back(x, y);
        }
    }
    return out;
}

double harris_response(const GrayImage& img, int cx, int cy, double k) {
    constexpr int kHalf = 3;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    for (int y = cy - kHalf; y <= cy + kHalf; ++y) {
        for (int x = cx - kHalf; x <= cx + kHalf; ++x) {
            const auto p = [&](int dx, int dy) { return static_cast<double>(img.at(x + dx, y + dy)); };
            const double ix = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            const double iy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            a += ix * ix;
            b += iy * iy;
            c += ix * iy;
        }
    }
    const double scale = 1.0 / (4.0 * 7.0 * 255.0);
    const double s4 = scale * scale * scale * scale;
    return (a * b - c * c - k * (a + b) * (a + b)) * s4;
}

double intensity_centroid_angle(const GrayImage& img, int cx, int cy) {
    double m10 = 0.0;
    double m01 = 0.0;
    for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy)
        for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
            if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
            const double v = img.at(cx + dx, cy + dy);
            m10 += dx * v;
            m01 += dy * v;
        }
    double a = std::atan2(m01, m10);
    if (a < 0) a += 2 * std::numbers::pi;
    if (a >= 2 * std::numbers::pi) a = 0.0;
    return a;
}

struct RotatedPattern {
    std::array<PatternPair, 256> pairs;
};

const std::array<RotatedPattern, kAngleBins>& rotated_patterns() {
    static const auto table = [] {
        std::array<RotatedPattern, kAngleBins> t{};
        for (int bin = 0; bin < kAngleBins; ++bin) {
            const double theta = bin * 2 * std::numbers::pi / kAngleBins;
            const double cs = std::cos(theta);
            const double sn = std::sin(theta);
            for (std::size_t i = 0; i < 256; ++i) {
                const auto& p = kPattern[i];
                const auto rx = [&](int x, int y) { return static_cast<int>(std::lround(cs * x - sn * y)); };
                const auto ry = [&](int x, int y) { return static_cast<int>(std::lround(sn * x + cs * y)); };
                t[static_cast<std::size_t>(bin)].pairs[i] = {rx(p.x1, p.y1), ry(p.x1, p.y1), rx(p.x2, p.y2), ry(p.x2, p.y2)};
            }
        }
        return t;
    }();
    return table;
}

int angle_bin(double angle) {
    const long b = std::lround(angle / (2 * std::numbers::pi / kAngleBins));
    return static_cast<int>(((b % kAngleBins) + kAngleBins) % kAngleBins);
}

Descriptor describe(const IntegralImage& ii, int cx, int cy, double angle) {
    const auto& pattern = rotated_patterns()[static_cast<std::size_t>(angle_bin(angle))];
    const auto box = [&](int x, int y) {
        return ii.sum_at(x + 3, y + 3) - ii.sum_at(x - 2, y + 3) - ii.sum_at(x + 3, y - 2) + ii.sum_at(x - 2, y - 2);
    };
    Descriptor d;
    for (std::size_t i = 0; i < 256; ++i) {
        const auto& p = pattern.pairs[i];
        if (box(cx + p.x1, cy + p.y1) < box(cx + p.x2, cy + p.y2)) d.words[i / 64] |= std::uint64_t{1} << (63 - i % 64);
    }
    return d;
}

struct Candidate {
    Keypoint kp;
    int lx;
    int ly;
};

}  // namespace

std::vector<Keypoint> detect_fast(const GrayImage& img, int threshold) {
    if (threshold < 1 || threshold > 255) throw ContractError("detect_fast: threshold must be in [1,255]");
    std::vector<Keypoint> out;
    for (const auto& [x, y] : fast_corners(img, threshold, 3))
        out.push_back({static_cast<double>(x), static_cast<double>(y), 0, 0.0,
                       static_cast<double>(fast_score(img, x, y))});
    return out;
}

DescriptorSet orb_detect_describe(const GrayImage& img, const OrbParams& params) {
    if (std::min(img.width(), img.height()) < 32) throw ContractError("orb_detect_describe: image side must be >= 32");
    if (params.levels < 1 || params.scale_factor <= 1.0 || params.max_features < 0)
        throw ContractError("orb_detect_describe: invalid parameters");

    std::vector<GrayImage> pyramid;
    for (int level = 0; level < params.levels; ++level) {
        const double scale = std::pow(params.scale_factor, level);
        const int lw = static_cast<int>(std::lround(img.width() / scale));
        const int lh = static_cast<int>(std::lround(img.height() / scale));
        if (std::min(lw, lh) < 2 * kEdge + 1) break;
        pyramid.push_back(level == 0 ? img : resize_bilinear(img, lw, lh));
    }

    std::vector<Candidate> candidates;
    for (std::size_t level = 0; level < pyramid.size(); ++level) {
        const GrayImage& li = pyramid[level];
        const double rx = static_cast<double>(img.width()) / li.width();
        const double ry = static_cast<double>(img.height()) / li.height();
        for (const auto& [x, y] : fast_corners(li, params.fast_threshold, kEdge)) {
            Keypoint kp;
            kp.x = std::clamp((x + 0.5) * rx - 0.5, 0.0, img.width() - 1.0);
            kp.y = std::clamp((y + 0.5) * ry - 0.5, 0.0, img.height() - 1.0);
            kp.level = static_cast<int>(level);
            kp.response = harris_response(li, x, y, params.harris_k);
            candidates.push_back({kp, x, y});
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.kp.response != b.kp.response) return a.kp.response > b.kp.response;
        if (a.kp.level != b.kp.level) return a.kp.level < b.kp.level;
        if (a.ly != b.ly) return a.ly < b.ly;
        return a.lx < b.lx;
    });
    if (candidates.size() > static_cast<std::size_t>(params.max_features))
        candidates.resize(static_cast<std::size_t>(params.max_features));

    std::vector<IntegralImage> integrals;
    integrals.reserve(pyramid.size());
    for (const auto& li : pyramid) integrals.emplace_back(li);

    DescriptorSet out;
    out.keypoints.reserve(candidates.size());
    out.descriptors.reserve(candidates.size());
    for (auto& c : candidates) {
        const auto level = static_cast<std::size_t>(c.kp.level);
        c.kp.angle = intensity_centroid_angle(pyramid[level], c.lx, c.ly);
        out.descriptors.push_back(describe(integrals[level], c.lx, c.ly, c.kp.angle));
        out.keypoints.push_back(c.kp);
    }
    return out;
}

MatchReport match_descriptors(const DescriptorSet& query, const DescriptorSet& train, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("match_descriptors: ratio must be in (0,1)");
    MatchReport report;
    if (train.empty()) return report;
    report.pairs.reserve(query.size());
    for (std::size_t q = 0; q < query.size(); ++q) {
        int best = 257;
        int second = 257;
        int best_idx = -1;
        for (std::size_t t = 0; t < train.size(); ++t) {
            const int d = hamming(query.descriptors[q], train.descriptors[t]);
            if (d < best) {
                second = best;
                best = d;
                best_idx = static_cast<int>(t);
            } else if (d < second) {
                second = d;
            }
        }
        if (second > 256) second = 256;
        const bool good = best < ratio * second;
        report.pairs.push_back({static_cast<int>(q), best_idx, best, good});
        if (good) ++report.good_count;
    }
    return report;
}

}  // namespace somiap
