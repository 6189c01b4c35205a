#include "somiap/hashing.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <numeric>

#include "somiap/error.hpp"
#include "somiap/numerics.hpp"

namespace somiap {

std::string_view to_string(HashAlgo algo) {
    switch (algo) {
        case HashAlgo::DhashGray: return "dhash_gray";
        case HashAlgo::DhashColor: return "dhash_color";
        case HashAlgo::PhashGray: return "phash_gray";
        case HashAlgo::PhashColor: return "phash_color";
    }
    return "unknown";
}

std::optional<HashAlgo> parse_hash_algo(std::string_view name) {
    for (const HashAlgo a : kAllHashAlgos)
        if (to_string(a) == name) return a;
    return std::nullopt;
}

bool is_color(HashAlgo algo) { return algo == HashAlgo::DhashColor || algo == HashAlgo::PhashColor; }

int bit_width(HashAlgo algo) { return is_color(algo) ? 192 : 64; }

int default_threshold(HashAlgo algo) {
    switch (algo) {
        case HashAlgo::DhashGray: return 34;
        case HashAlgo::DhashColor: return 36;
        case HashAlgo::PhashGray: return 23;
        case HashAlgo::PhashColor: return 23;
    }
    return 0;
}

HashDigest::HashDigest(HashAlgo algo) : algo_(algo) {}

HashDigest::HashDigest(HashAlgo algo, std::span<const std::uint64_t> words) : algo_(algo) {
    if (words.size() != static_cast<std::size_t>(bit_width(algo) / 64))
        throw ContractError("HashDigest: word count does not match algorithm width");
    std::copy(words.begin(), words.end(), words_.begin());
}

void HashDigest::set_bit(int i, bool on) {
    if (i < 0 || i >= bits()) throw BoundsError("HashDigest::set_bit: index out of range");
    const std::uint64_t mask = std::uint64_t{1} << (63 - i % 64);
    auto& w = words_[static_cast<std::size_t>(i / 64)];
    w = on ? (w | mask) : (w & ~mask);
}

int HashDigest::popcount() const {
    int n = 0;
    for (const auto w : words()) n += std::popcount(w);
    return n;
}

std::string HashDigest::to_string() const {
    std::string out(somiap::to_string(algo_));
    out += ':';
    for (const auto w : words()) {
        char buf[17];
        auto [end, ec] = std::to_chars(buf, buf + 16, w, 16);
        const auto len = static_cast<std::size_t>(end - buf);
        out.append(16 - len, '0');
        out.append(buf, len);
    }
    return out;
}

HashDigest HashDigest::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ParseError("digest '" + std::string(text) + "': missing algorithm tag");
    const auto algo = parse_hash_algo(text.substr(0, colon));
    if (!algo) throw ParseError("digest '" + std::string(text) + "': unknown algorithm tag");
    const auto hex = text.substr(colon + 1);
    const std::size_t nwords = static_cast<std::size_t>(bit_width(*algo) / 64);
    if (hex.size() != nwords * 16) throw ParseError("digest '" + std::string(text) + "': wrong hex length");
    std::array<std::uint64_t, 3> words{};
    for (std::size_t i = 0; i < nwords; ++i) {
        const auto chunk = hex.substr(i * 16, 16);
        if (!std::all_of(chunk.begin(), chunk.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }))
            throw ParseError("digest '" + std::string(text) + "': expected lowercase hex");
        std::from_chars(chunk.data(), chunk.data() + chunk.size(), words[i], 16);
    }
    return HashDigest(*algo, std::span<const std::uint64_t>(words.data(), nwords));
}

std::uint64_t dhash_bits(const PlaneView& plane) {
    const GrayImage small = resize_bilinear(plane, 9, 8);
    std::uint64_t bits = 0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            bits <<= 1;
            if (small.at(x + 1, y) > small.at(x, y)) bits |= 1;
        }
    return bits;
}

std::uint64_t phash_bits(const PlaneView& plane) {
    constexpr int kSide = 32;
    const GrayImage small = resize_bilinear(plane, kSide, kSide);
    const auto& px = small.data();
    const double mean = std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());

    // Transforming the mean-free block leaves every AC coefficient unchanged and
    // makes them exactly zero for flat input; DC is restored analytically.
    Matrix block(kSide, kSide);
    for (std::size_t i = 0; i < px.size(); ++i) block.data()[i] = px[i] - mean;
    Matrix coeffs = dct2(block);
    coeffs(0, 0) = mean * kSide;

    double ac_sum = 0.0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (r != 0 || c != 0) ac_sum += coeffs(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    const double ac_mean = ac_sum / 63.0;

    std::uint64_t bits = 0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            bits <<= 1;
            if (coeffs(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) > ac_mean) bits |= 1;
        }
    return bits;
}

HashDigest dhash_gray(const GrayImage& img) {
    const std::uint64_t w = dhash_bits(img.view());
    return HashDigest(HashAlgo::DhashGray, std::span<const std::uint64_t>(&w, 1));
}

HashDigest phash_gray(const GrayImage& img) {
    const std::uint64_t w = phash_bits(img.view());
    return HashDigest(HashAlgo::PhashGray, std::span<const std::uint64_t>(&w, 1));
}

HashDigest color_hash(const ColorImage& img, HashBase base) {
    std::array<std::uint64_t, 3> words{};
    for (int c = 0; c < 3; ++c)
        words[static_cast<std::size_t>(c)] = base == HashBase::Dhash ? dhash_bits(img.channel(c)) : phash_bits(img.channel(c));
    return HashDigest(base == HashBase::Dhash ? HashAlgo::DhashColor : HashAlgo::PhashColor, words);
}

HashDigest compute_hash(const ColorImage& img, HashAlgo algo) {
    switch (algo) {
        case HashAlgo::DhashGray: return dhash_gray(to_gray(img));
        case HashAlgo::PhashGray: return phash_gray(to_gray(img));
        case HashAlgo::DhashColor: return color_hash(img, HashBase::Dhash);
        case HashAlgo::PhashColor: return color_hash(img, HashBase::Phash);
    }
    throw ContractError("compute_hash: unknown algorithm");
}

int hamming(const HashDigest& a, const HashDigest& b) {
    if (a.algo() != b.algo())
        throw ContractError("hamming: digests from different algorithms (" + std::string(to_string(a.algo())) + " vs " +
                            std::string(to_string(b.algo())) + ")");
    int d = 0;
    const auto wa = a.words();
    const auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += std::popcount(wa[i] ^ wb[i]);
    return d;
}

CalibrationReport calibrate_distances(HashAlgo algo, std::span<const int> similar, std::span<const int> different) {
    if (similar.empty() || different.empty()) throw ContractError("calibrate: both pair lists must be non-empty");
    return calibrate_scan(algo, similar, different);
}

CalibrationReport calibrate_scan(HashAlgo algo, std::span<const int> similar, std::span<const int> different) {
    if (similar.empty() && different.empty()) throw ContractError("calibrate: no pairs");
    const int width = bit_width(algo);

    // Counting sort: correct(T) = #similar <= T + #different > T.
    std::vector<long long> sim_hist(static_cast<std::size_t>(width) + 1, 0);
    std::vector<long long> diff_hist(static_cast<std::size_t>(width) + 1, 0);
    for (const int d : similar) {
        if (d < 0 || d > width) throw ContractError("calibrate: distance out of range");
        ++sim_hist[static_cast<std::size_t>(d)];
    }
    for (const int d : different) {
        if (d < 0 || d > width) throw ContractError("calibrate: distance out of range");
        ++diff_hist[static_cast<std::size_t>(d)];
    }

    const auto total = static_cast<long long>(similar.size() + different.size());
    long long sim_le = 0;
    long long diff_le = 0;
    long long best_correct = -1;
    int best_t = 0;
    for (int t = 0; t <= width; ++t) {
        sim_le += sim_hist[static_cast<std::size_t>(t)];
        diff_le += diff_hist[static_cast<std::size_t>(t)];
        const long long correct = sim_le + (static_cast<long long>(different.size()) - diff_le);
        if (correct > best_correct) {
            best_correct = correct;
            best_t = t;
        }
    }

    CalibrationReport r;
    r.algo = algo;
    const auto mean = [](std::span<const int> v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.weight_similar = mean(similar);
    r.weight_different = mean(different);
    r.threshold = best_t;
    r.accuracy = static_cast<double>(best_correct) / static_cast<double>(total);
    return r;
}

CalibrationReport calibrate(std::span<const ImagePair> similar, std::span<const ImagePair> different, HashAlgo algo) {
    const auto distances = [algo](std::span<const ImagePair> pairs) {
        std::vector<int> out;
        out.reserve(pairs.size());
        for (const auto& [a, b] : pairs) out.push_back(hamming(compute_hash(a, algo), compute_hash(b, algo)));
        return out;
    };
    const auto sim = distances(similar);
    const auto diff = distances(different);
    return calibrate_distances(algo, sim, diff);
}

}  // namespace somiap
