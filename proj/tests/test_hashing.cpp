#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "somiap/error.hpp"
#include "somiap/hashing.hpp"
#include "support.hpp"

using namespace somiap;
using namespace testsupport;

namespace {

// pHash from the definition: naive DCT of the 32x32 downsample.
std::uint64_t phash_oracle(const GrayImage& g) {
    const GrayImage s = resize_bilinear(g, 32, 32);
    double coeff[8][8];
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    acc += s.at(x, y) * std::cos(M_PI * (2 * y + 1) * u / 64.0) * std::cos(M_PI * (2 * x + 1) * v / 64.0);
            const double au = u == 0 ? std::sqrt(1.0 / 32) : std::sqrt(2.0 / 32);
            const double av = v == 0 ? std::sqrt(1.0 / 32) : std::sqrt(2.0 / 32);
            coeff[u][v] = au * av * acc;
        }
    double sum = 0.0;
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v)
            if (u || v) sum += coeff[u][v];
    const double mean = sum / 63.0;
    std::uint64_t bits = 0;
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) bits = (bits << 1) | (coeff[u][v] > mean ? 1U : 0U);
    return bits;
}

HashDigest gray_digest(HashAlgo algo, std::uint64_t bits) {
    const std::uint64_t w[1] = {bits};
    return HashDigest(algo, w);
}

}  // namespace

TEST_CASE("dhash examples") {
    CHECK(dhash_gray(GrayImage(40, 30, 128)).popcount() == 0);

    GrayImage inc(9, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 9; ++x) inc.at(x, y) = static_cast<std::uint8_t>(10 * x + y);
    CHECK(dhash_gray(inc).popcount() == 64);

    GrayImage alt(9, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 9; ++x) alt.at(x, y) = x % 2 ? 255 : 0;
    const HashDigest d = dhash_gray(alt);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) CHECK(d.bit(y * 8 + x) == (x % 2 == 0));
    CHECK(d.to_string() == "dhash_gray:aaaaaaaaaaaaaaaa");
}

TEST_CASE("phash of a constant image has only the DC bit") {
    const HashDigest d = phash_gray(GrayImage(50, 50, 90));
    CHECK(d.popcount() == 1);
    CHECK(d.bit(0));
}

TEST_CASE("phash agrees with the naive definition") {
    Rng rng(21);
    for (int i = 0; i < 5; ++i) {
        const GrayImage g = to_gray(textured_scene(rng.uniform_int(32, 120), rng.uniform_int(32, 120), rng.next()));
        CHECK(phash_gray(g) == gray_digest(HashAlgo::PhashGray, phash_oracle(g)));
    }
}

TEST_CASE("phash noise monotonicity") {
    Rng rng(22);
    std::vector<int> low, high;
    for (int i = 0; i < 20; ++i) {
        const GrayImage g = to_gray(textured_scene(64, 64, 1000 + i));
        const HashDigest h = phash_gray(g);
        low.push_back(hamming(h, phash_gray(add_noise(g, 5.0, rng))));
        high.push_back(hamming(h, phash_gray(add_noise(g, 30.0, rng))));
    }
    std::nth_element(low.begin(), low.begin() + 10, low.end());
    std::nth_element(high.begin(), high.begin() + 10, high.end());
    CHECK(low[10] <= high[10]);
}

TEST_CASE("monotone remap leaves dhash unchanged") {
    Rng rng(23);
    for (int i = 0; i < 10; ++i) {
        GrayImage g = random_gray(30, 20, rng);
        for (auto& v : g.data()) v = static_cast<std::uint8_t>(v % 246);
        GrayImage shifted = g;
        for (auto& v : shifted.data()) v = static_cast<std::uint8_t>(std::min(255, v + 10));
        CHECK(dhash_gray(g) == dhash_gray(shifted));
    }
}

TEST_CASE("color hash segments") {
    Rng rng(24);
    const GrayImage g = random_gray(33, 21, rng);
    const ColorImage gc = gray_to_color(g);
    for (const HashBase base : {HashBase::Dhash, HashBase::Phash}) {
        const HashDigest d = color_hash(gc, base);
        CHECK(d.words()[0] == d.words()[1]);
        CHECK(d.words()[1] == d.words()[2]);
    }
    ColorImage flat(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            flat.pixel(x, y)[0] = 200;
            flat.pixel(x, y)[1] = 30;
            flat.pixel(x, y)[2] = 90;
        }
    CHECK(color_hash(flat, HashBase::Dhash).popcount() == 0);

    const ColorImage img = random_color(40, 25, rng);
    const HashDigest d = color_hash(img, HashBase::Phash);
    CHECK(d.algo() == HashAlgo::PhashColor);
    for (int c = 0; c < 3; ++c) {
        GrayImage plane(40, 25);
        for (int y = 0; y < 25; ++y)
            for (int x = 0; x < 40; ++x) plane.at(x, y) = img.pixel(x, y)[c];
        CHECK(d.words()[static_cast<std::size_t>(c)] == phash_gray(plane).words()[0]);
    }
}

TEST_CASE("hamming") {
    const HashDigest zeros(HashAlgo::DhashGray);
    HashDigest ones(HashAlgo::DhashGray);
    for (int i = 0; i < 64; ++i) ones.set_bit(i, true);
    CHECK(hamming(zeros, zeros) == 0);
    CHECK(hamming(zeros, ones) == 64);

    HashDigest three(HashAlgo::PhashColor);
    for (const int i : {0, 100, 191}) three.set_bit(i, true);
    CHECK(hamming(HashDigest(HashAlgo::PhashColor), three) == 3);
    CHECK_THROWS_AS(hamming(zeros, three), ContractError);
}

TEST_CASE("digest text form") {
    Rng rng(25);
    const ColorImage img = random_color(20, 20, rng);
    for (const HashAlgo a : kAllHashAlgos) {
        const HashDigest d = compute_hash(img, a);
        const std::string s = d.to_string();
        CHECK(s.size() == to_string(a).size() + 1 + (is_color(a) ? 48 : 16));
        CHECK(HashDigest::parse(s) == d);
    }
    CHECK_THROWS_AS(HashDigest::parse("dhash_gray:123"), ParseError);
    CHECK_THROWS_AS(HashDigest::parse("ahash:0000000000000000"), ParseError);
    CHECK_THROWS_AS(HashDigest::parse("dhash_gray:ABCDEF0000000000"), ParseError);
    CHECK_THROWS_AS(HashDigest::parse("0000000000000000"), ParseError);
}

TEST_CASE("default thresholds and widths") {
    CHECK(default_threshold(HashAlgo::DhashGray) == 34);
    CHECK(default_threshold(HashAlgo::DhashColor) == 36);
    CHECK(default_threshold(HashAlgo::PhashGray) == 23);
    CHECK(default_threshold(HashAlgo::PhashColor) == 23);
    CHECK(bit_width(HashAlgo::DhashGray) == 64);
    CHECK(bit_width(HashAlgo::PhashColor) == 192);
}

TEST_CASE("calibrate examples") {
    const std::vector<int> sim{2, 3, 4}, diff{10, 11, 12};
    const auto r = calibrate_distances(HashAlgo::DhashGray, sim, diff);
    CHECK(r.threshold == 4);
    CHECK(r.accuracy == 1.0);
    CHECK(r.weight_similar == 3.0);
    CHECK(r.weight_different == 11.0);

    const std::vector<int> five{5};
    const auto t = calibrate_distances(HashAlgo::DhashGray, five, five);
    CHECK(t.accuracy == 0.5);
    CHECK(t.threshold == 0);

    const std::vector<int> none;
    CHECK_THROWS_AS(calibrate_distances(HashAlgo::DhashGray, none, diff), ContractError);
    CHECK_THROWS_AS(calibrate_distances(HashAlgo::DhashGray, sim, none), ContractError);

    const std::vector<int> zero{0};
    const auto s = calibrate_scan(HashAlgo::PhashGray, zero, none);
    CHECK(s.threshold == 0);
    CHECK(s.accuracy == 1.0);
}

TEST_CASE("calibrate equals an exhaustive scan") {
    Rng rng(26);
    for (int trial = 0; trial < 20; ++trial) {
        const HashAlgo algo = kAllHashAlgos[static_cast<std::size_t>(trial % 4)];
        const int width = bit_width(algo);
        std::vector<int> sim, diff;
        for (int i = 0; i < 20; ++i) sim.push_back(rng.uniform_int(0, width / 2));
        for (int i = 0; i < 20; ++i) diff.push_back(rng.uniform_int(width / 4, width));
        int best_t = -1;
        double best_acc = -1.0;
        for (int t = 0; t <= width; ++t) {
            int correct = 0;
            for (const int d : sim) correct += d <= t;
            for (const int d : diff) correct += d > t;
            const double acc = correct / 40.0;
            if (acc > best_acc) {
                best_acc = acc;
                best_t = t;
            }
        }
        const auto r = calibrate_distances(algo, sim, diff);
        CHECK(r.threshold == best_t);
        CHECK(r.accuracy == best_acc);
        const double majority = std::max(sim.size(), diff.size()) / 40.0;
        CHECK(r.accuracy >= majority);
    }
}

TEST_CASE("calibrate over image pairs") {
    std::vector<ImagePair> sim, diff;
    Rng rng(27);
    for (int i = 0; i < 6; ++i) {
        const ColorImage a = textured_scene(64, 48, 500 + i);
        sim.emplace_back(a, add_noise(a, 2.0, rng));
        diff.emplace_back(a, textured_scene(64, 48, 900 + i));
    }
    for (const HashAlgo algo : kAllHashAlgos) {
        const auto r = calibrate(sim, diff, algo);
        CHECK(r.algo == algo);
        CHECK(r.weight_similar < r.weight_different);
        CHECK(r.accuracy >= 0.9);
    }
}
