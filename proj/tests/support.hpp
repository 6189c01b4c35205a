#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "somiap/imagecore.hpp"
#include "somiap/numerics.hpp"

namespace testsupport {

using namespace somiap;

inline const std::filesystem::path kFixtureDir = SOMIAP_FIXTURE_DIR;
inline const std::filesystem::path kCascadePath = SOMIAP_CASCADE_PATH;

/// Deterministic across platforms: only raw mt19937 output is used, the
/// std distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : eng_(seed) {}

    std::uint32_t next() { return static_cast<std::uint32_t>(eng_()); }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next() % static_cast<std::uint32_t>(hi - lo + 1));
    }

    /// Uniform double in [0, 1).
    double uniform() { return next() / 4294967296.0; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

inline GrayImage random_gray(int w, int h, Rng& rng) {
    GrayImage g(w, h);
    for (auto& v : g.data()) v = static_cast<std::uint8_t>(rng.next() & 0xFF);
    return g;
}

inline ColorImage random_color(int w, int h, Rng& rng) {
    ColorImage c(w, h);
    for (auto& v : c.data()) v = static_cast<std::uint8_t>(rng.next() & 0xFF);
    return c;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (auto& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
    return m;
}

/// Gradient background with random rectangles and discs plus light grain.
/// Distinct seeds give unrelated layouts with plenty of corners.
inline ColorImage textured_scene(int w, int h, std::uint32_t seed) {
    Rng rng(seed);
    ColorImage img(w, h);
    double c0[3], c1[3];
    for (int k = 0; k < 3; ++k) {
        c0[k] = rng.uniform_int(0, 255);
        c1[k] = rng.uniform_int(0, 255);
    }
    const bool horizontal = rng.next() & 1U;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = horizontal ? double(x) / w : double(y) / h;
            for (int k = 0; k < 3; ++k) img.pixel(x, y)[k] = clamp8(c0[k] + (c1[k] - c0[k]) * t);
        }
    const int shapes = 45;
    for (int s = 0; s < shapes; ++s) {
        const int sw = rng.uniform_int(w / 24 + 4, w / 4);
        const int sh = rng.uniform_int(h / 24 + 4, h / 4);
        const int x0 = rng.uniform_int(-sw / 2, w - sw / 2);
        const int y0 = rng.uniform_int(-sh / 2, h - sh / 2);
        const std::uint8_t col[3] = {static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                     static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                     static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
        const bool disc = rng.uniform() < 0.35;
        for (int y = std::max(0, y0); y < std::min(h, y0 + sh); ++y)
            for (int x = std::max(0, x0); x < std::min(w, x0 + sw); ++x) {
                if (disc) {
                    const double dx = (x - x0 - sw / 2.0) / (sw / 2.0);
                    const double dy = (y - y0 - sh / 2.0) / (sh / 2.0);
                    if (dx * dx + dy * dy > 1.0) continue;
                }
                std::copy(col, col + 3, img.pixel(x, y));
            }
    }
    for (auto& v : img.data()) v = clamp8(v + rng.uniform_int(-6, 6));
    return img;
}

inline ColorImage add_noise(const ColorImage& img, double sigma, Rng& rng) {
    ColorImage out = img;
    for (auto& v : out.data()) v = clamp8(v + sigma * rng.gauss());
    return out;
}

inline GrayImage add_noise(const GrayImage& img, double sigma, Rng& rng) {
    GrayImage out = img;
    for (auto& v : out.data()) v = clamp8(v + sigma * rng.gauss());
    return out;
}

/// Lossless 90 degree clockwise rotation.
inline GrayImage rotate90(const GrayImage& img) {
    GrayImage out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(img.height() - 1 - y, x) = img.at(x, y);
    return out;
}

/// Copies `src` into `dst` with its top-left corner at (x, y).
inline void paste(ColorImage& dst, const ColorImage& src, int x, int y) {
    for (int j = 0; j < src.height(); ++j)
        for (int i = 0; i < src.width(); ++i) std::copy(src.pixel(i, j), src.pixel(i, j) + 3, dst.pixel(x + i, y + j));
}

/// A class-specific blocky texture (fixed by `cls`) with per-sample noise.
inline GrayImage class_texture(int size, std::uint32_t cls, Rng& sample_rng, double noise = 6.0) {
    Rng rng(0x9e3779b9u ^ (cls * 2654435761u));
    const int cell = 8;
    const int n = size / cell;
    std::vector<int> levels(static_cast<std::size_t>(n * n));
    for (auto& l : levels) l = rng.uniform_int(20, 235);
    GrayImage g(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int l = levels[static_cast<std::size_t>((y / cell) * n + x / cell)];
            g.at(x, y) = clamp8(l + 25.0 * std::sin((x + 2 * y) * (0.3 + 0.1 * (cls % 5))) + noise * sample_rng.gauss());
        }
    return g;
}

/// Temporary directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "somiap-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Rect read_annotation(const std::filesystem::path& p) {
    Rect r{};
    FILE* f = std::fopen(p.c_str(), "r");
    if (!f) throw std::runtime_error("cannot read " + p.string());
    const int n = std::fscanf(f, "%d %d %d %d", &r.x, &r.y, &r.w, &r.h);
    std::fclose(f);
    if (n != 4) throw std::runtime_error("bad annotation " + p.string());
    return r;
}

}  // namespace testsupport
