#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace somiap {

struct Rect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    bool operator==(const Rect&) const = default;
    long long area() const { return static_cast<long long>(w) * h; }
};

/// Intersection-over-union of two rectangles, 0 when disjoint.
double iou(const Rect& a, const Rect& b);

/// Read-only view of one 8-bit plane. `pixel_stride` lets a single channel of
/// an interleaved buffer be addressed without copying.
struct PlaneView {
    const std::uint8_t* data = nullptr;
    int width = 0;
    int height = 0;
    std::ptrdiff_t pixel_stride = 1;
    std::ptrdiff_t row_stride = 0;

    std::uint8_t at(int x, int y) const { return data[y * row_stride + x * pixel_stride]; }
};

class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0);
    GrayImage(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    PlaneView view() const { return {data_.data(), width_, height_, 1, width_}; }

    bool operator==(const GrayImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Interleaved 8-bit RGB, row-major.
class ColorImage {
public:
    ColorImage() = default;
    ColorImage(int width, int height);
    ColorImage(int width, int height, std::vector<std::uint8_t> rgb);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    const std::uint8_t* pixel(int x, int y) const { return &data_[(static_cast<std::size_t>(y) * width_ + x) * 3]; }
    std::uint8_t* pixel(int x, int y) { return &data_[(static_cast<std::size_t>(y) * width_ + x) * 3]; }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    /// Channel 0 = R, 1 = G, 2 = B.
    PlaneView channel(int c) const;

    bool operator==(const ColorImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Summed-area tables with a zero first row and column: entry (x, y) holds the
/// sum over [0,x) x [0,y).
class IntegralImage {
public:
    IntegralImage() = default;
    explicit IntegralImage(const GrayImage& img);

    /// Source image dimensions (tables are one larger in each direction).
    int width() const { return width_; }
    int height() const { return height_; }

    std::int64_t sum_at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }
    std::int64_t sq_sum_at(int x, int y) const { return squared_[static_cast<std::size_t>(y) * (width_ + 1) + x]; }

    const std::vector<std::int64_t>& sums() const { return sums_; }
    const std::vector<std::int64_t>& squared_sums() const { return squared_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::int64_t> sums_;
    std::vector<std::int64_t> squared_;
};

/// Decodes PNG, baseline JPEG, binary PPM (P6) or PGM (P5). Gray inputs are
/// promoted to R=G=B. Throws DecodeError naming the failing stage.
ColorImage decode_image(std::span<const std::uint8_t> bytes);

/// Reads and decodes a file. Throws IoError when the file cannot be read.
ColorImage load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ColorImage& img);
std::vector<std::uint8_t> encode_ppm(const ColorImage& img);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void save_png(const ColorImage& img, const std::filesystem::path& path);

/// BT.601 luma, round-half-up.
GrayImage to_gray(const ColorImage& img);
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

GrayImage to_gray_plane(const PlaneView& plane);
ColorImage gray_to_color(const GrayImage& img);

/// Bilinear resize; output pixel i samples source coordinate
/// (i + 0.5) * src / dst - 0.5, clamped to the edge.
GrayImage resize_bilinear(const PlaneView& src, int out_w, int out_h);
GrayImage resize_bilinear(const GrayImage& src, int out_w, int out_h);

IntegralImage integral(const GrayImage& img);

/// Four-corner rectangle sum. Throws BoundsError if `r` leaves the image.
std::int64_t rect_sum(const IntegralImage& ii, const Rect& r);
std::int64_t rect_sq_sum(const IntegralImage& ii, const Rect& r);

/// Throws BoundsError unless `r` is non-empty and inside a width x height image.
void check_rect_inside(const Rect& r, int width, int height);

GrayImage crop(const GrayImage& img, const Rect& r);

/// Standard cumulative-histogram equalization:
/// round((cdf(v) - cdf_min) / (N - cdf_min) * 255); a single-valued image is
/// returned unchanged.
GrayImage equalize_hist(const GrayImage& img);

}  // namespace somiap
