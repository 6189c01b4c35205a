#include "somiap/imagecore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <jpeglib.h>
#include <png.h>

#include "somiap/error.hpp"

namespace somiap {

double iou(const Rect& a, const Rect& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.x + a.w, b.x + b.w);
    const int y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return 0.0;
    const double inter = static_cast<double>(x1 - x0) * (y1 - y0);
    return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ContractError("GrayImage: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) throw ContractError("GrayImage: dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width) * height)
        throw ContractError("GrayImage: data length must equal width*height");
}

ColorImage::ColorImage(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ContractError("ColorImage: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

ColorImage::ColorImage(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb)) {
    if (width < 1 || height < 1) throw ContractError("ColorImage: dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(width) * height * 3)
        throw ContractError("ColorImage: data length must equal width*height*3");
}

PlaneView ColorImage::channel(int c) const {
    if (c < 0 || c > 2) throw ContractError("ColorImage::channel: index must be 0, 1 or 2");
    return {data_.data() + c, width_, height_, 3, static_cast<std::ptrdiff_t>(width_) * 3};
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

bool starts_with(std::span<const std::uint8_t> b, std::initializer_list<std::uint8_t> magic) {
    if (b.size() < magic.size()) return false;
    return std::equal(magic.begin(), magic.end(), b.begin());
}

class PnmReader {
public:
    explicit PnmReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    ColorImage read() {
        const bool color = bytes_[1] == '6';
        const char* fmt = color ? "ppm" : "pgm";
        pos_ = 2;
        const int width = header_int(fmt, "width");
        const int height = header_int(fmt, "height");
        const int maxval = header_int(fmt, "maxval");
        if (width < 1 || height < 1)
            throw DecodeError(std::string(fmt) + ": header: dimensions must be positive");
        if (maxval < 1 || maxval > 255)
            throw DecodeError(std::string(fmt) + ": header: only 8-bit maxval (1..255) is supported");
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw DecodeError(std::string(fmt) + ": header: missing separator before raster");
        ++pos_;

        const std::size_t channels = color ? 3 : 1;
        const std::size_t need = static_cast<std::size_t>(width) * height * channels;
        if (bytes_.size() - pos_ < need)
            throw DecodeError(std::string(fmt) + ": raster: truncated pixel data");

        ColorImage img(width, height);
        auto& out = img.data();
        const auto scale = [maxval](std::uint8_t v) -> std::uint8_t {
            if (maxval == 255) return v;
            const int s = (static_cast<int>(v) * 255 + maxval / 2) / maxval;
            return static_cast<std::uint8_t>(std::min(s, 255));
        };
        const std::uint8_t* src = bytes_.data() + pos_;
        const std::size_t pixels = static_cast<std::size_t>(width) * height;
        for (std::size_t i = 0; i < pixels; ++i) {
            if (color) {
                out[i * 3 + 0] = scale(src[i * 3 + 0]);
                out[i * 3 + 1] = scale(src[i * 3 + 1]);
                out[i * 3 + 2] = scale(src[i * 3 + 2]);
            } else {
                const std::uint8_t v = scale(src[i]);
                out[i * 3 + 0] = out[i * 3 + 1] = out[i * 3 + 2] = v;
            }
        }
        return img;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int header_int(const char* fmt, const char* field) {
        skip_space_and_comments();
        long long v = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000) throw DecodeError(std::string(fmt) + ": header: " + field + " out of range");
            ++pos_;
            ++digits;
        }
        if (digits == 0) throw DecodeError(std::string(fmt) + ": header: malformed " + field);
        return static_cast<int>(v);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

ColorImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError("png: header: " + msg);
    }
    image.format = PNG_FORMAT_RGB;
    if (image.width < 1 || image.height < 1 || image.width > 65535 || image.height > 65535) {
        png_image_free(&image);
        throw DecodeError("png: header: unsupported dimensions");
    }
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError("png: pixel data: " + msg);
    }
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    png_image_free(&image);
    return ColorImage(w, h, std::move(rgb));
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Only trivially destructible locals live across setjmp; the caller owns
// the output buffer.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& out, int& w, int& h,
                     const char*& stage, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    jerr.message[0] = '\0';
    stage = "header";
    if (setjmp(jerr.jump)) {
        std::strncpy(message, jerr.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    stage = "decompress";
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    out.resize(static_cast<std::size_t>(w) * h * 3);
    stage = "scanlines";
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

ColorImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> out;
    int w = 0;
    int h = 0;
    const char* stage = "";
    char message[JMSG_LENGTH_MAX] = {0};
    if (!decode_jpeg_raw(bytes, out, w, h, stage, message))
        throw DecodeError(std::string("jpeg: ") + stage + ": " + message);
    if (w < 1 || h < 1) throw DecodeError("jpeg: header: empty image");
    return ColorImage(w, h, std::move(out));
}

}  // namespace

ColorImage decode_image(std::span<const std::uint8_t> bytes) {
    if (starts_with(bytes, {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'})) return decode_png(bytes);
    if (starts_with(bytes, {0xff, 0xd8})) return decode_jpeg(bytes);
    if (starts_with(bytes, {'P', '5'}) || starts_with(bytes, {'P', '6'})) return PnmReader(bytes).read();
    throw DecodeError("signature: unrecognized image format (expected PNG, JPEG, P5 or P6)");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return bytes;
}

ColorImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const ColorImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data().data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_ppm(const ColorImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

void save_png(const ColorImage& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Pixel operations

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    // Fixed-point weights scaled by 10^6 keep round-half-up exact.
    const std::int64_t y = 299'000LL * r + 587'000LL * g + 114'000LL * b;
    const std::int64_t v = (y + 500'000) / 1'000'000;
    return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, 0, 255));
}

GrayImage to_gray(const ColorImage& img) {
    GrayImage out(img.width(), img.height());
    const auto& src = img.data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = luma(src[i * 3], src[i * 3 + 1], src[i * 3 + 2]);
    return out;
}

GrayImage to_gray_plane(const PlaneView& plane) {
    GrayImage out(plane.width, plane.height);
    for (int y = 0; y < plane.height; ++y)
        for (int x = 0; x < plane.width; ++x) out.at(x, y) = plane.at(x, y);
    return out;
}

ColorImage gray_to_color(const GrayImage& img) {
    ColorImage out(img.width(), img.height());
    auto& dst = out.data();
    for (std::size_t i = 0; i < img.data().size(); ++i) dst[i * 3] = dst[i * 3 + 1] = dst[i * 3 + 2] = img.data()[i];
    return out;
}

namespace {

struct AxisTap {
    int i0;
    int i1;
    double frac;
};

std::vector<AxisTap> axis_taps(int src, int dst) {
    std::vector<AxisTap> taps(static_cast<std::size_t>(dst));
    for (int i = 0; i < dst; ++i) {
        // (i + 0.5) * src / dst - 0.5 with a single rounding step
        double s = static_cast<double>((2 * i + 1) * static_cast<long>(src) - dst) / (2.0 * dst);
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, src - 1);
        taps[static_cast<std::size_t>(i)] = {i0, i1, s - i0};
    }
    return taps;
}

}  // namespace

GrayImage resize_bilinear(const PlaneView& src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw ContractError("resize_bilinear: output dimensions must be >= 1");
    const auto xs = axis_taps(src.width, out_w);
    const auto ys = axis_taps(src.height, out_h);
    GrayImage out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const AxisTap ty = ys[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            const AxisTap tx = xs[static_cast<std::size_t>(x)];
            // Interpolate offsets from the top-left tap so that adding a
            // constant to the input shifts the output by exactly that constant.
            const int base = src.at(tx.i0, ty.i0);
            const double top = (src.at(tx.i1, ty.i0) - base) * tx.frac;
            const double bot = (src.at(tx.i0, ty.i1) - base) + (src.at(tx.i1, ty.i1) - src.at(tx.i0, ty.i1)) * tx.frac;
            const double v = base + std::floor(top + (bot - top) * ty.frac + 0.5);
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return out;
}

GrayImage resize_bilinear(const GrayImage& src, int out_w, int out_h) {
    return resize_bilinear(src.view(), out_w, out_h);
}

IntegralImage::IntegralImage(const GrayImage& img) : width_(img.width()), height_(img.height()) {
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    sums_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
    squared_.assign(sums_.size(), 0);
    for (int y = 0; y < height_; ++y) {
        std::int64_t row = 0;
        std::int64_t row_sq = 0;
        for (int x = 0; x < width_; ++x) {
            const std::int64_t v = img.at(x, y);
            row += v;
            row_sq += v * v;
            const std::size_t idx = (y + 1) * stride + (x + 1);
            sums_[idx] = sums_[idx - stride] + row;
            squared_[idx] = squared_[idx - stride] + row_sq;
        }
    }
}

IntegralImage integral(const GrayImage& img) { return IntegralImage(img); }

void check_rect_inside(const Rect& r, int width, int height) {
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x > width - r.w || r.y > height - r.h) {
        std::ostringstream os;
        os << "rect (" << r.x << "," << r.y << "," << r.w << "," << r.h << ") outside " << width << "x" << height
           << " image";
        throw BoundsError(os.str());
    }
}

std::int64_t rect_sum(const IntegralImage& ii, const Rect& r) {
    check_rect_inside(r, ii.width(), ii.height());
    return ii.sum_at(r.x + r.w, r.y + r.h) - ii.sum_at(r.x + r.w, r.y) - ii.sum_at(r.x, r.y + r.h) +
           ii.sum_at(r.x, r.y);
}

std::int64_t rect_sq_sum(const IntegralImage& ii, const Rect& r) {
    check_rect_inside(r, ii.width(), ii.height());
    return ii.sq_sum_at(r.x + r.w, r.y + r.h) - ii.sq_sum_at(r.x + r.w, r.y) - ii.sq_sum_at(r.x, r.y + r.h) +
           ii.sq_sum_at(r.x, r.y);
}

GrayImage crop(const GrayImage& img, const Rect& r) {
    check_rect_inside(r, img.width(), img.height());
    GrayImage out(r.w, r.h);
    for (int y = 0; y < r.h; ++y)
        std::copy_n(&img.data()[static_cast<std::size_t>(r.y + y) * img.width() + r.x], r.w,
                    &out.data()[static_cast<std::size_t>(y) * r.w]);
    return out;
}

GrayImage equalize_hist(const GrayImage& img) {
    std::array<std::int64_t, 256> hist{};
    for (const auto v : img.data()) ++hist[v];
    const auto total = static_cast<std::int64_t>(img.data().size());
    std::int64_t cdf_min = 0;
    for (const auto c : hist) {
        if (c > 0) {
            cdf_min = c;
            break;
        }
    }
    if (total == cdf_min) return img;

    std::array<std::uint8_t, 256> lut{};
    std::int64_t cdf = 0;
    const auto denom = total - cdf_min;
    for (int v = 0; v < 256; ++v) {
        cdf += hist[static_cast<std::size_t>(v)];
        // round-half-up of (cdf - cdf_min) * 255 / denom in integers
        const std::int64_t num = std::max<std::int64_t>(cdf - cdf_min, 0) * 255;
        lut[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>((2 * num + denom) / (2 * denom));
    }
    GrayImage out = img;
    for (auto& v : out.data()) v = lut[v];
    return out;
}

}  // namespace somiap
