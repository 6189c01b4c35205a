#include "somiap/facedetect.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "somiap/error.hpp"
#include "xml.hpp"

namespace somiap {

namespace {

std::vector<std::string_view> tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view tok, const std::string& path) {
    double v = 0.0;
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError("cascade: " + path + ": malformed number '" + std::string(tok) + "'");
    return v;
}

int parse_int(std::string_view tok, const std::string& path) {
    int v = 0;
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("cascade: " + path + ": malformed integer '" + std::string(tok) + "'");
    return v;
}

const xml::Node& require(const xml::Node& parent, std::string_view name, const std::string& path) {
    const auto* c = parent.child(name);
    if (!c) throw ParseError("cascade: " + path + ": missing <" + std::string(name) + ">");
    return *c;
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

CascadeModel parse_cascade(std::string_view xml_text) {
    const xml::Node root = xml::parse(xml_text);
    const std::string root_path = root.name;
    const xml::Node& cascade = require(root, "cascade", root_path);
    const std::string cpath = root_path + "/cascade";

    const std::string stage_type = trimmed(require(cascade, "stageType", cpath).text);
    if (stage_type != "BOOST") throw UnsupportedModelError("cascade: stageType '" + stage_type + "' is not supported");
    const std::string feature_type = trimmed(require(cascade, "featureType", cpath).text);
    if (feature_type != "HAAR")
        throw UnsupportedModelError("cascade: featureType '" + feature_type + "' is not supported");

    CascadeModel model;
    model.window_w = parse_int(trimmed(require(cascade, "width", cpath).text), cpath + "/width");
    model.window_h = parse_int(trimmed(require(cascade, "height", cpath).text), cpath + "/height");
    if (model.window_w < 4 || model.window_h < 4) throw ParseError("cascade: " + cpath + ": window must be at least 4x4");

    const xml::Node& features = require(cascade, "features", cpath);
    for (std::size_t fi = 0; fi < features.children.size(); ++fi) {
        const std::string fpath = cpath + "/features/_[" + std::to_string(fi) + "]";
        const xml::Node& fnode = features.children[fi];
        if (const auto* tilted = fnode.child("tilted"); tilted && trimmed(tilted->text) != "0")
            throw UnsupportedModelError("cascade: " + fpath + ": tilted Haar features are not supported");
        const xml::Node& rects = require(fnode, "rects", fpath);
        HaarFeature feature;
        for (std::size_t ri = 0; ri < rects.children.size(); ++ri) {
            const std::string rpath = fpath + "/rects/_[" + std::to_string(ri) + "]";
            const auto tok = tokens(rects.children[ri].text);
            if (tok.size() != 5) throw ParseError("cascade: " + rpath + ": expected 'x y w h weight'");
            HaarRect hr;
            hr.rect = {parse_int(tok[0], rpath), parse_int(tok[1], rpath), parse_int(tok[2], rpath), parse_int(tok[3], rpath)};
            hr.weight = parse_double(tok[4], rpath);
            if (hr.rect.w < 1 || hr.rect.h < 1 || hr.rect.x < 0 || hr.rect.y < 0 ||
                hr.rect.x + hr.rect.w > model.window_w || hr.rect.y + hr.rect.h > model.window_h)
                throw ParseError("cascade: " + rpath + ": rectangle outside the detection window");
            feature.rects.push_back(hr);
        }
        if (feature.rects.size() < 2 || feature.rects.size() > 3)
            throw ParseError("cascade: " + fpath + ": a Haar feature needs 2 or 3 rectangles");
        model.features.push_back(std::move(feature));
    }

    const xml::Node& stages = require(cascade, "stages", cpath);
    for (std::size_t si = 0; si < stages.children.size(); ++si) {
        const std::string spath = cpath + "/stages/_[" + std::to_string(si) + "]";
        const xml::Node& snode = stages.children[si];
        Stage stage;
        stage.threshold = parse_double(trimmed(require(snode, "stageThreshold", spath).text), spath + "/stageThreshold");
        const xml::Node& weak = require(snode, "weakClassifiers", spath);
        for (std::size_t wi = 0; wi < weak.children.size(); ++wi) {
            const std::string wpath = spath + "/weakClassifiers/_[" + std::to_string(wi) + "]";
            const xml::Node& wnode = weak.children[wi];
            const auto nodes = tokens(require(wnode, "internalNodes", wpath).text);
            const auto leaves = tokens(require(wnode, "leafValues", wpath).text);
            const std::string npath = wpath + "/internalNodes";
            if (nodes.size() % 4 != 0 || nodes.empty())
                throw ParseError("cascade: " + npath + ": expected groups of 'left right feature threshold'");
            const int left = parse_int(nodes[0], npath);
            const int right = parse_int(nodes[1], npath);
            if (nodes.size() != 4 || left > 0 || right > 0 || leaves.size() != 2)
                throw ParseError("cascade: " + wpath + ": non-stump tree (only depth-1 trees are supported)");
            if (left != 0 || right != -1)
                throw ParseError("cascade: " + npath + ": stump leaves must be '0 -1'");
            WeakClassifier wc;
            wc.feature = parse_int(nodes[2], npath);
            wc.threshold = parse_double(nodes[3], npath);
            wc.left_value = parse_double(leaves[0], wpath + "/leafValues");
            wc.right_value = parse_double(leaves[1], wpath + "/leafValues");
            if (wc.feature < 0 || static_cast<std::size_t>(wc.feature) >= model.features.size())
                throw ParseError("cascade: " + npath + ": feature index " + std::to_string(wc.feature) +
                                 " out of range (" + std::to_string(model.features.size()) + " features)");
            stage.weak.push_back(wc);
        }
        if (stage.weak.empty()) throw ParseError("cascade: " + spath + ": stage has no weak classifiers");
        if (const auto* maxw = snode.child("maxWeakCount")) {
            const int declared = parse_int(trimmed(maxw->text), spath + "/maxWeakCount");
            if (declared != static_cast<int>(stage.weak.size()))
                throw ParseError("cascade: " + spath + ": maxWeakCount disagrees with weakClassifiers");
        }
        model.stages.push_back(std::move(stage));
    }
    if (model.stages.empty()) throw ParseError("cascade: " + cpath + "/stages: no stages");
    if (const auto* num = cascade.child("stageNum")) {
        const int declared = parse_int(trimmed(num->text), cpath + "/stageNum");
        if (declared != static_cast<int>(model.stages.size()))
            throw ParseError("cascade: " + cpath + "/stageNum: declared " + std::to_string(declared) + " stages, found " +
                             std::to_string(model.stages.size()));
    }
    return model;
}

CascadeModel load_cascade(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_cascade(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const UnsupportedModelError& e) {
        throw UnsupportedModelError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string serialize_cascade(const CascadeModel& model) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\"?>\n<opencv_storage>\n<cascade type_id=\"opencv-cascade-classifier\">\n";
    os << "  <stageType>BOOST</stageType>\n  <featureType>HAAR</featureType>\n";
    os << "  <height>" << model.window_h << "</height>\n  <width>" << model.window_w << "</width>\n";
    std::size_t max_weak = 0;
    for (const auto& s : model.stages) max_weak = std::max(max_weak, s.weak.size());
    os << "  <stageParams>\n    <maxWeakCount>" << max_weak << "</maxWeakCount></stageParams>\n";
    os << "  <featureParams>\n    <maxCatCount>0</maxCatCount></featureParams>\n";
    os << "  <stageNum>" << model.stages.size() << "</stageNum>\n  <stages>\n";
    for (const auto& s : model.stages) {
        os << "    <_>\n      <maxWeakCount>" << s.weak.size() << "</maxWeakCount>\n";
        os << "      <stageThreshold>" << fmt(s.threshold) << "</stageThreshold>\n      <weakClassifiers>\n";
        for (const auto& w : s.weak) {
            os << "        <_>\n          <internalNodes>\n            0 -1 " << w.feature << " " << fmt(w.threshold)
               << "</internalNodes>\n          <leafValues>\n            " << fmt(w.left_value) << " "
               << fmt(w.right_value) << "</leafValues></_>\n";
        }
        os << "      </weakClassifiers></_>\n";
    }
    os << "  </stages>\n  <features>\n";
    for (const auto& f : model.features) {
        os << "    <_>\n      <rects>\n";
        for (const auto& r : f.rects)
            os << "        <_>\n          " << r.rect.x << " " << r.rect.y << " " << r.rect.w << " " << r.rect.h << " "
               << fmt(r.weight) << "</_>\n";
        os << "      </rects></_>\n";
    }
    os << "  </features>\n</cascade>\n</opencv_storage>\n";
    return os.str();
}

Rect scaled_window(const CascadeModel& model, int x, int y, double scale) {
    return {x, y, static_cast<int>(std::lround(model.window_w * scale)),
            static_cast<int>(std::lround(model.window_h * scale))};
}

Rect scaled_rect(const Rect& base, int x, int y, double scale) {
    const auto r = [scale](int v) { return static_cast<int>(std::lround(v * scale)); };
    const int x0 = r(base.x);
    const int y0 = r(base.y);
    return {x + x0, y + y0, r(base.x + base.w) - x0, r(base.y + base.h) - y0};
}

namespace {

/// Feature geometry and weights for one scale, as offsets from the window
/// origin into the integral table. Rounding changes rect areas unevenly, so
/// the first rect's weight is re-solved to keep sum(weight * area) equal to
/// scale^2 times its base value; for the usual zero-sum features this keeps
/// them blind to the window mean.
class ScaledCascade {
public:
    ScaledCascade(const CascadeModel& model, const IntegralImage& ii, double scale)
        : model_(model), ii_(ii), stride_(static_cast<std::size_t>(ii.width()) + 1),
          window_(scaled_window(model, 0, 0, scale)) {
        area_ = static_cast<double>(window_.area());
        features_.reserve(model.features.size());
        for (const auto& f : model.features) {
            Feature sf;
            double base_total = 0.0;
            double rest = 0.0;
            for (const auto& hr : f.rects) {
                if (sf.count == 3) throw ContractError("eval_window: feature with more than 3 rectangles");
                const Rect sr = scaled_rect(hr.rect, 0, 0, scale);
                sf.corners[sf.count] = corners(sr);
                sf.weights[sf.count] = hr.weight;
                base_total += hr.weight * hr.rect.area();
                if (sf.count > 0) rest += hr.weight * sr.area();
                ++sf.count;
            }
            if (sf.count > 0) {
                const Rect first = scaled_rect(f.rects[0].rect, 0, 0, scale);
                if (first.area() > 0) sf.weights[0] = (base_total * scale * scale - rest) / first.area();
            }
            features_.push_back(sf);
        }
    }

    const Rect& window() const { return window_; }

    bool eval(int x, int y, bool early_exit) const {
        check_rect_inside({x, y, window_.w, window_.h}, ii_.width(), ii_.height());
        const std::size_t base = static_cast<std::size_t>(y) * stride_ + static_cast<std::size_t>(x);
        const auto nc = corners({0, 0, window_.w, window_.h});
        const double mean = static_cast<double>(sum(ii_.sums().data() + base, nc)) / area_;
        const double mean_sq = static_cast<double>(sum(ii_.squared_sums().data() + base, nc)) / area_;
        double sigma = std::sqrt(std::max(0.0, mean_sq - mean * mean));
        if (sigma < 1.0) sigma = 1.0;

        const std::int64_t* p = ii_.sums().data() + base;
        bool accepted = true;
        for (const auto& stage : model_.stages) {
            double votes = 0.0;
            for (const auto& wc : stage.weak) {
                const Feature& f = features_[static_cast<std::size_t>(wc.feature)];
                double value = 0.0;
                for (int i = 0; i < f.count; ++i) value += f.weights[i] * static_cast<double>(sum(p, f.corners[i]));
                value /= area_;
                votes += value < wc.threshold * sigma ? wc.left_value : wc.right_value;
            }
            if (votes < stage.threshold) {
                accepted = false;
                if (early_exit) return false;
            }
        }
        return accepted;
    }

private:
    using Corners = std::array<std::size_t, 4>;  // tl, tr, bl, br

    struct Feature {
        int count = 0;
        std::array<Corners, 3> corners{};
        std::array<double, 3> weights{};
    };

    Corners corners(const Rect& r) const {
        const auto at = [this](int cx, int cy) { return static_cast<std::size_t>(cy) * stride_ + static_cast<std::size_t>(cx); };
        return {at(r.x, r.y), at(r.x + r.w, r.y), at(r.x, r.y + r.h), at(r.x + r.w, r.y + r.h)};
    }

    static std::int64_t sum(const std::int64_t* p, const Corners& c) { return p[c[3]] - p[c[1]] - p[c[2]] + p[c[0]]; }

    const CascadeModel& model_;
    const IntegralImage& ii_;
    std::size_t stride_;
    Rect window_;
    double area_ = 1.0;
    std::vector<Feature> features_;
};

}  // namespace

bool eval_window(const CascadeModel& model, const IntegralImage& ii, int x, int y, double scale, bool early_exit) {
    return ScaledCascade(model, ii, scale).eval(x, y, early_exit);
}

std::vector<Rect> detect_raw(const CascadeModel& model, const GrayImage& img, const DetectParams& params) {
    if (!(params.scale_step > 1.0)) throw ContractError("detect_multiscale: scale_step must be > 1");
    std::vector<Rect> raw;
    const IntegralImage ii(img);
    for (double s = 1.0;; s *= params.scale_step) {
        const Rect win = scaled_window(model, 0, 0, s);
        if (win.w > img.width() || win.h > img.height()) break;
        if (win.w < params.min_size || win.h < params.min_size) continue;
        const ScaledCascade sc(model, ii, s);
        const int stride = std::max(1, static_cast<int>(std::lround(s)));
        for (int y = 0; y + win.h <= img.height(); y += stride)
            for (int x = 0; x + win.w <= img.width(); x += stride)
                if (sc.eval(x, y, true)) raw.push_back({x, y, win.w, win.h});
    }
    return raw;
}

std::vector<Detection> detect_multiscale(const CascadeModel& model, const GrayImage& img, const DetectParams& params) {
    return group_rects(detect_raw(model, img, params), params.min_neighbors);
}

bool similar_rects(const Rect& a, const Rect& b) {
    const double delta = 0.2 * std::min(a.w, b.w);
    const auto within = [](int p, int q) { return std::max(p, q) <= 1.2 * std::min(p, q); };
    return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta && within(a.w, b.w) && within(a.h, b.h);
}

std::vector<Detection> group_rects(const std::vector<Rect>& raw, int min_neighbors) {
    const std::size_t n = raw.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (similar_rects(raw[i], raw[j])) {
                const auto a = find(i);
                const auto b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }

    struct Accum {
        long long x = 0, y = 0, w = 0, h = 0;
        int count = 0;
    };
    std::vector<Accum> acc(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& a = acc[find(i)];
        a.x += raw[i].x;
        a.y += raw[i].y;
        a.w += raw[i].w;
        a.h += raw[i].h;
        ++a.count;
    }

    std::vector<Detection> out;
    const auto mean = [](long long sum, int count) {
        return static_cast<int>(std::floor(static_cast<double>(sum) / count + 0.5));
    };
    for (const auto& a : acc) {
        if (a.count == 0 || a.count < min_neighbors + 1) continue;
        out.push_back({{mean(a.x, a.count), mean(a.y, a.count), mean(a.w, a.count), mean(a.h, a.count)}, a.count});
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
        if (a.rect.x != b.rect.x) return a.rect.x < b.rect.x;
        if (a.rect.w != b.rect.w) return a.rect.w < b.rect.w;
        return a.rect.h < b.rect.h;
    });
    return out;
}

}  // namespace somiap
