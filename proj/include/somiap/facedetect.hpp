#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "somiap/imagecore.hpp"

namespace somiap {

struct HaarRect {
    Rect rect;
    double weight = 0.0;

    bool operator==(const HaarRect&) const = default;
};

/// Two or three weighted rectangles in base-window coordinates.
struct HaarFeature {
    std::vector<HaarRect> rects;

    bool operator==(const HaarFeature&) const = default;
};

/// Decision stump: votes `left_value` when the normalised feature value is
/// below `threshold`, `right_value` otherwise.
struct WeakClassifier {
    int feature = 0;
    double threshold = 0.0;
    double left_value = 0.0;
    double right_value = 0.0;

    bool operator==(const WeakClassifier&) const = default;
};

struct Stage {
    std::vector<WeakClassifier> weak;
    double threshold = 0.0;

    bool operator==(const Stage&) const = default;
};

struct CascadeModel {
    int window_w = 0;
    int window_h = 0;
    std::vector<Stage> stages;
    std::vector<HaarFeature> features;

    bool operator==(const CascadeModel&) const = default;
};

struct Detection {
    Rect rect;
    int neighbors = 0;

    bool operator==(const Detection&) const = default;
};

struct DetectParams {
    double scale_step = 1.1;
    int min_neighbors = 3;
    int min_size = 24;
};

/// Reads a BOOST/HAAR cascade in the OpenCV storage XML layout. Only stump
/// weak classifiers are accepted.
///
/// Throws UnsupportedModelError for other stage or feature types and for
/// tilted features, ParseError (with the offending node path) for malformed
/// numbers, dangling feature indices and deeper trees.
CascadeModel parse_cascade(std::string_view xml_text);
CascadeModel load_cascade(const std::filesystem::path& path);

/// Writes the model back in the same XML layout. Numbers use the shortest
/// round-trip representation, so parse(serialize(m)) == m.
std::string serialize_cascade(const CascadeModel& model);

/// Base window scaled by `scale`, rounded to whole pixels.
Rect scaled_window(const CascadeModel& model, int x, int y, double scale);

/// Feature rectangle scaled about the window origin; each corner is rounded
/// independently so the result stays inside the scaled window.
Rect scaled_rect(const Rect& base, int x, int y, double scale);

/// Runs the cascade on one window. Feature sums are divided by the scaled
/// window area and compared with threshold * sigma of the window. The first
/// rect of each feature has its weight rescaled to undo rounding drift in
/// the rect areas. With `early_exit` false every stage is evaluated even
/// after a rejection (the verdict is identical).
/// Throws BoundsError if the scaled window leaves the image.
bool eval_window(const CascadeModel& model, const IntegralImage& ii, int x, int y, double scale,
                 bool early_exit = true);

/// Multi-scale sliding-window detection followed by group_rects. Output is
/// ordered by y, then x, then size.
std::vector<Detection> detect_multiscale(const CascadeModel& model, const GrayImage& img, const DetectParams& params = {});

/// Raw accepted windows of detect_multiscale, before grouping.
std::vector<Rect> detect_raw(const CascadeModel& model, const GrayImage& img, const DetectParams& params = {});

/// True when two rects are close enough to vote for the same object:
/// |dx|, |dy| <= 0.2 * min width and both extents within 20%.
bool similar_rects(const Rect& a, const Rect& b);

/// Transitive clustering by similar_rects. Each cluster with at least
/// min_neighbors + 1 members yields its coordinate-wise mean rectangle.
std::vector<Detection> group_rects(const std::vector<Rect>& raw, int min_neighbors);

}  // namespace somiap
