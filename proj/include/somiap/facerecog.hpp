#pragma once

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "somiap/imagecore.hpp"
#include "somiap/numerics.hpp"

namespace somiap {

inline constexpr int kCanonicalFaceSize = 64;

struct FaceSample {
    std::string label;
    GrayImage image;
};

struct Gallery {
    std::vector<FaceSample> samples;

    /// Distinct labels in order of first appearance.
    std::vector<std::string> labels() const;
    void add(std::string label, GrayImage image) { samples.push_back({std::move(label), std::move(image)}); }
};

struct EigenModel {
    int width = 0;
    int height = 0;
    std::vector<double> mean;
    Matrix components;  ///< dims x k, orthonormal columns
    std::vector<std::vector<double>> projections;
    std::vector<std::string> labels;

    std::size_t k() const { return components.cols(); }
};

struct FisherModel {
    int width = 0;
    int height = 0;
    std::vector<double> mean;
    Matrix projection;  ///< dims x (classes - 1): PCA basis times LDA directions
    std::vector<std::vector<double>> projections;
    std::vector<std::string> labels;
};

struct LbphModel {
    int width = 0;
    int height = 0;
    int grid_x = 8;
    int grid_y = 8;
    std::vector<std::vector<int>> histograms;  ///< grid_x * grid_y * 256 bins each
    std::vector<std::string> labels;
};

enum class RecognizerAlgo { Eigen, Fisher, Lbph };
enum class RecognizerPolicy { Eigen, Fisher, Lbph, Auto };

std::string_view to_string(RecognizerAlgo algo);
std::optional<RecognizerAlgo> parse_recognizer_algo(std::string_view name);
std::optional<RecognizerPolicy> parse_recognizer_policy(std::string_view name);

/// A trained recognizer plus the distance above which answers become UNKNOWN.
struct FaceModel {
    std::variant<EigenModel, FisherModel, LbphModel> model;
    double unknown_cutoff = std::numeric_limits<double>::infinity();

    RecognizerAlgo algo() const { return static_cast<RecognizerAlgo>(model.index()); }
    int width() const;
    int height() const;
    std::vector<std::string> distinct_labels() const;
};

struct Prediction {
    std::optional<std::string> label;  ///< nullopt means UNKNOWN
    double distance = 0.0;
    double threshold_applied = std::numeric_limits<double>::infinity();

    bool unknown() const { return !label.has_value(); }
};

/// Crop, bilinear resize to the canonical size, histogram-equalize.
GrayImage normalize_face(const GrayImage& img, const Rect& rect, int size = kCanonicalFaceSize);

/// Row-major samples (N x dims) built from equally sized images.
Matrix image_rows(const Gallery& g);

/// PCA via the N x N Gram matrix. Directions with negligible variance are
/// dropped, so fewer than k components may be kept (zero for a gallery of
/// identical images). Throws ContractError unless 1 <= k <= N - 1.
EigenModel train_eigen(const Matrix& samples, const std::vector<std::string>& labels, int k);
EigenModel train_eigen(const Gallery& g, int k);

/// PCA to N - c dimensions, then LDA by generalized eigendecomposition of the
/// between/within-class scatter (within-class scatter ridge-regularised).
/// Keeps min(c - 1, available rank) directions.
FisherModel train_fisher(const Matrix& samples, const std::vector<std::string>& labels);
FisherModel train_fisher(const Gallery& g);

/// 3x3 local binary pattern codes, clockwise from the top-left neighbour with
/// that neighbour in the most significant bit; bit = neighbour >= centre.
/// Border pixels get code 0.
GrayImage lbp_image(const GrayImage& img);

/// Concatenated 256-bin histograms of lbp_image over a grid_x x grid_y grid.
std::vector<int> lbph_histogram(const GrayImage& img, int grid_x, int grid_y);

LbphModel train_lbph(const Gallery& g, int grid_x = 8, int grid_y = 8);

double chi_square(const std::vector<double>& a, const std::vector<double>& b);
double chi_square(const std::vector<int>& a, const std::vector<int>& b);

Prediction predict(const EigenModel& model, const GrayImage& face, double cutoff = std::numeric_limits<double>::infinity());
Prediction predict(const FisherModel& model, const GrayImage& face, double cutoff = std::numeric_limits<double>::infinity());
Prediction predict(const LbphModel& model, const GrayImage& face, double cutoff = std::numeric_limits<double>::infinity());
Prediction predict(const FaceModel& model, const GrayImage& face);

/// Largest per-class standard deviation of sample mean intensities.
double illumination_spread(const Gallery& g);

/// Explicit policies map directly; Auto picks Fisher when
/// illumination_spread exceeds `threshold` and there are at least two
/// labels, else LBPH.
RecognizerAlgo select_recognizer(RecognizerPolicy policy, const Gallery& g, double threshold = 25.0);

/// Trains the chosen algorithm with default parameters (Eigen keeps N - 1
/// components).
FaceModel train_face_model(RecognizerAlgo algo, const Gallery& g);

}  // namespace somiap
