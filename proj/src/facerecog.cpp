#include "somiap/facerecog.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "somiap/error.hpp"

namespace somiap {

std::vector<std::string> Gallery::labels() const {
    std::vector<std::string> out;
    for (const auto& s : samples)
        if (std::find(out.begin(), out.end(), s.label) == out.end()) out.push_back(s.label);
    return out;
}

std::string_view to_string(RecognizerAlgo algo) {
    switch (algo) {
        case RecognizerAlgo::Eigen: return "eigen";
        case RecognizerAlgo::Fisher: return "fisher";
        case RecognizerAlgo::Lbph: return "lbph";
    }
    return "unknown";
}

std::optional<RecognizerAlgo> parse_recognizer_algo(std::string_view name) {
    if (name == "eigen") return RecognizerAlgo::Eigen;
    if (name == "fisher") return RecognizerAlgo::Fisher;
    if (name == "lbph") return RecognizerAlgo::Lbph;
    return std::nullopt;
}

std::optional<RecognizerPolicy> parse_recognizer_policy(std::string_view name) {
    if (name == "auto") return RecognizerPolicy::Auto;
    if (const auto a = parse_recognizer_algo(name)) return static_cast<RecognizerPolicy>(*a);
    return std::nullopt;
}

int FaceModel::width() const {
    return std::visit([](const auto& m) { return m.width; }, model);
}

int FaceModel::height() const {
    return std::visit([](const auto& m) { return m.height; }, model);
}

std::vector<std::string> FaceModel::distinct_labels() const {
    std::vector<std::string> out;
    std::visit(
        [&](const auto& m) {
            for (const auto& l : m.labels)
                if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
        },
        model);
    return out;
}

GrayImage normalize_face(const GrayImage& img, const Rect& rect, int size) {
    const GrayImage cropped = crop(img, rect);
    return equalize_hist(resize_bilinear(cropped, size, size));
}

namespace {

void check_gallery_images(const Gallery& g, const char* op) {
    if (g.samples.empty()) throw ContractError(std::string(op) + ": gallery is empty");
    const int w = g.samples.front().image.width();
    const int h = g.samples.front().image.height();
    for (const auto& s : g.samples)
        if (s.image.width() != w || s.image.height() != h)
            throw ContractError(std::string(op) + ": all gallery images must share the canonical size");
}

std::vector<std::string> sample_labels(const Gallery& g) {
    std::vector<std::string> out;
    out.reserve(g.samples.size());
    for (const auto& s : g.samples) out.push_back(s.label);
    return out;
}

std::vector<double> image_vector(const GrayImage& img) { return {img.data().begin(), img.data().end()}; }

struct Pca {
    std::vector<double> mean;
    Matrix basis;  // dims x m
};

/// Principal directions via the N x N inner-product matrix; at most
/// `max_components` directions with non-negligible variance are returned.
Pca pca_gram(const Matrix& samples, std::size_t max_components) {
    const std::size_t n = samples.rows();
    const std::size_t d = samples.cols();
    Pca out;
    out.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.mean[j] += samples(i, j);
    for (auto& m : out.mean) m /= static_cast<double>(n);

    Matrix centered = samples;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= out.mean[j];

    Matrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) gram(i, j) = gram(j, i) = dot(centered.row(i), centered.row(j));

    const EigenDecomposition eig = jacobi_eigh(gram);
    const double top = eig.values.empty() ? 0.0 : eig.values.front();
    const double scale = std::max(1.0, gram.trace());
    std::vector<std::vector<double>> dirs;
    for (std::size_t c = 0; c < n && dirs.size() < max_components; ++c) {
        const double lambda = eig.values[c];
        if (top <= 1e-12 * scale || lambda <= 1e-10 * top) break;
        std::vector<double> u(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double coef = eig.vectors(i, c);
            const auto row = centered.row(i);
            for (std::size_t j = 0; j < d; ++j) u[j] += coef * row[j];
        }
        // Modified Gram-Schmidt against the directions kept so far.
        for (const auto& prev : dirs) {
            const double p = dot(u, prev);
            for (std::size_t j = 0; j < d; ++j) u[j] -= p * prev[j];
        }
        const double norm = norm2(u);
        if (norm <= 1e-9 * std::sqrt(lambda)) continue;
        for (auto& v : u) v /= norm;
        dirs.push_back(std::move(u));
    }

    out.basis = Matrix(d, dirs.size());
    for (std::size_t c = 0; c < dirs.size(); ++c)
        for (std::size_t j = 0; j < d; ++j) out.basis(j, c) = dirs[c][j];
    return out;
}

std::vector<double> project(const Matrix& basis, std::span<const double> mean, std::span<const double> x) {
    std::vector<double> out(basis.cols(), 0.0);
    for (std::size_t j = 0; j < basis.rows(); ++j) {
        const double v = x[j] - mean[j];
        if (v == 0.0) continue;
        const auto row = basis.row(j);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c] * v;
    }
    return out;
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

template <typename Feature, typename Distance>
Prediction nearest(const std::vector<Feature>& gallery, const std::vector<std::string>& labels, const Feature& query,
                   double cutoff, Distance dist) {
    Prediction p;
    p.threshold_applied = cutoff;
    if (gallery.empty()) {
        p.distance = std::numeric_limits<double>::infinity();
        return p;
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        const double d = dist(query, gallery[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    p.distance = best_d;
    if (best_d <= cutoff) p.label = labels[best];
    return p;
}

void check_face_size(int w, int h, const GrayImage& face) {
    if (face.width() != w || face.height() != h)
        throw ContractError("predict: face is " + std::to_string(face.width()) + "x" + std::to_string(face.height()) +
                            ", model expects " + std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace

Matrix image_rows(const Gallery& g) {
    check_gallery_images(g, "image_rows");
    const auto d = g.samples.front().image.data().size();
    Matrix out(g.samples.size(), d);
    for (std::size_t i = 0; i < g.samples.size(); ++i)
        std::copy(g.samples[i].image.data().begin(), g.samples[i].image.data().end(), out.row(i).begin());
    return out;
}

EigenModel train_eigen(const Matrix& samples, const std::vector<std::string>& labels, int k) {
    const auto n = static_cast<int>(samples.rows());
    if (labels.size() != samples.rows()) throw ContractError("train_eigen: one label per sample required");
    if (k < 1 || k > n - 1) throw ContractError("train_eigen: k must be in [1, samples - 1]");
    const Pca pca = pca_gram(samples, static_cast<std::size_t>(k));
    EigenModel m;
    m.mean = pca.mean;
    m.components = pca.basis;
    m.labels = labels;
    for (std::size_t i = 0; i < samples.rows(); ++i) m.projections.push_back(project(m.components, m.mean, samples.row(i)));
    return m;
}

EigenModel train_eigen(const Gallery& g, int k) {
    check_gallery_images(g, "train_eigen");
    EigenModel m = train_eigen(image_rows(g), sample_labels(g), k);
    m.width = g.samples.front().image.width();
    m.height = g.samples.front().image.height();
    return m;
}

FisherModel train_fisher(const Matrix& samples, const std::vector<std::string>& labels) {
    const std::size_t n = samples.rows();
    if (labels.size() != n) throw ContractError("train_fisher: one label per sample required");
    std::vector<std::string> classes;
    std::vector<std::size_t> class_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = std::find(classes.begin(), classes.end(), labels[i]);
        if (it == classes.end()) {
            classes.push_back(labels[i]);
            it = classes.end() - 1;
        }
        class_of[i] = static_cast<std::size_t>(it - classes.begin());
    }
    const std::size_t c = classes.size();
    if (c < 2) throw ContractError("train_fisher: at least 2 classes are required");
    if (n <= c) throw ContractError("train_fisher: need more samples than classes");

    const Pca pca = pca_gram(samples, n - c);
    const std::size_t m = pca.basis.cols();

    FisherModel model;
    model.mean = pca.mean;
    model.labels = labels;
    if (m == 0) {
        model.projection = Matrix(samples.cols(), 0);
        model.projections.assign(n, {});
        return model;
    }

    std::vector<std::vector<double>> reduced(n);
    for (std::size_t i = 0; i < n; ++i) reduced[i] = project(pca.basis, pca.mean, samples.row(i));

    std::vector<std::vector<double>> class_mean(c, std::vector<double>(m, 0.0));
    std::vector<double> counts(c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        counts[class_of[i]] += 1.0;
        for (std::size_t j = 0; j < m; ++j) class_mean[class_of[i]][j] += reduced[i][j];
    }
    for (std::size_t k = 0; k < c; ++k)
        for (auto& v : class_mean[k]) v /= counts[k];
    // Data is centred by the PCA step, so the overall mean is zero up to rounding.
    std::vector<double> total_mean(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) total_mean[j] += reduced[i][j] / static_cast<double>(n);

    Matrix sb(m, m);
    Matrix sw(m, m);
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                sb(a, b) += counts[k] * (class_mean[k][a] - total_mean[a]) * (class_mean[k][b] - total_mean[b]);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mu = class_mean[class_of[i]];
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) sw(a, b) += (reduced[i][a] - mu[a]) * (reduced[i][b] - mu[b]);
    }
    // No within-class spread at all: fall back to the identity metric.
    if (sw.trace() <= 1e-12 * std::max(1.0, sb.trace())) sw = Matrix::identity(m);

    const EigenDecomposition lda = generalized_symmetric_eig(sb, sw, 1e-6);
    const std::size_t keep = std::min(c - 1, m);
    Matrix lda_cols(m, keep);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t k = 0; k < keep; ++k) lda_cols(r, k) = lda.vectors(r, k);

    model.projection = pca.basis * lda_cols;
    for (std::size_t i = 0; i < n; ++i) model.projections.push_back(project(model.projection, model.mean, samples.row(i)));
    return model;
}

FisherModel train_fisher(const Gallery& g) {
    check_gallery_images(g, "train_fisher");
    FisherModel m = train_fisher(image_rows(g), sample_labels(g));
    m.width = g.samples.front().image.width();
    m.height = g.samples.front().image.height();
    return m;
}

GrayImage lbp_image(const GrayImage& img) {
    if (img.width() < 3 || img.height() < 3) throw ContractError("lbp_image: image must be at least 3x3");
    static constexpr int kOffsets[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}};
    GrayImage out(img.width(), img.height(), 0);
    for (int y = 1; y < img.height() - 1; ++y)
        for (int x = 1; x < img.width() - 1; ++x) {
            const int centre = img.at(x, y);
            int code = 0;
            for (const auto& o : kOffsets) code = (code << 1) | (img.at(x + o[0], y + o[1]) >= centre ? 1 : 0);
            out.at(x, y) = static_cast<std::uint8_t>(code);
        }
    return out;
}

std::vector<int> lbph_histogram(const GrayImage& img, int grid_x, int grid_y) {
    if (grid_x < 1 || grid_y < 1 || img.width() % grid_x != 0 || img.height() % grid_y != 0)
        throw ContractError("lbph: image size " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                            " is not divisible by grid " + std::to_string(grid_x) + "x" + std::to_string(grid_y));
    const GrayImage codes = lbp_image(img);
    const int cw = img.width() / grid_x;
    const int ch = img.height() / grid_y;
    std::vector<int> hist(static_cast<std::size_t>(grid_x) * grid_y * 256, 0);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const int cell = (y / ch) * grid_x + (x / cw);
            ++hist[static_cast<std::size_t>(cell) * 256 + codes.at(x, y)];
        }
    return hist;
}

LbphModel train_lbph(const Gallery& g, int grid_x, int grid_y) {
    check_gallery_images(g, "train_lbph");
    LbphModel m;
    m.width = g.samples.front().image.width();
    m.height = g.samples.front().image.height();
    m.grid_x = grid_x;
    m.grid_y = grid_y;
    for (const auto& s : g.samples) {
        m.histograms.push_back(lbph_histogram(s.image, grid_x, grid_y));
        m.labels.push_back(s.label);
    }
    return m;
}

double chi_square(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractError("chi_square: histogram lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double sum = a[i] + b[i];
        if (sum > 0.0) s += (a[i] - b[i]) * (a[i] - b[i]) / sum;
    }
    return s;
}

double chi_square(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ContractError("chi_square: histogram lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int sum = a[i] + b[i];
        if (sum > 0) {
            const double diff = a[i] - b[i];
            s += diff * diff / sum;
        }
    }
    return s;
}

Prediction predict(const EigenModel& model, const GrayImage& face, double cutoff) {
    check_face_size(model.width, model.height, face);
    const auto q = project(model.components, model.mean, image_vector(face));
    return nearest(model.projections, model.labels, q, cutoff, euclidean);
}

Prediction predict(const FisherModel& model, const GrayImage& face, double cutoff) {
    check_face_size(model.width, model.height, face);
    const auto q = project(model.projection, model.mean, image_vector(face));
    return nearest(model.projections, model.labels, q, cutoff, euclidean);
}

Prediction predict(const LbphModel& model, const GrayImage& face, double cutoff) {
    check_face_size(model.width, model.height, face);
    const auto q = lbph_histogram(face, model.grid_x, model.grid_y);
    return nearest(model.histograms, model.labels, q, cutoff,
                   [](const std::vector<int>& a, const std::vector<int>& b) { return chi_square(a, b); });
}

Prediction predict(const FaceModel& model, const GrayImage& face) {
    return std::visit([&](const auto& m) { return predict(m, face, model.unknown_cutoff); }, model.model);
}

double illumination_spread(const Gallery& g) {
    std::map<std::string, std::vector<double>> means;
    for (const auto& s : g.samples) {
        const auto& px = s.image.data();
        means[s.label].push_back(std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size()));
    }
    double worst = 0.0;
    for (const auto& [label, v] : means) {
        const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (const double x : v) var += (x - mu) * (x - mu);
        worst = std::max(worst, std::sqrt(var / static_cast<double>(v.size())));
    }
    return worst;
}

RecognizerAlgo select_recognizer(RecognizerPolicy policy, const Gallery& g, double threshold) {
    switch (policy) {
        case RecognizerPolicy::Eigen: return RecognizerAlgo::Eigen;
        case RecognizerPolicy::Fisher: return RecognizerAlgo::Fisher;
        case RecognizerPolicy::Lbph: return RecognizerAlgo::Lbph;
        case RecognizerPolicy::Auto: break;
    }
    // Fisher is undefined for a single class.
    if (g.labels().size() < 2) return RecognizerAlgo::Lbph;
    return illumination_spread(g) > threshold ? RecognizerAlgo::Fisher : RecognizerAlgo::Lbph;
}

FaceModel train_face_model(RecognizerAlgo algo, const Gallery& g) {
    switch (algo) {
        case RecognizerAlgo::Eigen: {
            const int n = static_cast<int>(g.samples.size());
            if (n < 2) throw ContractError("train_face_model: eigen needs at least 2 samples");
            return {train_eigen(g, n - 1)};
        }
        case RecognizerAlgo::Fisher: return {train_fisher(g)};
        case RecognizerAlgo::Lbph: return {train_lbph(g)};
    }
    throw ContractError("train_face_model: unknown algorithm");
}

}  // namespace somiap
