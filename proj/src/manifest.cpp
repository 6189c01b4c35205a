#include "somiap/manifest.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "somiap/error.hpp"

namespace somiap {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_or_inf(const Json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

HashAlgo algo_from_json(const Json& j) {
    const auto a = parse_hash_algo(j.get<std::string>());
    if (!a) throw ParseError("manifest: unknown hash algorithm '" + j.get<std::string>() + "'");
    return *a;
}

Json matrix_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from_json(const Json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), j.at("data").get<std::vector<double>>());
}

Json prediction_json(const Prediction& p) {
    return {{"label", p.label ? Json(*p.label) : Json(nullptr)},
            {"distance", number_or_null(p.distance)},
            {"threshold_applied", number_or_null(p.threshold_applied)}};
}

Prediction prediction_from_json(const Json& j) {
    Prediction p;
    if (!j.at("label").is_null()) p.label = j.at("label").get<std::string>();
    p.distance = number_or_inf(j.at("distance"));
    p.threshold_applied = number_or_inf(j.at("threshold_applied"));
    return p;
}

Json place_match_json(const PlaceMatch& m) {
    return {{"entry_id", m.entry_id},
            {"feature_matches", m.feature_matches},
            {"hash_distance", m.hash_distance},
            {"accepted", m.accepted}};
}

PlaceMatch place_match_from_json(const Json& j) {
    PlaceMatch m;
    m.entry_id = j.at("entry_id").get<std::string>();
    m.feature_matches = j.at("feature_matches").get<int>();
    m.hash_distance = j.at("hash_distance").get<int>();
    m.accepted = j.at("accepted").get<bool>();
    return m;
}

Json rect_json(const Rect& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

Rect rect_from_json(const Json& j) {
    return {j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
}

/// Runs `f`, converting JSON library exceptions into ParseError.
template <typename F>
auto schema(const char* what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

Json to_json(const PipelineConfig& c) {
    Json algos = Json::array();
    for (const auto a : c.place.algos) algos.push_back(to_string(a));
    Json thresholds = Json::object();
    for (const auto& [a, t] : c.place.thresholds) thresholds[std::string(to_string(a))] = t;
    const auto& o = c.place.orb;
    const auto& f = c.face;
    std::string policy;
    switch (f.policy) {
        case RecognizerPolicy::Eigen: policy = "eigen"; break;
        case RecognizerPolicy::Fisher: policy = "fisher"; break;
        case RecognizerPolicy::Lbph: policy = "lbph"; break;
        case RecognizerPolicy::Auto: policy = "auto"; break;
    }
    return {
        {"place",
         {{"primary_algo", to_string(c.place.primary_algo)},
          {"algos", algos},
          {"thresholds", thresholds},
          {"min_feature_matches", c.place.min_feature_matches},
          {"ratio", c.place.ratio},
          {"orb",
           {{"max_features", o.max_features},
            {"levels", o.levels},
            {"scale_factor", o.scale_factor},
            {"fast_threshold", o.fast_threshold},
            {"harris_k", o.harris_k}}}}},
        {"face",
         {{"scale_step", f.detect.scale_step},
          {"min_neighbors", f.detect.min_neighbors},
          {"min_size", f.detect.min_size},
          {"canonical_size", f.canonical_size},
          {"policy", policy},
          {"illumination_threshold", f.illumination_threshold},
          {"unknown_cutoff", number_or_null(f.unknown_cutoff)},
          {"lbph_grid", f.lbph_grid}}},
    };
}

PipelineConfig config_from_json(const Json& j) {
    return schema("manifest config", [&] {
        PipelineConfig c;
        if (j.contains("place")) {
            const Json& p = j.at("place");
            if (p.contains("primary_algo")) c.place.primary_algo = algo_from_json(p.at("primary_algo"));
            if (p.contains("algos")) {
                c.place.algos.clear();
                for (const auto& a : p.at("algos")) c.place.algos.push_back(algo_from_json(a));
            }
            if (p.contains("thresholds"))
                for (const auto& [k, v] : p.at("thresholds").items()) c.place.thresholds[algo_from_json(Json(k))] = v.get<int>();
            c.place.min_feature_matches = p.value("min_feature_matches", c.place.min_feature_matches);
            c.place.ratio = p.value("ratio", c.place.ratio);
            if (p.contains("orb")) {
                const Json& o = p.at("orb");
                c.place.orb.max_features = o.value("max_features", c.place.orb.max_features);
                c.place.orb.levels = o.value("levels", c.place.orb.levels);
                c.place.orb.scale_factor = o.value("scale_factor", c.place.orb.scale_factor);
                c.place.orb.fast_threshold = o.value("fast_threshold", c.place.orb.fast_threshold);
                c.place.orb.harris_k = o.value("harris_k", c.place.orb.harris_k);
            }
        }
        if (j.contains("face")) {
            const Json& f = j.at("face");
            c.face.detect.scale_step = f.value("scale_step", c.face.detect.scale_step);
            c.face.detect.min_neighbors = f.value("min_neighbors", c.face.detect.min_neighbors);
            c.face.detect.min_size = f.value("min_size", c.face.detect.min_size);
            c.face.canonical_size = f.value("canonical_size", c.face.canonical_size);
            if (f.contains("policy")) {
                const auto pol = parse_recognizer_policy(f.at("policy").get<std::string>());
                if (!pol) throw ParseError("manifest config: unknown recognizer policy");
                c.face.policy = *pol;
            }
            c.face.illumination_threshold = f.value("illumination_threshold", c.face.illumination_threshold);
            if (f.contains("unknown_cutoff")) c.face.unknown_cutoff = number_or_inf(f.at("unknown_cutoff"));
            c.face.lbph_grid = f.value("lbph_grid", c.face.lbph_grid);
        }
        if (std::find(c.place.algos.begin(), c.place.algos.end(), c.place.primary_algo) == c.place.algos.end())
            throw ParseError("manifest config: primary_algo must be one of algos");
        return c;
    });
}

Json to_json(const PlaceEntry& e) {
    Json digests = Json::array();
    for (const auto& d : e.digests) digests.push_back(d.to_string());
    Json keypoints = Json::array();
    for (const auto& k : e.descriptors.keypoints)
        keypoints.push_back({{"x", k.x}, {"y", k.y}, {"level", k.level}, {"angle", k.angle}, {"response", k.response}});
    Json descriptors = Json::array();
    for (const auto& d : e.descriptors.descriptors) descriptors.push_back(d.to_hex());
    return {{"id", e.id},
            {"name", e.name},
            {"source_hash", e.source_hash},
            {"digests", digests},
            {"keypoints", keypoints},
            {"descriptors", descriptors}};
}

PlaceEntry place_entry_from_json(const Json& j) {
    return schema("manifest place", [&] {
        PlaceEntry e;
        e.id = j.at("id").get<std::string>();
        e.name = j.at("name").get<std::string>();
        e.source_hash = j.at("source_hash").get<std::string>();
        for (const auto& d : j.at("digests")) e.digests.push_back(HashDigest::parse(d.get<std::string>()));
        for (const auto& k : j.at("keypoints"))
            e.descriptors.keypoints.push_back({k.at("x").get<double>(), k.at("y").get<double>(), k.at("level").get<int>(),
                                               k.at("angle").get<double>(), k.at("response").get<double>()});
        for (const auto& d : j.at("descriptors")) e.descriptors.descriptors.push_back(Descriptor::from_hex(d.get<std::string>()));
        if (e.descriptors.keypoints.size() != e.descriptors.descriptors.size())
            throw ParseError("manifest place '" + e.id + "': keypoint and descriptor counts differ");
        return e;
    });
}

Json to_json(const FaceModel& fm) {
    Json j = {{"algorithm", to_string(fm.algo())},
              {"unknown_cutoff", number_or_null(fm.unknown_cutoff)},
              {"width", fm.width()},
              {"height", fm.height()}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            j["labels"] = m.labels;
            if constexpr (std::is_same_v<T, EigenModel>) {
                j["mean"] = m.mean;
                j["components"] = matrix_json(m.components);
                j["projections"] = m.projections;
            } else if constexpr (std::is_same_v<T, FisherModel>) {
                j["mean"] = m.mean;
                j["projection"] = matrix_json(m.projection);
                j["projections"] = m.projections;
            } else {
                j["grid"] = {m.grid_x, m.grid_y};
                j["histograms"] = m.histograms;
            }
        },
        fm.model);
    return j;
}

FaceModel face_model_from_json(const Json& j) {
    return schema("manifest face_model", [&] {
        const auto algo = parse_recognizer_algo(j.at("algorithm").get<std::string>());
        if (!algo) throw ParseError("manifest face_model: unknown algorithm");
        FaceModel fm;
        fm.unknown_cutoff = number_or_inf(j.at("unknown_cutoff"));
        const int w = j.at("width").get<int>();
        const int h = j.at("height").get<int>();
        const auto labels = j.at("labels").get<std::vector<std::string>>();
        switch (*algo) {
            case RecognizerAlgo::Eigen: {
                EigenModel m;
                m.width = w;
                m.height = h;
                m.labels = labels;
                m.mean = j.at("mean").get<std::vector<double>>();
                m.components = matrix_from_json(j.at("components"));
                m.projections = j.at("projections").get<std::vector<std::vector<double>>>();
                fm.model = std::move(m);
                break;
            }
            case RecognizerAlgo::Fisher: {
                FisherModel m;
                m.width = w;
                m.height = h;
                m.labels = labels;
                m.mean = j.at("mean").get<std::vector<double>>();
                m.projection = matrix_from_json(j.at("projection"));
                m.projections = j.at("projections").get<std::vector<std::vector<double>>>();
                fm.model = std::move(m);
                break;
            }
            case RecognizerAlgo::Lbph: {
                LbphModel m;
                m.width = w;
                m.height = h;
                m.labels = labels;
                const auto grid = j.at("grid").get<std::vector<int>>();
                if (grid.size() != 2) throw ParseError("manifest face_model: grid must have two entries");
                m.grid_x = grid[0];
                m.grid_y = grid[1];
                m.histograms = j.at("histograms").get<std::vector<std::vector<int>>>();
                fm.model = std::move(m);
                break;
            }
        }
        return fm;
    });
}

Json to_json(const Manifest& m) {
    Json places = Json::array();
    for (const auto& p : m.places) places.push_back(to_json(p));
    return {{"version", m.version},
            {"config", to_json(m.config)},
            {"places", places},
            {"face_model", m.face_model ? to_json(*m.face_model) : Json(nullptr)}};
}

Manifest manifest_from_json(const Json& j) {
    return schema("manifest", [&] {
        Manifest m;
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion)
            throw ParseError("manifest: unsupported version " + std::to_string(m.version) + " (expected " +
                             std::to_string(kManifestVersion) + ")");
        m.config = config_from_json(j.at("config"));
        for (const auto& p : j.at("places")) {
            PlaceEntry e = place_entry_from_json(p);
            for (const auto& prev : m.places)
                if (prev.id == e.id) throw ParseError("manifest: duplicate place id '" + e.id + "'");
            m.places.push_back(std::move(e));
        }
        if (j.contains("face_model") && !j.at("face_model").is_null()) m.face_model = face_model_from_json(j.at("face_model"));
        return m;
    });
}

Json to_json(const AnalysisReport& r) {
    Json candidates = Json::array();
    for (const auto& c : r.candidates) candidates.push_back(place_match_json(c));
    Json faces = Json::array();
    for (const auto& f : r.faces)
        faces.push_back({{"rect", rect_json(f.detection.rect)},
                         {"neighbors", f.detection.neighbors},
                         {"prediction", f.prediction ? prediction_json(*f.prediction) : Json(nullptr)}});
    return {{"version", kManifestVersion},
            {"query_id", r.query_id},
            {"place", r.place ? place_match_json(*r.place) : Json(nullptr)},
            {"candidates", candidates},
            {"faces", faces},
            {"timings_ms",
             {{"place", r.timings.place_ms}, {"detect", r.timings.detect_ms}, {"recognize", r.timings.recognize_ms}}}};
}

AnalysisReport report_from_json(const Json& j) {
    return schema("report", [&] {
        if (j.at("version").get<int>() != kManifestVersion) throw ParseError("report: unsupported version");
        AnalysisReport r;
        r.query_id = j.at("query_id").get<std::string>();
        if (!j.at("place").is_null()) r.place = place_match_from_json(j.at("place"));
        for (const auto& c : j.at("candidates")) r.candidates.push_back(place_match_from_json(c));
        for (const auto& f : j.at("faces")) {
            FaceResult fr;
            fr.detection.rect = rect_from_json(f.at("rect"));
            fr.detection.neighbors = f.at("neighbors").get<int>();
            if (!f.at("prediction").is_null()) fr.prediction = prediction_from_json(f.at("prediction"));
            r.faces.push_back(std::move(fr));
        }
        const Json& t = j.at("timings_ms");
        r.timings = {t.at("place").get<double>(), t.at("detect").get<double>(), t.at("recognize").get<double>()};
        return r;
    });
}

std::string dump_manifest(const Manifest& m) { return to_json(m).dump(1) + "\n"; }

Manifest parse_manifest(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    return manifest_from_json(j);
}

Manifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const std::function<void(std::size_t)>& progress) {
    const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot create '" + tmp.string() + "': " + std::strerror(errno));

    constexpr std::size_t kChunk = 1 << 16;
    std::size_t written = 0;
    const auto fail = [&](const std::string& what) {
        const int err = errno;
        ::close(fd);
        ::unlink(tmp.c_str());
        throw IoError(what + " '" + tmp.string() + "': " + std::strerror(err));
    };
    while (written < content.size()) {
        const std::size_t n = std::min(kChunk, content.size() - written);
        const ssize_t w = ::write(fd, content.data() + written, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            fail("write failed for");
        }
        written += static_cast<std::size_t>(w);
        if (progress) progress(written);
    }
    if (::fsync(fd) != 0) fail("fsync failed for");
    if (::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw IoError("close failed for '" + tmp.string() + "'");
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        const int err = errno;
        ::unlink(tmp.c_str());
        throw IoError("cannot replace '" + path.string() + "': " + std::strerror(err));
    }
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    write_file_atomic(path, dump_manifest(manifest));
}

ManifestLock::ManifestLock(const std::filesystem::path& manifest_path) {
    const std::string lock_path = manifest_path.string() + ".lock";
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file '" + lock_path + "': " + std::strerror(errno));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("manifest '" + manifest_path.string() + "' is locked by another process");
    }
}

ManifestLock::~ManifestLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace somiap
