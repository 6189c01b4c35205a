#include "somiap/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <curl/curl.h>

#include "somiap/facerecog.hpp"
#include "somiap/manifest.hpp"
#include "somiap/pipeline.hpp"

#ifndef SOMIAP_DEFAULT_CASCADE
#define SOMIAP_DEFAULT_CASCADE ""
#endif

namespace fs = std::filesystem;

namespace somiap {

int exit_code_for(const Error& e) {
    if (e.kind() == "io" || e.kind() == "decode" || e.kind() == "parse") return kExitIo;
    return kExitModel;
}

std::optional<fs::path> resolve_cascade_path(const std::optional<fs::path>& explicit_path) {
    if (explicit_path) return explicit_path;
    if (const char* env = std::getenv(kCascadeEnvVar); env && *env) return fs::path(env);
    std::error_code ec;
    const fs::path local = fs::path("data") / kCascadeFileName;
    if (fs::is_regular_file(local, ec)) return local;
    const fs::path builtin(SOMIAP_DEFAULT_CASCADE);
    if (!builtin.empty() && fs::is_regular_file(builtin, ec)) return builtin;
    return std::nullopt;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a readable directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void DetectOverrides::apply(DetectParams& p) const {
    if (scale_step) p.scale_step = *scale_step;
    if (min_neighbors) p.min_neighbors = *min_neighbors;
    if (min_size) p.min_size = *min_size;
}

namespace {

/// Runs `body`, turning library errors into a message and exit code.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

Manifest load_or_create(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return Manifest{};
    return load_manifest(path);
}

std::vector<HashAlgo> parse_algo_list(const std::string& spec) {
    if (spec == "all") return {kAllHashAlgos.begin(), kAllHashAlgos.end()};
    const auto a = parse_hash_algo(spec);
    if (!a) throw ContractError("unknown hash algorithm '" + spec + "'");
    return {*a};
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string fmt_distance(double v) { return std::isfinite(v) ? fmt(v, 4) : "inf"; }

// ---- pair files ----

struct PairSet {
    std::vector<ColorImage> images;
    std::vector<std::pair<std::size_t, std::size_t>> similar;
    std::vector<std::pair<std::size_t, std::size_t>> different;
};

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

/// Parses `pathA,pathB,label` rows; relative paths resolve against the
/// file's directory. Every bad row is reported; returns nullopt if any was.
std::optional<PairSet> load_pairs(const fs::path& file, std::ostream& err) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read pairs file '" + file.string() + "'");
    const fs::path base = file.parent_path();

    PairSet set;
    std::map<fs::path, std::size_t> cache;
    bool ok = true;
    const auto image_index = [&](const std::string& raw) -> std::size_t {
        fs::path p(raw);
        if (p.is_relative()) p = base / p;
        if (const auto it = cache.find(p); it != cache.end()) return it->second;
        set.images.push_back(load_image(p));
        cache.emplace(p, set.images.size() - 1);
        return set.images.size() - 1;
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(t);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
        if (lineno == 1 && fields.size() == 3 && fields[2] == "label") continue;
        const auto bad = [&](const std::string& msg) {
            err << file.string() << ":" << lineno << ": " << msg << "\n";
            ok = false;
        };
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            bad("expected 'pathA,pathB,label'");
            continue;
        }
        if (fields[2] != "similar" && fields[2] != "different") {
            bad("label must be 'similar' or 'different', got '" + fields[2] + "'");
            continue;
        }
        try {
            const std::pair<std::size_t, std::size_t> pr{image_index(fields[0]), image_index(fields[1])};
            (fields[2] == "similar" ? set.similar : set.different).push_back(pr);
        } catch (const Error& e) {
            bad(e.what());
        }
    }
    if (!ok) return std::nullopt;
    if (set.similar.empty() && set.different.empty()) {
        err << file.string() << ": no pairs\n";
        return std::nullopt;
    }
    return set;
}

CalibrationReport calibrate_pair_set(const PairSet& set, HashAlgo algo) {
    std::vector<HashDigest> digests;
    digests.reserve(set.images.size());
    for (const auto& img : set.images) digests.push_back(compute_hash(img, algo));
    const auto distances = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
        std::vector<int> out;
        for (const auto& [a, b] : pairs) out.push_back(hamming(digests[a], digests[b]));
        return out;
    };
    return calibrate_scan(algo, distances(set.similar), distances(set.different));
}

// ---- cascade download ----

std::size_t append_body(char* data, std::size_t size, std::size_t n, void* user) {
    static_cast<std::string*>(user)->append(data, size * n);
    return size * n;
}

std::string http_get(const std::string& url) {
    static const bool initialised = curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK;
    if (!initialised) throw IoError("libcurl initialisation failed");
    CURL* curl = curl_easy_init();
    if (!curl) throw IoError("libcurl initialisation failed");
    std::string body;
    char errbuf[CURL_ERROR_SIZE] = {0};
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 20L);
    curl_easy_setopt(curl, CURLOPT_TIMEOUT, 120L);
    curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, errbuf);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, append_body);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    if (rc != CURLE_OK)
        throw IoError("download of '" + url + "' failed: " + (errbuf[0] ? errbuf : curl_easy_strerror(rc)));
    return body;
}

volatile std::uint64_t g_bench_sink = 0;  // keeps timed hash calls observable

std::string sha256_of(std::string_view s) {
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

}  // namespace

// ---- enroll-place ----

int cmd_enroll_place(const EnrollArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const std::string id = args.id.empty() ? args.image.stem().string() : args.id;
        const std::string name = args.name.empty() ? id : args.name;
        ManifestLock lock(args.index);
        Manifest m = load_or_create(args.index);
        const ColorImage img = load_image(args.image);
        m.places = enroll_place(m.index(), img, id, name).entries;
        save_manifest(m, args.index);
        out << "enrolled " << id << " (" << m.places.back().descriptors.size() << " keypoints, "
            << m.places.size() << " places)\n";
        return int(kExitOk);
    });
}

// ---- train-faces ----

int cmd_train_faces(const TrainFacesArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        const auto policy = parse_recognizer_policy(args.algo);
        if (!policy) {
            err << "error: unknown algorithm '" << args.algo << "' (expected eigen, fisher, lbph or auto)\n";
            return kExitUsage;
        }

        ManifestLock lock(args.index);
        Manifest m = load_or_create(args.index);
        args.detect.apply(m.config.face.detect);
        m.config.face.policy = *policy;
        if (args.unknown_cutoff) m.config.face.unknown_cutoff = *args.unknown_cutoff;
        const FaceConfig& fc = m.config.face;
        const int size = fc.canonical_size;

        std::optional<CascadeModel> cascade;
        if (!args.no_detect) {
            const auto path = resolve_cascade_path(args.cascade);
            if (!path) throw IoError(std::string("no cascade found; pass --cascade, set ") + kCascadeEnvVar +
                                     " or run 'somiap cascade-fetch'");
            cascade = load_cascade(*path);
        }

        std::error_code ec;
        if (!fs::is_directory(args.faces_dir, ec)) throw IoError("'" + args.faces_dir.string() + "' is not a directory");
        std::vector<fs::path> label_dirs;
        for (const auto& entry : fs::directory_iterator(args.faces_dir))
            if (entry.is_directory()) label_dirs.push_back(entry.path());
        std::sort(label_dirs.begin(), label_dirs.end());
        if (label_dirs.empty()) throw ContractError("'" + args.faces_dir.string() + "' has no label subdirectories");

        Gallery gallery;
        Gallery raw;  // unequalised crops, for the illumination statistic
        bool failed = false;
        for (const auto& dir : label_dirs) {
            const std::string label = dir.filename().string();
            const auto files = list_images(dir);
            std::vector<fs::path> misses;
            int found = 0;
            for (const auto& file : files) {
                const GrayImage gray = to_gray(load_image(file));
                Rect rect{0, 0, gray.width(), gray.height()};
                if (cascade) {
                    const auto face = largest_face(detect_multiscale(*cascade, gray, fc.detect));
                    if (!face) {
                        misses.push_back(file);
                        continue;
                    }
                    rect = face->rect;
                }
                gallery.add(label, normalize_face(gray, rect, size));
                raw.add(label, resize_bilinear(crop(gray, rect), size, size));
                ++found;
            }
            if (found == 0) {
                failed = true;
                err << "error: label '" << label << "' has no detectable faces";
                if (files.empty()) err << " (no images)";
                err << "\n";
                for (const auto& f : misses) err << "  " << f.string() << "\n";
            } else {
                for (const auto& f : misses) err << "warning: no face in " << f.string() << ", skipped\n";
            }
        }
        if (failed) return kExitModel;

        const RecognizerAlgo algo = select_recognizer(fc.policy, raw, fc.illumination_threshold);
        if (algo == RecognizerAlgo::Fisher && gallery.labels().size() < 2)
            throw ContractError("fisher needs at least 2 labels, found " + std::to_string(gallery.labels().size()));
        FaceModel model = algo == RecognizerAlgo::Lbph ? FaceModel{train_lbph(gallery, fc.lbph_grid, fc.lbph_grid)}
                                                       : train_face_model(algo, gallery);
        model.unknown_cutoff = fc.unknown_cutoff;
        m.face_model = std::move(model);
        save_manifest(m, args.index);
        out << "trained " << to_string(algo) << " on " << gallery.samples.size() << " faces, "
            << gallery.labels().size() << " labels\n";
        return kExitOk;
    });
}

// ---- analyze ----

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (args.format != "json" && args.format != "text") {
            err << "error: unknown format '" << args.format << "'\n";
            return kExitUsage;
        }
        Manifest m = load_manifest(args.index);
        args.detect.apply(m.config.face.detect);

        std::optional<CascadeModel> cascade;
        if (!args.no_faces) {
            if (const auto path = resolve_cascade_path(args.cascade))
                cascade = load_cascade(*path);
            else
                err << "warning: no cascade found, face detection skipped\n";
        }
        const ColorImage img = load_image(args.image);
        const AnalysisReport report = analyze(m.index(), cascade ? &*cascade : nullptr,
                                              m.face_model ? &*m.face_model : nullptr, img,
                                              args.image.filename().string());

        if (args.format == "json") {
            out << to_json(report).dump(2) << "\n";
            return kExitOk;
        }
        out << "query " << report.query_id << "\n";
        out << "place " << (report.place ? report.place->entry_id : "NONE") << "\n";
        int rank = 0;
        for (const auto& c : report.candidates) {
            out << "candidate " << ++rank << " " << c.entry_id << " feature_matches=" << c.feature_matches
                << " hash_distance=" << c.hash_distance << " accepted=" << (c.accepted ? "yes" : "no") << "\n";
        }
        for (const auto& f : report.faces) {
            const Rect& r = f.detection.rect;
            out << "face " << r.x << "," << r.y << "," << r.w << "," << r.h << " neighbors=" << f.detection.neighbors;
            if (f.prediction)
                out << " label=" << f.prediction->label.value_or("UNKNOWN")
                    << " distance=" << fmt_distance(f.prediction->distance);
            out << "\n";
        }
        return kExitOk;
    });
}

// ---- calibrate ----

int cmd_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (args.format != "json" && args.format != "text") {
            err << "error: unknown format '" << args.format << "'\n";
            return kExitUsage;
        }
        const auto algos = parse_algo_list(args.algo);
        const auto set = load_pairs(args.pairs, err);
        if (!set) return kExitIo;

        std::vector<CalibrationReport> rows;
        for (const auto a : algos) rows.push_back(calibrate_pair_set(*set, a));

        if (args.format == "json") {
            Json j = {{"version", kManifestVersion}, {"rows", Json::array()}};
            for (const auto& r : rows)
                j["rows"].push_back({{"algo", to_string(r.algo)},
                                     {"weight_similar", r.weight_similar},
                                     {"weight_different", r.weight_different},
                                     {"threshold", r.threshold},
                                     {"accuracy", r.accuracy}});
            out << j.dump(2) << "\n";
            return kExitOk;
        }
        out << std::left << std::setw(13) << "algo" << std::setw(16) << "weight_similar" << std::setw(18)
            << "weight_different" << std::setw(11) << "threshold" << "accuracy\n";
        for (const auto& r : rows)
            out << std::left << std::setw(13) << to_string(r.algo) << std::setw(16) << fmt(r.weight_similar)
                << std::setw(18) << fmt(r.weight_different) << std::setw(11) << r.threshold << fmt(r.accuracy, 4)
                << "\n";
        return kExitOk;
    });
}

// ---- bench ----

std::vector<BenchRow> bench_hashes(const std::vector<ColorImage>& images, const std::vector<HashAlgo>& algos, int repeat) {
    if (images.empty()) throw ContractError("bench: no images");
    if (repeat < 1) throw ContractError("bench: repeat must be >= 1");
    using clock = std::chrono::steady_clock;

    std::vector<GrayImage> grays;
    grays.reserve(images.size());
    for (const auto& img : images) grays.push_back(to_gray(img));

    std::vector<BenchRow> rows;
    for (const HashAlgo algo : algos) {
        BenchRow row;
        row.algo = algo;
        row.min_ms = std::numeric_limits<double>::infinity();
        double total = 0.0;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const auto t0 = clock::now();
            for (int r = 0; r < repeat; ++r) {
                HashDigest d;
                switch (algo) {
                    case HashAlgo::DhashGray: d = dhash_gray(grays[i]); break;
                    case HashAlgo::PhashGray: d = phash_gray(grays[i]); break;
                    case HashAlgo::DhashColor: d = color_hash(images[i], HashBase::Dhash); break;
                    case HashAlgo::PhashColor: d = color_hash(images[i], HashBase::Phash); break;
                }
                g_bench_sink = g_bench_sink + static_cast<std::uint64_t>(d.popcount());
            }
            const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / repeat;
            total += ms;
            row.min_ms = std::min(row.min_ms, ms);
            row.max_ms = std::max(row.max_ms, ms);
        }
        row.mean_ms = total / static_cast<double>(images.size());
        rows.push_back(row);
    }
    return rows;
}

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (args.format != "json" && args.format != "text") {
            err << "error: unknown format '" << args.format << "'\n";
            return kExitUsage;
        }
        const auto algos = parse_algo_list(args.algo);
        const auto files = list_images(args.corpus);
        if (files.size() < 10) {
            err << "error: corpus '" << args.corpus.string() << "' has " << files.size()
                << " images, at least 10 are needed\n";
            return kExitIo;
        }
        std::vector<ColorImage> images;
        images.reserve(files.size());
        for (const auto& f : files) images.push_back(load_image(f));

        auto rows = bench_hashes(images, algos, args.repeat);
        if (args.pairs) {
            const auto set = load_pairs(*args.pairs, err);
            if (!set) return kExitIo;
            for (auto& r : rows) r.calibration = calibrate_pair_set(*set, r.algo);
        }

        if (args.format == "json") {
            Json j = {{"version", kManifestVersion}, {"images", images.size()}, {"rows", Json::array()}};
            for (const auto& r : rows) {
                Json row = {{"algo", to_string(r.algo)},
                            {"mean_ms", r.mean_ms},
                            {"max_ms", r.max_ms},
                            {"min_ms", r.min_ms},
                            {"weight_similar", nullptr},
                            {"weight_different", nullptr},
                            {"threshold", nullptr},
                            {"accuracy", nullptr}};
                if (r.calibration) {
                    row["weight_similar"] = r.calibration->weight_similar;
                    row["weight_different"] = r.calibration->weight_different;
                    row["threshold"] = r.calibration->threshold;
                    row["accuracy"] = r.calibration->accuracy;
                }
                j["rows"].push_back(row);
            }
            out << j.dump(2) << "\n";
            return kExitOk;
        }
        out << std::left << std::setw(13) << "algo" << std::setw(16) << "weight_similar" << std::setw(18)
            << "weight_different" << std::setw(11) << "threshold" << std::setw(10) << "accuracy" << std::setw(10)
            << "mean_ms" << std::setw(10) << "max_ms" << "min_ms\n";
        for (const auto& r : rows) {
            const auto& c = r.calibration;
            out << std::left << std::setw(13) << to_string(r.algo) << std::setw(16)
                << (c ? fmt(c->weight_similar) : "-") << std::setw(18) << (c ? fmt(c->weight_different) : "-")
                << std::setw(11) << (c ? std::to_string(c->threshold) : "-") << std::setw(10)
                << (c ? fmt(c->accuracy, 4) : "-") << std::setw(10) << fmt(r.mean_ms, 4) << std::setw(10)
                << fmt(r.max_ms, 4) << fmt(r.min_ms, 4) << "\n";
        }
        return kExitOk;
    });
}

// ---- cascade-fetch ----

int cmd_cascade_fetch(const CascadeFetchArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        std::error_code ec;
        if (!args.force && fs::is_regular_file(args.out, ec)) {
            const auto bytes = read_file_bytes(args.out);
            if (args.sha256.empty() || sha256_hex(bytes) == args.sha256) {
                out << args.out.string() << " already present\n";
                return kExitOk;
            }
            err << "warning: " << args.out.string() << " has an unexpected checksum, downloading again\n";
        }
        const std::string body = http_get(args.url);
        const std::string digest = sha256_of(body);
        if (!args.sha256.empty() && digest != args.sha256)
            throw IoError("checksum mismatch for '" + args.url + "': got " + digest + ", expected " + args.sha256);
        const CascadeModel model = parse_cascade(body);
        if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
        write_file_atomic(args.out, body);
        out << "wrote " << args.out.string() << " (" << model.stages.size() << " stages, " << model.features.size()
            << " features, sha256 " << digest << ")\n";
        return kExitOk;
    });
}

}  // namespace somiap
