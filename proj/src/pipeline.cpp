#include "somiap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <openssl/evp.h>

#include "somiap/error.hpp"

namespace somiap {

int PlaceConfig::threshold(HashAlgo algo) const {
    const auto it = thresholds.find(algo);
    return it == thresholds.end() ? default_threshold(algo) : it->second;
}

const HashDigest* PlaceEntry::digest(HashAlgo algo) const {
    for (const auto& d : digests)
        if (d.algo() == algo) return &d;
    return nullptr;
}

const PlaceEntry* PlaceIndex::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) fail();
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) fail();
    }

    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) fail();
        std::string out;
        char buf[3];
        for (unsigned int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof buf, "%02x", md[i]);
            out += buf;
        }
        return out;
    }

private:
    [[noreturn]] static void fail() { throw Error("crypto", "SHA-256 computation failed"); }
    EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string content_checksum(const ColorImage& img) {
    const std::string header = std::to_string(img.width()) + "x" + std::to_string(img.height()) + "\n";
    Sha256 h;
    h.update(header.data(), header.size());
    h.update(img.data().data(), img.data().size());
    return "sha256:" + h.hex();
}

PlaceEntry describe_place(const PipelineConfig& config, const ColorImage& img, std::string id, std::string name) {
    PlaceEntry e;
    e.id = std::move(id);
    e.name = std::move(name);
    e.descriptors = orb_detect_describe(to_gray(img), config.place.orb);
    for (const HashAlgo a : config.place.algos) e.digests.push_back(compute_hash(img, a));
    e.source_hash = content_checksum(img);
    return e;
}

PlaceIndex enroll_place(const PlaceIndex& index, const ColorImage& img, const std::string& id, const std::string& name) {
    if (id.empty()) throw ContractError("enroll_place: id must not be empty");
    if (index.find(id)) throw ConflictError("enroll_place: id '" + id + "' is already enrolled");
    PlaceIndex out = index;
    out.entries.push_back(describe_place(index.config, img, id, name));
    return out;
}

std::vector<PlaceMatch> match_place(const PlaceIndex& index, const ColorImage& img) {
    std::vector<PlaceMatch> out;
    if (index.entries.empty()) return out;
    const PlaceConfig& cfg = index.config.place;
    const DescriptorSet query = orb_detect_describe(to_gray(img), cfg.orb);
    const HashDigest query_digest = compute_hash(img, cfg.primary_algo);
    const int threshold = cfg.threshold(cfg.primary_algo);

    for (const auto& entry : index.entries) {
        PlaceMatch m;
        m.entry_id = entry.id;
        m.feature_matches = match_descriptors(query, entry.descriptors, cfg.ratio).good_count;
        if (m.feature_matches >= cfg.min_feature_matches) {
            const HashDigest* stored = entry.digest(cfg.primary_algo);
            // The primary algorithm was not in the config when this entry was enrolled.
            if (!stored)
                throw ContractError("match_place: entry '" + entry.id + "' has no " +
                                    std::string(to_string(cfg.primary_algo)) + " digest");
            m.hash_distance = hamming(query_digest, *stored);
            m.accepted = m.hash_distance <= threshold;
        }
        out.push_back(std::move(m));
    }

    std::sort(out.begin(), out.end(), [](const PlaceMatch& a, const PlaceMatch& b) {
        if (a.accepted != b.accepted) return a.accepted;
        if (a.hash_distance != b.hash_distance) return a.hash_distance < b.hash_distance;
        if (a.feature_matches != b.feature_matches) return a.feature_matches > b.feature_matches;
        return a.entry_id < b.entry_id;
    });
    return out;
}

std::optional<Detection> largest_face(const std::vector<Detection>& detections) {
    std::optional<Detection> best;
    for (const auto& d : detections)
        if (!best || d.rect.area() > best->rect.area()) best = d;
    return best;
}

namespace {

template <typename F>
auto staged(const char* stage, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(stage) + ": " + e.what());
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

AnalysisReport analyze(const PlaceIndex& index, const CascadeModel* cascade, const FaceModel* faces,
                       const ColorImage& img, const std::string& query_id) {
    AnalysisReport report;
    report.query_id = query_id;

    auto t0 = std::chrono::steady_clock::now();
    report.candidates = staged("place", [&] { return match_place(index, img); });
    if (!report.candidates.empty() && report.candidates.front().accepted) report.place = report.candidates.front();
    report.timings.place_ms = elapsed_ms(t0);

    if (!cascade) return report;

    const FaceConfig& fc = index.config.face;
    const GrayImage gray = to_gray(img);
    t0 = std::chrono::steady_clock::now();
    const auto detections = staged("detect", [&] { return detect_multiscale(*cascade, gray, fc.detect); });
    report.timings.detect_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    for (const auto& d : detections) {
        FaceResult r{d, std::nullopt};
        if (faces) {
            r.prediction = staged("recognize", [&] {
                return predict(*faces, normalize_face(gray, d.rect, faces->width()));
            });
        }
        report.faces.push_back(std::move(r));
    }
    report.timings.recognize_ms = elapsed_ms(t0);
    return report;
}

}  // namespace somiap
