#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "somiap/facedetect.hpp"
#include "somiap/facerecog.hpp"
#include "somiap/features.hpp"
#include "somiap/hashing.hpp"
#include "somiap/imagecore.hpp"

namespace somiap {

struct PlaceConfig {
    HashAlgo primary_algo = HashAlgo::PhashColor;
    std::vector<HashAlgo> algos{kAllHashAlgos.begin(), kAllHashAlgos.end()};
    std::map<HashAlgo, int> thresholds{{HashAlgo::DhashGray, 34},
                                       {HashAlgo::DhashColor, 36},
                                       {HashAlgo::PhashGray, 23},
                                       {HashAlgo::PhashColor, 23}};
    int min_feature_matches = 25;
    double ratio = 0.75;
    OrbParams orb;

    int threshold(HashAlgo algo) const;
};

struct FaceConfig {
    DetectParams detect;
    int canonical_size = kCanonicalFaceSize;
    RecognizerPolicy policy = RecognizerPolicy::Lbph;
    double illumination_threshold = 25.0;
    double unknown_cutoff = std::numeric_limits<double>::infinity();
    int lbph_grid = 8;
};

struct PipelineConfig {
    PlaceConfig place;
    FaceConfig face;
};

struct PlaceEntry {
    std::string id;
    std::string name;
    DescriptorSet descriptors;
    std::vector<HashDigest> digests;  ///< one per configured algorithm, in config order
    std::string source_hash;          ///< "sha256:<hex>" over dimensions and RGB bytes

    const HashDigest* digest(HashAlgo algo) const;
};

struct PlaceIndex {
    std::vector<PlaceEntry> entries;
    PipelineConfig config;

    const PlaceEntry* find(const std::string& id) const;
};

struct PlaceMatch {
    std::string entry_id;
    int feature_matches = 0;
    int hash_distance = -1;  ///< -1 when the feature gate rejected the entry
    bool accepted = false;

    bool operator==(const PlaceMatch&) const = default;
};

struct FaceResult {
    Detection detection;
    std::optional<Prediction> prediction;
};

struct StageTimings {
    double place_ms = 0.0;
    double detect_ms = 0.0;
    double recognize_ms = 0.0;
};

struct AnalysisReport {
    std::string query_id;
    std::optional<PlaceMatch> place;
    std::vector<PlaceMatch> candidates;
    std::vector<FaceResult> faces;
    StageTimings timings;
};

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Hex SHA-256 of "<w>x<h>\n" followed by the RGB bytes, prefixed "sha256:".
std::string content_checksum(const ColorImage& img);

/// Everything enrolment stores about one image: descriptors and digests.
PlaceEntry describe_place(const PipelineConfig& config, const ColorImage& img, std::string id, std::string name);

/// Returns a new index with the image appended. Throws ConflictError if the
/// id is already present.
PlaceIndex enroll_place(const PlaceIndex& index, const ColorImage& img, const std::string& id, const std::string& name);

/// Feature gate then hash comparison for every entry. Accepted matches come
/// first; within each group the order is hash distance ascending, feature
/// matches descending, then id.
std::vector<PlaceMatch> match_place(const PlaceIndex& index, const ColorImage& img);

/// Largest detection by area (earliest on ties), if any.
std::optional<Detection> largest_face(const std::vector<Detection>& detections);

/// Place matching plus face detection and recognition. A missing cascade
/// skips faces; a missing face model reports detections without predictions.
/// Sub-operation errors are rethrown with the stage name prefixed.
AnalysisReport analyze(const PlaceIndex& index, const CascadeModel* cascade, const FaceModel* faces,
                       const ColorImage& img, const std::string& query_id = "query");

}  // namespace somiap
