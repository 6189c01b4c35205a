#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "somiap/facerecog.hpp"
#include "somiap/pipeline.hpp"

namespace somiap {

inline constexpr int kManifestVersion = 1;

/// On-disk state of one index: configuration, enrolled places and the
/// optional trained face model.
struct Manifest {
    int version = kManifestVersion;
    PipelineConfig config;
    std::vector<PlaceEntry> places;
    std::optional<FaceModel> face_model;

    PlaceIndex index() const { return {places, config}; }
};

using Json = nlohmann::json;

Json to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const Json& j);

Json to_json(const PlaceEntry& entry);
PlaceEntry place_entry_from_json(const Json& j);

Json to_json(const FaceModel& model);
FaceModel face_model_from_json(const Json& j);

Json to_json(const Manifest& manifest);
/// Throws ParseError for schema violations and unknown versions.
Manifest manifest_from_json(const Json& j);

Json to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const Json& j);

std::string dump_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

Manifest load_manifest(const std::filesystem::path& path);

/// Writes `content` to a temporary file beside `path`, fsyncs it and renames
/// it over `path`. `progress`, when given, is called after each chunk with
/// the number of bytes written so far.
void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const std::function<void(std::size_t)>& progress = {});

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Exclusive advisory lock on "<path>.lock" held for the object's lifetime.
/// Throws IoError if another process holds it.
class ManifestLock {
public:
    explicit ManifestLock(const std::filesystem::path& manifest_path);
    ~ManifestLock();
    ManifestLock(const ManifestLock&) = delete;
    ManifestLock& operator=(const ManifestLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace somiap
