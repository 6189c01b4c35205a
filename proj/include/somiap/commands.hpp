#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "somiap/error.hpp"
#include "somiap/facedetect.hpp"
#include "somiap/hashing.hpp"
#include "somiap/imagecore.hpp"

namespace somiap {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitIo = 2,
    kExitModel = 3,
};

/// IO, decode and parse failures map to kExitIo, everything else to kExitModel.
int exit_code_for(const Error& e);

inline constexpr const char* kCascadeFileName = "haarcascade_frontalface_default.xml";
inline constexpr const char* kCascadeEnvVar = "SOMIAP_CASCADE";
inline constexpr const char* kCascadeUrl =
    "https://raw.githubusercontent.com/opencv/opencv/4.x/data/haarcascades/haarcascade_frontalface_default.xml";
inline constexpr const char* kCascadeSha256 = "0f7d4527844eb514d4a4948e822da90fbb16a34a0bbbbc6adc6498747a5aafb0";

/// Cascade lookup: explicit path, then $SOMIAP_CASCADE, then
/// ./data/<file>, then the install-time default. Returns nullopt when the
/// fallbacks find nothing; an explicit or environment path is returned as is.
std::optional<std::filesystem::path> resolve_cascade_path(const std::optional<std::filesystem::path>& explicit_path);

/// Files under `dir` with an image extension (png, jpg, jpeg, ppm, pgm),
/// sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

struct DetectOverrides {
    std::optional<double> scale_step;
    std::optional<int> min_neighbors;
    std::optional<int> min_size;

    void apply(DetectParams& p) const;
};

struct EnrollArgs {
    std::filesystem::path index;
    std::filesystem::path image;
    std::string id;  ///< defaults to the image file stem
    std::string name;
};
int cmd_enroll_place(const EnrollArgs& args, std::ostream& out, std::ostream& err);

struct TrainFacesArgs {
    std::filesystem::path index;
    std::filesystem::path faces_dir;
    std::string algo = "lbph";
    std::optional<std::filesystem::path> cascade;
    DetectOverrides detect;
    std::optional<double> unknown_cutoff;
    bool no_detect = false;  ///< treat every image as an already cropped face
};
int cmd_train_faces(const TrainFacesArgs& args, std::ostream& out, std::ostream& err);

struct AnalyzeArgs {
    std::filesystem::path index;
    std::filesystem::path image;
    std::string format = "json";
    std::optional<std::filesystem::path> cascade;
    DetectOverrides detect;
    bool no_faces = false;
};
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);

struct CalibrateArgs {
    std::filesystem::path pairs;
    std::string algo = "all";
    std::string format = "text";
};
int cmd_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err);

struct BenchRow {
    HashAlgo algo = HashAlgo::DhashGray;
    double mean_ms = 0.0;
    double max_ms = 0.0;
    double min_ms = 0.0;
    std::optional<CalibrationReport> calibration;
};

/// Times hash computation only. Gray algorithms hash a pre-converted gray
/// plane; colour algorithms hash the interleaved image directly. Each image
/// is hashed `repeat` times and its per-image time is the average.
std::vector<BenchRow> bench_hashes(const std::vector<ColorImage>& images, const std::vector<HashAlgo>& algos, int repeat = 1);

struct BenchArgs {
    std::filesystem::path corpus;
    std::string algo = "all";
    int repeat = 3;
    std::optional<std::filesystem::path> pairs;
    std::string format = "text";
};
int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err);

struct CascadeFetchArgs {
    std::string url = kCascadeUrl;
    std::filesystem::path out = std::filesystem::path("data") / kCascadeFileName;
    std::string sha256 = kCascadeSha256;  ///< empty disables the check
    bool force = false;
};
int cmd_cascade_fetch(const CascadeFetchArgs& args, std::ostream& out, std::ostream& err);

}  // namespace somiap
