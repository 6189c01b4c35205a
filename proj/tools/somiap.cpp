#include <iostream>

#include <CLI11.hpp>

#include "somiap/commands.hpp"

using namespace somiap;

namespace {

void add_detect_flags(CLI::App* cmd, DetectOverrides& d) {
    cmd->add_option("--scale-step", d.scale_step, "Detector pyramid scale step")->check(CLI::Range(1.0001, 10.0));
    cmd->add_option("--min-neighbors", d.min_neighbors, "Raw detections needed per grouped face")->check(CLI::NonNegativeNumber);
    cmd->add_option("--min-size", d.min_size, "Smallest window side in pixels")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Place and face analysis for photos"};
    app.require_subcommand(1);

    EnrollArgs enroll;
    auto* c_enroll = app.add_subcommand("enroll-place", "Add an image to the place index");
    c_enroll->add_option("index", enroll.index, "Manifest path (created if missing)")->required();
    c_enroll->add_option("image", enroll.image, "Image to enroll")->required();
    c_enroll->add_option("--id", enroll.id, "Place id (default: image file stem)");
    c_enroll->add_option("--name", enroll.name, "Display name (default: id)");

    TrainFacesArgs train;
    auto* c_train = app.add_subcommand("train-faces", "Train the face recognizer from one directory per label");
    c_train->add_option("index", train.index, "Manifest path (created if missing)")->required();
    c_train->add_option("faces-dir", train.faces_dir, "Directory of label subdirectories")->required();
    c_train->add_option("--algo", train.algo, "eigen, fisher, lbph or auto")->capture_default_str();
    c_train->add_option("--cascade", train.cascade, "Cascade XML (default: $SOMIAP_CASCADE, then data/)");
    c_train->add_option("--unknown-cutoff", train.unknown_cutoff, "Distance above which predictions are UNKNOWN");
    c_train->add_flag("--no-detect", train.no_detect, "Images are already cropped faces");
    add_detect_flags(c_train, train.detect);

    AnalyzeArgs analyze_args;
    auto* c_analyze = app.add_subcommand("analyze", "Report the place and the people in an image");
    c_analyze->add_option("index", analyze_args.index, "Manifest path")->required();
    c_analyze->add_option("image", analyze_args.image, "Query image")->required();
    c_analyze->add_option("--format", analyze_args.format, "json or text")->capture_default_str();
    c_analyze->add_option("--cascade", analyze_args.cascade, "Cascade XML (default: $SOMIAP_CASCADE, then data/)");
    c_analyze->add_flag("--no-faces", analyze_args.no_faces, "Skip face detection");
    add_detect_flags(c_analyze, analyze_args.detect);

    CalibrateArgs calib;
    auto* c_calib = app.add_subcommand("calibrate", "Pick hash thresholds from labelled image pairs");
    c_calib->add_option("pairs", calib.pairs, "CSV of pathA,pathB,label rows")->required();
    c_calib->add_option("--algo", calib.algo, "Hash algorithm or 'all'")->capture_default_str();
    c_calib->add_option("--format", calib.format, "text or json")->capture_default_str();

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Time the hash algorithms over a corpus");
    c_bench->add_option("corpus", bench.corpus, "Directory with at least 10 images")->required();
    c_bench->add_option("--algo", bench.algo, "Hash algorithm or 'all'")->capture_default_str();
    c_bench->add_option("--repeat", bench.repeat, "Timed runs per image")->check(CLI::PositiveNumber)->capture_default_str();
    c_bench->add_option("--pairs", bench.pairs, "Pairs CSV for the calibration columns");
    c_bench->add_option("--format", bench.format, "text or json")->capture_default_str();

    CascadeFetchArgs fetch;
    auto* c_fetch = app.add_subcommand("cascade-fetch", "Download the frontal face cascade and verify its checksum");
    c_fetch->add_option("--url", fetch.url, "Source URL (file:// works too)")->capture_default_str();
    c_fetch->add_option("--out", fetch.out, "Destination path")->capture_default_str();
    c_fetch->add_option("--sha256", fetch.sha256, "Expected SHA-256 (empty to skip)")->capture_default_str();
    c_fetch->add_flag("--force", fetch.force, "Download even if the file is present");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (c_enroll->parsed()) return cmd_enroll_place(enroll, std::cout, std::cerr);
    if (c_train->parsed()) return cmd_train_faces(train, std::cout, std::cerr);
    if (c_analyze->parsed()) return cmd_analyze(analyze_args, std::cout, std::cerr);
    if (c_calib->parsed()) return cmd_calibrate(calib, std::cout, std::cerr);
    if (c_bench->parsed()) return cmd_bench(bench, std::cout, std::cerr);
    if (c_fetch->parsed()) return cmd_cascade_fetch(fetch, std::cout, std::cerr);
    return kExitUsage;
}
