#include <doctest.h>

#include <csignal>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "somiap/error.hpp"
#include "somiap/manifest.hpp"
#include "support.hpp"

using namespace somiap;
using namespace testsupport;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Manifest sample_manifest() {
    Manifest m;
    PlaceIndex idx;
    idx = enroll_place(idx, textured_scene(160, 120, 11), "a", "Place A");
    idx = enroll_place(idx, textured_scene(160, 120, 12), "b", "Place B");
    m.places = idx.entries;
    Gallery g;
    Rng rng(13);
    for (int i = 0; i < 3; ++i) g.add("x", class_texture(64, 3, rng));
    for (int i = 0; i < 3; ++i) g.add("y", class_texture(64, 4, rng));
    m.face_model = train_face_model(RecognizerAlgo::Lbph, g);
    return m;
}

}  // namespace

TEST_CASE("manifest round trip") {
    const Manifest m = sample_manifest();
    const std::string text = dump_manifest(m);
    const Manifest back = parse_manifest(text);
    CHECK(dump_manifest(back) == text);
    REQUIRE(back.places.size() == 2);
    CHECK(back.places[1].descriptors == m.places[1].descriptors);
    CHECK(back.places[1].digests == m.places[1].digests);
    REQUIRE(back.face_model);
    const GrayImage probe = GrayImage(64, 64, 77);
    CHECK(predict(*back.face_model, probe).distance == predict(*m.face_model, probe).distance);
}

TEST_CASE("face models of every kind survive serialization") {
    Gallery g;
    Rng rng(14);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i) g.add("c" + std::to_string(c), class_texture(32, 10 + c, rng));
    for (const auto algo : {RecognizerAlgo::Eigen, RecognizerAlgo::Fisher, RecognizerAlgo::Lbph}) {
        const FaceModel fm = train_face_model(algo, g);
        const FaceModel back = face_model_from_json(Json::parse(to_json(fm).dump()));
        for (const auto& s : g.samples) {
            const auto a = predict(fm, s.image), b = predict(back, s.image);
            CHECK(a.label == b.label);
            CHECK(a.distance == b.distance);
        }
    }
}

TEST_CASE("config defaults and overrides") {
    const PipelineConfig d = config_from_json(Json::object());
    CHECK(d.place.min_feature_matches == 25);
    CHECK(d.place.primary_algo == HashAlgo::PhashColor);
    CHECK(std::isinf(d.face.unknown_cutoff));
    Json j = to_json(PipelineConfig{});
    j["place"]["min_feature_matches"] = 40;
    j["face"]["unknown_cutoff"] = 55.5;
    const PipelineConfig c = config_from_json(j);
    CHECK(c.place.min_feature_matches == 40);
    CHECK(c.face.unknown_cutoff == 55.5);
    CHECK(config_from_json(to_json(c)).face.unknown_cutoff == 55.5);
}

TEST_CASE("manifest rejects bad input") {
    Json j = to_json(sample_manifest());
    j["version"] = 99;
    CHECK_THROWS_AS(manifest_from_json(j), ParseError);
    CHECK_THROWS_AS(parse_manifest("{"), ParseError);
    CHECK_THROWS_AS(parse_manifest("[]"), ParseError);

    Json dup = to_json(sample_manifest());
    dup["places"][1]["id"] = "a";
    CHECK_THROWS_AS(manifest_from_json(dup), ParseError);

    Json bad_desc = to_json(sample_manifest());
    bad_desc["places"][0]["descriptors"][0] = "zz";
    CHECK_THROWS_AS(manifest_from_json(bad_desc), ParseError);

    TempDir dir;
    CHECK_THROWS_AS(load_manifest(dir / "missing.json"), IoError);
    {
        std::ofstream(dir / "broken.json") << "{\"version\": 1, ";
    }
    try {
        load_manifest(dir / "broken.json");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
}

TEST_CASE("atomic write replaces the file and leaves no temporaries") {
    TempDir dir;
    const auto path = dir / "m.json";
    write_file_atomic(path, "old");
    std::size_t calls = 0, last = 0;
    const std::string big(200000, 'x');
    write_file_atomic(path, big, [&](std::size_t n) {
        ++calls;
        CHECK(n > last);
        last = n;
    });
    CHECK(slurp(path) == big);
    CHECK(calls >= 3);
    CHECK(last == big.size());
    int files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    CHECK(files == 1);
}

TEST_CASE("killed writer leaves the previous manifest intact") {
    TempDir dir;
    const auto path = dir / "m.json";
    const Manifest m = sample_manifest();
    save_manifest(m, path);
    const std::string before = slurp(path);

    Manifest bigger = m;
    bigger.places.push_back(m.places[0]);
    bigger.places.back().id = "c";
    const std::string payload = dump_manifest(bigger);
    REQUIRE(payload.size() > 3 * 65536);

    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        write_file_atomic(path, payload, [](std::size_t n) {
            if (n >= 65536) raise(SIGKILL);
        });
        _exit(0);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    CHECK(WIFSIGNALED(status));
    CHECK(slurp(path) == before);
    CHECK(load_manifest(path).places.size() == 2);
}

TEST_CASE("manifest lock is exclusive") {
    TempDir dir;
    const auto path = dir / "m.json";
    {
        ManifestLock lock(path);
        const pid_t pid = fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            try {
                ManifestLock other(path);
                _exit(0);
            } catch (const IoError&) {
                _exit(7);
            }
        }
        int status = 0;
        waitpid(pid, &status, 0);
        CHECK(WEXITSTATUS(status) == 7);
    }
    ManifestLock again(path);
}
