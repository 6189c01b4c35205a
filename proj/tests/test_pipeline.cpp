#include <doctest.h>

#include <algorithm>
#include <set>
#include <tuple>

#include "somiap/error.hpp"
#include "somiap/manifest.hpp"
#include "somiap/pipeline.hpp"
#include "support.hpp"

using namespace somiap;
using namespace testsupport;

namespace {

PlaceIndex scene_index(int n, int w = 200, int h = 160) {
    PlaceIndex idx;
    for (int i = 0; i < n; ++i)
        idx = enroll_place(idx, textured_scene(w, h, 3000 + i), "scene" + std::to_string(i), "Scene " + std::to_string(i));
    return idx;
}

std::set<std::string> accepted_ids(const std::vector<PlaceMatch>& ms) {
    std::set<std::string> out;
    for (const auto& m : ms)
        if (m.accepted) out.insert(m.entry_id);
    return out;
}

}  // namespace

TEST_CASE("content checksum") {
    ColorImage img(1, 1);
    // sha256 of "1x1\n" followed by three zero bytes.
    CHECK(content_checksum(img) == "sha256:" + sha256_hex(std::vector<std::uint8_t>{'1', 'x', '1', '\n', 0, 0, 0}));
    CHECK(sha256_hex(std::vector<std::uint8_t>{}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    ColorImage other(1, 1);
    other.pixel(0, 0)[0] = 1;
    CHECK(content_checksum(other) != content_checksum(img));
}

TEST_CASE("enroll_place") {
    const PlaceIndex empty;
    const ColorImage img = textured_scene(120, 100, 1);
    const PlaceIndex one = enroll_place(empty, img, "a", "Place A");
    CHECK(empty.entries.empty());
    REQUIRE(one.entries.size() == 1);
    const PlaceEntry& e = one.entries[0];
    CHECK(e.digests.size() == 4);
    for (const HashAlgo a : kAllHashAlgos) {
        REQUIRE(e.digest(a));
        CHECK(*e.digest(a) == compute_hash(img, a));
    }
    CHECK(!e.descriptors.empty());
    CHECK(e.source_hash == content_checksum(img));
    CHECK_THROWS_AS(enroll_place(one, img, "a", "again"), ConflictError);
    CHECK_THROWS_AS(enroll_place(one, img, "", "no id"), ContractError);
}

TEST_CASE("enroll, serialize, load keeps entries bit identical") {
    const PlaceIndex idx = scene_index(2);
    const auto j = to_json(idx.entries[1]);
    const PlaceEntry back = place_entry_from_json(Json::parse(j.dump()));
    CHECK(back.descriptors == idx.entries[1].descriptors);
    CHECK(back.digests == idx.entries[1].digests);
    CHECK(back.source_hash == idx.entries[1].source_hash);
}

TEST_CASE("match_place basics") {
    CHECK(match_place(PlaceIndex{}, textured_scene(100, 100, 5)).empty());

    const PlaceIndex idx = scene_index(6);
    const ColorImage q = textured_scene(200, 160, 3002);
    const auto ms = match_place(idx, q);
    REQUIRE(ms.size() == 6);
    CHECK(ms[0].entry_id == "scene2");
    CHECK(ms[0].accepted);
    CHECK(ms[0].hash_distance == 0);
    for (const auto& m : ms) {
        if (m.feature_matches < idx.config.place.min_feature_matches) CHECK(m.hash_distance == -1);
        if (m.accepted) {
            CHECK(m.feature_matches >= idx.config.place.min_feature_matches);
            CHECK(m.hash_distance <= 23);
        }
    }
}

TEST_CASE("noisy query ranks the source scene first") {
    const PlaceIndex idx = scene_index(10);
    Rng rng(71);
    const auto ms = match_place(idx, add_noise(textured_scene(200, 160, 3004), 5.0, rng));
    REQUIRE(!ms.empty());
    CHECK(ms[0].entry_id == "scene4");
    CHECK(ms[0].accepted);
}

TEST_CASE("gating monotonicity") {
    PlaceIndex idx = scene_index(5);
    Rng rng(72);
    const ColorImage q = add_noise(textured_scene(200, 160, 3001), 8.0, rng);
    std::set<std::string> prev = accepted_ids(match_place(idx, q));
    for (const int gate : {50, 100, 200, 400}) {
        idx.config.place.min_feature_matches = gate;
        const auto now = accepted_ids(match_place(idx, q));
        CHECK(std::includes(prev.begin(), prev.end(), now.begin(), now.end()));
        prev = now;
    }
    idx = scene_index(5);
    prev = accepted_ids(match_place(idx, q));
    for (const int t : {20, 10, 5, 0}) {
        idx.config.place.thresholds[HashAlgo::PhashColor] = t;
        const auto now = accepted_ids(match_place(idx, q));
        CHECK(std::includes(prev.begin(), prev.end(), now.begin(), now.end()));
        prev = now;
    }
}

TEST_CASE("ranking is a strict total order") {
    const PlaceIndex idx = scene_index(4);
    const ColorImage q = textured_scene(200, 160, 3003);
    const auto ms = match_place(idx, q);
    for (std::size_t i = 1; i < ms.size(); ++i) {
        const auto& a = ms[i - 1];
        const auto& b = ms[i];
        const auto ka = std::make_tuple(!a.accepted, a.hash_distance, -a.feature_matches, a.entry_id);
        const auto kb = std::make_tuple(!b.accepted, b.hash_distance, -b.feature_matches, b.entry_id);
        CHECK(ka < kb);
    }
}

TEST_CASE("analyze degrades gracefully") {
    const ColorImage blank(120, 90);
    const AnalysisReport r = analyze(PlaceIndex{}, nullptr, nullptr, blank);
    CHECK(!r.place);
    CHECK(r.faces.empty());
    CHECK(r.candidates.empty());

    REQUIRE(std::filesystem::exists(kCascadePath));
    const CascadeModel cascade = load_cascade(kCascadePath);
    const AnalysisReport r2 = analyze(PlaceIndex{}, &cascade, nullptr, blank);
    CHECK(!r2.place);
    CHECK(r2.faces.empty());

    const ColorImage portrait = load_image(kFixtureDir / "portrait.png");
    const AnalysisReport r3 = analyze(PlaceIndex{}, &cascade, nullptr, portrait);
    REQUIRE(r3.faces.size() == 1);
    CHECK(!r3.faces[0].prediction);
}

TEST_CASE("analyze attributes errors to the stage") {
    PlaceIndex idx = scene_index(1);
    idx.config.place.primary_algo = HashAlgo::DhashGray;
    idx.entries[0].digests.clear();
    try {
        analyze(idx, nullptr, nullptr, textured_scene(200, 160, 3000));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("place: ", 0) == 0);
        CHECK(e.kind() == "contract");
    }
}

TEST_CASE("report json round trip") {
    const PlaceIndex idx = scene_index(2);
    REQUIRE(std::filesystem::exists(kCascadePath));
    const CascadeModel cascade = load_cascade(kCascadePath);
    Gallery g;
    Rng rng(73);
    for (int i = 0; i < 3; ++i) g.add("x", class_texture(64, 1, rng));
    for (int i = 0; i < 3; ++i) g.add("y", class_texture(64, 2, rng));
    const FaceModel fm = train_face_model(RecognizerAlgo::Lbph, g);
    const AnalysisReport r = analyze(idx, &cascade, &fm, load_image(kFixtureDir / "portrait.png"), "q1");
    const Json j = to_json(r);
    const AnalysisReport back = report_from_json(Json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(back.query_id == "q1");
    REQUIRE(back.faces.size() == 1);
    CHECK(back.faces[0].prediction->label == r.faces[0].prediction->label);
    CHECK(back.faces[0].prediction->distance == r.faces[0].prediction->distance);
}
