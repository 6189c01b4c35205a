#include <doctest.h>

#include <cmath>
#include <fstream>
#include <tuple>
#include <sstream>

#include "somiap/error.hpp"
#include "somiap/facedetect.hpp"
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

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

const CascadeModel& real_cascade() {
    static const CascadeModel m = [] {
        REQUIRE_MESSAGE(std::filesystem::exists(kCascadePath),
                        "frontal face cascade missing; run tools/fetch_cascade.sh");
        return load_cascade(kCascadePath);
    }();
    return m;
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

// Transitive closure by breadth-first search over the similarity graph.
std::vector<Detection> group_oracle(const std::vector<Rect>& raw, int min_neighbors) {
    const std::size_t n = raw.size();
    std::vector<int> comp(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> queue{s};
        comp[s] = next;
        for (std::size_t q = 0; q < queue.size(); ++q)
            for (std::size_t j = 0; j < n; ++j)
                if (comp[j] < 0 && similar_rects(raw[queue[q]], raw[j])) {
                    comp[j] = next;
                    queue.push_back(j);
                }
        ++next;
    }
    std::vector<Detection> out;
    for (int c = 0; c < next; ++c) {
        double sx = 0, sy = 0, sw = 0, sh = 0;
        int count = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (comp[i] == c) {
                sx += raw[i].x;
                sy += raw[i].y;
                sw += raw[i].w;
                sh += raw[i].h;
                ++count;
            }
        if (count < min_neighbors + 1) continue;
        const auto r = [count](double s) { return int(std::floor(s / count + 0.5)); };
        out.push_back({{r(sx), r(sy), r(sw), r(sh)}, count});
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.rect.y, a.rect.x, a.rect.w, a.rect.h) < std::tie(b.rect.y, b.rect.x, b.rect.w, b.rect.h);
    });
    return out;
}

}  // namespace

TEST_CASE("minimal cascade parses") {
    const CascadeModel m = load_cascade(kFixtureDir / "minimal_cascade.xml");
    CHECK(m.window_w == 6);
    CHECK(m.window_h == 6);
    REQUIRE(m.stages.size() == 1);
    REQUIRE(m.stages[0].weak.size() == 1);
    CHECK(m.stages[0].weak[0].threshold == 0.5);
    CHECK(m.stages[0].weak[0].left_value == -1.0);
    CHECK(m.stages[0].weak[0].right_value == 1.0);
    REQUIRE(m.features.size() == 1);
    CHECK(m.features[0].rects.size() == 2);
    CHECK(m.features[0].rects[1].rect == Rect{0, 0, 3, 6});
    CHECK(m.features[0].rects[1].weight == 2.0);
}

TEST_CASE("minimal cascade on a constant image") {
    CascadeModel m = load_cascade(kFixtureDir / "minimal_cascade.xml");
    const IntegralImage ii(GrayImage(10, 10, 120));
    CHECK_FALSE(eval_window(m, ii, 2, 2, 1.0));
    m.stages[0].threshold = -2.0;
    CHECK(eval_window(m, ii, 2, 2, 1.0));
    CHECK_THROWS_AS(eval_window(m, ii, 6, 0, 1.0), BoundsError);
}

TEST_CASE("serialize round trip") {
    const CascadeModel m = load_cascade(kFixtureDir / "minimal_cascade.xml");
    CHECK(parse_cascade(serialize_cascade(m)) == m);
    const CascadeModel& r = real_cascade();
    CHECK(parse_cascade(serialize_cascade(r)) == r);
}

TEST_CASE("real cascade structure matches the file") {
    const std::string text = slurp(kCascadePath);
    const CascadeModel& m = real_cascade();
    CHECK(m.window_w == 24);
    CHECK(m.window_h == 24);
    CHECK(m.stages.size() == count_of(text, "<stageThreshold>"));
    CHECK(m.features.size() == count_of(text, "<rects>"));
    std::size_t weak = 0;
    for (const auto& s : m.stages) {
        weak += s.weak.size();
        for (const auto& w : s.weak) {
            CHECK(w.feature >= 0);
            CHECK(w.feature < int(m.features.size()));
        }
    }
    CHECK(weak == count_of(text, "<internalNodes>"));
}

TEST_CASE("parse errors") {
    const std::string base = slurp(kFixtureDir / "minimal_cascade.xml");
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "<featureType>HAAR", "<featureType>LBP")), UnsupportedModelError);
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "<stageType>BOOST", "<stageType>GENTLE")), UnsupportedModelError);
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "0 0 3 6 2.</_>", "0 0 3 6 2.</_></rects><tilted>1</tilted><rects>")),
                    UnsupportedModelError);
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "0 -1 0 5.0", "0 -1 3 5.0")), ParseError);
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "5.0000000000000000e-01", "5.0x")), ParseError);
    CHECK_THROWS_AS(parse_cascade(replace_once(base, "0 0 6 6 -1.", "0 0 7 6 -1.")), ParseError);
    CHECK_THROWS_AS(parse_cascade("<opencv_storage><cascade>"), ParseError);
    try {
        parse_cascade(replace_once(base, "0 -1 0 5.0000000000000000e-01", "1 2 0 0.5 0 -1 0 0.5"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("stages/_[0]/weakClassifiers/_[0]") != std::string::npos);
    }
}

TEST_CASE("scaled geometry") {
    CHECK(scaled_rect({1, 2, 3, 4}, 10, 20, 2.0) == Rect{12, 24, 6, 8});
    // Corners round independently: 0.5*1.5 -> 1, 2.5*1.5 = 3.75 -> 4.
    CHECK(scaled_rect({1, 0, 2, 1}, 0, 0, 1.5) == Rect{2, 0, 3, 2});
    const CascadeModel& m = real_cascade();
    CHECK(scaled_window(m, 3, 4, 1.1) == Rect{3, 4, 26, 26});
}

TEST_CASE("eval_window is scale consistent") {
    CascadeModel m = load_cascade(kFixtureDir / "minimal_cascade.xml");
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayImage g = random_gray(12, 12, rng);
        GrayImage up(24, 24);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) up.at(x, y) = g.at(x / 2, y / 2);
        const IntegralImage a(g), b(up);
        for (const double thr : {-2.0, 0.0, 0.5}) {
            m.stages[0].threshold = thr;
            const int x = rng.uniform_int(0, 6), y = rng.uniform_int(0, 6);
            CHECK(eval_window(m, a, x, y, 1.0) == eval_window(m, b, 2 * x, 2 * y, 2.0));
        }
    }
}

TEST_CASE("early exit never changes the verdict") {
    const CascadeModel& m = real_cascade();
    const GrayImage portrait = to_gray(load_image(kFixtureDir / "portrait.png"));
    const IntegralImage ii(portrait);
    Rng rng(42);
    int accepted = 0;
    for (int i = 0; i < 1000; ++i) {
        const double s = std::pow(1.1, rng.uniform_int(0, 20));
        const Rect win = scaled_window(m, 0, 0, s);
        const int x = rng.uniform_int(0, portrait.width() - win.w);
        const int y = rng.uniform_int(0, portrait.height() - win.h);
        const bool a = eval_window(m, ii, x, y, s, true);
        CHECK(a == eval_window(m, ii, x, y, s, false));
        accepted += a;
    }
    MESSAGE("accepted windows: " << accepted);
}

TEST_CASE("detection edge cases") {
    const CascadeModel& m = real_cascade();
    CHECK(detect_multiscale(m, GrayImage(100, 80, 128)).empty());
    CHECK(detect_multiscale(m, GrayImage(20, 20, 128)).empty());
    DetectParams bad;
    bad.scale_step = 1.0;
    CHECK_THROWS_AS(detect_multiscale(m, GrayImage(50, 50, 1), bad), ContractError);
}

TEST_CASE("portrait yields one face") {
    const CascadeModel& m = real_cascade();
    const GrayImage g = to_gray(load_image(kFixtureDir / "portrait.png"));
    const Rect truth = read_annotation(kFixtureDir / "portrait_face.txt");
    const auto dets = detect_multiscale(m, g);
    REQUIRE(dets.size() == 1);
    CHECK(iou(dets[0].rect, truth) >= 0.5);
    CHECK(dets[0].neighbors >= 4);
    CHECK(detect_multiscale(m, g) == dets);
}

TEST_CASE("group_rects examples") {
    const std::vector<Rect> four(4, Rect{10, 10, 30, 30});
    const auto g = group_rects(four, 3);
    REQUIRE(g.size() == 1);
    CHECK(g[0].neighbors == 4);
    CHECK(g[0].rect == Rect{10, 10, 30, 30});
    CHECK(group_rects({{0, 0, 20, 20}, {200, 200, 20, 20}}, 3).empty());
    CHECK(group_rects({}, 0).empty());
}

TEST_CASE("group_rects equals the closure oracle") {
    Rng rng(43);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Rect> raw;
        const int clusters = rng.uniform_int(1, 5);
        for (int c = 0; c < clusters; ++c) {
            const int cx = rng.uniform_int(0, 300), cy = rng.uniform_int(0, 300), cw = rng.uniform_int(20, 80);
            const int n = rng.uniform_int(1, 8);
            for (int i = 0; i < n; ++i) {
                const int w = cw + rng.uniform_int(-cw / 8, cw / 8);
                raw.push_back({cx + rng.uniform_int(-cw / 6, cw / 6), cy + rng.uniform_int(-cw / 6, cw / 6), w, w});
            }
        }
        for (std::size_t i = raw.size(); i > 1; --i) std::swap(raw[i - 1], raw[rng.next() % i]);
        const int mn = rng.uniform_int(0, 3);
        CHECK(group_rects(raw, mn) == group_oracle(raw, mn));
    }
}
