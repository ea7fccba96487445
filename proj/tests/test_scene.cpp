#include <gtest/gtest.h>

#include <cmath>

#include "collagen/media_io.hpp"
#include "collagen/scene.hpp"
#include "demo_store.hpp"

using namespace collagen;
namespace fs = std::filesystem;

namespace {

const AssetStore& demo_store() {
    static const AssetStore store = [] {
        const auto dir = fs::temp_directory_path() / ("collagen_scene_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        demo::DemoStoreOptions opt;
        opt.bg_clip_frames = 80;
        return AssetStore(ingest(demo::write_demo_store(dir, opt)));
    }();
    return store;
}

Scene shapes_scene() {
    Scene s;
    s.size = {128, 96};
    s.backdrop.solid = {20, 30, 40};
    s.layers.push_back(ShapeLayer{"a", ShapeKind::square, {255, 0, 0}, {50, 48}, 40, 0});
    s.layers.push_back(ShapeLayer{"b", ShapeKind::circle, {0, 0, 255}, {70, 48}, 40, 1});
    return s;
}

}  // namespace

TEST(PingPong, ForwardBackward) {
    const std::vector<int> expect{0, 1, 2, 3, 2, 1, 0, 1, 2, 3, 2};
    for (int f = 0; f < static_cast<int>(expect.size()); ++f) EXPECT_EQ(pingpong_index(f, 4), expect[f]);
    EXPECT_EQ(pingpong_index(7, 1), 0);
}

TEST(Scene, JsonRoundTrip) {
    Scene s = shapes_scene();
    s.layers.push_back(TextLayer{"t", "Hello1", {1, 2, 3}, {64, 20}, 14, 2});
    s.layers.push_back(ObjectLayer{"o", "fg0", {"fg0", {64.5, 50.25}, 0.75, 3}, 1.1});
    s.annotation = AnnotationOverlay{"a", {AnnotationMode::bbox_outline, {0, 255, 0}, 3}};
    s.backdrop = {"bg1", {1, 1, 1}, {12, 7}, 0};
    nlohmann::json j = s;
    const auto back = j.get<Scene>();
    EXPECT_EQ(back, s);
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}

TEST(Scene, RendersProceduralLayersInZOrder) {
    const auto frame = render_scene(shapes_scene(), nullptr, 0, true);
    EXPECT_EQ(frame.canvas(68, 48), (Rgb8{0, 0, 255}));  // overlap goes to the higher z
    EXPECT_EQ(frame.canvas(35, 48), (Rgb8{255, 0, 0}));
    EXPECT_EQ(frame.canvas(2, 2), (Rgb8{20, 30, 40}));
    ASSERT_EQ(frame.coverage.size(), 2u);
    EXPECT_EQ(frame.coverage.at("a")(35, 48), 255);
    EXPECT_EQ(frame.coverage.at("b")(35, 48), 0);
}

TEST(Scene, VisibleMatteRemovesOcclusion) {
    const auto s = shapes_scene();
    const auto frame = render_scene(s, nullptr, 0, true);
    const auto vis = visible_matte(s, frame.coverage, "a");
    const auto& a = frame.coverage.at("a");
    const auto& b = frame.coverage.at("b");
    for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 128; ++x) {
            const double expect = a(x, y) * (1.0 - b(x, y) / 255.0);
            ASSERT_EQ(vis(x, y), static_cast<int>(std::lround(expect)));
        }
    }
    EXPECT_EQ(visible_matte(s, frame.coverage, "b"), b);
    EXPECT_THROW(visible_matte(s, frame.coverage, "zzz"), Error);
}

TEST(Scene, CoverageOnlyWhenRequested) {
    EXPECT_TRUE(render_scene(shapes_scene(), nullptr).coverage.empty());
}

TEST(Scene, ObjectsNeedAStoreAndStayInBounds) {
    Scene s;
    s.size = {256, 256};
    s.layers.push_back(ObjectLayer{"o", "fg0", {"fg0", {128.0, 128.0}, 0.5, 0}, 1.0});
    EXPECT_THROW(render_scene(s, nullptr), Error);
    EXPECT_NO_THROW(render_scene(s, &demo_store()));
    std::get<ObjectLayer>(s.layers[0]).placement.center = {3.0, 3.0};
    EXPECT_THROW(render_scene(s, &demo_store()), LayoutError);
}

TEST(Scene, BrightnessOnlyAffectsTheObject) {
    Scene s;
    s.size = {256, 256};
    s.backdrop.asset_id = "bg0";
    s.layers.push_back(ObjectLayer{"o", "fg0", {"fg0", {128.0, 128.0}, 0.6, 0}, 1.0});
    auto dim = s;
    std::get<ObjectLayer>(dim.layers[0]).brightness = 0.8;
    const auto a = render_scene(s, &demo_store(), 0, true);
    const auto b = render_scene(dim, &demo_store());
    const auto& cov = a.coverage.at("o");
    for (int y = 0; y < 256; ++y) {
        for (int x = 0; x < 256; ++x) {
            if (cov(x, y) == 0) ASSERT_EQ(a.canvas(x, y), b.canvas(x, y));
        }
    }
    EXPECT_NE(a.canvas, b.canvas);
}

TEST(Scene, ClipFramesLoopAndWindowChecks) {
    Scene s;
    s.size = {160, 160};
    s.backdrop.asset_id = "bgclip0";
    s.backdrop.clip_start = 5;
    const auto& store = demo_store();
    const auto clip = store.clip("bgclip0");
    const auto f0 = render_scene(s, &store, 0).canvas;
    const auto f3 = render_scene(s, &store, 3).canvas;
    EXPECT_EQ(f0.pixels(), resample_cover(clip->frames[5], {160, 160}, {0, 0}));
    EXPECT_EQ(f3.pixels(), resample_cover(clip->frames[8], {160, 160}, {0, 0}));
    try {
        render_scene(s, &store, 75);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("clip too short"), std::string::npos);
    }

    s.layers.push_back(ObjectLayer{"o", "fgclip0", {"fgclip0", {80.0, 80.0}, 0.8, 0}, 1.0});
    const int n = store.clip("fgclip0")->frame_count();
    const auto a = render_scene(s, &store, 1, true).coverage.at("o");
    const auto b = render_scene(s, &store, 2 * (n - 1) - 1, true).coverage.at("o");
    EXPECT_EQ(a, b);  // pingpong maps both to clip frame 1
}
