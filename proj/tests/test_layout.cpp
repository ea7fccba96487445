#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "collagen/layout.hpp"

using namespace collagen;

TEST(Bins, ThirtyOneBinsFromFourToOneQuarter) {
    const auto bins = make_bins();
    ASSERT_EQ(bins.size(), 31u);
    EXPECT_EQ(bins[15].width, 512);
    EXPECT_EQ(bins[15].height, 512);
    EXPECT_NEAR(static_cast<double>(bins.front().width) / bins.front().height, 4.0, 1e-9);
    EXPECT_NEAR(static_cast<double>(bins.back().width) / bins.back().height, 0.25, 1e-9);
    for (const auto& b : bins) {
        EXPECT_EQ(b.width % 16, 0);
        EXPECT_EQ(b.height % 16, 0);
        EXPECT_LE(std::abs(b.width * b.height - 512.0 * 512.0), 0.05 * 512.0 * 512.0) << b.index;
    }
}

TEST(Bins, LogUniformAspectsAndMirrorSymmetry) {
    const auto bins = make_bins();
    for (int k = 0; k < 31; ++k) {
        EXPECT_NEAR(std::log(bins[k].aspect), std::log(4.0) * (1.0 - 2.0 * k / 30.0), 1e-12);
        EXPECT_EQ(bins[k].width, bins[30 - k].height);
        EXPECT_EQ(bins[k].height, bins[30 - k].width);
        EXPECT_EQ(bins[k].index, k);
    }
}

TEST(Bins, RoundTo16TiesUp) {
    EXPECT_EQ(round_to_16(8.0), 16);
    EXPECT_EQ(round_to_16(7.99), 0);
    EXPECT_EQ(round_to_16(24.0), 32);
    EXPECT_EQ(round_to_16(512.0), 512);
}

TEST(Bins, CustomRequiresMultiplesOf16) {
    EXPECT_NO_THROW(AspectBin::custom(256, 256));
    EXPECT_THROW(AspectBin::custom(250, 256), Error);
    EXPECT_THROW(AspectBin::custom(0, 256), Error);
}

TEST(VideoShapes, PaperListsAndUniformity) {
    const std::set<int> frames{73, 77, 81, 85};
    const std::set<std::pair<int, int>> sizes{{544, 320}, {480, 384}, {416, 416}, {384, 480}, {320, 544}};
    Rng rng(RngState{11, 0});
    std::map<std::tuple<int, int, int>, int> counts;
    constexpr int kDraws = 20000;
    for (int i = 0; i < kDraws; ++i) {
        const auto s = sample_video_shape(rng);
        ASSERT_TRUE(frames.count(s.frame_count));
        ASSERT_TRUE(sizes.count({s.width, s.height}));
        ++counts[{s.frame_count, s.width, s.height}];
    }
    ASSERT_EQ(counts.size(), 20u);
    double chi = 0.0;
    const double expected = kDraws / 20.0;
    for (const auto& [k, c] : counts) chi += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(19);
    EXPECT_LT(chi, boost::math::quantile(dist, 0.99));
}

TEST(VideoShapes, ResolutionReadingsCoverTheSameSet) {
    auto a = video_resolutions(ResolutionOrder::height_by_width);
    auto b = video_resolutions(ResolutionOrder::width_by_height);
    ASSERT_EQ(a.size(), 5u);
    EXPECT_EQ(a.front().width, b.front().height);
    EXPECT_EQ(a.front().height, b.front().width);
}

TEST(Placement, RectIsCenteredAndScaled) {
    const Placement p{"a", {100.0, 50.0}, 0.5, 0};
    const auto r = placement_rect(p, {80, 40});
    EXPECT_EQ(r.width, 40);
    EXPECT_EQ(r.height, 20);
    EXPECT_NEAR(r.x + r.width / 2.0, 100.0, 1.0);
    EXPECT_NEAR(r.y + r.height / 2.0, 50.0, 1.0);
}

TEST(Placement, IouOracle) {
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 0, 10}, {0, 0, 10, 10}), 0.0);
}

TEST(Placement, SampledPlacementsRespectConstraints) {
    const PlacementConstraints c;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng(RngState{s, 3});
        const std::vector<PlacementRequest> objs{{"a", {120, 90}}, {"b", {60, 150}}, {"c", {100, 100}}};
        const auto placements = sample_placements(rng, {512, 384}, objs, c);
        ASSERT_EQ(placements.size(), 3u);
        std::vector<PixelRect> rects;
        for (std::size_t i = 0; i < placements.size(); ++i) {
            const auto r = placement_rect(placements[i], objs[i].native);
            EXPECT_EQ(placements[i].z_order, static_cast<int>(i));
            EXPECT_GE(r.x, 0);
            EXPECT_GE(r.y, 0);
            EXPECT_LE(r.right(), 512);
            EXPECT_LE(r.bottom(), 384);
            const double longer = std::max(r.width, r.height) / 384.0;
            EXPECT_GE(longer, c.min_fraction - 0.01);
            EXPECT_LE(longer, c.max_fraction + 0.01);
            for (const auto& q : rects) EXPECT_LE(iou(r, q), c.max_overlap + 1e-12);
            rects.push_back(r);
        }
    }
}

TEST(Placement, ImpossibleConstraintsRaiseLayoutError) {
    Rng rng(RngState{1, 1});
    PlacementConstraints c;
    c.min_fraction = 0.55;
    c.max_fraction = 0.6;
    c.max_overlap = 0.0;
    c.retry_cap = 20;
    const std::vector<PlacementRequest> objs(6, PlacementRequest{"a", {100, 100}});
    EXPECT_THROW(sample_placements(rng, {256, 256}, objs, c), LayoutError);
}

TEST(Placement, SameSeedSamePlacements) {
    const std::vector<PlacementRequest> objs{{"a", {120, 90}}, {"b", {60, 150}}};
    Rng a(RngState{5, 9}), b(RngState{5, 9});
    EXPECT_EQ(sample_placements(a, {512, 512}, objs), sample_placements(b, {512, 512}, objs));
}

TEST(Placement, SingleObjectCentersUniformOverFeasibleRange) {
    // Normalizing by the feasible range of each draw makes the cells equiprobable.
    Rng rng(RngState{23, 0});
    std::vector<int> cells(16);
    const std::vector<PlacementRequest> obj{{"a", {100, 100}}};
    constexpr int kDraws = 1000;
    for (int i = 0; i < kDraws; ++i) {
        const auto p = sample_placements(rng, {512, 512}, obj);
        const auto r = placement_rect(p[0], {100, 100});
        const double u = (p[0].center.x - r.width / 2.0) / (512.0 - r.width);
        const double v = (p[0].center.y - r.height / 2.0) / (512.0 - r.height);
        const int cx = std::clamp(static_cast<int>(u * 4), 0, 3);
        const int cy = std::clamp(static_cast<int>(v * 4), 0, 3);
        ++cells[cy * 4 + cx];
    }
    double chi = 0.0;
    for (int c : cells) chi += (c - kDraws / 16.0) * (c - kDraws / 16.0) / (kDraws / 16.0);
    EXPECT_LT(chi, boost::math::quantile(boost::math::chi_squared(15), 0.99));
}

TEST(Placement, DisjointWhenOverlapIsZero) {
    PlacementConstraints c;
    c.max_overlap = 0.0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        Rng rng(RngState{s, 1});
        const std::vector<PlacementRequest> objs{{"a", {100, 80}}, {"b", {90, 90}}};
        const auto p = sample_placements(rng, {512, 512}, objs, c);
        EXPECT_EQ(iou(placement_rect(p[0], objs[0].native), placement_rect(p[1], objs[1].native)), 0.0);
    }
}
