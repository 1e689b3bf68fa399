#include <gtest/gtest.h>

#include "crimegraph/mapping.hpp"
#include "crimegraph/testkit/oracles.hpp"
#include "crimegraph/testkit/synthetic_city.hpp"

using namespace crimegraph;
using testkit::grid_node_id;

TEST(GridCity, EdgeCounts) {
    const auto g2 = testkit::generate_grid_city(2, 2, 100.0, {37.7, -122.4}, 1);
    EXPECT_EQ(g2.node_count(), 4u);
    EXPECT_EQ(g2.edge_count(), 4u);
    const auto g3 = testkit::generate_grid_city(3, 3, 100.0, {37.7, -122.4}, 1);
    EXPECT_EQ(g3.node_count(), 9u);
    EXPECT_EQ(g3.edge_count(), 12u);
    const auto g = testkit::generate_grid_city(7, 11, 100.0, {37.7, -122.4}, 1);
    EXPECT_EQ(g.edge_count(), static_cast<std::size_t>(2 * 7 * 11 - 7 - 11));
    EXPECT_FALSE(g.directed);
    EXPECT_TRUE(is_connected(g));
    EXPECT_NO_THROW(validate(g));
}

TEST(GridCity, SpacingWithinHalfPercent) {
    for (double lat : {-45.0, 0.0, 37.7, 52.0}) {
        const auto g = testkit::generate_grid_city(20, 20, 150.0, {lat, 10.0}, 3);
        for (const auto& e : g.edges) {
            EXPECT_NEAR(e.weight, 150.0, 0.75) << lat;
            EXPECT_EQ(e.weight, great_circle_distance(g.nodes.at(e.src), g.nodes.at(e.dst)));
        }
    }
}

TEST(GridCity, DeterministicPerSeed) {
    const auto a = testkit::generate_grid_city(6, 6, 90.0, {37.7, -122.4}, 5, 0.2);
    const auto b = testkit::generate_grid_city(6, 6, 90.0, {37.7, -122.4}, 5, 0.2);
    const auto c = testkit::generate_grid_city(6, 6, 90.0, {37.7, -122.4}, 6, 0.2);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(GridCity, InvalidShape) {
    EXPECT_THROW(testkit::generate_grid_city(1, 5, 100.0, {0, 0}, 1), InvalidArgument);
    EXPECT_THROW(testkit::generate_grid_city(3, 3, 0.0, {0, 0}, 1), InvalidArgument);
}

TEST(PlantHotspots, ZeroRateGivesNoCrimes) {
    const auto g = testkit::generate_grid_city(5, 5, 100.0, {37.7, -122.4}, 1);
    const auto p = testkit::plant_hotspots(g, {{grid_node_id(2, 2, 5), 1, "A", 0.0}}, 1, {0.0, 10.0});
    EXPECT_TRUE(p.crimes.empty());
}

TEST(PlantHotspots, RadiusZeroStaysAtCenter) {
    const auto g = testkit::generate_grid_city(5, 5, 100.0, {37.7, -122.4}, 1);
    const NodeId center = grid_node_id(2, 2, 5);
    const auto p = testkit::plant_hotspots(g, {{center, 0, "A", 25.0}}, 2, {0.0, 30.0});
    EXPECT_EQ(p.ground_truth.at("A"), std::set<NodeId>{center});
    ASSERT_FALSE(p.crimes.empty());
    for (std::size_t i = 0; i < p.crimes.size(); ++i) {
        EXPECT_EQ(p.source_node[i], center);
        EXPECT_LE(great_circle_distance(p.crimes[i].point, g.nodes.at(center)), 30.0 + 1e-6);
    }
}

TEST(PlantHotspots, HopBallAndMerging) {
    const auto g = testkit::generate_grid_city(9, 9, 100.0, {37.7, -122.4}, 1);
    EXPECT_EQ(testkit::hop_ball(g, grid_node_id(4, 4, 9), 2).size(), 13u);
    EXPECT_EQ(testkit::hop_ball(g, grid_node_id(0, 0, 9), 1).size(), 3u);
    const auto p = testkit::plant_hotspots(
        g, {{grid_node_id(4, 4, 9), 1, "A", 5.0}, {grid_node_id(4, 5, 9), 1, "A", 5.0}}, 3, {0.0, 10.0});
    EXPECT_EQ(p.ground_truth.at("A").size(), 8u); // two overlapping plus-shapes
    EXPECT_THROW(testkit::plant_hotspots(g, {{99999, 1, "A", 1.0}}, 1), InvalidArgument);
}

TEST(PlantHotspots, MappingRecoversSourceNodes) {
    const auto g = testkit::generate_grid_city(25, 25, 100.0, {37.7, -122.4}, 4);
    const auto p = testkit::plant_hotspots(g,
                                           {{grid_node_id(5, 5, 25), 3, "A", 12.0}, {grid_node_id(18, 15, 25), 2, "A", 12.0}},
                                           8, {0.5, 39.0});
    const auto pts = g.indexed_points();
    const SpatialIndex idx(pts);
    std::size_t hit = 0, on_truth = 0, in_hotspot = 0;
    const auto& truth = p.ground_truth.at("A");
    for (std::size_t i = 0; i < p.crimes.size(); ++i) {
        const auto nn = idx.nearest(p.crimes[i].point).id;
        hit += nn == p.source_node[i];
        if (truth.contains(p.source_node[i])) {
            ++in_hotspot;
            on_truth += truth.contains(nn);
        }
    }
    ASSERT_GT(in_hotspot, 300u);
    EXPECT_GE(static_cast<double>(on_truth), 0.99 * static_cast<double>(in_hotspot));
    EXPECT_GE(static_cast<double>(hit), 0.99 * static_cast<double>(p.crimes.size()));
}

TEST(PlantHotspots, DeterministicPerSeed) {
    const auto g = testkit::generate_grid_city(8, 8, 100.0, {37.7, -122.4}, 1);
    const std::vector<testkit::HotspotSpec> specs{{grid_node_id(3, 3, 8), 1, "A", 4.0}, {grid_node_id(5, 5, 8), 1, "B", 4.0}};
    const auto a = testkit::plant_hotspots(g, specs, 9, {0.5, 20.0});
    const auto b = testkit::plant_hotspots(g, specs, 9, {0.5, 20.0});
    ASSERT_EQ(a.crimes.size(), b.crimes.size());
    for (std::size_t i = 0; i < a.crimes.size(); ++i) {
        EXPECT_EQ(a.crimes[i].point, b.crimes[i].point);
        EXPECT_EQ(a.crimes[i].category, b.crimes[i].category);
    }
}

TEST(Oracles, Trivia) {
    EXPECT_EQ(testkit::oracle_nearest({{17, 1.0, 2.0}}, -40.0, 100.0), 17);
    EXPECT_EQ(testkit::oracle_nearest({{4, 0.0, 1.0}, {2, 0.0, -1.0}}, 0.0, 0.0), 2);
    EXPECT_NEAR(testkit::oracle_modularity(3, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 2, 0.5}}, {5, 5, 5}), 0.0, 1e-15);
    const auto s = testkit::oracle_entropy_scores({0, 0, 0}, {1, 1, 1});
    EXPECT_EQ(s.homogeneity, 1.0);
    EXPECT_EQ(s.completeness, 1.0);
    EXPECT_NEAR(testkit::haversine_m(0, 0, 0, 180), std::numbers::pi * 6371000.0, 1e-6);
    EXPECT_EQ(testkit::oracle_component_sizes(5, {{0, 1}, {3, 4}}), (std::vector<std::size_t>{2, 2, 1}));
    const auto classes = testkit::oracle_exact_class_sizes({{1, 2, 3}, {3, 4}});
    EXPECT_EQ(classes.at(1u), 2u);
    EXPECT_EQ(classes.at(2u), 1u);
    EXPECT_EQ(classes.at(3u), 1u);
}
