#include <random>

#include <gtest/gtest.h>

#include "crimegraph/analysis.hpp"
#include "crimegraph/testkit/oracles.hpp"

using namespace crimegraph;

namespace {

/// Point `meters` due north of `p`.
GeoPoint north_of(GeoPoint p, double meters) { return {p.lat + meters / 6371000.0 * 180.0 / std::numbers::pi, p.lon}; }

NodeSet random_set(std::mt19937_64& rng, int n, NodeId first_id, double lat0, double lon0, double spread) {
    std::uniform_real_distribution<double> d(-spread, spread);
    NodeSet s;
    for (int i = 0; i < n; ++i) s.push_back({first_id + i, {lat0 + d(rng), lon0 + d(rng)}});
    return s;
}

std::vector<testkit::OraclePoint> oracle_points(const NodeSet& s) {
    std::vector<testkit::OraclePoint> out;
    for (const auto& p : s) out.push_back({p.id, p.point.lat, p.point.lon});
    return out;
}

Community make_community(int id, std::vector<NodeId> nodes) {
    Community c;
    c.id = id;
    c.node_ids = std::move(nodes);
    return c;
}

/// Labeling straight from per-node (community, label) pairs.
PresenceLabeling labeling_of(const std::vector<int>& comm, const std::vector<int>& label) {
    std::map<int, std::array<std::int64_t, 2>> by;
    for (std::size_t v = 0; v < comm.size(); ++v) ++by[comm[v]][label[v]];
    PresenceLabeling pl;
    for (const auto& [c, n] : by) {
        pl.community_ids.push_back(c);
        pl.counts.push_back(n);
    }
    return pl;
}

std::pair<double, double> scores(const PresenceLabeling& pl) { return {homogeneity_score(pl), completeness_score(pl)}; }

} // namespace

// --- similarity -----------------------------------------------------------------------------

TEST(SimilarityPaper, HandSubstitutionExamples) {
    const GeoPoint u{37.77, -122.42};
    const NodeSet e{{1, u}};
    EXPECT_EQ(similarity_paper(e, NodeSet{{2, u}}), 1.0);

    const GeoPoint one_km = north_of(u, 1000.0), four_km = north_of(u, 4000.0);
    const double d1 = great_circle_distance(u, one_km), d4 = great_circle_distance(u, four_km);
    // law-of-cosines rounding at km scale is a few micrometers
    ASSERT_NEAR(d1, 1000.0, 1e-4);
    ASSERT_NEAR(d4, 4000.0, 1e-4);
    // the substitution itself is exact for the computed distance
    EXPECT_EQ(similarity_paper(e, NodeSet{{2, one_km}}), 1.0 - (d1 / 1000.0) / 2.0);
    EXPECT_EQ(similarity_paper(e, NodeSet{{2, four_km}}), 1.0 - (d4 / 1000.0) / 2.0);
    EXPECT_NEAR(similarity_paper(e, NodeSet{{2, one_km}}), 0.5, 1e-8);
    EXPECT_NEAR(similarity_paper(e, NodeSet{{2, four_km}}), -1.0, 1e-8);
}

TEST(SimilarityNormalized, Examples) {
    const GeoPoint u{37.77, -122.42};
    EXPECT_EQ(similarity_normalized(NodeSet{{1, u}, {3, u}}, NodeSet{{2, u}}), 1.0);
    EXPECT_EQ(similarity_normalized(NodeSet{{1, u}}, NodeSet{{2, north_of(u, 500)}}), 0.0);
}

TEST(Similarity, EmptySetIsError) {
    const NodeSet e{{1, {0, 0}}};
    EXPECT_THROW(similarity_paper(e, NodeSet{}), InvalidArgument);
    EXPECT_THROW(similarity_normalized(NodeSet{}, e), InvalidArgument);
}

TEST(SimilarityNormalized, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(30);
    for (int t = 0; t < 100; ++t) {
        const auto e = random_set(rng, 1 + static_cast<int>(rng() % 30), 1, 37.76, -122.43, 0.02);
        const auto f = random_set(rng, 1 + static_cast<int>(rng() % 30), 500, 37.77 + 0.01 * (t % 3), -122.42, 0.02);
        const double s = similarity_normalized(e, f);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        EXPECT_NEAR(s, testkit::oracle_similarity_normalized(oracle_points(e), oracle_points(f)), 1e-12);
    }
}

TEST(Similarity, SymmetricExactly) {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 100; ++t) {
        const auto e = random_set(rng, 1 + static_cast<int>(rng() % 40), 1, 37.76, -122.43, 0.05);
        const auto f = random_set(rng, 1 + static_cast<int>(rng() % 40), 500, 37.75, -122.44, 0.05);
        EXPECT_EQ(similarity_normalized(e, f), similarity_normalized(f, e));
        EXPECT_EQ(similarity_paper(e, f), similarity_paper(f, e));
    }
}

TEST(SimilarityNormalized, TranslationInvariant) {
    std::mt19937_64 rng(32);
    for (int t = 0; t < 20; ++t) {
        auto e = random_set(rng, 25, 1, 10.0, 20.0, 0.01);
        auto f = random_set(rng, 25, 100, 10.005, 20.0, 0.01);
        const double before = similarity_normalized(e, f);
        // Rigid shift along the equator-ish band keeps distances to first order.
        for (auto* s : {&e, &f})
            for (auto& p : *s) p.point.lon += 0.3;
        EXPECT_NEAR(similarity_normalized(e, f), before, 1e-9);
    }
}

TEST(NodeSetOf, UnionSortedById) {
    StreetGraph g;
    for (NodeId i = 1; i <= 5; ++i) g.nodes[i] = {0.0, 0.001 * static_cast<double>(i)};
    const auto s = node_set_of({make_community(0, {4, 2}), make_community(1, {2, 5})}, g);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].id, 2);
    EXPECT_EQ(s[2].id, 5);
    EXPECT_THROW(node_set_of({make_community(0, {9})}, g), InvalidArgument);
}

// --- presence labeling and scores -----------------------------------------------------------

TEST(PresenceLabeling, Examples) {
    CrimeLayer layer;
    auto pl = build_presence_labeling({make_community(0, {1, 2, 3}), make_community(1, {4})}, layer);
    EXPECT_EQ(pl.class_total(1), 0);
    layer.counts = {{2, 2}, {3, 7}};
    pl = build_presence_labeling({make_community(0, {1, 2, 3})}, layer);
    EXPECT_EQ(pl.counts[0][1], 2);
    EXPECT_EQ(pl.counts[0][0], 1);
    EXPECT_EQ(pl.total(), 3);
}

TEST(PresenceLabeling, PublishedShape) {
    PresenceLabeling pl;
    pl.community_ids = {0};
    pl.counts = {{939, 132}};
    EXPECT_EQ(pl.total(), 1071);
    EXPECT_EQ(pl.class_total(1), 132);
    EXPECT_EQ(pl.class_total(0), 939);
    EXPECT_EQ(text::format_fixed(100.0 * 132 / 1071, 2), "12.32");
}

TEST(Scores, PerfectSeparation) {
    const auto s = scores(labeling_of({0, 0, 0, 1, 1}, {1, 1, 1, 0, 0}));
    EXPECT_EQ(s.first, 1.0);
    EXPECT_EQ(s.second, 1.0);
}

TEST(Scores, ProportionalIsZero) {
    const auto s = scores(labeling_of({0, 0, 1, 1}, {1, 0, 1, 0}));
    EXPECT_NEAR(s.first, 0.0, 1e-12);
    EXPECT_NEAR(s.second, 0.0, 1e-12);
    const auto t = scores(labeling_of({0, 0, 0, 1, 1, 1, 2, 2, 2}, {1, 0, 0, 1, 0, 0, 1, 0, 0}));
    EXPECT_NEAR(t.first, 0.0, 1e-12);
    EXPECT_NEAR(t.second, 0.0, 1e-12);
}

TEST(Scores, DegenerateConventions) {
    // all nodes criminal: H(label) = 0
    EXPECT_EQ(homogeneity_score(labeling_of({0, 1, 1}, {1, 1, 1})), 1.0);
    // one community: H(community) = 0
    EXPECT_EQ(completeness_score(labeling_of({0, 0, 0}, {1, 0, 1})), 1.0);
    const auto o = testkit::oracle_entropy_scores({0, 0, 0}, {1, 1, 1});
    EXPECT_EQ(o.homogeneity, 1.0);
    EXPECT_EQ(o.completeness, 1.0);
    EXPECT_THROW(homogeneity_score(PresenceLabeling{}), InvalidArgument);
}

TEST(Scores, MatchEntropyOracle) {
    std::mt19937_64 rng(40);
    for (int t = 0; t < 100; ++t) {
        const int n = 1 + static_cast<int>(rng() % 400);
        const int k = 1 + static_cast<int>(rng() % 10);
        std::vector<int> comm(n), label(n);
        const double p = (rng() % 100) / 100.0;
        for (int v = 0; v < n; ++v) {
            comm[v] = static_cast<int>(rng() % static_cast<unsigned>(k));
            label[v] = (rng() % 1000) < p * 1000 ? 1 : 0;
        }
        const auto pl = labeling_of(comm, label);
        const auto o = testkit::oracle_entropy_scores(comm, label);
        const auto s = scores(pl);
        EXPECT_NEAR(s.first, o.homogeneity, 1e-9);
        EXPECT_NEAR(s.second, o.completeness, 1e-9);
        EXPECT_GE(s.first, 0.0);
        EXPECT_LE(s.first, 1.0);
        EXPECT_GE(s.second, 0.0);
        EXPECT_LE(s.second, 1.0);
    }
}

TEST(Scores, DuplicationAndRelabelingInvariant) {
    std::mt19937_64 rng(41);
    for (int t = 0; t < 30; ++t) {
        const int n = 20 + static_cast<int>(rng() % 100);
        std::vector<int> comm(n), label(n);
        for (int v = 0; v < n; ++v) {
            comm[v] = static_cast<int>(rng() % 5);
            label[v] = static_cast<int>(rng() % 2);
        }
        const auto base = scores(labeling_of(comm, label));
        auto comm2 = comm, label2 = label;
        comm2.insert(comm2.end(), comm.begin(), comm.end());
        label2.insert(label2.end(), label.begin(), label.end());
        const auto dup = scores(labeling_of(comm2, label2));
        EXPECT_NEAR(dup.first, base.first, 1e-12);
        EXPECT_NEAR(dup.second, base.second, 1e-12);
        std::vector<int> relabeled(comm);
        for (auto& c : relabeled) c = 100 - 7 * c;
        std::reverse(relabeled.begin(), relabeled.end());
        std::vector<int> rl(label.rbegin(), label.rend());
        const auto perm = scores(labeling_of(relabeled, rl));
        EXPECT_NEAR(perm.first, base.first, 1e-12);
        EXPECT_NEAR(perm.second, base.second, 1e-12);
    }
}

TEST(Scores, OneIffSingleClassOrSingleCommunityPerClass) {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng() % 12);
        std::vector<int> comm(n), label(n);
        for (int v = 0; v < n; ++v) {
            comm[v] = static_cast<int>(rng() % 3);
            label[v] = static_cast<int>(rng() % 2);
        }
        std::map<int, std::set<int>> labels_in_comm, comms_in_label;
        for (int v = 0; v < n; ++v) {
            labels_in_comm[comm[v]].insert(label[v]);
            comms_in_label[label[v]].insert(comm[v]);
        }
        bool pure = true, concentrated = true;
        for (const auto& [c, ls] : labels_in_comm) pure = pure && ls.size() == 1;
        for (const auto& [l, cs] : comms_in_label) concentrated = concentrated && cs.size() == 1;
        const auto s = scores(labeling_of(comm, label));
        EXPECT_EQ(s.first >= 1.0 - 1e-12, pure) << t;
        EXPECT_EQ(s.second >= 1.0 - 1e-12, concentrated) << t;
    }
}

// --- overlay --------------------------------------------------------------------------------

TEST(Overlay, Examples) {
    const std::vector<std::string> types{"assault", "theft", "minor"};
    const std::map<std::string, std::vector<Community>> sets{
        {"assault", {make_community(0, {1, 2, 3})}},
        {"theft", {make_community(4, {3, 4})}},
        {"minor", {make_community(2, {3}), make_community(9, {5})}},
    };
    const auto ov = overlay_membership(types, sets);
    EXPECT_EQ(ov.at(1), (OverlayClass{"assault"}));
    EXPECT_EQ(ov.at(3), (OverlayClass{"assault", "theft", "minor"}));
    EXPECT_EQ(overlay_label(ov.at(3)), "assault+theft+minor");
    EXPECT_EQ(overlay_label({}), "none");
    const auto sizes = overlay_class_sizes(ov);
    EXPECT_EQ(sizes.at("assault"), 2u);
    EXPECT_EQ(sizes.at("theft"), 1u);
    EXPECT_EQ(sizes.at("minor"), 1u);
    EXPECT_FALSE(ov.contains(6));
}

TEST(Overlay, ClassSizesMatchInclusionExclusion) {
    std::mt19937_64 rng(50);
    for (int t = 0; t < 40; ++t) {
        const int ntypes = 1 + static_cast<int>(rng() % 4);
        std::vector<std::string> types;
        std::map<std::string, std::vector<Community>> sets;
        std::vector<std::set<std::int64_t>> raw;
        for (int k = 0; k < ntypes; ++k) {
            types.push_back("T" + std::to_string(k));
            std::vector<Community> cs;
            std::set<std::int64_t> all;
            const int ncomm = 1 + static_cast<int>(rng() % 4);
            for (int c = 0; c < ncomm; ++c) {
                std::set<NodeId> nodes;
                const int sz = static_cast<int>(rng() % 30);
                for (int i = 0; i < sz; ++i) nodes.insert(static_cast<NodeId>(rng() % 60));
                all.insert(nodes.begin(), nodes.end());
                cs.push_back(make_community(c, {nodes.begin(), nodes.end()}));
            }
            sets[types.back()] = cs;
            raw.push_back(all);
        }
        const auto sizes = overlay_class_sizes(overlay_membership(types, sets));
        const auto expected = testkit::oracle_exact_class_sizes(raw);
        for (const auto& [mask, n] : expected) {
            OverlayClass cls;
            for (int k = 0; k < ntypes; ++k)
                if (mask & (1u << k)) cls.push_back(types[k]);
            const auto it = sizes.find(overlay_label(cls));
            EXPECT_EQ(it == sizes.end() ? 0u : it->second, n) << overlay_label(cls);
        }
        std::size_t total = 0;
        for (const auto& [label, n] : sizes) total += n;
        std::size_t expected_total = 0;
        for (const auto& [mask, n] : expected) expected_total += n;
        EXPECT_EQ(total, expected_total);
    }
}
