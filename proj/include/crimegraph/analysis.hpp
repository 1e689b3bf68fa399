#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crimegraph/communities.hpp"
#include "crimegraph/error.hpp"
#include "crimegraph/geo.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/mapping.hpp"

namespace crimegraph {

/// Positioned nodes of a set of communities.
using NodeSet = std::vector<IndexedPoint>;

/// Union of the nodes of `communities`, sorted by id, with coordinates from `g`.
inline NodeSet node_set_of(const std::vector<Community>& communities, const StreetGraph& g) {
    std::set<NodeId> ids;
    for (const auto& c : communities) ids.insert(c.node_ids.begin(), c.node_ids.end());
    NodeSet out;
    out.reserve(ids.size());
    for (NodeId id : ids) {
        const auto it = g.nodes.find(id);
        if (it == g.nodes.end()) throw InvalidArgument("node_set_of: node " + std::to_string(id) + " not in graph");
        out.push_back({id, it->second});
    }
    return out;
}

namespace detail {

inline void require_nonempty(std::span<const IndexedPoint> a, std::span<const IndexedPoint> b, const char* what) {
    if (a.empty() || b.empty()) throw InvalidArgument(std::string(what) + ": node sets must be non-empty");
}

/// Sum of d(u, v) over E x F, accumulated so that swapping E and F gives the same bits:
/// the smaller-id-first set drives the outer loop.
inline double cross_distance_sum(std::span<const IndexedPoint> e, std::span<const IndexedPoint> f, const EarthModel& m) {
    const bool swap = std::lexicographical_compare(f.begin(), f.end(), e.begin(), e.end(),
                                                   [](const IndexedPoint& x, const IndexedPoint& y) {
                                                       if (x.id != y.id) return x.id < y.id;
                                                       if (x.point.lat != y.point.lat) return x.point.lat < y.point.lat;
                                                       return x.point.lon < y.point.lon;
                                                   });
    const auto outer = swap ? f : e;
    const auto inner = swap ? e : f;
    double sum = 0.0;
    for (const auto& u : outer)
        for (const auto& v : inner) sum += great_circle_distance(u.point, v.point, m);
    return sum;
}

} // namespace detail

/// 1 - (sum of pairwise distances in km) / (|E| + |F|). Unbounded below for spread-out sets.
inline double similarity_paper(std::span<const IndexedPoint> e, std::span<const IndexedPoint> f, const EarthModel& m = {}) {
    detail::require_nonempty(e, f, "similarity_paper");
    const double km = detail::cross_distance_sum(e, f, m) / 1000.0;
    return 1.0 - km / static_cast<double>(e.size() + f.size());
}

/// 1 - mean cross distance / diameter of E u F; 1 when every point coincides. Always in [0, 1].
inline double similarity_normalized(std::span<const IndexedPoint> e, std::span<const IndexedPoint> f,
                                    const EarthModel& m = {}) {
    detail::require_nonempty(e, f, "similarity_normalized");
    std::vector<GeoPoint> all;
    all.reserve(e.size() + f.size());
    for (const auto& p : e) all.push_back(p.point);
    for (const auto& p : f) all.push_back(p.point);
    double diameter = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) diameter = std::max(diameter, great_circle_distance(all[i], all[j], m));
    if (diameter == 0.0) return 1.0;
    const double mean = detail::cross_distance_sum(e, f, m) / (static_cast<double>(e.size()) * static_cast<double>(f.size()));
    return std::clamp(1.0 - mean / diameter, 0.0, 1.0);
}

/// Per-community node counts with (index 1) and without (index 0) crimes.
struct PresenceLabeling {
    std::vector<int> community_ids;
    std::vector<std::array<std::int64_t, 2>> counts; // [i][label]

    std::int64_t community_total(std::size_t i) const { return counts[i][0] + counts[i][1]; }
    std::int64_t class_total(int label) const {
        std::int64_t s = 0;
        for (const auto& c : counts) s += c[label];
        return s;
    }
    std::int64_t total() const { return class_total(0) + class_total(1); }
};

inline PresenceLabeling build_presence_labeling(const std::vector<Community>& communities, const CrimeLayer& layer) {
    PresenceLabeling pl;
    for (const auto& c : communities) {
        std::array<std::int64_t, 2> n{0, 0};
        for (NodeId v : c.node_ids) ++n[layer.count(v) > 0 ? 1 : 0];
        pl.community_ids.push_back(c.id);
        pl.counts.push_back(n);
    }
    return pl;
}

namespace detail {

inline double plogp_ratio(double num, double den, double total) {
    // (num / total) * log2(num / den), with 0 log 0 = 0
    if (num <= 0.0) return 0.0;
    return (num / total) * std::log2(num / den);
}

} // namespace detail

/// 1 - H(label | community) / H(label); 1 when H(label) = 0.
inline double homogeneity_score(const PresenceLabeling& pl) {
    const double total = static_cast<double>(pl.total());
    if (total <= 0.0) throw InvalidArgument("homogeneity_score: no nodes");
    double h_cond = 0.0;
    for (std::size_t i = 0; i < pl.counts.size(); ++i)
        for (int j = 0; j < 2; ++j)
            h_cond -= detail::plogp_ratio(static_cast<double>(pl.counts[i][j]), static_cast<double>(pl.community_total(i)), total);
    double h = 0.0;
    for (int j = 0; j < 2; ++j) h -= detail::plogp_ratio(static_cast<double>(pl.class_total(j)), total, total);
    if (h <= 0.0) return 1.0;
    return std::clamp(1.0 - h_cond / h, 0.0, 1.0);
}

/// 1 - H(community | label) / H(community); 1 when H(community) = 0.
inline double completeness_score(const PresenceLabeling& pl) {
    const double total = static_cast<double>(pl.total());
    if (total <= 0.0) throw InvalidArgument("completeness_score: no nodes");
    double h_cond = 0.0;
    for (int j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < pl.counts.size(); ++i)
            h_cond -= detail::plogp_ratio(static_cast<double>(pl.counts[i][j]), static_cast<double>(pl.class_total(j)), total);
    double h = 0.0;
    for (std::size_t i = 0; i < pl.counts.size(); ++i)
        h -= detail::plogp_ratio(static_cast<double>(pl.community_total(i)), total, total);
    if (h <= 0.0) return 1.0;
    return std::clamp(1.0 - h_cond / h, 0.0, 1.0);
}

/// Subset of crime types (in the caller's type order) whose filtered node union holds a node.
using OverlayClass = std::vector<std::string>;

inline std::string overlay_label(const OverlayClass& cls) {
    if (cls.empty()) return "none";
    std::string s;
    for (const auto& t : cls) {
        if (!s.empty()) s += '+';
        s += t;
    }
    return s;
}

/// Overlay class of every node in at least one set. `types` fixes the order inside a class.
inline std::map<NodeId, OverlayClass> overlay_membership(const std::vector<std::string>& types,
                                                         const std::map<std::string, std::vector<Community>>& sets) {
    std::map<NodeId, OverlayClass> out;
    for (const auto& t : types) {
        const auto it = sets.find(t);
        if (it == sets.end()) continue;
        std::set<NodeId> members;
        for (const auto& c : it->second) members.insert(c.node_ids.begin(), c.node_ids.end());
        for (NodeId v : members) out[v].push_back(t);
    }
    return out;
}

inline std::map<std::string, std::size_t> overlay_class_sizes(const std::map<NodeId, OverlayClass>& overlay) {
    std::map<std::string, std::size_t> sizes;
    for (const auto& [v, cls] : overlay) ++sizes[overlay_label(cls)];
    return sizes;
}

struct TypeAnalysis {
    std::string crime_type;
    std::vector<Community> ranked;    // community_stats order
    TopCommunities top;
    std::size_t community_count = 0;
    std::size_t criminal_nodes = 0;   // labeled 1 inside the top set
    std::size_t top_nodes = 0;
    double homogeneity = 0.0;
    double completeness = 0.0;
};

struct SimilarityEntry {
    std::string type_a;
    std::string type_b;
    double normalized = 0.0;
    double paper_km = 0.0;
};

struct AnalysisReport {
    std::vector<TypeAnalysis> types;
    std::vector<SimilarityEntry> similarity; // one per unordered type pair, in type order
    std::map<NodeId, OverlayClass> overlay;
    /// Variant reported under the plain `similarity.<a>.<b>` key: "normalized" or "paper_km".
    std::string similarity_variant = "normalized";
};

/// Scores, pairwise similarities and overlay for already-detected community sets.
inline AnalysisReport analyze(const StreetGraph& g, const std::vector<std::string>& types,
                              const std::map<std::string, CommunitySet>& detected,
                              const std::map<std::string, CrimeLayer>& layers, std::size_t min_size, std::size_t k) {
    AnalysisReport report;
    std::map<std::string, std::vector<Community>> top_sets;
    std::map<std::string, NodeSet> node_sets;
    for (const auto& t : types) {
        const auto& cs = detected.at(t);
        const auto& layer = layers.at(t);
        TypeAnalysis ta;
        ta.crime_type = t;
        ta.ranked = community_stats(cs, layer);
        ta.community_count = ta.ranked.size();
        ta.top = filter_top_communities(ta.ranked, min_size, k);
        if (!ta.top.communities.empty()) {
            const auto pl = build_presence_labeling(ta.top.communities, layer);
            ta.criminal_nodes = static_cast<std::size_t>(pl.class_total(1));
            ta.top_nodes = static_cast<std::size_t>(pl.total());
            ta.homogeneity = homogeneity_score(pl);
            ta.completeness = completeness_score(pl);
        }
        top_sets[t] = ta.top.communities;
        node_sets[t] = node_set_of(ta.top.communities, g);
        report.types.push_back(std::move(ta));
    }
    for (std::size_t a = 0; a < types.size(); ++a)
        for (std::size_t b = a + 1; b < types.size(); ++b) {
            const auto& e = node_sets[types[a]];
            const auto& f = node_sets[types[b]];
            SimilarityEntry s{types[a], types[b], 0.0, 0.0};
            if (!e.empty() && !f.empty()) {
                s.normalized = similarity_normalized(e, f);
                s.paper_km = similarity_paper(e, f);
            } else {
                s.normalized = s.paper_km = std::nan("");
            }
            report.similarity.push_back(s);
        }
    report.overlay = overlay_membership(types, top_sets);
    return report;
}

} // namespace crimegraph
