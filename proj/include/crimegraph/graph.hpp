#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "crimegraph/error.hpp"
#include "crimegraph/geo.hpp"

namespace crimegraph {

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 0.0; // meters

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Street network: intersections with coordinates and segments weighted by length in meters.
struct StreetGraph {
    std::map<NodeId, GeoPoint> nodes;
    std::vector<Edge> edges;
    bool directed = true;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }
    bool empty() const { return nodes.empty(); }

    std::vector<IndexedPoint> indexed_points() const {
        std::vector<IndexedPoint> out;
        out.reserve(nodes.size());
        for (const auto& [id, p] : nodes) out.push_back({id, p});
        return out;
    }

    friend bool operator==(const StreetGraph&, const StreetGraph&) = default;
};

/// Throws InvalidArgument when an edge references a missing node or carries a bad weight.
inline void validate(const StreetGraph& g) {
    for (const auto& e : g.edges) {
        if (!g.nodes.contains(e.src) || !g.nodes.contains(e.dst))
            throw InvalidArgument("street graph: edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                                  " references a missing node");
        if (!std::isfinite(e.weight) || e.weight < 0.0)
            throw InvalidArgument("street graph: edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                                  " has invalid weight");
    }
}

enum class Oneway { no, forward, reverse };

struct RawWay {
    std::int64_t id = 0;
    std::vector<NodeId> node_refs;
    Oneway oneway = Oneway::no;
};

/// Nodes and street ways pulled from a map extract.
struct RawMapExtract {
    std::map<NodeId, GeoPoint> nodes;
    std::vector<RawWay> ways;
    std::size_t dangling_refs_dropped = 0;
};

/// One node per referenced OSM node, one edge per consecutive pair (both directions unless oneway).
inline StreetGraph build_street_graph(const RawMapExtract& extract, const EarthModel& earth = {}) {
    if (extract.ways.empty() || extract.nodes.empty())
        throw InvalidArgument("build_street_graph: empty extract");
    StreetGraph g;
    g.directed = true;
    for (const auto& way : extract.ways) {
        for (NodeId ref : way.node_refs) {
            auto it = extract.nodes.find(ref);
            if (it == extract.nodes.end())
                throw InvalidArgument("build_street_graph: way " + std::to_string(way.id) +
                                      " references missing node " + std::to_string(ref));
            g.nodes.emplace(ref, it->second);
        }
        for (std::size_t i = 1; i < way.node_refs.size(); ++i) {
            const NodeId a = way.node_refs[i - 1];
            const NodeId b = way.node_refs[i];
            if (a == b) continue;
            const double w = great_circle_distance(g.nodes.at(a), g.nodes.at(b), earth);
            switch (way.oneway) {
            case Oneway::forward: g.edges.push_back({a, b, w}); break;
            case Oneway::reverse: g.edges.push_back({b, a, w}); break;
            case Oneway::no:
                g.edges.push_back({a, b, w});
                g.edges.push_back({b, a, w});
                break;
            }
        }
    }
    if (g.nodes.empty()) throw InvalidArgument("build_street_graph: extract has no way nodes");
    return g;
}

/// Merge antiparallel/duplicate edges into one undirected edge per endpoint pair (min weight).
/// Output edges are canonical: src < dst, sorted.
inline StreetGraph undirected_projection(const StreetGraph& g) {
    std::map<std::pair<NodeId, NodeId>, double> best;
    for (const auto& e : g.edges) {
        if (e.src == e.dst) continue;
        const auto key = std::minmax(e.src, e.dst);
        auto [it, inserted] = best.emplace(std::pair{key.first, key.second}, e.weight);
        if (!inserted) it->second = std::min(it->second, e.weight);
    }
    StreetGraph out;
    out.nodes = g.nodes;
    out.directed = false;
    out.edges.reserve(best.size());
    for (const auto& [key, w] : best) out.edges.push_back({key.first, key.second, w});
    return out;
}

namespace detail {

/// Disjoint-set forest over dense indices.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<int> rank_;
};

} // namespace detail

/// Connected components (edges treated as undirected), each sorted, ordered by smallest member.
inline std::vector<std::vector<NodeId>> connected_components(const StreetGraph& g) {
    std::vector<NodeId> ids;
    ids.reserve(g.nodes.size());
    for (const auto& [id, p] : g.nodes) ids.push_back(id);
    auto index_of = [&](NodeId id) {
        return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    detail::UnionFind uf(ids.size());
    for (const auto& e : g.edges) uf.unite(index_of(e.src), index_of(e.dst));
    std::map<std::size_t, std::vector<NodeId>> by_root;
    for (std::size_t i = 0; i < ids.size(); ++i) by_root[uf.find(i)].push_back(ids[i]);
    std::vector<std::vector<NodeId>> comps;
    comps.reserve(by_root.size());
    for (auto& [root, members] : by_root) comps.push_back(std::move(members));
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return comps;
}

inline bool is_connected(const StreetGraph& g) { return !g.empty() && connected_components(g).size() == 1; }

/// Subgraph induced by `keep` (sorted node ids).
inline StreetGraph induced_subgraph(const StreetGraph& g, const std::vector<NodeId>& keep) {
    StreetGraph out;
    out.directed = g.directed;
    for (NodeId id : keep) out.nodes.emplace(id, g.nodes.at(id));
    for (const auto& e : g.edges)
        if (out.nodes.contains(e.src) && out.nodes.contains(e.dst)) out.edges.push_back(e);
    return out;
}

/// Induced subgraph on the largest connected component; ties go to the smallest minimum id.
inline StreetGraph largest_component(const StreetGraph& g) {
    if (g.empty()) throw InvalidArgument("largest_component: empty graph");
    const auto comps = connected_components(g);
    const std::vector<NodeId>* best = &comps.front();
    for (const auto& c : comps)
        if (c.size() > best->size()) best = &c;
    if (best->size() == g.nodes.size()) return g;
    return induced_subgraph(g, *best);
}

} // namespace crimegraph
