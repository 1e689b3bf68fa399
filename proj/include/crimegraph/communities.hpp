#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crimegraph/error.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/ingest.hpp"
#include "crimegraph/mapping.hpp"

namespace crimegraph {

/// Edge of an affinity graph; u == v denotes a self-loop contributing `affinity` to A_uu.
struct AffinityEdge {
    NodeId u = 0;
    NodeId v = 0;
    double affinity = 0.0;
};

/// Undirected graph whose edge weights grow with closeness.
struct AffinityGraph {
    std::vector<NodeId> nodes; // sorted
    std::vector<AffinityEdge> edges;
    std::map<NodeId, double> node_sizes;
};

using Partition = std::map<NodeId, int>;

/// Distances below this many meters all map to the same affinity.
inline constexpr double affinity_distance_floor_m = 1.0;

/// affinity = 1 / max(d, 1 m).
inline double distance_to_affinity(double meters) { return 1.0 / std::max(meters, affinity_distance_floor_m); }

inline AffinityGraph distance_to_affinity(const StreetGraph& g) {
    if (g.directed) throw InvalidArgument("distance_to_affinity: graph must be undirected (use undirected_projection)");
    AffinityGraph ag;
    ag.nodes.reserve(g.nodes.size());
    for (const auto& [id, p] : g.nodes) {
        ag.nodes.push_back(id);
        ag.node_sizes[id] = 0.0;
    }
    ag.edges.reserve(g.edges.size());
    for (const auto& e : g.edges) {
        if (e.src == e.dst) continue;
        ag.edges.push_back({e.src, e.dst, distance_to_affinity(e.weight)});
    }
    return ag;
}

/// Mean affinity over non-loop edges.
inline double mean_edge_affinity(const AffinityGraph& ag) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : ag.edges)
        if (e.u != e.v) {
            sum += e.affinity;
            ++n;
        }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Copy of `ag` with node sizes set from `layer` and a self-loop of `scale * count(v)` per
/// node with a non-zero count.
inline AffinityGraph with_crime_self_loops(const AffinityGraph& ag, const CrimeLayer& layer, double scale) {
    AffinityGraph out = ag;
    for (NodeId v : out.nodes) {
        const auto c = layer.count(v);
        out.node_sizes[v] = static_cast<double>(c);
        if (c > 0 && scale > 0.0) out.edges.push_back({v, v, scale * static_cast<double>(c)});
    }
    return out;
}

namespace detail {

/// Dense weighted graph for one aggregation level.
struct LevelGraph {
    std::vector<std::vector<std::pair<int, double>>> adj; // no self entries
    std::vector<double> self_w;
    std::vector<double> degree;
    double m2 = 0.0; // sum of degrees (2m)

    int size() const { return static_cast<int>(adj.size()); }

    void finalize() {
        degree.assign(adj.size(), 0.0);
        m2 = 0.0;
        for (std::size_t i = 0; i < adj.size(); ++i) {
            double k = self_w[i];
            for (const auto& [j, w] : adj[i]) k += w;
            degree[i] = k;
            m2 += k;
        }
    }
};

inline std::size_t dense_index(const std::vector<NodeId>& nodes, NodeId id) {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) throw InvalidArgument("affinity graph: edge references unknown node " + std::to_string(id));
    return static_cast<std::size_t>(it - nodes.begin());
}

inline LevelGraph level_from_affinity(const AffinityGraph& ag) {
    LevelGraph lg;
    const auto n = ag.nodes.size();
    lg.adj.resize(n);
    lg.self_w.assign(n, 0.0);
    std::vector<std::map<int, double>> merged(n);
    for (const auto& e : ag.edges) {
        if (!std::isfinite(e.affinity) || e.affinity <= 0.0) throw InvalidArgument("affinity graph: non-positive affinity");
        const auto a = dense_index(ag.nodes, e.u);
        const auto b = dense_index(ag.nodes, e.v);
        if (a == b) {
            lg.self_w[a] += e.affinity;
        } else {
            merged[a][static_cast<int>(b)] += e.affinity;
            merged[b][static_cast<int>(a)] += e.affinity;
        }
    }
    for (std::size_t i = 0; i < n; ++i) lg.adj[i].assign(merged[i].begin(), merged[i].end());
    lg.finalize();
    return lg;
}

/// Q of a dense membership on a level graph.
inline double level_modularity(const LevelGraph& g, const std::vector<int>& comm) {
    const int n = g.size();
    const int ncomm = n == 0 ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
    std::vector<double> in(ncomm, 0.0), tot(ncomm, 0.0);
    for (int i = 0; i < n; ++i) {
        tot[comm[i]] += g.degree[i];
        in[comm[i]] += g.self_w[i];
        for (const auto& [j, w] : g.adj[i])
            if (comm[j] == comm[i]) in[comm[i]] += w;
    }
    double q = 0.0;
    for (int c = 0; c < ncomm; ++c) q += in[c] / g.m2 - (tot[c] / g.m2) * (tot[c] / g.m2);
    return q;
}

inline bool components_connected(const LevelGraph& g) {
    if (g.size() == 0) return false;
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (const auto& [j, w] : g.adj[i])
            if (!seen[j]) {
                seen[j] = 1;
                ++reached;
                stack.push_back(j);
            }
    }
    return reached == g.size();
}

} // namespace detail

/// Weighted modularity Q = sum_ij [A_ij / 2m - k_i k_j / (2m)^2] delta(c_i, c_j), self-loops included.
inline double modularity(const AffinityGraph& ag, const Partition& partition) {
    const auto lg = detail::level_from_affinity(ag);
    if (lg.m2 <= 0.0) throw InvalidArgument("modularity: graph has no edge weight (m = 0)");
    std::map<int, int> dense_comm;
    std::vector<int> comm(ag.nodes.size());
    for (std::size_t i = 0; i < ag.nodes.size(); ++i) {
        const auto it = partition.find(ag.nodes[i]);
        if (it == partition.end())
            throw InvalidArgument("modularity: partition misses node " + std::to_string(ag.nodes[i]));
        comm[i] = dense_comm.emplace(it->second, static_cast<int>(dense_comm.size())).first->second;
    }
    return detail::level_modularity(lg, comm);
}

enum class NodeWeightMode { ignore, self_loop };

inline std::string to_string(NodeWeightMode m) { return m == NodeWeightMode::ignore ? "ignore" : "self_loop"; }

inline NodeWeightMode parse_node_weight_mode(const std::string& s) {
    if (s == "ignore") return NodeWeightMode::ignore;
    if (s == "self_loop") return NodeWeightMode::self_loop;
    throw InvalidArgument("unknown node weight mode '" + s + "' (expected ignore|self_loop)");
}

struct DetectionConfig {
    std::uint64_t seed = 0;
    NodeWeightMode mode = NodeWeightMode::self_loop;
    /// Self-loop scale; unset means the mean edge affinity.
    std::optional<double> self_loop_scale;
    double tolerance = 1e-7;
    /// Throw std::logic_error if Q ever drops between passes.
    bool check_monotone = false;
    int max_passes = 1000;
};

struct Community {
    int id = 0;
    std::vector<NodeId> node_ids; // sorted
    std::int64_t crime_total = 0;
    double crime_avg = 0.0;

    std::size_t size() const { return node_ids.size(); }
};

struct CommunitySet {
    Partition partition;
    std::vector<Community> communities; // ordered by id
    std::string crime_type;
    std::uint64_t detection_seed = 0;
    NodeWeightMode mode = NodeWeightMode::self_loop;
    double self_loop_scale = 0.0;
    double modularity = 0.0;
    /// Q after every local-moving pass, across all levels, then the final value.
    std::vector<double> pass_trace;
    /// Communities split after detection because they were not connected.
    std::size_t disconnected_splits = 0;
};

/// Builds Community entries (ids, sorted node lists, crime stats) from a partition.
inline std::vector<Community> assemble_communities(const Partition& partition, const CrimeLayer& layer) {
    std::map<int, Community> by_id;
    for (const auto& [node, cid] : partition) {
        auto& c = by_id[cid];
        c.id = cid;
        c.node_ids.push_back(node);
        c.crime_total += layer.count(node);
    }
    std::vector<Community> out;
    out.reserve(by_id.size());
    for (auto& [cid, c] : by_id) {
        c.crime_avg = static_cast<double>(c.crime_total) / static_cast<double>(c.node_ids.size());
        out.push_back(std::move(c));
    }
    return out;
}

/// Greedy modularity maximization: seeded local moving, then aggregation, until the gain
/// falls to `tolerance`. Disconnected communities are split into their connected parts and
/// community ids are numbered by smallest member node id.
inline CommunitySet detect_communities(const AffinityGraph& topology, const CrimeLayer& layer,
                                       const DetectionConfig& cfg = {}) {
    const double scale = cfg.self_loop_scale.value_or(mean_edge_affinity(topology));
    const AffinityGraph ag = cfg.mode == NodeWeightMode::self_loop ? with_crime_self_loops(topology, layer, scale)
                                                                  : with_crime_self_loops(topology, layer, 0.0);
    const detail::LevelGraph base = detail::level_from_affinity(ag);
    if (!detail::components_connected(base))
        throw InvalidArgument("detect_communities: input graph is disconnected; restrict it with largest_component first");
    if (base.m2 <= 0.0) throw InvalidArgument("detect_communities: graph has no edge weight");

    CommunitySet cs;
    cs.crime_type = layer.crime_type;
    cs.detection_seed = cfg.seed;
    cs.mode = cfg.mode;
    cs.self_loop_scale = cfg.mode == NodeWeightMode::self_loop ? scale : 0.0;

    std::mt19937_64 rng(cfg.seed);
    const int n0 = base.size();
    std::vector<int> membership(n0); // original node -> current level node
    std::iota(membership.begin(), membership.end(), 0);

    auto record = [&](double q) {
        if (cfg.check_monotone && !cs.pass_trace.empty() && q < cs.pass_trace.back() - 1e-12)
            throw std::logic_error("detect_communities: modularity decreased between passes");
        cs.pass_trace.push_back(q);
    };

    detail::LevelGraph g = base;
    std::vector<int> singletons(n0);
    std::iota(singletons.begin(), singletons.end(), 0);
    record(detail::level_modularity(g, singletons));

    for (;;) {
        const int n = g.size();
        std::vector<int> comm(n);
        std::iota(comm.begin(), comm.end(), 0);
        std::vector<double> tot(g.degree);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<double> link(n, 0.0);
        std::vector<int> touched;
        double q_level_start = detail::level_modularity(g, comm);
        double q_prev = q_level_start;
        bool moved_any = false;
        for (int pass = 0; pass < cfg.max_passes; ++pass) {
            bool moved = false;
            for (int i : order) {
                const int own = comm[i];
                const double ki = g.degree[i];
                touched.clear();
                for (const auto& [j, w] : g.adj[i]) {
                    const int c = comm[j];
                    if (link[c] == 0.0) touched.push_back(c);
                    link[c] += w;
                }
                tot[own] -= ki;
                int best = own;
                double best_gain = link[own] - tot[own] * ki / g.m2;
                for (int c : touched) {
                    const double gain = link[c] - tot[c] * ki / g.m2;
                    if (gain > best_gain || (gain == best_gain && c < best && c != own && best != own)) {
                        best = c;
                        best_gain = gain;
                    }
                }
                for (int c : touched) link[c] = 0.0;
                link[own] = 0.0;
                tot[best] += ki;
                if (best != own) {
                    comm[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            const double q = detail::level_modularity(g, comm);
            record(q);
            const double gain = q - q_prev;
            q_prev = q;
            if (!moved || gain <= cfg.tolerance) break;
        }
        if (!moved_any || q_prev - q_level_start <= cfg.tolerance) break;

        // Renumber communities densely in node order and collapse them into super-nodes.
        std::vector<int> renum(n, -1);
        int next = 0;
        for (int i = 0; i < n; ++i)
            if (renum[comm[i]] < 0) renum[comm[i]] = next++;
        for (auto& m : membership) m = renum[comm[m]];

        detail::LevelGraph agg;
        agg.adj.resize(next);
        agg.self_w.assign(next, 0.0);
        std::vector<std::map<int, double>> merged(next);
        for (int i = 0; i < n; ++i) {
            const int ci = renum[comm[i]];
            agg.self_w[ci] += g.self_w[i];
            for (const auto& [j, w] : g.adj[i]) {
                const int cj = renum[comm[j]];
                if (ci == cj) agg.self_w[ci] += w; // both directions land here, as in A
                else merged[ci][cj] += w;
            }
        }
        for (int c = 0; c < next; ++c) agg.adj[c].assign(merged[c].begin(), merged[c].end());
        agg.finalize();
        g = std::move(agg);
        if (next == 1) break;
    }

    // Split communities that are not connected in the original topology.
    std::vector<int> final_comm(n0, -1);
    int next_id = 0;
    std::map<int, int> first_label_use;
    for (int start = 0; start < n0; ++start) {
        if (final_comm[start] >= 0) continue;
        const int label = membership[start];
        if (first_label_use.contains(label)) ++cs.disconnected_splits;
        first_label_use[label] += 1;
        const int id = next_id++;
        std::vector<int> stack{start};
        final_comm[start] = id;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (const auto& [j, w] : base.adj[i])
                if (final_comm[j] < 0 && membership[j] == label) {
                    final_comm[j] = id;
                    stack.push_back(j);
                }
        }
    }
    // Nodes are visited in ascending id order, so ids already follow smallest member id.
    for (int i = 0; i < n0; ++i) cs.partition[ag.nodes[i]] = final_comm[i];
    cs.modularity = detail::level_modularity(base, final_comm);
    record(cs.modularity);
    cs.communities = assemble_communities(cs.partition, layer);
    return cs;
}

/// Communities sorted by crime average (descending), then size (descending), then id.
inline std::vector<Community> community_stats(const CommunitySet& cs, const CrimeLayer& layer) {
    auto stats = assemble_communities(cs.partition, layer);
    std::stable_sort(stats.begin(), stats.end(), [](const Community& a, const Community& b) {
        if (a.crime_avg != b.crime_avg) return a.crime_avg > b.crime_avg;
        if (a.size() != b.size()) return a.size() > b.size();
        return a.id < b.id;
    });
    return stats;
}

struct TopCommunities {
    std::vector<Community> communities;
    /// Fewer than k communities met the size threshold.
    bool short_of_k = false;
};

inline TopCommunities filter_top_communities(const std::vector<Community>& sorted_stats, std::size_t min_size = 100,
                                             std::size_t k = 5) {
    TopCommunities out;
    for (const auto& c : sorted_stats) {
        if (out.communities.size() == k) break;
        if (c.size() >= min_size) out.communities.push_back(c);
    }
    out.short_of_k = out.communities.size() < k;
    return out;
}

// crimegraph-communities-v1: magic line, "M<TAB>key<TAB>value" metadata, "node<TAB>community".

inline constexpr std::string_view communities_format_magic = "crimegraph-communities-v1";

inline void write_communities(const CommunitySet& cs, std::ostream& out) {
    out << communities_format_magic << '\n';
    out << "M\tcrime_type\t" << cs.crime_type << '\n';
    out << "M\tseed\t" << cs.detection_seed << '\n';
    out << "M\tmode\t" << to_string(cs.mode) << '\n';
    out << "M\tlambda\t" << text::format_double(cs.self_loop_scale) << '\n';
    out << "M\tmodularity\t" << text::format_double(cs.modularity) << '\n';
    out << "M\taffinity\tinverse_distance_floor_1m\n";
    for (const auto& [node, cid] : cs.partition) out << node << '\t' << cid << '\n';
}

inline void save_communities(const CommunitySet& cs, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("communities: cannot write '" + path + "'");
    write_communities(cs, out);
}

/// Reads partition and metadata; community stats are rebuilt from `layer`.
inline CommunitySet read_communities(std::istream& in, const CrimeLayer& layer, const std::string& source = "<stream>") {
    auto fail = [&](std::size_t line, const std::string& msg) {
        return DataError("communities " + source + ":" + std::to_string(line) + ": " + msg);
    };
    std::string line;
    if (!std::getline(in, line) || line != communities_format_magic) throw fail(1, "version mismatch");
    CommunitySet cs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = text::split(line, '\t');
        if (f[0] == "M") {
            if (f.size() != 3) throw fail(line_no, "bad metadata line");
            const std::string value(f[2]);
            if (f[1] == "crime_type") cs.crime_type = value;
            else if (f[1] == "seed") {
                const auto s = text::parse_int(value);
                if (!s) throw fail(line_no, "bad seed");
                cs.detection_seed = static_cast<std::uint64_t>(*s);
            } else if (f[1] == "mode") cs.mode = parse_node_weight_mode(value);
            else if (f[1] == "lambda" || f[1] == "modularity") {
                const auto v = text::parse_double(value);
                if (!v) throw fail(line_no, "bad number");
                (f[1] == "lambda" ? cs.self_loop_scale : cs.modularity) = *v;
            }
            continue;
        }
        const auto node = f.size() == 2 ? text::parse_int(f[0]) : std::nullopt;
        const auto cid = f.size() == 2 ? text::parse_int(f[1]) : std::nullopt;
        if (!node || !cid) throw fail(line_no, "expected node-id<TAB>community-id");
        if (!cs.partition.emplace(*node, static_cast<int>(*cid)).second) throw fail(line_no, "duplicate node id");
    }
    cs.communities = assemble_communities(cs.partition, layer);
    return cs;
}

inline CommunitySet load_communities(const std::string& path, const CrimeLayer& layer) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("communities: cannot open '" + path + "'");
    return read_communities(in, layer, path);
}

} // namespace crimegraph
