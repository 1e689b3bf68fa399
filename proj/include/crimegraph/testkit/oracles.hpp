#pragma once

// Brute-force reference computations for tests. Everything here is written against primitive
// types only and must not include other crimegraph headers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <utility>
#include <vector>

namespace crimegraph::testkit {

struct OraclePoint {
    std::int64_t id;
    double lat; // degrees
    double lon;
};

inline double oracle_radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// Haversine great-circle distance in meters.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2, double radius_m = 6371000.0) {
    const double p1 = oracle_radians(lat1), p2 = oracle_radians(lat2);
    const double dp = p2 - p1;
    const double dl = oracle_radians(lon2 - lon1);
    const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * radius_m * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Literal spherical law of cosines, written out independently; identical points give 0.
inline double cosine_law_m(double lat1, double lon1, double lat2, double lon2, double radius_m = 6371000.0) {
    if (lat1 == lat2 && lon1 == lon2) return 0.0;
    const double a = oracle_radians(lat1);
    const double b = oracle_radians(lat2);
    const double d = oracle_radians(std::fabs(lon1 - lon2));
    double x = std::sin(a) * std::sin(b) + std::cos(a) * std::cos(b) * std::cos(d);
    if (x > 1.0) x = 1.0;
    if (x < -1.0) x = -1.0;
    return radius_m * std::acos(x);
}

/// Linear scan nearest point; ties go to the smallest id.
inline std::int64_t oracle_nearest(const std::vector<OraclePoint>& nodes, double lat, double lon) {
    std::int64_t best_id = 0;
    double best = INFINITY;
    for (const auto& n : nodes) {
        const double d = cosine_law_m(lat, lon, n.lat, n.lon);
        if (d < best || (d == best && n.id < best_id)) {
            best = d;
            best_id = n.id;
        }
    }
    return best_id;
}

struct OracleEdge {
    int i;
    int j; // i == j is a self-loop adding w to A_ii
    double w;
};

/// Q by the direct double sum over a dense adjacency matrix.
inline double oracle_modularity(int n, const std::vector<OracleEdge>& edges, const std::vector<int>& community) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (const auto& e : edges) {
        if (e.i == e.j) {
            a[e.i][e.i] += e.w;
        } else {
            a[e.i][e.j] += e.w;
            a[e.j][e.i] += e.w;
        }
    }
    std::vector<double> k(n, 0.0);
    double two_m = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) k[i] += a[i][j];
        two_m += k[i];
    }
    double q = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (community[i] == community[j]) q += a[i][j] / two_m - k[i] * k[j] / (two_m * two_m);
    return q;
}

/// Sizes of connected components by breadth-first search, sorted descending.
inline std::vector<std::size_t> oracle_component_sizes(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> sizes;
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::queue<int> q;
        q.push(s);
        seen[s] = true;
        std::size_t count = 0;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            ++count;
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
        }
        sizes.push_back(count);
    }
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes;
}

struct OracleScores {
    double homogeneity;
    double completeness;
};

/// Homogeneity and completeness tabulated straight from per-node (community, label) pairs.
inline OracleScores oracle_entropy_scores(const std::vector<int>& community, const std::vector<int>& label) {
    const double n = static_cast<double>(community.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> per_comm, per_label;
    for (std::size_t v = 0; v < community.size(); ++v) {
        joint[{community[v], label[v]}] += 1.0;
        per_comm[community[v]] += 1.0;
        per_label[label[v]] += 1.0;
    }
    double h_label = 0.0, h_comm = 0.0, h_label_given_comm = 0.0, h_comm_given_label = 0.0;
    for (const auto& [l, c] : per_label) h_label -= c / n * std::log2(c / n);
    for (const auto& [k, c] : per_comm) h_comm -= c / n * std::log2(c / n);
    for (const auto& [key, c] : joint) {
        h_label_given_comm -= c / n * std::log2(c / per_comm[key.first]);
        h_comm_given_label -= c / n * std::log2(c / per_label[key.second]);
    }
    OracleScores s{1.0, 1.0};
    if (h_label > 0.0) s.homogeneity = 1.0 - h_label_given_comm / h_label;
    if (h_comm > 0.0) s.completeness = 1.0 - h_comm_given_label / h_comm;
    return s;
}

/// 1 - mean cross distance / diameter by explicit double loops.
inline double oracle_similarity_normalized(const std::vector<OraclePoint>& e, const std::vector<OraclePoint>& f) {
    std::vector<OraclePoint> all(e);
    all.insert(all.end(), f.begin(), f.end());
    double diameter = 0.0;
    for (const auto& a : all)
        for (const auto& b : all) diameter = std::max(diameter, cosine_law_m(a.lat, a.lon, b.lat, b.lon));
    if (diameter == 0.0) return 1.0;
    double sum = 0.0;
    for (const auto& u : e)
        for (const auto& v : f) sum += cosine_law_m(u.lat, u.lon, v.lat, v.lon);
    return 1.0 - (sum / (static_cast<double>(e.size()) * static_cast<double>(f.size()))) / diameter;
}

/// Size of every exact overlay class (bitmask over sets) by inclusion-exclusion over intersections.
inline std::map<unsigned, std::size_t> oracle_exact_class_sizes(const std::vector<std::set<std::int64_t>>& sets) {
    const unsigned t = static_cast<unsigned>(sets.size());
    const unsigned full = (1u << t) - 1;
    auto intersection_size = [&](unsigned mask) {
        std::set<std::int64_t> acc;
        bool first = true;
        for (unsigned i = 0; i < t; ++i) {
            if (!(mask & (1u << i))) continue;
            if (first) {
                acc = sets[i];
                first = false;
            } else {
                std::set<std::int64_t> next;
                std::set_intersection(acc.begin(), acc.end(), sets[i].begin(), sets[i].end(),
                                      std::inserter(next, next.begin()));
                acc.swap(next);
            }
        }
        return static_cast<long long>(acc.size());
    };
    std::map<unsigned, std::size_t> out;
    for (unsigned s = 1; s <= full; ++s) {
        long long total = 0;
        for (unsigned sup = s; sup <= full; sup = (sup + 1) | s) {
            const int extra = __builtin_popcount(sup) - __builtin_popcount(s);
            total += (extra % 2 == 0 ? 1 : -1) * intersection_size(sup);
            if (sup == full) break;
        }
        if (total > 0) out[s] = static_cast<std::size_t>(total);
    }
    return out;
}

} // namespace crimegraph::testkit
