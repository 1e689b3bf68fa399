#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crimegraph/error.hpp"
#include "crimegraph/geo.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/ingest.hpp"

namespace crimegraph::testkit {

inline NodeId grid_node_id(int row, int col, int cols) { return static_cast<NodeId>(row) * cols + col + 1; }

/// rows x cols lattice starting at `origin` (south-west corner) with 4-neighbour streets.
/// Longitude steps use the grid's mid latitude so spacing is near-uniform at city scale.
/// `jitter_fraction` > 0 perturbs node positions by up to that fraction of the spacing.
inline StreetGraph generate_grid_city(int rows, int cols, double spacing_m, GeoPoint origin, std::uint64_t seed,
                                      double jitter_fraction = 0.0, const EarthModel& earth = {}) {
    if (rows < 2 || cols < 2) throw InvalidArgument("grid city: rows and cols must be >= 2");
    if (!(spacing_m > 0.0)) throw InvalidArgument("grid city: spacing must be positive");
    const double dlat = spacing_m / earth.radius_m * 180.0 / std::numbers::pi;
    const double mid_lat = origin.lat + dlat * (rows - 1) / 2.0;
    const double dlon = dlat / std::cos(deg_to_rad(mid_lat));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    StreetGraph g;
    g.directed = false;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            GeoPoint p{origin.lat + r * dlat, origin.lon + c * dlon};
            if (jitter_fraction > 0.0) {
                p.lat += unit(rng) * jitter_fraction * dlat;
                p.lon += unit(rng) * jitter_fraction * dlon;
            }
            g.nodes.emplace(grid_node_id(r, c, cols), p);
        }
    auto link = [&](NodeId a, NodeId b) {
        g.edges.push_back({a, b, great_circle_distance(g.nodes.at(a), g.nodes.at(b), earth)});
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) link(grid_node_id(r, c, cols), grid_node_id(r, c + 1, cols));
            if (r + 1 < rows) link(grid_node_id(r, c, cols), grid_node_id(r + 1, c, cols));
        }
    return g;
}

struct HotspotSpec {
    NodeId center = 0;
    int radius_hops = 0;
    std::string crime_type;
    double rate = 0.0; // mean crimes per node (Poisson)
};

struct PlantConfig {
    double background_rate = 0.0;
    double jitter_m = 0.0; // crimes land uniformly in a disc of this radius around their node
};

struct PlantedCrimes {
    std::vector<CrimeRecord> crimes;
    std::vector<NodeId> source_node; // parallel to crimes
    std::map<std::string, std::set<NodeId>> ground_truth;
};

/// Nodes within `hops` of `center` (edges treated as undirected).
inline std::set<NodeId> hop_ball(const StreetGraph& g, NodeId center, int hops) {
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& e : g.edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    std::set<NodeId> seen{center};
    std::queue<std::pair<NodeId, int>> q;
    q.push({center, 0});
    while (!q.empty()) {
        const auto [u, d] = q.front();
        q.pop();
        if (d == hops) continue;
        for (NodeId v : adj[u])
            if (seen.insert(v).second) q.push({v, d + 1});
    }
    return seen;
}

/// Poisson crime events around hotspot balls plus a background rate everywhere, for every type
/// named in `specs`. Overlapping hotspots of one type merge (the larger rate wins).
inline PlantedCrimes plant_hotspots(const StreetGraph& g, const std::vector<HotspotSpec>& specs, std::uint64_t seed,
                                    const PlantConfig& cfg = {}, const EarthModel& earth = {}) {
    PlantedCrimes out;
    std::map<std::string, std::map<NodeId, double>> rate_by_type;
    for (const auto& s : specs) {
        if (!g.nodes.contains(s.center)) throw InvalidArgument("plant_hotspots: center is not a graph node");
        auto& rates = rate_by_type[s.crime_type];
        for (NodeId v : hop_ball(g, s.center, s.radius_hops)) {
            rates[v] = std::max(rates[v], s.rate);
            out.ground_truth[s.crime_type].insert(v);
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t serial = 0;
    for (const auto& [type, rates] : rate_by_type) {
        for (const auto& [id, p] : g.nodes) {
            const auto it = rates.find(id);
            const double rate = it != rates.end() ? it->second : cfg.background_rate;
            if (rate <= 0.0) continue;
            std::poisson_distribution<int> draw(rate);
            const int n = draw(rng);
            for (int k = 0; k < n; ++k) {
                // Uniform point in a disc of radius jitter_m.
                const double r = cfg.jitter_m * std::sqrt(unit(rng));
                const double theta = 2.0 * std::numbers::pi * unit(rng);
                const double north = r * std::sin(theta), east = r * std::cos(theta);
                GeoPoint q{p.lat + north / earth.radius_m * 180.0 / std::numbers::pi,
                           p.lon + east / (earth.radius_m * std::cos(deg_to_rad(p.lat))) * 180.0 / std::numbers::pi};
                out.crimes.push_back({"syn-" + std::to_string(++serial), type, q, std::nullopt});
                out.source_node.push_back(id);
            }
        }
    }
    return out;
}

/// A ready-made city: grid, hotspots, generated crimes and ground truth.
struct SyntheticCity {
    StreetGraph graph;
    std::vector<HotspotSpec> hotspots;
    PlantedCrimes planted;
};

inline SyntheticCity make_synthetic_city(int rows, int cols, double spacing_m, GeoPoint origin,
                                         std::vector<HotspotSpec> hotspots, std::uint64_t seed, const PlantConfig& cfg = {}) {
    SyntheticCity city;
    city.graph = generate_grid_city(rows, cols, spacing_m, origin, seed);
    city.hotspots = std::move(hotspots);
    city.planted = plant_hotspots(city.graph, city.hotspots, seed + 1, cfg);
    return city;
}

/// Writes crimes with an SFO-style header (X = longitude, Y = latitude).
inline void write_crime_csv(const std::vector<CrimeRecord>& crimes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "IncidntNum,Category,Descript,Date,X,Y\n";
    for (const auto& c : crimes)
        out << c.id << ',' << c.category << ",\"synthetic, generated\"," << c.timestamp.value_or("") << ','
            << text::format_double(c.point.lon) << ',' << text::format_double(c.point.lat) << '\n';
}

} // namespace crimegraph::testkit
