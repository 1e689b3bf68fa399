#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crimegraph/analysis.hpp"
#include "crimegraph/communities.hpp"
#include "crimegraph/error.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/ingest.hpp"
#include "crimegraph/mapping.hpp"

namespace crimegraph {

inline constexpr std::string_view report_format_magic = "crimegraph-report-v1";
inline constexpr std::size_t report_table_rows = 12;

namespace detail {

inline std::string score6(double v) { return std::isnan(v) ? "nan" : text::format_fixed(v, 6); }

} // namespace detail

/// Rows "Avg<TAB>#" for the `rows` communities with the highest crime average.
inline std::string render_community_table(const std::vector<Community>& ranked, std::size_t rows = report_table_rows) {
    std::string out = "Avg\t#\n";
    for (std::size_t i = 0; i < ranked.size() && i < rows; ++i)
        out += text::format_fixed(ranked[i].crime_avg, 2) + '\t' + std::to_string(ranked[i].size()) + '\n';
    return out;
}

/// Plain-text report: per-type community tables, score table, similarities, overlay sizes and
/// a key=value block. Byte-deterministic for a given report.
inline std::string render_report(const AnalysisReport& report) {
    std::ostringstream out;
    out << report_format_magic << '\n';
    out << "# similarity.normalized is unitless; similarity.paper_km sums distances in kilometers\n";
    out << "# community detection affinity = 1 / max(distance_m, 1)\n";

    for (const auto& t : report.types) {
        out << "\n[communities " << t.crime_type << "]\n";
        out << render_community_table(t.ranked);
    }

    out << "\n[summary]\n";
    out << "crime_type\tcommunities\ttop_k\ttop_nodes\tcriminal_nodes\tshort_of_k\n";
    for (const auto& t : report.types)
        out << t.crime_type << '\t' << t.community_count << '\t' << t.top.communities.size() << '\t' << t.top_nodes << '\t'
            << t.criminal_nodes << '\t' << (t.top.short_of_k ? "yes" : "no") << '\n';

    out << "\n[scores]\n";
    out << "Crime type\tHomogeneity\tCompleteness\n";
    for (const auto& t : report.types)
        out << t.crime_type << '\t' << detail::score6(t.homogeneity) << '\t' << detail::score6(t.completeness) << '\n';

    out << "\n[similarity]\n";
    out << "type_a\ttype_b\tnormalized\tpaper_km\n";
    for (const auto& s : report.similarity)
        out << s.type_a << '\t' << s.type_b << '\t' << detail::score6(s.normalized) << '\t' << detail::score6(s.paper_km)
            << '\n';

    out << "\n[overlay]\n";
    out << "class\tnodes\n";
    for (const auto& [label, n] : overlay_class_sizes(report.overlay)) out << label << '\t' << n << '\n';

    out << "\n[values]\n";
    for (const auto& t : report.types) {
        out << "homogeneity." << t.crime_type << '=' << detail::score6(t.homogeneity) << '\n';
        out << "completeness." << t.crime_type << '=' << detail::score6(t.completeness) << '\n';
    }
    for (const auto& s : report.similarity) {
        out << "similarity.normalized." << s.type_a << '.' << s.type_b << '=' << detail::score6(s.normalized) << '\n';
        out << "similarity.paper_km." << s.type_a << '.' << s.type_b << '=' << detail::score6(s.paper_km) << '\n';
    }
    for (const auto& s : report.similarity)
        out << "similarity." << s.type_a << '.' << s.type_b << '='
            << detail::score6(report.similarity_variant == "paper_km" ? s.paper_km : s.normalized) << '\n';
    return out.str();
}

/// Parses the `[values]` block of a rendered report.
inline std::map<std::string, std::string> report_values(const std::string& rendered) {
    std::map<std::string, std::string> out;
    std::istringstream in(rendered);
    std::string line;
    bool in_values = false;
    while (std::getline(in, line)) {
        if (line.starts_with('[')) {
            in_values = line == "[values]";
            continue;
        }
        if (!in_values || line.empty()) continue;
        const auto eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

struct GeoJsonOptions {
    bool include_unclassified = false;
};

/// RFC 7946 FeatureCollection with one Point per overlay node ([lon, lat]); per-type crime
/// counts and community ids go in the properties.
inline std::string export_geojson(const StreetGraph& g, const std::map<NodeId, OverlayClass>& overlay,
                                  const std::vector<std::string>& types, const std::map<std::string, CrimeLayer>& layers,
                                  const std::map<std::string, CommunitySet>& communities, GeoJsonOptions opt = {}) {
    using json = nlohmann::ordered_json;
    json features = json::array();
    auto emit = [&](NodeId id, const GeoPoint& p, const std::string& label) {
        json counts = json::object();
        json cids = json::object();
        for (const auto& t : types) {
            const auto lit = layers.find(t);
            counts[t] = lit == layers.end() ? 0 : lit->second.count(id);
            const auto cit = communities.find(t);
            if (cit != communities.end()) {
                const auto pit = cit->second.partition.find(id);
                cids[t] = pit == cit->second.partition.end() ? json(nullptr) : json(pit->second);
            } else {
                cids[t] = nullptr;
            }
        }
        json f = json::object();
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", json::array({p.lon, p.lat})}};
        f["properties"] = {{"node_id", id}, {"overlay_class", label}, {"crime_counts", counts}, {"community_ids", cids}};
        features.push_back(std::move(f));
    };
    for (const auto& [id, cls] : overlay) {
        const auto it = g.nodes.find(id);
        if (it == g.nodes.end()) throw InvalidArgument("export_geojson: overlay node " + std::to_string(id) + " not in graph");
    }
    for (const auto& [id, p] : g.nodes) {
        const auto it = overlay.find(id);
        if (it != overlay.end() && !it->second.empty()) emit(id, p, overlay_label(it->second));
        else if (opt.include_unclassified) emit(id, p, "none");
    }
    json fc = json::object();
    fc["type"] = "FeatureCollection";
    fc["features"] = std::move(features);
    return fc.dump(1, '\t') + '\n';
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw DataError("write failed for '" + path + "'");
}

} // namespace crimegraph
