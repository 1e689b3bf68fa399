#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crimegraph/analysis.hpp"
#include "crimegraph/communities.hpp"
#include "crimegraph/error.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/ingest.hpp"
#include "crimegraph/mapping.hpp"
#include "crimegraph/report.hpp"

namespace crimegraph {

enum class GraphFormat { automatic, osm, interchange };

struct PipelineConfig {
    std::string graph_path;
    GraphFormat graph_format = GraphFormat::automatic;
    std::set<std::string> highway_filter = default_highway_filter();
    std::string crimes_path;
    ColumnMapping columns;
    std::optional<BBox> bbox;
    std::vector<std::string> types;
    DetectionConfig detection;
    std::size_t min_size = 100;
    std::size_t top_k = 5;
    std::string similarity_variant = "normalized";
    std::string out_dir = "out";
    unsigned threads = 1;
    bool include_unclassified = false;
};

/// Throws InvalidArgument when the configuration cannot describe a run.
inline void validate(const PipelineConfig& cfg) {
    if (cfg.types.empty()) throw InvalidArgument("config: at least one crime type is required");
    if (cfg.top_k < 1) throw InvalidArgument("config: top_k must be >= 1");
    if (cfg.min_size < 1) throw InvalidArgument("config: min_size must be >= 1");
    if (cfg.similarity_variant != "normalized" && cfg.similarity_variant != "paper_km")
        throw InvalidArgument("config: similarity must be 'normalized' or 'paper_km'");
    if (!(cfg.detection.tolerance >= 0.0)) throw InvalidArgument("config: tolerance must be >= 0");
    std::set<std::string> seen;
    for (const auto& t : cfg.types) {
        if (t.empty()) throw InvalidArgument("config: empty crime type");
        if (!seen.insert(t).second) throw InvalidArgument("config: duplicate crime type '" + t + "'");
    }
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s, ',')) {
        const auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw InvalidArgument("config: '" + key + "' expects a boolean, got '" + v + "'");
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    const auto n = text::parse_int(v);
    if (!n || *n < 0) throw InvalidArgument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(*n);
}

inline double parse_real(const std::string& key, const std::string& v) {
    const auto x = text::parse_double(v);
    if (!x) throw InvalidArgument("config: '" + key + "' expects a number, got '" + v + "'");
    return *x;
}

} // namespace detail

/// Sets one configuration key; keys match the config-file and long-flag names.
inline void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "graph") cfg.graph_path = value;
    else if (key == "graph_format") {
        if (value == "auto") cfg.graph_format = GraphFormat::automatic;
        else if (value == "osm") cfg.graph_format = GraphFormat::osm;
        else if (value == "tsv" || value == "interchange") cfg.graph_format = GraphFormat::interchange;
        else throw InvalidArgument("config: graph_format must be auto|osm|tsv");
    } else if (key == "highways") {
        const auto list = split_list(value);
        cfg.highway_filter = std::set<std::string>(list.begin(), list.end());
    } else if (key == "crimes") cfg.crimes_path = value;
    else if (key == "lat_col") cfg.columns.lat_col = value;
    else if (key == "lon_col") cfg.columns.lon_col = value;
    else if (key == "category_col") cfg.columns.category_col = value;
    else if (key == "id_col") cfg.columns.id_col = value;
    else if (key == "date_col") cfg.columns.date_col = value;
    else if (key == "has_header") cfg.columns.has_header = parse_bool(key, value);
    else if (key == "bbox") {
        const auto parts = split_list(value);
        if (parts.size() != 4) throw InvalidArgument("config: bbox expects min_lat,min_lon,max_lat,max_lon");
        cfg.bbox = BBox{parse_real(key, parts[0]), parse_real(key, parts[1]), parse_real(key, parts[2]),
                        parse_real(key, parts[3])};
    } else if (key == "types") cfg.types = split_list(value);
    else if (key == "seed") cfg.detection.seed = parse_count(key, value);
    else if (key == "mode") cfg.detection.mode = parse_node_weight_mode(value);
    else if (key == "lambda") {
        if (value == "auto" || value.empty()) cfg.detection.self_loop_scale.reset();
        else cfg.detection.self_loop_scale = parse_real(key, value);
    } else if (key == "tolerance") cfg.detection.tolerance = parse_real(key, value);
    else if (key == "min_size") cfg.min_size = parse_count(key, value);
    else if (key == "top_k") cfg.top_k = parse_count(key, value);
    else if (key == "similarity") cfg.similarity_variant = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_count(key, value));
    else if (key == "include_unclassified") cfg.include_unclassified = parse_bool(key, value);
    else throw InvalidArgument("config: unknown key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment.
inline void read_config(std::istream& in, PipelineConfig& cfg, const std::string& source = "<config>") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const auto body = text::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw InvalidArgument(source + ":" + std::to_string(line_no) + ": expected key = value");
        apply_config_value(cfg, std::string(text::trim(body.substr(0, eq))), std::string(text::trim(body.substr(eq + 1))));
    }
}

inline void load_config(const std::string& path, PipelineConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config: cannot open '" + path + "'");
    read_config(in, cfg, path);
}

/// A stage failed; `stage()` names it.
class PipelineError : public DataError {
public:
    PipelineError(std::string stage, const std::string& cause)
        : DataError("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// File-name-safe form of a crime type.
inline std::string type_slug(const std::string& type) {
    std::string s;
    for (unsigned char c : type) s += (std::isalnum(c) || c == '-' || c == '_') ? static_cast<char>(c) : '_';
    return s;
}

struct ArtifactPaths {
    std::filesystem::path dir;

    std::filesystem::path graph() const { return dir / "graph.tsv"; }
    std::filesystem::path layer(const std::string& t) const { return dir / ("layer." + type_slug(t) + ".tsv"); }
    std::filesystem::path communities(const std::string& t) const { return dir / ("communities." + type_slug(t) + ".tsv"); }
    std::filesystem::path report() const { return dir / "report.txt"; }
    std::filesystem::path geojson() const { return dir / "overlay.geojson"; }
};

inline void check_type_slugs(const std::vector<std::string>& types) {
    std::set<std::string> slugs;
    for (const auto& t : types)
        if (!slugs.insert(type_slug(t)).second)
            throw InvalidArgument("crime types '" + t + "' collide when used as file names");
}

struct PreparedGraph {
    StreetGraph graph;            // undirected, connected
    std::size_t source_nodes = 0;
    std::size_t source_edges = 0;
    std::size_t removed_nodes = 0; // outside the largest component
    std::size_t dangling_refs = 0;
};

/// Undirected projection restricted to the largest connected component.
inline PreparedGraph prepare_graph(const StreetGraph& raw) {
    PreparedGraph pg;
    pg.source_nodes = raw.node_count();
    pg.source_edges = raw.edge_count();
    pg.graph = largest_component(raw.directed ? undirected_projection(raw) : raw);
    pg.removed_nodes = pg.source_nodes - pg.graph.node_count();
    return pg;
}

inline PreparedGraph load_street_graph(const std::string& path, GraphFormat format,
                                       const std::set<std::string>& highway_filter) {
    if (format == GraphFormat::automatic) {
        const auto ext = std::filesystem::path(path).extension().string();
        format = (ext == ".osm" || ext == ".xml") ? GraphFormat::osm : GraphFormat::interchange;
    }
    if (format == GraphFormat::osm) {
        const auto extract = parse_osm_xml(path, highway_filter);
        auto pg = prepare_graph(build_street_graph(extract));
        pg.dangling_refs = extract.dangling_refs_dropped;
        return pg;
    }
    return prepare_graph(load_graph(path));
}

struct PipelineStats {
    std::size_t graph_nodes = 0;
    std::size_t graph_edges = 0;
    std::size_t removed_nodes = 0;
    std::size_t csv_rows = 0;
    std::size_t csv_rejected = 0;
    std::map<std::string, std::int64_t> mapped; // per analyzed type
    std::size_t unanalyzed_crimes = 0;          // valid rows of other types
    std::map<std::string, std::size_t> communities;
    std::map<std::string, double> max_assignment_m;
};

struct PipelineResult {
    AnalysisReport report;
    PipelineStats stats;
    std::string report_text;
    std::string geojson_text;
};

using LogSink = std::function<void(const std::string&)>;

/// Map every analyzed type over one shared index (types run concurrently when threads > 1).
inline std::map<std::string, CrimeLayer> map_all_types(const StreetGraph& g, const std::vector<CrimeRecord>& crimes,
                                                       const std::vector<std::string>& types, unsigned threads) {
    const auto pts = g.indexed_points();
    const SpatialIndex idx(pts);
    const auto fp = graph_fingerprint(g);
    std::map<std::string, CrimeLayer> layers;
    if (threads <= 1) {
        for (const auto& t : types) layers[t] = map_crimes(idx, fp, crimes, t);
        return layers;
    }
    std::vector<std::future<CrimeLayer>> jobs;
    for (const auto& t : types)
        jobs.push_back(std::async(std::launch::async, [&, t] { return map_crimes(idx, fp, crimes, t, {threads}); }));
    for (std::size_t i = 0; i < types.size(); ++i) layers[types[i]] = jobs[i].get();
    return layers;
}

inline std::map<std::string, CommunitySet> detect_all_types(const StreetGraph& g,
                                                            const std::map<std::string, CrimeLayer>& layers,
                                                            const std::vector<std::string>& types,
                                                            const DetectionConfig& cfg, unsigned threads) {
    const auto ag = distance_to_affinity(g);
    std::map<std::string, CommunitySet> out;
    if (threads <= 1) {
        for (const auto& t : types) out[t] = detect_communities(ag, layers.at(t), cfg);
        return out;
    }
    std::vector<std::future<CommunitySet>> jobs;
    for (const auto& t : types)
        jobs.push_back(std::async(std::launch::async, [&, t] { return detect_communities(ag, layers.at(t), cfg); }));
    for (std::size_t i = 0; i < types.size(); ++i) out[types[i]] = jobs[i].get();
    return out;
}

namespace detail {

template <class F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(stage, e.what());
    }
}

/// Removes everything written through it unless `commit()` is called.
class ArtifactWriter {
public:
    ArtifactWriter() = default;
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;
    ~ArtifactWriter() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
    }
    template <class F>
    void write(const std::filesystem::path& path, F&& writer) {
        written_.push_back(path);
        writer(path.string());
    }
    void commit() { committed_ = true; }

private:
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

} // namespace detail

/// ingest -> graph -> largest component -> mapping -> detection -> filtering -> analysis,
/// writing every artifact into `cfg.out_dir`. On failure no artifact of this run remains.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const LogSink& log = {}) {
    validate(cfg);
    check_type_slugs(cfg.types);
    if (cfg.graph_path.empty()) throw InvalidArgument("no graph source configured");
    if (cfg.crimes_path.empty()) throw InvalidArgument("no crime CSV configured");
    auto say = [&](const std::string& msg) {
        if (log) log(msg);
    };
    PipelineResult res;

    const auto pg = detail::run_stage(
        "build", [&] { return load_street_graph(cfg.graph_path, cfg.graph_format, cfg.highway_filter); });
    const StreetGraph& g = pg.graph;
    res.stats.graph_nodes = g.node_count();
    res.stats.graph_edges = g.edge_count();
    res.stats.removed_nodes = pg.removed_nodes;
    say("build: " + std::to_string(pg.source_nodes) + " nodes, " + std::to_string(pg.source_edges) +
        " edges read; largest component keeps " + std::to_string(g.node_count()) + " nodes / " +
        std::to_string(g.edge_count()) + " undirected edges (" + std::to_string(pg.removed_nodes) + " nodes removed)");

    const auto csv = detail::run_stage("ingest", [&] { return parse_crime_csv(cfg.crimes_path, cfg.columns, cfg.bbox); });
    res.stats.csv_rows = csv.total_rows;
    res.stats.csv_rejected = csv.rejected.total();
    say("ingest: " + std::to_string(csv.total_rows) + " rows, " + std::to_string(csv.records.size()) + " accepted, " +
        std::to_string(csv.rejected.total()) + " rejected");

    const auto layers = detail::run_stage("map", [&] { return map_all_types(g, csv.records, cfg.types, cfg.threads); });
    std::int64_t mapped_total = 0;
    for (const auto& t : cfg.types) {
        const auto& l = layers.at(t);
        res.stats.mapped[t] = l.total_mapped;
        res.stats.max_assignment_m[t] = l.max_assignment_m;
        mapped_total += l.total_mapped;
        say("map: " + t + ": " + std::to_string(l.total_mapped) + " crimes onto " + std::to_string(l.counts.size()) +
            " nodes (max snap " + text::format_fixed(l.max_assignment_m, 1) + " m)");
    }
    res.stats.unanalyzed_crimes = csv.records.size() - static_cast<std::size_t>(mapped_total);

    const auto detected = detail::run_stage("detect", [&] {
        return detect_all_types(g, layers, cfg.types, cfg.detection, cfg.threads);
    });
    for (const auto& t : cfg.types) {
        const auto& cs = detected.at(t);
        res.stats.communities[t] = cs.communities.size();
        say("detect: " + t + ": " + std::to_string(cs.communities.size()) + " communities, Q = " +
            text::format_fixed(cs.modularity, 6) + " (mode " + to_string(cs.mode) + ", lambda " +
            text::format_double(cs.self_loop_scale) + ")");
    }

    res.report = detail::run_stage("analyze", [&] {
        auto r = analyze(g, cfg.types, detected, layers, cfg.min_size, cfg.top_k);
        r.similarity_variant = cfg.similarity_variant;
        return r;
    });
    for (const auto& t : res.report.types)
        if (t.top.short_of_k)
            say("analyze: warning: only " + std::to_string(t.top.communities.size()) + " communities of '" + t.crime_type +
                "' have >= " + std::to_string(cfg.min_size) + " nodes");
    res.report_text = render_report(res.report);
    res.geojson_text = export_geojson(g, res.report.overlay, cfg.types, layers, detected, {cfg.include_unclassified});

    detail::run_stage("write", [&] {
        const ArtifactPaths out{cfg.out_dir};
        std::filesystem::create_directories(out.dir);
        detail::ArtifactWriter w;
        w.write(out.graph(), [&](const std::string& p) { save_graph(g, p); });
        for (const auto& t : cfg.types) {
            w.write(out.layer(t), [&](const std::string& p) { save_layer(layers.at(t), p); });
            w.write(out.communities(t), [&](const std::string& p) { save_communities(detected.at(t), p); });
        }
        w.write(out.report(), [&](const std::string& p) { write_text_file(p, res.report_text); });
        w.write(out.geojson(), [&](const std::string& p) { write_text_file(p, res.geojson_text); });
        w.commit();
        return 0;
    });
    say("write: artifacts in " + cfg.out_dir);
    return res;
}

} // namespace crimegraph
