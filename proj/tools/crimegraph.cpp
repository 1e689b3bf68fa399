// crimegraph: street-network crime mapping, criminal community detection and analysis.
//
//   crimegraph build   --osm city.osm --graph out/graph.tsv
//   crimegraph map     --graph out/graph.tsv --crimes crimes.csv --types ASSAULT,THEFT --out out
//   crimegraph detect  --graph out/graph.tsv --types ASSAULT,THEFT --out out
//   crimegraph analyze --graph out/graph.tsv --types ASSAULT,THEFT --out out
//   crimegraph export  --graph out/graph.tsv --types ASSAULT,THEFT --out out
//   crimegraph run     --config pipeline.conf
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crimegraph/pipeline.hpp"

namespace cg = crimegraph;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;

void log_line(const std::string& msg) { std::cerr << "crimegraph: " << msg << '\n'; }

/// Flags shared by every subcommand; anything set here overrides the config file.
struct CommonFlags {
    std::string config;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "key = value configuration file");
        add(app, "--graph", "graph", "street graph (interchange .tsv or OSM .osm/.xml)");
        add(app, "--crimes", "crimes", "crime CSV");
        add(app, "--types", "types", "comma-separated crime types");
        add(app, "--seed", "seed", "detection seed");
        add(app, "--min-size", "min_size", "minimum community size for the top-k filter (default 100)");
        add(app, "--top-k", "top_k", "number of top communities kept per type (default 5)");
        add(app, "--out", "out", "output directory");
        add(app, "--mode", "mode", "node weight mode: self_loop|ignore");
        add(app, "--lambda", "lambda", "self-loop scale (default: mean edge affinity)");
        add(app, "--tolerance", "tolerance", "modularity gain tolerance (default 1e-7)");
        add(app, "--similarity", "similarity", "similarity reported as primary: normalized|paper_km");
        add(app, "--bbox", "bbox", "min_lat,min_lon,max_lat,max_lon crime filter");
        add(app, "--lat-col", "lat_col", "latitude column (default Y)");
        add(app, "--lon-col", "lon_col", "longitude column (default X)");
        add(app, "--category-col", "category_col", "crime type column (default Category)");
        add(app, "--id-col", "id_col", "id column (default IncidntNum)");
        add(app, "--date-col", "date_col", "date column (default Date)");
        add(app, "--has-header", "has_header", "CSV has a header row (default true)");
        add(app, "--highways", "highways", "comma-separated OSM highway classes to keep");
        add(app, "--threads", "threads", "worker threads (default 1)");
    }

    cg::PipelineConfig resolve() const {
        cg::PipelineConfig cfg;
        if (!config.empty()) cg::load_config(config, cfg);
        for (const auto& [key, value] : overrides) cg::apply_config_value(cfg, key, value);
        return cfg;
    }

private:
    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        app.add_option_function<std::string>(flag, [this, key](const std::string& v) { overrides[key] = v; }, help);
    }
};

cg::PreparedGraph load_prepared(const cg::PipelineConfig& cfg) {
    if (cfg.graph_path.empty()) throw cg::InvalidArgument("--graph is required");
    return cg::load_street_graph(cfg.graph_path, cfg.graph_format, cfg.highway_filter);
}

void require_types(const cg::PipelineConfig& cfg) {
    if (cfg.types.empty()) throw cg::InvalidArgument("--types is required");
    cg::check_type_slugs(cfg.types);
}

std::map<std::string, cg::CrimeLayer> load_layers(const cg::PipelineConfig& cfg, const cg::StreetGraph& g) {
    const cg::ArtifactPaths paths{cfg.out_dir};
    const auto fp = cg::graph_fingerprint(g);
    std::map<std::string, cg::CrimeLayer> layers;
    for (const auto& t : cfg.types) {
        auto layer = cg::load_layer(paths.layer(t).string());
        if (layer.graph_fingerprint != fp)
            throw cg::DataError("layer for '" + t + "' was built on a different graph (fingerprint " +
                                cg::fingerprint_hex(layer.graph_fingerprint) + ", graph " + cg::fingerprint_hex(fp) + ")");
        layers[t] = std::move(layer);
    }
    return layers;
}

std::map<std::string, cg::CommunitySet> load_detected(const cg::PipelineConfig& cfg,
                                                      const std::map<std::string, cg::CrimeLayer>& layers) {
    const cg::ArtifactPaths paths{cfg.out_dir};
    std::map<std::string, cg::CommunitySet> out;
    for (const auto& t : cfg.types) out[t] = cg::load_communities(paths.communities(t).string(), layers.at(t));
    return out;
}

int cmd_build(const cg::PipelineConfig& cfg, const std::string& osm) {
    if (osm.empty()) throw cg::InvalidArgument("--osm is required");
    if (cfg.graph_path.empty()) throw cg::InvalidArgument("--graph (output path) is required");
    const auto pg = cg::load_street_graph(osm, cg::GraphFormat::osm, cfg.highway_filter);
    const auto parent = std::filesystem::path(cfg.graph_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    cg::save_graph(pg.graph, cfg.graph_path);
    log_line("build: " + std::to_string(pg.source_nodes) + " nodes / " + std::to_string(pg.source_edges) +
             " directed edges; kept " + std::to_string(pg.graph.node_count()) + " nodes / " +
             std::to_string(pg.graph.edge_count()) + " edges; " + std::to_string(pg.removed_nodes) +
             " nodes outside the largest component; " + std::to_string(pg.dangling_refs) + " dangling way refs dropped");
    return 0;
}

int cmd_map(const cg::PipelineConfig& cfg) {
    require_types(cfg);
    if (cfg.crimes_path.empty()) throw cg::InvalidArgument("--crimes is required");
    const auto pg = load_prepared(cfg);
    const auto csv = cg::parse_crime_csv(cfg.crimes_path, cfg.columns, cfg.bbox);
    log_line("map: " + std::to_string(csv.total_rows) + " rows, " + std::to_string(csv.rejected.total()) + " rejected");
    const auto layers = cg::map_all_types(pg.graph, csv.records, cfg.types, cfg.threads);
    const cg::ArtifactPaths paths{cfg.out_dir};
    std::filesystem::create_directories(paths.dir);
    for (const auto& t : cfg.types) {
        cg::save_layer(layers.at(t), paths.layer(t).string());
        log_line("map: " + t + ": " + std::to_string(layers.at(t).total_mapped) + " crimes mapped");
    }
    return 0;
}

int cmd_detect(const cg::PipelineConfig& cfg) {
    require_types(cfg);
    const auto pg = load_prepared(cfg);
    const auto layers = load_layers(cfg, pg.graph);
    const auto detected = cg::detect_all_types(pg.graph, layers, cfg.types, cfg.detection, cfg.threads);
    const cg::ArtifactPaths paths{cfg.out_dir};
    for (const auto& t : cfg.types) {
        cg::save_communities(detected.at(t), paths.communities(t).string());
        log_line("detect: " + t + ": " + std::to_string(detected.at(t).communities.size()) + " communities, Q = " +
                 cg::text::format_fixed(detected.at(t).modularity, 6));
    }
    return 0;
}

cg::AnalysisReport analyze_persisted(const cg::PipelineConfig& cfg, const cg::StreetGraph& g,
                                     const std::map<std::string, cg::CrimeLayer>& layers,
                                     const std::map<std::string, cg::CommunitySet>& detected) {
    auto report = cg::analyze(g, cfg.types, detected, layers, cfg.min_size, cfg.top_k);
    report.similarity_variant = cfg.similarity_variant;
    return report;
}

int cmd_analyze(const cg::PipelineConfig& cfg) {
    require_types(cfg);
    cg::validate(cfg);
    const auto pg = load_prepared(cfg);
    const auto layers = load_layers(cfg, pg.graph);
    const auto detected = load_detected(cfg, layers);
    const auto report = analyze_persisted(cfg, pg.graph, layers, detected);
    const cg::ArtifactPaths paths{cfg.out_dir};
    cg::write_text_file(paths.report().string(), cg::render_report(report));
    log_line("analyze: report written to " + paths.report().string());
    return 0;
}

int cmd_export(const cg::PipelineConfig& cfg) {
    require_types(cfg);
    cg::validate(cfg);
    const auto pg = load_prepared(cfg);
    const auto layers = load_layers(cfg, pg.graph);
    const auto detected = load_detected(cfg, layers);
    const auto report = analyze_persisted(cfg, pg.graph, layers, detected);
    const cg::ArtifactPaths paths{cfg.out_dir};
    cg::write_text_file(paths.geojson().string(),
                        cg::export_geojson(pg.graph, report.overlay, cfg.types, layers, detected, {cfg.include_unclassified}));
    log_line("export: GeoJSON written to " + paths.geojson().string());
    return 0;
}

int cmd_run(const cg::PipelineConfig& cfg) {
    const auto res = cg::run_pipeline(cfg, log_line);
    std::cout << res.report_text;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crimegraph: crime mapping and criminal community analysis on street networks"};
    app.require_subcommand(1);

    std::string osm_path;
    bool include_none = false;
    std::vector<std::pair<CLI::App*, std::unique_ptr<CommonFlags>>> subs;
    auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        subs.emplace_back(s, std::make_unique<CommonFlags>());
        subs.back().second->attach(*s);
        return s;
    };
    auto* build = sub("build", "parse an OSM extract and write the prepared street graph");
    build->add_option("--osm", osm_path, "OSM XML extract")->required();
    auto* map = sub("map", "map crimes to nearest nodes, one layer per type");
    auto* detect = sub("detect", "detect communities on each crime layer");
    auto* analyze = sub("analyze", "score and compare the top communities, write report.txt");
    auto* exp = sub("export", "write overlay.geojson");
    exp->add_flag("--include-none", include_none, "also emit nodes outside every top set");
    auto* run = sub("run", "full pipeline");
    run->add_flag("--include-none", include_none, "also emit nodes outside every top set");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        for (const auto& [s, flags] : subs) {
            if (!s->parsed()) continue;
            auto cfg = flags->resolve();
            if (include_none) cfg.include_unclassified = true;
            if (s == build) return cmd_build(cfg, osm_path);
            if (s == map) return cmd_map(cfg);
            if (s == detect) return cmd_detect(cfg);
            if (s == analyze) return cmd_analyze(cfg);
            if (s == exp) return cmd_export(cfg);
            if (s == run) return cmd_run(cfg);
        }
    } catch (const cg::InvalidArgument& e) {
        log_line(std::string("usage error: ") + e.what());
        return exit_usage;
    } catch (const cg::PipelineError& e) {
        log_line(e.what());
        return exit_data;
    } catch (const std::exception& e) {
        log_line(std::string("error: ") + e.what());
        return exit_data;
    }
    return exit_usage;
}
