#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crimegraph/error.hpp"
#include "crimegraph/geo.hpp"
#include "crimegraph/graph.hpp"
#include "crimegraph/ingest.hpp"

namespace crimegraph {

/// Per-crime-type count of events assigned to each node. Nodes absent from `counts` have zero.
struct CrimeLayer {
    std::string crime_type;
    std::map<NodeId, std::int64_t> counts;
    std::int64_t total_mapped = 0;
    std::uint64_t graph_fingerprint = 0;
    double max_assignment_m = 0.0; // farthest crime-to-node snap (not persisted)

    std::int64_t count(NodeId v) const {
        const auto it = counts.find(v);
        return it == counts.end() ? 0 : it->second;
    }

    friend bool operator==(const CrimeLayer& a, const CrimeLayer& b) {
        return a.crime_type == b.crime_type && a.counts == b.counts && a.total_mapped == b.total_mapped &&
               a.graph_fingerprint == b.graph_fingerprint;
    }
};

struct MappingOptions {
    /// Worker threads for the nearest-node queries; 0 uses hardware concurrency.
    unsigned threads = 1;
};

/// Assigns every crime of `crime_type` to its nearest node using a prebuilt index.
inline CrimeLayer map_crimes(const SpatialIndex& idx, std::uint64_t fingerprint, std::span<const CrimeRecord> crimes,
                             const std::string& crime_type, MappingOptions opt = {}) {
    std::vector<const CrimeRecord*> matching;
    for (const auto& c : crimes)
        if (c.category == crime_type) matching.push_back(&c);

    unsigned workers = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, matching.size() / 1024)));
    workers = std::max(workers, 1u);

    struct Partial {
        std::map<NodeId, std::int64_t> counts;
        double max_m = 0.0;
    };
    std::vector<Partial> partials(workers);
    auto work = [&](unsigned w) {
        const std::size_t begin = matching.size() * w / workers;
        const std::size_t end = matching.size() * (w + 1) / workers;
        auto& part = partials[w];
        for (std::size_t i = begin; i < end; ++i) {
            const auto hit = idx.nearest(matching[i]->point);
            ++part.counts[hit.id];
            part.max_m = std::max(part.max_m, hit.meters);
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }

    CrimeLayer layer;
    layer.crime_type = crime_type;
    layer.graph_fingerprint = fingerprint;
    for (const auto& part : partials) {
        for (const auto& [id, n] : part.counts) layer.counts[id] += n;
        layer.max_assignment_m = std::max(layer.max_assignment_m, part.max_m);
    }
    layer.total_mapped = static_cast<std::int64_t>(matching.size());
    return layer;
}

inline CrimeLayer map_crimes(const StreetGraph& g, std::span<const CrimeRecord> crimes, const std::string& crime_type,
                             MappingOptions opt = {}) {
    if (g.empty()) throw InvalidArgument("map_crimes: empty graph");
    const auto pts = g.indexed_points();
    const SpatialIndex idx(pts);
    return map_crimes(idx, graph_fingerprint(g), crimes, crime_type, opt);
}

// crimegraph-layer-v1: "crimegraph-layer-v1<TAB>crime_type<TAB>fingerprint" then "node<TAB>count".

inline constexpr std::string_view layer_format_magic = "crimegraph-layer-v1";

inline void write_layer(const CrimeLayer& layer, std::ostream& out) {
    if (layer.crime_type.find_first_of("\t\n") != std::string::npos)
        throw InvalidArgument("layer: crime type contains a tab or newline");
    out << layer_format_magic << '\t' << layer.crime_type << '\t' << fingerprint_hex(layer.graph_fingerprint) << '\n';
    for (const auto& [id, n] : layer.counts)
        if (n != 0) out << id << '\t' << n << '\n';
}

inline void save_layer(const CrimeLayer& layer, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("layer: cannot write '" + path + "'");
    write_layer(layer, out);
}

inline CrimeLayer read_layer(std::istream& in, const std::string& source = "<stream>") {
    auto fail = [&](std::size_t line, const std::string& msg) {
        return DataError("layer " + source + ":" + std::to_string(line) + ": " + msg);
    };
    std::string line;
    if (!std::getline(in, line)) throw fail(1, "empty file");
    const auto head = text::split(line, '\t');
    if (head.size() != 3 || head[0] != layer_format_magic) throw fail(1, "version mismatch or bad header");
    CrimeLayer layer;
    layer.crime_type = std::string(head[1]);
    {
        const std::string hex(head[2]);
        if (hex.size() != 16 || hex.find_first_not_of("0123456789abcdef") != std::string::npos)
            throw fail(1, "bad graph fingerprint");
        layer.graph_fingerprint = std::stoull(hex, nullptr, 16);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = text::split(line, '\t');
        const auto id = f.size() == 2 ? text::parse_int(f[0]) : std::nullopt;
        const auto n = f.size() == 2 ? text::parse_int(f[1]) : std::nullopt;
        if (!id || !n || *n < 0) throw fail(line_no, "expected node-id<TAB>non-negative count");
        if (!layer.counts.emplace(*id, *n).second) throw fail(line_no, "duplicate node id");
        layer.total_mapped += *n;
    }
    return layer;
}

inline CrimeLayer load_layer(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("layer: cannot open '" + path + "'");
    return read_layer(in, path);
}

} // namespace crimegraph
