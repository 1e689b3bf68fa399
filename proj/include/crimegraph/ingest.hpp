#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <expat.h>

#include "crimegraph/error.hpp"
#include "crimegraph/geo.hpp"
#include "crimegraph/graph.hpp"

namespace crimegraph {

// ---------------------------------------------------------------------------------------------
// Text helpers shared by the readers and writers
// ---------------------------------------------------------------------------------------------

namespace text {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Parses the whole of `s` (after trimming) as a double; nullopt otherwise.
inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Shortest decimal form that reads back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

} // namespace text

// ---------------------------------------------------------------------------------------------
// Crime CSV
// ---------------------------------------------------------------------------------------------

/// One georeferenced crime event.
struct CrimeRecord {
    std::string id;
    std::string category;
    GeoPoint point;
    std::optional<std::string> timestamp;

    friend bool operator==(const CrimeRecord&, const CrimeRecord&) = default;
};

/// Which CSV columns hold which crime fields. Without a header, names are 0-based indices.
/// `id_col` and `date_col` may be empty (ids then default to the 1-based data row number).
struct ColumnMapping {
    std::string lat_col = "Y";
    std::string lon_col = "X";
    std::string category_col = "Category";
    std::string id_col = "IncidntNum";
    std::string date_col = "Date";
    bool has_header = true;
};

/// Inclusive lat/lon rectangle.
struct BBox {
    double min_lat = -90.0;
    double min_lon = -180.0;
    double max_lat = 90.0;
    double max_lon = 180.0;

    bool contains(const GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
};

struct CsvRejections {
    std::size_t malformed_row = 0;      // too few fields
    std::size_t bad_coordinate = 0;     // unparsable lat/lon
    std::size_t out_of_range = 0;       // |lat| > 90 or |lon| > 180
    std::size_t out_of_bbox = 0;
    std::size_t empty_category = 0;

    std::size_t total() const { return malformed_row + bad_coordinate + out_of_range + out_of_bbox + empty_category; }
};

struct CrimeCsvResult {
    std::vector<CrimeRecord> records;
    std::size_t total_rows = 0; // data rows, header excluded
    CsvRejections rejected;
};

/// RFC 4180 record reader: quoted fields, doubled quotes, embedded separators and newlines,
/// LF or CRLF line ends.
class CsvReader {
public:
    explicit CsvReader(std::istream& in, char sep = ',') : in_(in), sep_(sep) {}

    /// Reads the next record into `fields`; false at end of input.
    bool next(std::vector<std::string>& fields) {
        fields.clear();
        std::string line;
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        std::string field;
        bool quoted = false;
        bool field_was_quoted = false;
        for (;;) {
            for (std::size_t i = 0; i < line.size(); ++i) {
                const char ch = line[i];
                if (quoted) {
                    if (ch == '"') {
                        if (i + 1 < line.size() && line[i + 1] == '"') {
                            field.push_back('"');
                            ++i;
                        } else {
                            quoted = false;
                        }
                    } else {
                        field.push_back(ch);
                    }
                } else if (ch == '"' && field.empty() && !field_was_quoted) {
                    quoted = true;
                    field_was_quoted = true;
                } else if (ch == sep_) {
                    fields.push_back(std::move(field));
                    field.clear();
                    field_was_quoted = false;
                } else if (ch == '\r' && i + 1 == line.size()) {
                    // CRLF
                } else {
                    field.push_back(ch);
                }
            }
            if (!quoted) break;
            // Newline inside a quoted field.
            if (!std::getline(in_, line)) throw DataError("csv: unterminated quoted field starting before line " +
                                                          std::to_string(line_no_));
            ++line_no_;
            field.push_back('\n');
        }
        fields.push_back(std::move(field));
        return true;
    }

    std::size_t line_number() const { return line_no_; }

private:
    std::istream& in_;
    char sep_;
    std::size_t line_no_ = 0;
};

namespace detail {

inline std::optional<std::size_t> resolve_column(const std::vector<std::string>& header, const std::string& name,
                                                 bool has_header, bool required) {
    if (name.empty()) {
        if (required) throw InvalidArgument("column mapping: required column name is empty");
        return std::nullopt;
    }
    if (has_header) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (text::trim(header[i]) == name) return i;
        throw DataError("crime csv: column '" + name + "' not found in header");
    }
    const auto idx = text::parse_int(name);
    if (!idx || *idx < 0) throw InvalidArgument("column mapping: '" + name + "' is not a column index (no header)");
    return static_cast<std::size_t>(*idx);
}

} // namespace detail

/// Parses a crime CSV stream. Every data row is either converted or counted in `rejected`.
inline CrimeCsvResult parse_crime_csv(std::istream& in, const ColumnMapping& map,
                                      const std::optional<BBox>& bbox = std::nullopt) {
    if (map.lat_col == map.lon_col) throw InvalidArgument("column mapping: lat_col equals lon_col");
    CsvReader reader(in);
    std::vector<std::string> fields;
    std::vector<std::string> header;
    if (map.has_header) {
        if (!reader.next(header)) return {};
        // UTF-8 byte order mark
        if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    }
    const auto lat_i = *detail::resolve_column(header, map.lat_col, map.has_header, true);
    const auto lon_i = *detail::resolve_column(header, map.lon_col, map.has_header, true);
    const auto cat_i = *detail::resolve_column(header, map.category_col, map.has_header, true);
    const auto id_i = detail::resolve_column(header, map.id_col, map.has_header, false);
    const auto date_i = detail::resolve_column(header, map.date_col, map.has_header, false);
    std::size_t needed = std::max({lat_i, lon_i, cat_i});
    if (id_i) needed = std::max(needed, *id_i);
    if (date_i) needed = std::max(needed, *date_i);

    CrimeCsvResult out;
    while (reader.next(fields)) {
        if (fields.size() == 1 && text::trim(fields[0]).empty()) continue; // blank line
        ++out.total_rows;
        if (fields.size() <= needed) {
            ++out.rejected.malformed_row;
            continue;
        }
        const auto lat = text::parse_double(fields[lat_i]);
        const auto lon = text::parse_double(fields[lon_i]);
        if (!lat || !lon || !std::isfinite(*lat) || !std::isfinite(*lon)) {
            ++out.rejected.bad_coordinate;
            continue;
        }
        const GeoPoint p{*lat, *lon};
        if (!is_valid(p)) {
            ++out.rejected.out_of_range;
            continue;
        }
        if (bbox && !bbox->contains(p)) {
            ++out.rejected.out_of_bbox;
            continue;
        }
        const auto category = text::trim(fields[cat_i]);
        if (category.empty()) {
            ++out.rejected.empty_category;
            continue;
        }
        CrimeRecord rec;
        rec.id = id_i ? std::string(text::trim(fields[*id_i])) : std::to_string(out.total_rows);
        rec.category = std::string(category);
        rec.point = p;
        if (date_i && !text::trim(fields[*date_i]).empty()) rec.timestamp = std::string(text::trim(fields[*date_i]));
        out.records.push_back(std::move(rec));
    }
    return out;
}

inline CrimeCsvResult parse_crime_csv(const std::string& path, const ColumnMapping& map,
                                      const std::optional<BBox>& bbox = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("crime csv: cannot open '" + path + "'");
    return parse_crime_csv(in, map, bbox);
}

// ---------------------------------------------------------------------------------------------
// OpenStreetMap XML
// ---------------------------------------------------------------------------------------------

/// Drivable highway classes used when no filter is configured.
inline std::set<std::string> default_highway_filter() {
    return {"motorway",     "motorway_link", "trunk",    "trunk_link",   "primary",
            "primary_link", "secondary",     "secondary_link", "tertiary", "tertiary_link",
            "unclassified", "residential",   "living_street", "road"};
}

namespace detail {

struct OsmParseState {
    XML_Parser parser = nullptr;
    RawMapExtract* out = nullptr;
    std::vector<RawWay> all_ways;
    std::vector<std::string> highway_of_way;

    enum class In { none, node, way, other } in = In::none;
    RawWay way;
    std::string highway, oneway, junction;
    std::string error;

    void fail(const std::string& msg) {
        if (error.empty())
            error = msg + " at byte offset " + std::to_string(XML_GetCurrentByteIndex(parser));
        XML_StopParser(parser, XML_FALSE);
    }
};

inline const char* osm_attr(const XML_Char** attrs, const char* name) {
    for (int i = 0; attrs[i]; i += 2)
        if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
    return nullptr;
}

inline void XMLCALL osm_start(void* user, const XML_Char* name, const XML_Char** attrs) {
    auto& st = *static_cast<OsmParseState*>(user);
    if (!st.error.empty()) return;
    if (std::strcmp(name, "node") == 0 && st.in == OsmParseState::In::none) {
        const char* id = osm_attr(attrs, "id");
        const char* lat = osm_attr(attrs, "lat");
        const char* lon = osm_attr(attrs, "lon");
        const auto nid = id ? text::parse_int(id) : std::nullopt;
        const auto la = lat ? text::parse_double(lat) : std::nullopt;
        const auto lo = lon ? text::parse_double(lon) : std::nullopt;
        if (!nid || !la || !lo) return st.fail("osm: node element missing or invalid id/lat/lon");
        const GeoPoint p{*la, *lo};
        if (!is_valid(p)) return st.fail("osm: node " + std::to_string(*nid) + " has out-of-range coordinates");
        st.out->nodes[*nid] = p;
        st.in = OsmParseState::In::node;
    } else if (std::strcmp(name, "way") == 0 && st.in == OsmParseState::In::none) {
        const char* id = osm_attr(attrs, "id");
        const auto wid = id ? text::parse_int(id) : std::nullopt;
        if (!wid) return st.fail("osm: way element missing or invalid id");
        st.way = RawWay{*wid, {}, Oneway::no};
        st.highway.clear();
        st.oneway.clear();
        st.junction.clear();
        st.in = OsmParseState::In::way;
    } else if (std::strcmp(name, "nd") == 0 && st.in == OsmParseState::In::way) {
        const char* ref = osm_attr(attrs, "ref");
        const auto r = ref ? text::parse_int(ref) : std::nullopt;
        if (!r) return st.fail("osm: nd element missing or invalid ref");
        st.way.node_refs.push_back(*r);
    } else if (std::strcmp(name, "tag") == 0 && st.in == OsmParseState::In::way) {
        const char* k = osm_attr(attrs, "k");
        const char* v = osm_attr(attrs, "v");
        if (!k || !v) return;
        if (std::strcmp(k, "highway") == 0) st.highway = v;
        else if (std::strcmp(k, "oneway") == 0) st.oneway = v;
        else if (std::strcmp(k, "junction") == 0) st.junction = v;
    } else if ((std::strcmp(name, "relation") == 0) && st.in == OsmParseState::In::none) {
        st.in = OsmParseState::In::other;
    }
}

inline void XMLCALL osm_end(void* user, const XML_Char* name) {
    auto& st = *static_cast<OsmParseState*>(user);
    if (!st.error.empty()) return;
    if (std::strcmp(name, "node") == 0 && st.in == OsmParseState::In::node) {
        st.in = OsmParseState::In::none;
    } else if (std::strcmp(name, "way") == 0 && st.in == OsmParseState::In::way) {
        if (st.oneway == "yes" || st.oneway == "true" || st.oneway == "1" || st.junction == "roundabout")
            st.way.oneway = Oneway::forward;
        else if (st.oneway == "-1" || st.oneway == "reverse")
            st.way.oneway = Oneway::reverse;
        st.all_ways.push_back(std::move(st.way));
        st.highway_of_way.push_back(st.highway);
        st.in = OsmParseState::In::none;
    } else if (std::strcmp(name, "relation") == 0 && st.in == OsmParseState::In::other) {
        st.in = OsmParseState::In::none;
    }
}

} // namespace detail

/// Extracts nodes and the ways whose `highway` tag is in `highway_filter`.
///
/// Way node order is preserved. References to nodes absent from the file are dropped and
/// counted in `dangling_refs_dropped`; ways left with no nodes are discarded.
inline RawMapExtract parse_osm_xml(std::istream& in, const std::set<std::string>& highway_filter) {
    if (highway_filter.empty()) throw InvalidArgument("osm: highway filter is empty");
    RawMapExtract out;
    detail::OsmParseState st;
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate("UTF-8"), &XML_ParserFree);
    if (!parser) throw Error("osm: cannot create XML parser");
    st.parser = parser.get();
    st.out = &out;
    XML_SetUserData(parser.get(), &st);
    XML_SetElementHandler(parser.get(), detail::osm_start, detail::osm_end);

    std::vector<char> buf(1 << 16);
    for (;;) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        const bool final = got < static_cast<std::streamsize>(buf.size());
        if (XML_Parse(parser.get(), buf.data(), static_cast<int>(got), final) == XML_STATUS_ERROR) {
            if (!st.error.empty()) throw DataError(st.error);
            throw DataError(std::string("osm: malformed XML (") + XML_ErrorString(XML_GetErrorCode(parser.get())) +
                            ") at byte offset " + std::to_string(XML_GetCurrentByteIndex(parser.get())));
        }
        if (final) break;
    }
    if (!st.error.empty()) throw DataError(st.error);

    for (std::size_t i = 0; i < st.all_ways.size(); ++i) {
        if (!highway_filter.contains(st.highway_of_way[i])) continue;
        RawWay way = std::move(st.all_ways[i]);
        std::vector<NodeId> kept;
        kept.reserve(way.node_refs.size());
        for (NodeId ref : way.node_refs) {
            if (out.nodes.contains(ref)) kept.push_back(ref);
            else ++out.dangling_refs_dropped;
        }
        if (kept.empty()) continue;
        way.node_refs = std::move(kept);
        out.ways.push_back(std::move(way));
    }
    if (out.ways.empty()) throw DataError("osm: no street data (no way matches the highway filter)");
    return out;
}

inline RawMapExtract parse_osm_xml(const std::string& path,
                                   const std::set<std::string>& highway_filter = default_highway_filter()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("osm: cannot open '" + path + "'");
    return parse_osm_xml(in, highway_filter);
}

// ---------------------------------------------------------------------------------------------
// Graph interchange (crimegraph-v1)
// ---------------------------------------------------------------------------------------------

inline constexpr std::string_view graph_format_magic = "crimegraph-v1";

/// Writes the interchange text: magic line, a `G` line carrying the directed flag, node lines,
/// then edge lines. Node lines follow id order; edges keep their stored order.
inline void write_graph(const StreetGraph& g, std::ostream& out) {
    out << graph_format_magic << '\n';
    out << "G\t" << (g.directed ? "directed" : "undirected") << '\n';
    for (const auto& [id, p] : g.nodes)
        out << "N\t" << id << '\t' << text::format_double(p.lat) << '\t' << text::format_double(p.lon) << '\n';
    for (const auto& e : g.edges)
        out << "E\t" << e.src << '\t' << e.dst << '\t' << text::format_double(e.weight) << '\n';
}

inline std::string graph_to_string(const StreetGraph& g) {
    std::ostringstream ss;
    write_graph(g, ss);
    return ss.str();
}

inline void save_graph(const StreetGraph& g, const std::string& path) {
    validate(g);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("graph: cannot write '" + path + "'");
    write_graph(g, out);
    if (!out) throw DataError("graph: write failed for '" + path + "'");
}

inline StreetGraph read_graph(std::istream& in, const std::string& source = "<stream>") {
    const std::string contents{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    auto fail = [&](std::size_t line, const std::string& msg) -> DataError {
        return DataError("graph " + source + ":" + std::to_string(line) + ": " + msg);
    };
    if (!contents.empty() && contents.back() != '\n') {
        const auto lines = static_cast<std::size_t>(std::count(contents.begin(), contents.end(), '\n')) + 1;
        throw fail(lines, "truncated file (last line has no terminating newline)");
    }
    StreetGraph g;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_edges = false;
    while (pos < contents.size()) {
        const auto nl = contents.find('\n', pos);
        const std::string_view line(contents.data() + pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != graph_format_magic)
                throw fail(1, "version mismatch: expected '" + std::string(graph_format_magic) + "'");
            continue;
        }
        if (line.empty()) continue;
        const auto f = text::split(line, '\t');
        if (f[0] == "G") {
            if (f.size() != 2 || (f[1] != "directed" && f[1] != "undirected")) throw fail(line_no, "bad G line");
            g.directed = f[1] == "directed";
        } else if (f[0] == "N") {
            if (f.size() != 4) throw fail(line_no, "node line needs 4 fields (truncated?)");
            const auto id = text::parse_int(f[1]);
            const auto lat = text::parse_double(f[2]);
            const auto lon = text::parse_double(f[3]);
            if (!id || !lat || !lon) throw fail(line_no, "unparsable node line");
            const GeoPoint p{*lat, *lon};
            if (!is_valid(p)) throw fail(line_no, "node coordinates out of range");
            if (saw_edges) throw fail(line_no, "node line after edge lines");
            if (!g.nodes.emplace(*id, p).second) throw fail(line_no, "duplicate node id " + std::to_string(*id));
        } else if (f[0] == "E") {
            if (f.size() != 4) throw fail(line_no, "edge line needs 4 fields (truncated?)");
            const auto src = text::parse_int(f[1]);
            const auto dst = text::parse_int(f[2]);
            if (!src || !dst) throw fail(line_no, "unparsable edge endpoints");
            const std::string_view wtxt = text::trim(f[3]);
            const auto w = text::parse_double(wtxt);
            if (!w) {
                if (wtxt == "inf" || wtxt == "-inf" || wtxt == "nan" || wtxt == "-nan")
                    throw fail(line_no, "non-finite weight");
                throw fail(line_no, "unparsable edge weight");
            }
            if (!std::isfinite(*w)) throw fail(line_no, "non-finite weight");
            if (*w < 0.0) throw fail(line_no, "negative weight");
            if (!g.nodes.contains(*src) || !g.nodes.contains(*dst))
                throw fail(line_no, "edge references an unknown node");
            g.edges.push_back({*src, *dst, *w});
            saw_edges = true;
        } else {
            throw fail(line_no, "unknown record type '" + std::string(f[0]) + "'");
        }
    }
    if (line_no == 0) throw fail(1, "empty file (missing version line)");
    return g;
}

inline StreetGraph load_graph(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("graph: cannot open '" + path + "'");
    return read_graph(in, path);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Identity of a graph: hash of its interchange serialization.
inline std::uint64_t graph_fingerprint(const StreetGraph& g) { return fnv1a64(graph_to_string(g)); }

inline std::string fingerprint_hex(std::uint64_t fp) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
    return buf;
}

} // namespace crimegraph
