#pragma once

// Config parsing, deterministic JSON/CSV text and binary field snapshots.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"

namespace rdflab::io {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// key = value config

class Config {
public:
    Config() = default;

    static Config parse(std::string_view text) {
        Config c;
        c.text_ = std::string(text);
        std::istringstream in(c.text_);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
            if (!c.values_.emplace(key, value).second) {
                throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            }
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw InvalidArgument("cannot read config " + path.string());
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    /// The file exactly as given.
    const std::string& text() const noexcept { return text_; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_double(key, it->second);
    }

    long long get_int(const std::string& key, long long fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(it->second, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != it->second.size()) throw InvalidArgument("config key '" + key + "' is not an integer");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw InvalidArgument("config key '" + key + "' is not a boolean");
    }

    /// Comma- or space-separated numbers.
    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::string tok;
        std::istringstream in(it->second);
        while (in >> tok) {
            std::istringstream parts(tok);
            std::string item;
            while (std::getline(parts, item, ','))
                if (!item.empty()) out.push_back(to_double(key, item));
        }
        if (out.empty()) throw InvalidArgument("config key '" + key + "' is an empty list");
        return out;
    }

    /// Keys present in the file that nothing asked for.
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    void require_all_used() const {
        const auto u = unused();
        if (u.empty()) return;
        std::string msg = "unknown config key";
        msg += u.size() > 1 ? "s:" : ":";
        for (const auto& k : u) msg += " " + k;
        throw InvalidArgument(msg);
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double to_double(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) throw InvalidArgument("config key '" + key + "': '" + s + "' is not a number");
        return v;
    }

    std::string text_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// text output

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void dump(const Json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            // object_t is a std::map, so keys come out sorted
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + Json(it.key()).dump() + ": ";
                dump(it.value(), indent, depth + 1, out);
            }
            out += "\n" + close + "}";
            return;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            bool flat = true;
            for (const auto& e : j) flat = flat && !e.is_structured();
            if (flat) {
                out += "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) out += ", ";
                    dump(j[i], indent, depth + 1, out);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += pad;
                dump(j[i], indent, depth + 1, out);
            }
            out += "\n" + close + "]";
            return;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            // JSON has no inf/nan
            out += std::isfinite(v) ? format_double(v) : "null";
            return;
        }
        default: out += j.dump();
    }
}

}  // namespace detail

/// Sorted keys, floats with 17 significant digits, trailing newline.
inline std::string dump_json(const Json& j, int indent = 2) {
    std::string out;
    detail::dump(j, indent, 0, out);
    out += "\n";
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + path.string());
    f << content;
    if (!f) throw Error("write failed for " + path.string());
}

/// Minimal CSV builder: fixed header, numbers via format_double.
class Csv {
public:
    explicit Csv(std::vector<std::string> columns) : cols_(columns.size()) {
        for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
        text_ += "\n";
    }

    void row(const std::vector<double>& values) {
        if (values.size() != cols_) throw InvalidArgument("csv row has the wrong number of columns");
        for (std::size_t i = 0; i < values.size(); ++i) text_ += (i ? "," : "") + format_double(values[i]);
        text_ += "\n";
    }

    const std::string& str() const noexcept { return text_; }

private:
    std::size_t cols_;
    std::string text_;
};

inline Json grid_json(const GridSpec& g) {
    Json j;
    j["dim"] = g.dim();
    std::vector<std::size_t> nodes;
    std::vector<double> half;
    for (int a = 0; a < g.dim(); ++a) {
        nodes.push_back(g.nodes(a));
        half.push_back(g.half_width(a));
    }
    j["nodes"] = nodes;
    j["half_width"] = half;
    j["spacing"] = g.spacing();
    return j;
}

// ---------------------------------------------------------------------------
// snapshots
//
// "RDFLAB1\0", u32 dim, u32 nodes[dim], u32 components, f64 half-width (axis 0),
// f64 t, then components * nodes f64 values: component-major, row-major nodes
// with axis 0 slowest. Everything little-endian.

inline constexpr char kSnapshotMagic[8] = {'R', 'D', 'F', 'L', 'A', 'B', '1', '\0'};

namespace detail {

template <class T>
void put(std::string& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const U u = std::bit_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (pos + sizeof(U) > in.size()) throw InvalidArgument("snapshot is truncated");
    U u = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) u |= static_cast<U>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
    pos += sizeof(U);
    return std::bit_cast<T>(u);
}

}  // namespace detail

struct Snapshot {
    GridSpec grid;
    int components = 0;
    double half_width = 0.0;
    double t = 0.0;
    std::vector<double> data;
};

template <FieldKind K>
std::string encode_snapshot(const Field<K>& f, double t) {
    const GridSpec& g = f.grid();
    std::string out(kSnapshotMagic, sizeof kSnapshotMagic);
    detail::put(out, static_cast<std::uint32_t>(g.dim()));
    for (int a = 0; a < g.dim(); ++a) detail::put(out, static_cast<std::uint32_t>(g.nodes(a)));
    detail::put(out, static_cast<std::uint32_t>(f.components()));
    detail::put(out, g.half_width(0));
    detail::put(out, t);
    out.reserve(out.size() + 8 * f.data().size());
    for (double v : f.data()) detail::put(out, v);
    return out;
}

inline Snapshot decode_snapshot(const std::string& in) {
    if (in.size() < sizeof kSnapshotMagic || std::memcmp(in.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0) {
        throw InvalidArgument("not an RDFLAB1 snapshot");
    }
    std::size_t pos = sizeof kSnapshotMagic;
    const auto dim = detail::take<std::uint32_t>(in, pos);
    if (dim != 3 && dim != 4) throw InvalidArgument("snapshot dimension must be 3 or 4");
    std::vector<std::size_t> nodes(dim);
    for (auto& n : nodes) n = detail::take<std::uint32_t>(in, pos);
    Snapshot s;
    s.components = static_cast<int>(detail::take<std::uint32_t>(in, pos));
    s.half_width = detail::take<double>(in, pos);
    s.t = detail::take<double>(in, pos);
    bool cube = true;
    for (auto n : nodes) cube = cube && n == nodes[0];
    // same expressions as the writer's grid, so spacing and coordinates match bit for bit
    s.grid = cube ? GridSpec(static_cast<int>(dim), nodes[0], s.half_width)
                  : GridSpec(nodes, 2.0 * s.half_width / static_cast<double>(nodes[0] - 1));
    const std::size_t count = static_cast<std::size_t>(s.components) * s.grid.node_count();
    if (in.size() - pos != 8 * count) throw InvalidArgument("snapshot payload length does not match its header");
    s.data.resize(count);
    for (double& v : s.data) v = detail::take<double>(in, pos);
    return s;
}

template <FieldKind K>
void write_snapshot(const std::filesystem::path& path, const Field<K>& f, double t) {
    write_text(path, encode_snapshot(f, t));
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot read snapshot " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return decode_snapshot(ss.str());
}

/// Rebuilds a field of the stored kind; components must match.
template <FieldKind K>
Field<K> to_field(const Snapshot& s) {
    Field<K> f = [&] {
        if constexpr (K == FieldKind::general) {
            return Field<K>(s.grid, s.components);
        } else {
            return Field<K>(s.grid);
        }
    }();
    if (f.components() != s.components) throw InvalidArgument("snapshot has the wrong component count");
    std::copy(s.data.begin(), s.data.end(), f.data().begin());
    return f;
}

}  // namespace rdflab::io
