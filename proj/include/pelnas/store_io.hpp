#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>
#include <toml.hpp>

#include "pelnas/benchmark_store.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/text_util.hpp"

namespace pelnas {

enum class StoreFormat { csv, jsonl };

inline auto format_for_path(std::filesystem::path const& p) -> StoreFormat
{
    auto const ext = p.extension().string();
    return (ext == ".jsonl" || ext == ".ndjson") ? StoreFormat::jsonl : StoreFormat::csv;
}

/// Renames foreign column names onto the canonical schema
/// (arch, dataset, accuracy, lat_<device>..., zc_00..zc_12).
struct ColumnMapping {
    std::map<std::string, std::string> canonical_to_foreign;
    /// Used when the foreign file has no dataset column.
    std::optional<std::string> dataset_value;
    /// Device list to expect (defaults to the lat_* columns found).
    std::vector<std::string> devices;

    [[nodiscard]] auto empty() const noexcept -> bool
    {
        return canonical_to_foreign.empty() && !dataset_value && devices.empty();
    }

    /// TOML layout:
    ///   dataset_value = "cifar10"          # optional
    ///   devices = ["edgegpu", "raspi4"]    # optional
    ///   [columns]
    ///   arch = "arch_str"
    ///   accuracy = "test_acc"
    ///   lat_edgegpu = "edgegpu_latency"
    static auto from_toml(std::string_view text, std::string_view source = "mapping") -> ColumnMapping
    {
        toml::table tbl;
        try {
            tbl = toml::parse(text, source);
        } catch (toml::parse_error const& e) {
            throw ConfigError(fmt::format("{}: {}", source, e.description()));
        }
        ColumnMapping m;
        for (auto const& [k, v] : tbl) {
            auto const key = std::string(k.str());
            if (key == "dataset_value") {
                auto s = v.value<std::string>();
                if (!s) { throw ConfigError(fmt::format("{}: dataset_value must be a string", source)); }
                m.dataset_value = *s;
            } else if (key == "devices") {
                auto const* arr = v.as_array();
                if (arr == nullptr) { throw ConfigError(fmt::format("{}: devices must be an array", source)); }
                for (auto const& d : *arr) {
                    auto s = d.value<std::string>();
                    if (!s) { throw ConfigError(fmt::format("{}: devices must be strings", source)); }
                    m.devices.push_back(*s);
                }
            } else if (key == "columns") {
                auto const* cols = v.as_table();
                if (cols == nullptr) { throw ConfigError(fmt::format("{}: [columns] must be a table", source)); }
                for (auto const& [ck, cv] : *cols) {
                    auto s = cv.value<std::string>();
                    if (!s) { throw ConfigError(fmt::format("{}: column '{}' must map to a string", source, ck.str())); }
                    m.canonical_to_foreign.emplace(std::string(ck.str()), *s);
                }
            } else {
                throw ConfigError(fmt::format("{}: unknown key '{}'", source, key));
            }
        }
        return m;
    }

    static auto load(std::filesystem::path const& path) -> ColumnMapping
    {
        std::ifstream in(path);
        if (!in) { throw ConfigError(fmt::format("cannot open column mapping '{}'", path.string())); }
        std::stringstream ss;
        ss << in.rdbuf();
        return from_toml(ss.str(), path.string());
    }

    [[nodiscard]] auto canonical_name(std::string const& foreign) const -> std::string
    {
        for (auto const& [canon, f] : canonical_to_foreign) {
            if (f == foreign) { return canon; }
        }
        return foreign;
    }
};

namespace detail {

struct Schema {
    std::size_t arch = 0;
    std::optional<std::size_t> dataset;
    std::size_t accuracy = 0;
    std::vector<std::string> devices;
    std::vector<std::size_t> latency;
    std::vector<std::size_t> proxies; // empty or exactly 13
};

inline auto resolve_schema(std::vector<std::string> const& header, ColumnMapping const& mapping,
                           std::string_view source) -> Schema
{
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto const name = mapping.canonical_name(std::string(text::trim(header[i])));
        if (!pos.emplace(name, i).second) {
            throw DataError(fmt::format("{}: line 1: duplicate column '{}'", source, name));
        }
    }
    auto require = [&](std::string const& name) -> std::size_t {
        auto it = pos.find(name);
        if (it == pos.end()) { throw DataError(fmt::format("{}: line 1: missing column '{}'", source, name)); }
        return it->second;
    };
    Schema s;
    s.arch = require("arch");
    s.accuracy = require("accuracy");
    if (auto it = pos.find("dataset"); it != pos.end()) {
        s.dataset = it->second;
    } else if (!mapping.dataset_value) {
        throw DataError(fmt::format("{}: line 1: missing column 'dataset'", source));
    }
    if (!mapping.devices.empty()) {
        s.devices = mapping.devices;
        for (auto const& d : s.devices) { s.latency.push_back(require("lat_" + d)); }
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            auto const name = mapping.canonical_name(std::string(text::trim(header[i])));
            if (name.starts_with("lat_") && name.size() > 4) {
                s.devices.push_back(name.substr(4));
                s.latency.push_back(i);
            }
        }
        if (s.devices.empty()) { throw DataError(fmt::format("{}: line 1: missing latency columns (lat_<device>)", source)); }
    }
    std::size_t present = 0;
    for (std::size_t j = 0; j < kProxyCount; ++j) { present += pos.count(proxy_column_name(j)); }
    if (present > 0) {
        for (std::size_t j = 0; j < kProxyCount; ++j) { s.proxies.push_back(require(proxy_column_name(j))); }
    }
    if (mapping.empty()) {
        // Canonical files must not carry unexpected columns.
        for (auto const& [name, i] : pos) {
            bool const known = name == "arch" || name == "dataset" || name == "accuracy" || name.starts_with("lat_")
                || (name.starts_with("zc_") && !s.proxies.empty());
            if (!known) { throw DataError(fmt::format("{}: line 1: unexpected column '{}'", source, name)); }
        }
    }
    return s;
}

inline auto parse_row(std::vector<std::string> const& fields, Schema const& s, ColumnMapping const& mapping,
                      std::vector<std::string> const& header, std::size_t line, std::string_view source)
    -> BenchmarkRecord
{
    auto field = [&](std::size_t i) -> std::string_view {
        if (i >= fields.size()) {
            throw DataError(fmt::format("{}: line {}: missing value for column '{}'", source, line, header[i]));
        }
        return text::trim(fields[i]);
    };
    auto number = [&](std::size_t i) -> double {
        auto const v = text::parse_double(field(i));
        if (!v) {
            throw DataError(fmt::format("{}: line {}: column '{}': unparseable number '{}'", source, line, header[i],
                                        field(i)));
        }
        return *v;
    };
    BenchmarkRecord rec;
    auto const arch = field(s.arch);
    auto cell = try_decode(arch);
    if (!cell) {
        throw DataError(fmt::format("{}: line {}: column '{}': invalid architecture '{}'", source, line, header[s.arch],
                                    arch));
    }
    rec.cell = *cell;
    rec.arch = encode(*cell);
    rec.dataset = s.dataset ? std::string(field(*s.dataset)) : *mapping.dataset_value;
    rec.accuracy = number(s.accuracy);
    for (auto i : s.latency) {
        rec.latency.push_back(number(i));
        if (!(rec.latency.back() > 0.0)) {
            throw DataError(fmt::format("{}: line {}: column '{}': latency must be > 0", source, line, header[i]));
        }
    }
    if (!s.proxies.empty()) {
        ProxyVector px{};
        for (std::size_t j = 0; j < kProxyCount; ++j) { px[j] = number(s.proxies[j]); }
        rec.proxies = px;
    }
    return rec;
}

inline void add_row(BenchmarkStore& store, BenchmarkRecord rec, std::size_t line, std::string_view source)
{
    if (store.find(rec.cell, rec.dataset) != nullptr) {
        throw DataError(fmt::format("{}: line {}: duplicate architecture '{}' for dataset '{}'", source, line, rec.arch,
                                    rec.dataset));
    }
    store.add(std::move(rec));
}

} // namespace detail

inline auto read_store_csv(std::istream& in, ColumnMapping const& mapping = {}, std::string_view source = "store")
    -> BenchmarkStore
{
    std::string line;
    if (!std::getline(in, line)) { throw DataError(fmt::format("{}: empty file", source)); }
    auto const header = text::split_csv(line);
    auto const schema = detail::resolve_schema(header, mapping, source);
    BenchmarkStore store(schema.devices);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) { continue; }
        auto rec = detail::parse_row(text::split_csv(line), schema, mapping, header, lineno, source);
        detail::add_row(store, std::move(rec), lineno, source);
    }
    return store;
}

inline auto read_store_jsonl(std::istream& in, ColumnMapping const& mapping = {}, std::string_view source = "store")
    -> BenchmarkStore
{
    std::string line;
    std::size_t lineno = 0;
    std::optional<BenchmarkStore> store;
    std::optional<detail::Schema> schema;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) { continue; }
        nlohmann::ordered_json obj;
        try {
            obj = nlohmann::ordered_json::parse(line);
        } catch (nlohmann::json::exception const& e) {
            throw DataError(fmt::format("{}: line {}: invalid JSON: {}", source, lineno, e.what()));
        }
        if (!obj.is_object()) { throw DataError(fmt::format("{}: line {}: expected a JSON object", source, lineno)); }
        std::vector<std::string> keys;
        std::vector<std::string> fields;
        for (auto const& [k, v] : obj.items()) {
            keys.push_back(k);
            if (v.is_string()) { fields.push_back(v.get<std::string>()); }
            else if (v.is_number()) { fields.push_back(text::format_double(v.get<double>())); }
            else { throw DataError(fmt::format("{}: line {}: field '{}' must be a string or number", source, lineno, k)); }
        }
        if (!schema) {
            header = keys;
            schema = detail::resolve_schema(header, mapping, source);
            store.emplace(schema->devices);
        } else if (keys != header) {
            // Re-map by name when a line orders its keys differently.
            std::vector<std::string> reordered(header.size());
            for (std::size_t i = 0; i < header.size(); ++i) {
                auto it = std::find(keys.begin(), keys.end(), header[i]);
                if (it == keys.end()) {
                    throw DataError(fmt::format("{}: line {}: missing field '{}'", source, lineno, header[i]));
                }
                reordered[i] = fields[static_cast<std::size_t>(it - keys.begin())];
            }
            fields = std::move(reordered);
        }
        auto rec = detail::parse_row(fields, *schema, mapping, header, lineno, source);
        detail::add_row(*store, std::move(rec), lineno, source);
    }
    if (!store) { throw DataError(fmt::format("{}: empty file", source)); }
    return std::move(*store);
}

inline auto load_store(std::filesystem::path const& path, std::optional<StoreFormat> format = std::nullopt,
                       ColumnMapping const& mapping = {}) -> BenchmarkStore
{
    std::ifstream in(path);
    if (!in) { throw DataError(fmt::format("cannot open store file '{}'", path.string())); }
    auto const fmt_ = format.value_or(format_for_path(path));
    return fmt_ == StoreFormat::jsonl ? read_store_jsonl(in, mapping, path.string())
                                      : read_store_csv(in, mapping, path.string());
}

inline void write_store_csv(std::ostream& out, BenchmarkStore const& store)
{
    out << "arch,dataset,accuracy";
    for (auto const& d : store.devices()) { out << ",lat_" << d; }
    bool const proxies = store.has_proxies();
    if (proxies) {
        for (std::size_t j = 0; j < kProxyCount; ++j) { out << ',' << proxy_column_name(j); }
    }
    out << '\n';
    for (auto const& r : store.records()) {
        out << r.arch << ',' << text::csv_escape(r.dataset) << ',' << text::format_double(r.accuracy);
        for (auto l : r.latency) { out << ',' << text::format_double(l); }
        if (proxies) {
            for (auto p : *r.proxies) { out << ',' << text::format_double(p); }
        }
        out << '\n';
    }
}

inline void write_store_jsonl(std::ostream& out, BenchmarkStore const& store)
{
    bool const proxies = store.has_proxies();
    for (auto const& r : store.records()) {
        nlohmann::ordered_json obj;
        obj["arch"] = r.arch;
        obj["dataset"] = r.dataset;
        obj["accuracy"] = r.accuracy;
        for (std::size_t d = 0; d < store.devices().size(); ++d) { obj["lat_" + store.devices()[d]] = r.latency[d]; }
        if (proxies) {
            for (std::size_t j = 0; j < kProxyCount; ++j) { obj[proxy_column_name(j)] = (*r.proxies)[j]; }
        }
        out << obj.dump() << '\n';
    }
}

inline void save_store(std::filesystem::path const& path, BenchmarkStore const& store,
                       std::optional<StoreFormat> format = std::nullopt)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw DataError(fmt::format("cannot write store file '{}'", path.string())); }
    if (format.value_or(format_for_path(path)) == StoreFormat::jsonl) { write_store_jsonl(out, store); }
    else { write_store_csv(out, store); }
    if (!out) { throw DataError(fmt::format("write failed for '{}'", path.string())); }
}

// ---------------------------------------------------------------------------
// Synthetic model sidecar
// ---------------------------------------------------------------------------

inline auto model_to_json(SyntheticModel const& m) -> nlohmann::ordered_json
{
    nlohmann::ordered_json j;
    j["format"] = "pelnas-synthetic-model";
    j["version"] = 1;
    j["seed"] = m.seed;
    j["dataset"] = m.dataset;
    j["devices"] = m.devices;
    j["base_latency"] = m.base_latency;
    j["op_cost"] = m.op_cost;
    j["edge_jitter"] = m.edge_jitter;
    j["jitter_ms"] = m.jitter_ms;
    j["op_weight"] = m.op_weight;
    j["edge_scale"] = m.edge_scale;
    j["interaction"] = m.interaction;
    j["center"] = m.center;
    j["spread"] = m.spread;
    j["noise"] = m.noise;
    j["proxy_noise"] = m.proxy_noise;
    j["proxy_noise_scale"] = m.proxy_noise_scale;
    return j;
}

inline auto model_from_json(nlohmann::json const& j) -> SyntheticModel
{
    try {
        if (j.at("format").get<std::string>() != "pelnas-synthetic-model" || j.at("version").get<int>() != 1) {
            throw ConfigError("not a version-1 synthetic model file");
        }
        SyntheticModel m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.dataset = j.at("dataset").get<std::string>();
        m.devices = j.at("devices").get<std::vector<std::string>>();
        m.base_latency = j.at("base_latency").get<std::vector<double>>();
        m.op_cost = j.at("op_cost").get<decltype(m.op_cost)>();
        m.edge_jitter = j.at("edge_jitter").get<decltype(m.edge_jitter)>();
        m.jitter_ms = j.at("jitter_ms").get<double>();
        m.op_weight = j.at("op_weight").get<decltype(m.op_weight)>();
        m.edge_scale = j.at("edge_scale").get<decltype(m.edge_scale)>();
        m.interaction = j.at("interaction").get<decltype(m.interaction)>();
        m.center = j.at("center").get<double>();
        m.spread = j.at("spread").get<double>();
        m.noise = j.at("noise").get<double>();
        m.proxy_noise = j.at("proxy_noise").get<decltype(m.proxy_noise)>();
        m.proxy_noise_scale = j.at("proxy_noise_scale").get<double>();
        m.validate();
        return m;
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError(fmt::format("invalid synthetic model file: {}", e.what()));
    }
}

inline void save_model(std::filesystem::path const& path, SyntheticModel const& m)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw DataError(fmt::format("cannot write model file '{}'", path.string())); }
    out << model_to_json(m).dump(2) << '\n';
}

inline auto load_model(std::filesystem::path const& path) -> SyntheticModel
{
    std::ifstream in(path);
    if (!in) { throw ConfigError(fmt::format("cannot open model file '{}'", path.string())); }
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (nlohmann::json::parse_error const& e) {
        throw ConfigError(fmt::format("invalid model file '{}': {}", path.string(), e.what()));
    }
}

} // namespace pelnas
