#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <toml.hpp>

#include "pelnas/engine.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/text_service.hpp"

namespace pelnas {

enum class BoundsPolicy { store, explicit_values };

/// Everything `pelnas search` needs. Relative paths in a config file are
/// resolved against the file's directory.
struct SearchSettings {
    std::filesystem::path store;
    std::filesystem::path mapping;
    std::filesystem::path out = "pelnas-run";
    std::string predictor = "auto"; // auto | oracle | rank_ensemble | fitted
    std::filesystem::path predictor_file;
    std::size_t predictor_sample = 1000;
    std::uint64_t predictor_seed = 0;
    EngineConfig engine;
    TextServiceConfig service;
    BoundsPolicy bounds_policy = BoundsPolicy::store;
    NormalizationBounds explicit_bounds;
};

namespace detail {

class TomlReader {
public:
    TomlReader(toml::table const& t, std::string source, std::string section)
        : table_(t), source_(std::move(source)), section_(std::move(section))
    {
    }

    template <class T>
    void read(std::string_view key, T& dst)
    {
        seen_.insert(std::string(key));
        auto const* node = table_.get(key);
        if (node == nullptr) { return; }
        if constexpr (std::is_same_v<T, bool>) {
            auto v = node->value<bool>();
            if (!v) { fail(key, "a boolean"); }
            dst = *v;
        } else if constexpr (std::is_same_v<T, double>) {
            auto v = node->value<double>();
            if (!v) { fail(key, "a number"); }
            dst = *v;
        } else if constexpr (std::is_integral_v<T>) {
            auto v = node->value<std::int64_t>();
            if (!v || *v < 0) { fail(key, "a non-negative integer"); }
            dst = static_cast<T>(*v);
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            auto v = node->value<std::string>();
            if (!v) { fail(key, "a string"); }
            dst = std::filesystem::path(*v);
        } else {
            auto v = node->value<std::string>();
            if (!v) { fail(key, "a string"); }
            dst = *v;
        }
    }

    void read_strings(std::string_view key, std::vector<std::string>& dst)
    {
        seen_.insert(std::string(key));
        auto const* node = table_.get(key);
        if (node == nullptr) { return; }
        auto const* arr = node->as_array();
        if (arr == nullptr) { fail(key, "an array of strings"); }
        dst.clear();
        for (auto const& el : *arr) {
            auto v = el.value<std::string>();
            if (!v) { fail(key, "an array of strings"); }
            dst.push_back(*v);
        }
    }

    void skip(std::string_view key) { seen_.insert(std::string(key)); }

    void reject_unknown() const
    {
        for (auto const& [k, v] : table_) {
            if (!seen_.contains(std::string(k.str()))) {
                throw ConfigError(fmt::format("{}: unknown key '{}{}'", source_, prefix(), k.str()));
            }
        }
    }

private:
    [[noreturn]] void fail(std::string_view key, std::string_view what) const
    {
        throw ConfigError(fmt::format("{}: '{}{}' must be {}", source_, prefix(), key, what));
    }

    [[nodiscard]] auto prefix() const -> std::string { return section_.empty() ? "" : section_ + "."; }

    toml::table const& table_;
    std::string source_;
    std::string section_;
    std::set<std::string> seen_;
};

inline auto resolve(std::filesystem::path const& base, std::filesystem::path p) -> std::filesystem::path
{
    if (p.empty() || p.is_absolute()) { return p; }
    return base / p;
}

} // namespace detail

/// Applies a TOML document on top of `s`. Unknown keys are errors.
inline void apply_toml(SearchSettings& s, std::string_view text, std::string const& source,
                       std::filesystem::path const& base_dir = {})
{
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (toml::parse_error const& e) {
        throw ConfigError(fmt::format("{}: {}", source, e.description()));
    }
    auto section = [&](std::string_view name) -> toml::table const* {
        auto const* node = root.get(name);
        if (node == nullptr) { return nullptr; }
        auto const* t = node->as_table();
        if (t == nullptr) { throw ConfigError(fmt::format("{}: '{}' must be a table", source, name)); }
        return t;
    };

    detail::TomlReader top(root, source, "");
    top.read("store", s.store);
    top.read("mapping", s.mapping);
    top.read("out", s.out);
    for (auto const* name : {"predictor", "search", "service", "bounds"}) { top.skip(name); }
    top.reject_unknown();
    s.store = detail::resolve(base_dir, s.store);
    s.mapping = detail::resolve(base_dir, s.mapping);
    s.out = detail::resolve(base_dir, s.out);

    if (auto const* t = section("predictor")) {
        detail::TomlReader r(*t, source, "predictor");
        r.read("kind", s.predictor);
        r.read("file", s.predictor_file);
        r.read("sample_size", s.predictor_sample);
        r.read("seed", s.predictor_seed);
        r.reject_unknown();
        s.predictor_file = detail::resolve(base_dir, s.predictor_file);
    }

    if (auto const* t = section("search")) {
        auto& e = s.engine;
        detail::TomlReader r(*t, source, "search");
        r.read("device", e.device);
        r.read("dataset", e.dataset);
        r.read("generations", e.generations);
        r.read("crossover_probability", e.crossover_probability);
        r.read("init_per_niche", e.init_per_niche);
        r.read("n_children", e.n_children);
        std::string op(to_string(e.op));
        r.read("operator", op);
        e.op = parse_operator_kind(op);
        r.read("seed", e.seed);
        r.read("partitioned", e.partitioned);
        r.read("max_operator_retries", e.max_operator_retries);
        r.read("workers", e.workers);
        r.read("archive_literal", e.archive_literal);
        r.read("share_knowledge", e.share_knowledge);
        r.read("kb_capacity", e.kb_capacity);
        r.read("latency_limit", e.latency_limit);
        std::string obj(to_string(e.report_objective));
        r.read("report_objective", obj);
        e.report_objective = parse_report_objective(obj);
        std::vector<std::string> niches;
        r.read_strings("niches", niches);
        if (!niches.empty()) {
            std::vector<NichePredicate> preds;
            for (auto const& n : niches) { preds.push_back(parse_niche_predicate(n)); }
            e.niches = NicheSet(std::move(preds));
        }
        r.reject_unknown();
    }

    if (auto const* t = section("service")) {
        for (auto const* secret : {"token", "api_key", "key", "authorization"}) {
            if (t->contains(secret)) {
                throw ConfigError(fmt::format("{}: 'service.{}' is not allowed; the token is read from the environment "
                                              "variable named by service.token_env",
                                              source, secret));
            }
        }
        auto& v = s.service;
        detail::TomlReader r(*t, source, "service");
        r.read("endpoint", v.endpoint);
        r.read("model", v.model);
        r.read("token_env", v.token_env);
        r.read("timeout", v.timeout_s);
        int retries = v.max_retries;
        r.read("max_retries", retries);
        v.max_retries = retries;
        r.read("retry_backoff_ms", v.retry_backoff_ms);
        r.read("temperature", v.temperature);
        r.read("response_path", v.response_path);
        std::string mode(to_string(v.mode));
        r.read("transcript_mode", mode);
        v.mode = parse_transcript_mode(mode);
        r.read("transcript", v.transcript);
        r.reject_unknown();
        v.transcript = detail::resolve(base_dir, v.transcript);
    }

    if (auto const* t = section("bounds")) {
        detail::TomlReader r(*t, source, "bounds");
        std::string policy = s.bounds_policy == BoundsPolicy::store ? "store" : "explicit";
        r.read("policy", policy);
        if (policy == "store") { s.bounds_policy = BoundsPolicy::store; }
        else if (policy == "explicit") { s.bounds_policy = BoundsPolicy::explicit_values; }
        else { throw ConfigError(fmt::format("{}: bounds.policy must be 'store' or 'explicit'", source)); }
        r.read("acc_min", s.explicit_bounds.acc_min);
        r.read("acc_max", s.explicit_bounds.acc_max);
        r.read("lat_min", s.explicit_bounds.lat_min);
        r.read("lat_max", s.explicit_bounds.lat_max);
        r.reject_unknown();
    }
}

inline void load_settings(SearchSettings& s, std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in) { throw ConfigError(fmt::format("cannot open config file '{}'", path.string())); }
    std::stringstream ss;
    ss << in.rdbuf();
    apply_toml(s, ss.str(), path.string(), path.parent_path());
}

} // namespace pelnas
