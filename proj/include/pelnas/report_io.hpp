#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "pelnas/engine.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/text_util.hpp"

namespace pelnas {

/// One row of a front file: arch,niche,accuracy,latency,generation.
struct FrontRow {
    std::string arch;
    std::optional<std::size_t> niche;
    double accuracy = 0.0;
    double latency = 0.0;
    std::optional<std::size_t> generation;
};

inline constexpr std::string_view kFrontHeader = "arch,niche,accuracy,latency,generation";

inline auto front_rows(RunReport const& r) -> std::vector<FrontRow>
{
    std::vector<FrontRow> rows;
    for (auto const& a : r.front) { rows.push_back({a.arch, a.niche, r.reported_accuracy(a), a.latency, a.generation}); }
    return rows;
}

inline auto front_rows(std::vector<ScoredArch> const& truth, NicheSet const& niches = NicheSet::complexity_default())
    -> std::vector<FrontRow>
{
    std::vector<FrontRow> rows;
    for (auto const& s : truth) {
        auto const n = niches.assign(decode(s.arch));
        rows.push_back({s.arch, n ? std::optional(n->value) : std::nullopt, s.point.accuracy, s.point.latency, {}});
    }
    return rows;
}

inline void write_front_csv(std::ostream& out, std::vector<FrontRow> const& rows)
{
    out << kFrontHeader << '\n';
    for (auto const& r : rows) {
        out << r.arch << ',' << (r.niche ? std::to_string(*r.niche) : "") << ',' << text::format_double(r.accuracy)
            << ',' << text::format_double(r.latency) << ',' << (r.generation ? std::to_string(*r.generation) : "")
            << '\n';
    }
}

/// Accepts any column order; only accuracy and latency are required.
inline auto read_front_csv(std::istream& in, std::string_view source = "front") -> std::vector<FrontRow>
{
    std::string line;
    if (!std::getline(in, line)) { throw DataError(fmt::format("{}: empty file", source)); }
    auto const header = text::split_csv(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) { col[std::string(text::trim(header[i]))] = i; }
    for (auto const* need : {"accuracy", "latency"}) {
        if (!col.contains(need)) { throw DataError(fmt::format("{}: line 1: missing column '{}'", source, need)); }
    }
    auto opt_col = [&](char const* name) -> std::optional<std::size_t> {
        auto it = col.find(name);
        return it == col.end() ? std::nullopt : std::optional(it->second);
    };
    auto const c_arch = opt_col("arch");
    auto const c_niche = opt_col("niche");
    auto const c_gen = opt_col("generation");
    std::vector<FrontRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) { continue; }
        auto const f = text::split_csv(line);
        if (f.size() != header.size()) {
            throw ParseError(fmt::format("{}: line {}: expected {} fields, got {}", source, lineno, header.size(), f.size()));
        }
        FrontRow r;
        auto num = [&](std::size_t c, char const* name) {
            auto v = text::parse_double(f[c]);
            if (!v) { throw ParseError(fmt::format("{}: line {}: column '{}': not a number", source, lineno, name)); }
            return *v;
        };
        r.accuracy = num(col["accuracy"], "accuracy");
        r.latency = num(col["latency"], "latency");
        if (c_arch) { r.arch = f[*c_arch]; }
        if (c_niche && !text::trim(f[*c_niche]).empty()) { r.niche = text::parse_u64(f[*c_niche]); }
        if (c_gen && !text::trim(f[*c_gen]).empty()) { r.generation = text::parse_u64(f[*c_gen]); }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline auto load_front_csv(std::filesystem::path const& path) -> std::vector<FrontRow>
{
    std::ifstream in(path);
    if (!in) { throw DataError(fmt::format("cannot open front file '{}'", path.string())); }
    return read_front_csv(in, path.string());
}

inline auto objective_points(std::vector<FrontRow> const& rows) -> std::vector<ObjectivePoint>
{
    std::vector<ObjectivePoint> out;
    out.reserve(rows.size());
    for (auto const& r : rows) { out.push_back({r.accuracy, r.latency}); }
    return out;
}

// ---------------------------------------------------------------------------
// key=value metadata
// ---------------------------------------------------------------------------

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline auto report_metadata(RunReport const& r) -> KeyValues
{
    auto const& c = r.config;
    auto const fd = [](double v) { return text::format_double(v); };
    KeyValues kv{
        {"mode", r.mode},
        {"operator", std::string(to_string(c.op))},
        {"predictor", std::string(to_string(c.predictor))},
        {"objective_source", r.objective_source},
        {"device", c.device},
        {"dataset", c.dataset},
        {"seed", std::to_string(c.seed)},
        {"generations", std::to_string(c.generations)},
        {"crossover_probability", fd(c.crossover_probability)},
        {"init_per_niche", std::to_string(c.init_per_niche)},
        {"n_children", std::to_string(c.n_children)},
        {"niches", std::to_string(c.niches.size())},
        {"archive_literal", c.archive_literal ? "true" : "false"},
        {"share_knowledge", c.share_knowledge ? "true" : "false"},
        {"latency_limit", fd(c.latency_limit)},
        {"evaluations", std::to_string(r.evaluations)},
        {"stage1_calls", std::to_string(r.stats.stage1_calls)},
        {"stage2_calls", std::to_string(r.stats.stage2_calls)},
        {"failed_calls", std::to_string(r.stats.failed_calls)},
        {"fallbacks", std::to_string(r.stats.fallbacks)},
        {"kb_warnings", std::to_string(r.stats.kb_warnings)},
        {"bounds_acc_min", fd(r.bounds.acc_min)},
        {"bounds_acc_max", fd(r.bounds.acc_max)},
        {"bounds_lat_min", fd(r.bounds.lat_min)},
        {"bounds_lat_max", fd(r.bounds.lat_max)},
        {"ref_f1", "1"},
        {"ref_f2", "1"},
        {"hv_final", fd(r.hv_trace.empty() ? 0.0 : r.hv_trace.back())},
        {"front_size", std::to_string(r.front.size())},
        {"warnings", std::to_string(r.warnings.size())},
    };
    for (std::size_t k = 0; k < r.archives.size(); ++k) {
        kv.emplace_back(fmt::format("archive_{}_size", k), std::to_string(r.archives[k].size()));
    }
    return kv;
}

inline void write_kv(std::ostream& out, KeyValues const& kv)
{
    for (auto const& [k, v] : kv) { out << k << '=' << v << '\n'; }
}

inline auto read_kv(std::istream& in) -> std::map<std::string, std::string>
{
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto const t = text::trim(line);
        if (t.empty() || t.front() == '#') { continue; }
        auto const eq = t.find('=');
        if (eq == std::string_view::npos) { continue; }
        out[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
    }
    return out;
}

/// Normalization bounds recorded in a metadata block, if all four are there.
inline auto bounds_from_kv(std::map<std::string, std::string> const& kv) -> std::optional<NormalizationBounds>
{
    NormalizationBounds b;
    for (auto [key, dst] : {std::pair{"bounds_acc_min", &b.acc_min}, std::pair{"bounds_acc_max", &b.acc_max},
                            std::pair{"bounds_lat_min", &b.lat_min}, std::pair{"bounds_lat_max", &b.lat_max}}) {
        auto it = kv.find(key);
        if (it == kv.end()) { return std::nullopt; }
        auto v = text::parse_double(it->second);
        if (!v) { return std::nullopt; }
        *dst = *v;
    }
    return b;
}

inline void write_hv_trace(std::ostream& out, std::vector<double> const& trace)
{
    out << "generation,hv\n";
    for (std::size_t g = 0; g < trace.size(); ++g) { out << g << ',' << text::format_double(trace[g]) << '\n'; }
}

// ---------------------------------------------------------------------------
// Evaluation log
// ---------------------------------------------------------------------------

inline auto log_to_json(LogEntry const& e) -> nlohmann::ordered_json
{
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["generation"] = e.generation;
    j["niche"] = e.niche;
    j["arch"] = e.arch;
    j["operation"] = e.operation;
    j["status"] = std::string(to_string(e.status));
    if (e.status == LogStatus::accepted || e.status == LogStatus::dominated) {
        j["z_pred"] = e.z_pred;
        j["latency"] = e.latency;
    }
    if (!e.evicted.empty()) { j["evicted"] = e.evicted; }
    if (!e.detail.empty()) { j["detail"] = e.detail; }
    return j;
}

inline auto parse_log_status(std::string_view s) -> LogStatus
{
    for (auto st : {LogStatus::accepted, LogStatus::dominated, LogStatus::non_novel, LogStatus::invalid,
                    LogStatus::constraint, LogStatus::not_found, LogStatus::latency}) {
        if (to_string(st) == s) { return st; }
    }
    throw ParseError(fmt::format("unknown log status '{}'", s));
}

inline void write_log(std::ostream& out, std::vector<LogEntry> const& log)
{
    for (auto const& e : log) { out << log_to_json(e).dump() << '\n'; }
}

inline auto read_log(std::istream& in, std::string_view source = "log") -> std::vector<LogEntry>
{
    std::vector<LogEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) { continue; }
        try {
            auto const j = nlohmann::json::parse(line);
            LogEntry e;
            e.seq = j.at("seq").get<std::size_t>();
            e.generation = j.at("generation").get<std::size_t>();
            e.niche = j.at("niche").get<std::size_t>();
            e.arch = j.at("arch").get<std::string>();
            e.operation = j.at("operation").get<std::string>();
            e.status = parse_log_status(j.at("status").get<std::string>());
            e.z_pred = j.value("z_pred", 0.0);
            e.latency = j.value("latency", 0.0);
            e.evicted = j.value("evicted", std::vector<std::string>{});
            e.detail = j.value("detail", std::string{});
            out.push_back(std::move(e));
        } catch (nlohmann::json::exception const& ex) {
            throw ParseError(fmt::format("{}: line {}: {}", source, lineno, ex.what()));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

struct RunFiles {
    std::filesystem::path front;
    std::filesystem::path report;
    std::filesystem::path hv_trace;
    std::filesystem::path log;
};

inline auto run_files(std::filesystem::path const& dir) -> RunFiles
{
    return {dir / "front.csv", dir / "report.txt", dir / "hv_trace.csv", dir / "evaluations.jsonl"};
}

/// Writes front.csv, report.txt, hv_trace.csv and evaluations.jsonl.
inline auto write_run(std::filesystem::path const& dir, RunReport const& r) -> RunFiles
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) { throw DataError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message())); }
    auto const files = run_files(dir);
    auto open = [](std::filesystem::path const& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) { throw DataError(fmt::format("cannot write '{}'", p.string())); }
        return out;
    };
    {
        auto out = open(files.front);
        write_front_csv(out, front_rows(r));
    }
    {
        auto out = open(files.report);
        write_kv(out, report_metadata(r));
    }
    {
        auto out = open(files.hv_trace);
        write_hv_trace(out, r.hv_trace);
    }
    {
        auto out = open(files.log);
        write_log(out, r.log);
    }
    return files;
}

} // namespace pelnas
