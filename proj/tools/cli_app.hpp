#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pelnas/pelnas.hpp"

namespace pelnas::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kService = 4 };

/// Parsed command line. Each subcommand records its handler; overrides are
/// applied after any config file has been loaded (flag > file > default).
struct Invocation {
    std::function<int(std::ostream&, std::ostream&)> run;
};

namespace detail {

using Later = std::vector<std::function<void()>>;

/// Binds a flag whose value is applied later, and only if it was given.
template <class T, class Apply>
auto later_option(CLI::App* app, Later& later, std::string const& name, std::string const& desc, Apply apply)
    -> CLI::Option*
{
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, desc);
    later.push_back([opt, value, apply] {
        if (opt->count() > 0) { apply(*value); }
    });
    return opt;
}

template <class Apply>
auto later_flag(CLI::App* app, Later& later, std::string const& name, std::string const& desc, Apply apply)
    -> CLI::Option*
{
    auto* opt = app->add_flag(name, desc);
    later.push_back([opt, apply] {
        if (opt->count() > 0) { apply(); }
    });
    return opt;
}

inline auto load_store_arg(std::filesystem::path const& path, std::filesystem::path const& mapping) -> BenchmarkStore
{
    if (path.empty()) { throw ConfigError("no store file given (use --store)"); }
    if (!std::filesystem::exists(path)) { throw DataError(fmt::format("store file '{}' does not exist", path.string())); }
    return load_store(path, std::nullopt, mapping.empty() ? ColumnMapping{} : ColumnMapping::load(mapping));
}

inline auto bounds_from_values(std::vector<double> const& v) -> NormalizationBounds
{
    NormalizationBounds b{v.at(0), v.at(1), v.at(2), v.at(3)};
    b.validate();
    return b;
}

inline auto default_model_path(std::filesystem::path const& store) -> std::filesystem::path
{
    auto p = store;
    p += ".model.json";
    return p;
}

// ---------------------------------------------------------------------------
// plot-data
// ---------------------------------------------------------------------------

struct Series {
    std::string label;
    std::vector<FrontRow> rows;
};

inline auto svg_scatter(std::vector<Series> const& series, NormalizationBounds const& b) -> std::string
{
    constexpr double kW = 640;
    constexpr double kH = 480;
    constexpr double kLeft = 70;
    constexpr double kRight = 170;
    constexpr double kTop = 30;
    constexpr double kBottom = 60;
    constexpr std::array<std::string_view, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                      "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    auto const pw = kW - kLeft - kRight;
    auto const ph = kH - kTop - kBottom;
    auto x = [&](double lat) { return kLeft + (lat - b.lat_min) / (b.lat_max - b.lat_min) * pw; };
    auto y = [&](double acc) { return kTop + (b.acc_max - acc) / (b.acc_max - b.acc_min) * ph; };

    std::string s;
    s += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                     "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
                     kW, kH, kW, kH);
    s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kW, kH);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                     "stroke=\"black\"/>\n",
                     kLeft, kTop, pw, ph);
    for (int i = 0; i <= 4; ++i) {
        double const t = i / 4.0;
        double const lat = b.lat_min + t * (b.lat_max - b.lat_min);
        double const acc = b.acc_min + t * (b.acc_max - b.acc_min);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.2f}</text>\n", x(lat),
                         kTop + ph + 18, lat);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y(acc) + 4,
                         acc);
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">latency (ms)</text>\n", kLeft + pw / 2,
                     kH - 15);
    s += fmt::format("<text x=\"15\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2f})\">"
                     "accuracy (%)</text>\n",
                     kTop + ph / 2, kTop + ph / 2);
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto const color = kColors[i % kColors.size()];
        for (auto const& r : series[i].rows) {
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n",
                             x(std::clamp(r.latency, b.lat_min, b.lat_max)), y(std::clamp(r.accuracy, b.acc_min, b.acc_max)),
                             color);
        }
        double const ly = kTop + 10 + 18.0 * static_cast<double>(i);
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\"/>\n", kLeft + pw + 16, ly, color);
        std::string label;
        for (char c : series[i].label) {
            if (c == '<') { label += "&lt;"; }
            else if (c == '>') { label += "&gt;"; }
            else if (c == '&') { label += "&amp;"; }
            else { label += c; }
        }
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kLeft + pw + 26, ly + 4, label);
    }
    s += "</svg>\n";
    return s;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

/// Builds the full command tree. `inv.run` is set by whichever subcommand
/// is selected during parsing.
inline void build_app(CLI::App& app, Invocation& inv)
{
    app.description("Partitioned evolutionary search over a hardware-aware cell space.\n"
                    "Exit codes: 0 ok, 2 configuration error, 3 data error, 4 text service unreachable.");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand");

    // -- synth --------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("synth", "Write a full synthetic benchmark store and its model sidecar");
        struct A {
            std::uint64_t seed = 0;
            std::filesystem::path out;
            std::filesystem::path model_out;
            std::filesystem::path from_model;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--seed", a->seed, "Seed of the synthetic model")->capture_default_str();
        sub->add_option("--out", a->out, "Store file to write (.csv or .jsonl)")->required();
        sub->add_option("--model-out", a->model_out, "Sidecar model file (default: <out>.model.json)");
        sub->add_option("--from-model", a->from_model, "Re-synthesize from a saved model instead of --seed");
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                auto const model = a->from_model.empty() ? SyntheticModel::from_seed(a->seed) : load_model(a->from_model);
                auto const store = synthesize(model);
                save_store(a->out, store);
                auto const sidecar = a->model_out.empty() ? detail::default_model_path(a->out) : a->model_out;
                save_model(sidecar, model);
                out << fmt::format("wrote {} records to {}\nmodel: {}\n", store.size(), a->out.string(), sidecar.string());
                return kOk;
            };
        });
    }

    // -- ingest -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("ingest", "Convert a benchmark export into the canonical store schema");
        struct A {
            std::filesystem::path in;
            std::filesystem::path mapping;
            std::filesystem::path out;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--in", a->in, "Input file (.csv or .jsonl)")->required();
        sub->add_option("--mapping", a->mapping, "Column-mapping TOML for foreign column names");
        sub->add_option("--out", a->out, "Canonical store file to write")->required();
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                auto const store = detail::load_store_arg(a->in, a->mapping);
                save_store(a->out, store);
                out << fmt::format("ingested {} records ({} datasets, {} devices) into {}\n", store.size(),
                                   store.datasets().size(), store.devices().size(), a->out.string());
                return kOk;
            };
        });
    }

    // -- fit ----------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("fit", "Fit or build a predictor and report its holdout Spearman");
        struct A {
            std::filesystem::path store;
            std::filesystem::path mapping;
            std::string dataset = "cifar10";
            std::string kind = "fitted";
            std::size_t sample = 1000;
            std::uint64_t seed = 0;
            double lambda = kDefaultRidgeLambda;
            std::size_t holdout = 1000;
            std::filesystem::path out;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--store", a->store, "Benchmark store file")->required();
        sub->add_option("--mapping", a->mapping, "Column-mapping TOML for the store");
        sub->add_option("--dataset", a->dataset, "Dataset to fit on")->capture_default_str();
        sub->add_option("--kind", a->kind, "Predictor kind: fitted, rank_ensemble or oracle")->capture_default_str();
        sub->add_option("--sample-size", a->sample, "Training sample size for the fitted kind")->capture_default_str();
        sub->add_option("--seed", a->seed, "Seed for the training and holdout samples")->capture_default_str();
        sub->add_option("--lambda", a->lambda, "Ridge penalty")->capture_default_str();
        sub->add_option("--holdout-size", a->holdout, "Records in the evaluation holdout")->capture_default_str();
        sub->add_option("--out", a->out, "Predictor file to write (JSON)")->required();
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                auto const store = detail::load_store_arg(a->store, a->mapping);
                auto const kind = parse_predictor_kind(a->kind);
                Predictor p = Predictor::oracle();
                if (kind == PredictorKind::fitted) { p = fit(store, a->dataset, a->sample, a->seed, a->lambda).predictor; }
                else if (kind == PredictorKind::rank_ensemble) { p = Predictor::rank_ensemble(store, a->dataset); }
                p.save(a->out);
                auto const report = evaluate_predictor(p, store, a->dataset, a->seed + 1, a->holdout);
                out << report.to_kv();
                return kOk;
            };
        });
    }

    // -- search -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("search", "Run the partitioned evolutionary search");
        struct A {
            std::filesystem::path config;
            SearchSettings s;
            detail::Later later;
        };
        auto a = std::make_shared<A>();
        auto& L = a->later;
        auto* S = &a->s;
        sub->add_option("--config", a->config, "TOML config file; flags override its values");
        detail::later_option<std::string>(sub, L, "--store", "Benchmark store file", [S](auto v) { S->store = v; });
        detail::later_option<std::string>(sub, L, "--mapping", "Column-mapping TOML for the store",
                                          [S](auto v) { S->mapping = v; });
        detail::later_option<std::string>(sub, L, "--out", "Output directory (default pelnas-run)",
                                          [S](auto v) { S->out = v; });
        detail::later_option<std::string>(sub, L, "--predictor",
                                          "Predictor: auto, oracle, rank_ensemble or fitted (default auto)",
                                          [S](auto v) { S->predictor = v; });
        detail::later_option<std::string>(sub, L, "--predictor-file", "Load a saved predictor instead of building one",
                                          [S](auto v) { S->predictor_file = v; });
        detail::later_option<std::size_t>(sub, L, "--predictor-sample", "Training sample for an on-the-fly fit (default 1000)",
                                          [S](auto v) { S->predictor_sample = v; });
        detail::later_option<std::uint64_t>(sub, L, "--predictor-seed", "Seed for an on-the-fly fit (default 0)",
                                            [S](auto v) { S->predictor_seed = v; });
        detail::later_option<std::string>(sub, L, "--device", "Target device (default edgegpu)",
                                          [S](auto v) { S->engine.device = v; });
        detail::later_option<std::string>(sub, L, "--dataset", "Dataset (default cifar10)",
                                          [S](auto v) { S->engine.dataset = v; });
        detail::later_option<std::size_t>(sub, L, "--generations", "Generations G (default 10)",
                                          [S](auto v) { S->engine.generations = v; });
        detail::later_option<double>(sub, L, "--crossover-probability", "Crossover probability p_c (default 0.5)",
                                     [S](auto v) { S->engine.crossover_probability = v; });
        detail::later_option<std::size_t>(sub, L, "--init-per-niche", "Initial population per niche P_init (default 5)",
                                          [S](auto v) { S->engine.init_per_niche = v; });
        detail::later_option<std::size_t>(sub, L, "--n-children", "Children per niche per generation (default 2)",
                                          [S](auto v) { S->engine.n_children = v; });
        detail::later_option<std::string>(sub, L, "--operator", "Operator: baseline or llm (default baseline)",
                                          [S](auto v) { S->engine.op = parse_operator_kind(v); });
        detail::later_option<std::uint64_t>(sub, L, "--seed", "Search seed (default 0)",
                                            [S](auto v) { S->engine.seed = v; });
        detail::later_flag(sub, L, "--no-partition", "Disable partitioning (single niche, equal total budget)",
                           [S] { S->engine.partitioned = false; });
        detail::later_option<std::size_t>(sub, L, "--max-operator-retries",
                                          "Extra operator calls after a failed one (default 3)",
                                          [S](auto v) { S->engine.max_operator_retries = v; });
        detail::later_option<std::size_t>(sub, L, "--workers", "Concurrent niche workers (default: one per niche)",
                                          [S](auto v) { S->engine.workers = v; });
        detail::later_flag(sub, L, "--archive-literal", "Insert dominated children too (literal set-builder update)",
                           [S] { S->engine.archive_literal = true; });
        detail::later_flag(sub, L, "--share-knowledge", "Use one knowledge base for all niches",
                           [S] { S->engine.share_knowledge = true; });
        detail::later_option<std::size_t>(sub, L, "--kb-capacity", "Knowledge base capacity in rules (default 20)",
                                          [S](auto v) { S->engine.kb_capacity = v; });
        detail::later_option<double>(sub, L, "--latency-limit", "Latency limit in ms; 0 disables gating (default 0)",
                                     [S](auto v) { S->engine.latency_limit = v; });
        detail::later_option<std::string>(sub, L, "--report-objective",
                                          "Front accuracy source: auto, predicted or true (default auto)",
                                          [S](auto v) { S->engine.report_objective = parse_report_objective(v); });
        detail::later_option<std::string>(sub, L, "--endpoint", "Chat-completion endpoint URL",
                                          [S](auto v) { S->service.endpoint = v; });
        detail::later_option<std::string>(sub, L, "--model", "Model name sent to the endpoint",
                                          [S](auto v) { S->service.model = v; });
        detail::later_option<std::string>(sub, L, "--token-env", "Environment variable holding the bearer token",
                                          [S](auto v) { S->service.token_env = v; });
        detail::later_option<double>(sub, L, "--timeout", "Per-request timeout in seconds (default 60)",
                                     [S](auto v) { S->service.timeout_s = v; });
        detail::later_option<int>(sub, L, "--max-retries", "Transport retries per service call (default 3)",
                                  [S](auto v) { S->service.max_retries = v; });
        detail::later_option<int>(sub, L, "--retry-backoff-ms", "Backoff step between retries (default 500)",
                                  [S](auto v) { S->service.retry_backoff_ms = v; });
        detail::later_option<double>(sub, L, "--temperature", "Sampling temperature (default 0.7)",
                                     [S](auto v) { S->service.temperature = v; });
        detail::later_option<std::string>(sub, L, "--response-path", "JSON pointer to the reply text in the response",
                                          [S](auto v) { S->service.response_path = v; });
        detail::later_option<std::vector<std::string>>(sub, L, "--transcript",
                                                       "Transcript mode and path: live|record|replay FILE",
                                                       [S](auto v) {
                                                           S->service.mode = parse_transcript_mode(v.at(0));
                                                           if (v.size() > 1) { S->service.transcript = v[1]; }
                                                       })
            ->expected(1, 2);
        detail::later_option<std::vector<double>>(sub, L, "--bounds",
                                                  "Explicit normalization bounds: ACC_MIN ACC_MAX LAT_MIN LAT_MAX",
                                                  [S](auto v) {
                                                      S->bounds_policy = BoundsPolicy::explicit_values;
                                                      S->explicit_bounds = detail::bounds_from_values(v);
                                                  })
            ->expected(4);
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream& err) -> int {
                auto& s = a->s;
                if (!a->config.empty()) { load_settings(s, a->config); }
                for (auto const& f : a->later) { f(); }
                auto const store = detail::load_store_arg(s.store, s.mapping);

                std::optional<Predictor> pred;
                if (!s.predictor_file.empty()) {
                    pred = Predictor::load(s.predictor_file);
                } else {
                    auto kind = s.predictor == "auto" ? (store.has_proxies() ? PredictorKind::fitted : PredictorKind::oracle)
                                                      : parse_predictor_kind(s.predictor);
                    if (s.predictor == "auto" && kind == PredictorKind::oracle) {
                        err << "warning: store has no proxy features; using the oracle predictor (true accuracy)\n";
                    }
                    if (kind == PredictorKind::fitted) {
                        pred = fit(store, s.engine.dataset, s.predictor_sample, s.predictor_seed).predictor;
                    } else if (kind == PredictorKind::rank_ensemble) {
                        pred = Predictor::rank_ensemble(store, s.engine.dataset);
                    } else {
                        pred = Predictor::oracle();
                    }
                }
                s.engine.predictor = pred->kind();
                if (s.bounds_policy == BoundsPolicy::explicit_values) { s.engine.bounds = s.explicit_bounds; }

                std::unique_ptr<ChatClient> client;
                if (s.engine.op == OperatorKind::llm) { client = std::make_unique<ChatClient>(s.service); }
                auto const report = run_search(s.engine, store, *pred, client.get());
                auto const files = write_run(s.out, report);
                for (auto const& w : report.warnings) { err << "warning: " << w << '\n'; }
                out << fmt::format("mode={} front_size={} hv_final={} evaluations={} stage2_calls={} "
                                   "failed_calls={} wall_seconds={:.3f}\n",
                                   report.mode, report.front.size(),
                                   text::format_double(report.hv_trace.empty() ? 0.0 : report.hv_trace.back()),
                                   report.evaluations, report.stats.stage2_calls, report.stats.failed_calls,
                                   report.wall_seconds);
                out << fmt::format("front: {}\nreport: {}\n", files.front.string(), files.report.string());
                if (client && s.service.mode != TranscriptMode::replay && report.stats.stage2_calls > 0
                    && client->successes() == 0) {
                    err << fmt::format("error: text service at {} never answered; every child came from the "
                                       "fallback operator\n",
                                       s.service.endpoint);
                    return kService;
                }
                return kOk;
            };
        });
    }

    // -- metrics ------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("metrics", "Compute HV and IGD of a front against a reference front");
        struct A {
            std::filesystem::path front;
            std::filesystem::path truth_store;
            std::filesystem::path truth_front;
            std::filesystem::path mapping;
            std::string device = "edgegpu";
            std::string dataset = "cifar10";
            std::vector<double> bounds;
            std::filesystem::path bounds_from;
            bool allow_partial = false;
            std::filesystem::path out;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--front", a->front, "Front CSV to score")->required();
        auto* ts = sub->add_option("--truth-store", a->truth_store, "Store whose brute-force front is the reference");
        auto* tf = sub->add_option("--truth-front", a->truth_front, "Reference front CSV");
        ts->excludes(tf);
        sub->add_option("--mapping", a->mapping, "Column-mapping TOML for --truth-store");
        sub->add_option("--device", a->device, "Device column of the truth store")->capture_default_str();
        sub->add_option("--dataset", a->dataset, "Dataset of the truth store")->capture_default_str();
        sub->add_option("--bounds", a->bounds, "Normalization bounds: ACC_MIN ACC_MAX LAT_MIN LAT_MAX")->expected(4);
        sub->add_option("--bounds-from", a->bounds_from, "Read normalization bounds from a report.txt");
        sub->add_flag("--allow-partial", a->allow_partial, "Accept a truth store that does not cover the full space");
        sub->add_option("--out", a->out, "Also write the metrics block to this file");
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream& err) -> int {
                if (a->truth_store.empty() && a->truth_front.empty()) {
                    throw ConfigError("give --truth-store or --truth-front");
                }
                auto const found = objective_points(load_front_csv(a->front));
                if (found.empty()) { throw DataError(fmt::format("front '{}' is empty; IGD is undefined", a->front.string())); }
                std::vector<ObjectivePoint> truth;
                std::optional<NormalizationBounds> bounds;
                if (!a->truth_store.empty()) {
                    auto const store = detail::load_store_arg(a->truth_store, a->mapping);
                    for (auto const& s : true_front(store, a->device, a->dataset, a->allow_partial)) { truth.push_back(s.point); }
                    bounds = store.bounds(a->device, a->dataset);
                } else {
                    truth = objective_points(load_front_csv(a->truth_front));
                }
                if (!a->bounds_from.empty()) {
                    std::ifstream in(a->bounds_from);
                    if (!in) { throw DataError(fmt::format("cannot open '{}'", a->bounds_from.string())); }
                    bounds = bounds_from_kv(read_kv(in));
                    if (!bounds) { throw DataError(fmt::format("'{}' has no bounds_* entries", a->bounds_from.string())); }
                }
                if (!a->bounds.empty()) { bounds = detail::bounds_from_values(a->bounds); }
                if (!bounds) {
                    std::vector<ObjectivePoint> all = found;
                    all.insert(all.end(), truth.begin(), truth.end());
                    bounds = NormalizationBounds::from_points(all);
                    err << "warning: no bounds given; using min/max over both fronts\n";
                }
                auto const report = evaluate_front(found, truth, *bounds);
                out << report.to_kv();
                if (!a->out.empty()) {
                    std::ofstream f(a->out, std::ios::binary);
                    if (!f) { throw DataError(fmt::format("cannot write '{}'", a->out.string())); }
                    f << report.to_kv();
                }
                return kOk;
            };
        });
    }

    // -- front --------------------------------------------------------------
    {
        auto* sub = app.add_subcommand("front", "Write the brute-force true Pareto front of a store");
        struct A {
            std::filesystem::path store;
            std::filesystem::path mapping;
            std::string device = "edgegpu";
            std::string dataset = "cifar10";
            bool allow_partial = false;
            std::filesystem::path out;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--store", a->store, "Benchmark store file")->required();
        sub->add_option("--mapping", a->mapping, "Column-mapping TOML for the store");
        sub->add_option("--device", a->device, "Device")->capture_default_str();
        sub->add_option("--dataset", a->dataset, "Dataset")->capture_default_str();
        sub->add_flag("--allow-partial", a->allow_partial, "Accept a store that does not cover the full space");
        sub->add_option("--out", a->out, "Front CSV to write")->required();
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                auto const store = detail::load_store_arg(a->store, a->mapping);
                auto const rows = front_rows(true_front(store, a->device, a->dataset, a->allow_partial));
                std::ofstream f(a->out, std::ios::binary);
                if (!f) { throw DataError(fmt::format("cannot write '{}'", a->out.string())); }
                write_front_csv(f, rows);
                out << fmt::format("true front: {} points -> {}\n", rows.size(), a->out.string());
                return kOk;
            };
        });
    }

    // -- plot-data ----------------------------------------------------------
    {
        auto* sub = app.add_subcommand("plot-data", "Merge front files into labeled scatter data (CSV, optional SVG)");
        struct A {
            std::vector<std::string> fronts;
            std::filesystem::path out;
            std::filesystem::path svg;
            std::filesystem::path report;
        };
        auto a = std::make_shared<A>();
        sub->add_option("fronts", a->fronts, "Front files, each PATH or LABEL=PATH")->required();
        sub->add_option("--out", a->out, "Merged CSV to write (series,arch,accuracy,latency)")->required();
        sub->add_option("--svg", a->svg, "Also write an SVG scatter plot");
        sub->add_option("--report", a->report, "report.txt whose bounds fix the SVG axes");
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                std::vector<detail::Series> series;
                for (auto const& spec : a->fronts) {
                    auto const eq = spec.find('=');
                    std::filesystem::path path = eq == std::string::npos ? spec : spec.substr(eq + 1);
                    std::string label = eq == std::string::npos ? path.stem().string() : spec.substr(0, eq);
                    series.push_back({label, load_front_csv(path)});
                }
                std::ofstream f(a->out, std::ios::binary);
                if (!f) { throw DataError(fmt::format("cannot write '{}'", a->out.string())); }
                f << "series,arch,accuracy,latency\n";
                std::size_t n = 0;
                std::vector<ObjectivePoint> all;
                for (auto const& s : series) {
                    for (auto const& r : s.rows) {
                        f << text::csv_escape(s.label) << ',' << r.arch << ',' << text::format_double(r.accuracy) << ','
                          << text::format_double(r.latency) << '\n';
                        all.push_back({r.accuracy, r.latency});
                        ++n;
                    }
                }
                if (!a->svg.empty()) {
                    std::optional<NormalizationBounds> b;
                    if (!a->report.empty()) {
                        std::ifstream in(a->report);
                        if (!in) { throw DataError(fmt::format("cannot open '{}'", a->report.string())); }
                        b = bounds_from_kv(read_kv(in));
                    }
                    if (!b) {
                        if (all.empty()) { throw DataError("no points to plot"); }
                        b = NormalizationBounds::from_points(all);
                    }
                    std::ofstream svg(a->svg, std::ios::binary);
                    if (!svg) { throw DataError(fmt::format("cannot write '{}'", a->svg.string())); }
                    svg << detail::svg_scatter(series, *b);
                }
                out << fmt::format("{} series, {} points -> {}\n", series.size(), n, a->out.string());
                return kOk;
            };
        });
    }

    // -- enumerate ----------------------------------------------------------
    {
        auto* sub = app.add_subcommand("enumerate", "List the search space or niche cardinalities");
        struct A {
            std::filesystem::path out;
            int niche = -1;
            bool counts = false;
        };
        auto a = std::make_shared<A>();
        sub->add_option("--out", a->out, "Write to this file instead of stdout");
        sub->add_option("--niche", a->niche, "Only list members of this default niche (0-5)");
        sub->add_flag("--counts", a->counts, "Print niche cardinalities instead of architectures");
        sub->callback([a, &inv] {
            inv.run = [a](std::ostream& out, std::ostream&) {
                std::ofstream file;
                if (!a->out.empty()) {
                    file.open(a->out, std::ios::binary);
                    if (!file) { throw DataError(fmt::format("cannot write '{}'", a->out.string())); }
                }
                std::ostream& o = a->out.empty() ? out : file;
                auto const niches = NicheSet::complexity_default();
                if (a->niche >= static_cast<int>(niches.size())) {
                    throw ConfigError(fmt::format("niche {} out of range (0-{})", a->niche, niches.size() - 1));
                }
                if (a->counts) {
                    auto const c = niches.cardinalities();
                    o << "niche,predicate,count\n";
                    for (std::size_t k = 0; k < c.size(); ++k) {
                        o << k << ',' << to_string(niches.predicate(NicheId{k})) << ',' << c[k] << '\n';
                    }
                    return kOk;
                }
                for (auto const& cell : enumerate_space()) {
                    if (a->niche < 0 || assign_niche(cell).value == static_cast<std::size_t>(a->niche)) { o << encode(cell) << '\n'; }
                }
                return kOk;
            };
        });
    }
}

/// Full command-line entry point with the documented exit-code mapping.
inline auto run(int argc, char const* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) -> int
{
    CLI::App app{"pelnas"};
    Invocation inv;
    build_app(app, inv);
    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        out << app.help();
        return kOk;
    } catch (CLI::CallForAllHelp const& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (CLI::ParseError const& e) {
        if (e.get_exit_code() == 0) {
            out << e.what() << '\n';
            return kOk;
        }
        err << "error: " << e.what() << '\n';
        return kConfig;
    }
    try {
        if (!inv.run) { return kConfig; }
        return inv.run(out, err);
    } catch (ConfigError const& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (ServiceError const& e) {
        err << "service error: " << e.what() << '\n';
        return kService;
    } catch (Error const& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (std::filesystem::filesystem_error const& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    }
}

} // namespace pelnas::cli
