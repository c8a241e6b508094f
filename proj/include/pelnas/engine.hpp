#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "pelnas/arch_space.hpp"
#include "pelnas/benchmark_store.hpp"
#include "pelnas/coevolve_operator.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/objectives.hpp"
#include "pelnas/predictor.hpp"
#include "pelnas/rng.hpp"
#include "pelnas/text_service.hpp"

namespace pelnas {

enum class OperatorKind { baseline, llm };

constexpr auto to_string(OperatorKind k) noexcept -> std::string_view
{
    return k == OperatorKind::baseline ? "baseline" : "llm";
}

inline auto parse_operator_kind(std::string_view s) -> OperatorKind
{
    if (s == "baseline") { return OperatorKind::baseline; }
    if (s == "llm") { return OperatorKind::llm; }
    throw ConfigError(fmt::format("unknown operator '{}' (expected baseline or llm)", s));
}

/// Which accuracy the final front is scored with.
enum class ReportObjective { automatic, predicted, true_accuracy };

constexpr auto to_string(ReportObjective r) noexcept -> std::string_view
{
    switch (r) {
    case ReportObjective::automatic: return "auto";
    case ReportObjective::predicted: return "predicted";
    case ReportObjective::true_accuracy: return "true";
    }
    return "?";
}

inline auto parse_report_objective(std::string_view s) -> ReportObjective
{
    if (s == "auto") { return ReportObjective::automatic; }
    if (s == "predicted") { return ReportObjective::predicted; }
    if (s == "true") { return ReportObjective::true_accuracy; }
    throw ConfigError(fmt::format("unknown report objective '{}' (expected auto, predicted or true)", s));
}

/// Niche count of the default partition; the unpartitioned ablation scales
/// its budget by this factor.
inline constexpr std::size_t kDefaultNicheCount = 6;

/// Redraws allowed when the baseline operator repeats a known architecture.
inline constexpr std::size_t kBaselineRedraws = 32;

struct EngineConfig {
    std::string device = "edgegpu";
    std::string dataset = "cifar10";
    std::size_t generations = 10;
    double crossover_probability = 0.5;
    std::size_t init_per_niche = 5;
    std::size_t n_children = 2;
    OperatorKind op = OperatorKind::baseline;
    PredictorKind predictor = PredictorKind::oracle;
    std::uint64_t seed = 0;
    NicheSet niches = NicheSet::complexity_default();
    bool partitioned = true;
    std::size_t max_operator_retries = 3;
    std::size_t workers = 0; // 0 = one per niche
    bool archive_literal = false;
    bool share_knowledge = false;
    std::size_t kb_capacity = KnowledgeBase::kDefaultCapacity;
    double latency_limit = 0.0; // 0 = no gating, prompts show the store maximum
    ReportObjective report_objective = ReportObjective::automatic;
    std::optional<NormalizationBounds> bounds;

    void validate() const
    {
        if (generations < 1) { throw ConfigError("generations must be >= 1"); }
        if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0)) {
            throw ConfigError("crossover probability must lie in [0, 1]");
        }
        if (init_per_niche < 1) { throw ConfigError("init population per niche must be >= 1"); }
        if (n_children < 1) { throw ConfigError("children per generation must be >= 1"); }
        if (kb_capacity < 1) { throw ConfigError("knowledge base capacity must be >= 1"); }
        if (latency_limit < 0.0) { throw ConfigError("latency limit must be >= 0"); }
        if (partitioned) { niches.validate_partition(); }
        if (bounds) { bounds->validate(); }
    }
};

struct EvaluatedArch {
    ArchCell cell;
    std::string arch;
    std::size_t niche = 0;
    double z_pred = 0.0;
    double latency = 0.0;
    std::optional<double> true_accuracy;
    std::string rationale;
    std::size_t generation = 0;
    std::string operation;

    [[nodiscard]] auto objective() const noexcept -> NormalizedPoint { return {-z_pred, latency}; }
};

enum class LogStatus { accepted, dominated, non_novel, invalid, constraint, not_found, latency };

constexpr auto to_string(LogStatus s) noexcept -> std::string_view
{
    switch (s) {
    case LogStatus::accepted: return "accepted";
    case LogStatus::dominated: return "dominated";
    case LogStatus::non_novel: return "non_novel";
    case LogStatus::invalid: return "invalid";
    case LogStatus::constraint: return "constraint";
    case LogStatus::not_found: return "not_found";
    case LogStatus::latency: return "latency";
    }
    return "?";
}

/// One attempt to add a child. Evaluated entries (accepted or dominated)
/// carry objectives; accepted entries list the members they evicted.
struct LogEntry {
    std::size_t seq = 0;
    std::size_t generation = 0;
    std::size_t niche = 0;
    std::string arch;
    std::string operation;
    LogStatus status = LogStatus::invalid;
    double z_pred = 0.0;
    double latency = 0.0;
    std::vector<std::string> evicted;
    std::string detail;
};

struct NicheState {
    NicheId id;
    NichePredicate predicate;
    std::vector<EvaluatedArch> archive;
    KnowledgeBase kb;
    Rng rng;
    std::vector<PromptArch> last_results;
};

struct OperatorStats {
    std::size_t stage1_calls = 0;
    std::size_t stage2_calls = 0;
    std::size_t failed_calls = 0;
    std::size_t fallbacks = 0;
    std::size_t kb_warnings = 0;

    auto operator+=(OperatorStats const& o) -> OperatorStats&
    {
        stage1_calls += o.stage1_calls;
        stage2_calls += o.stage2_calls;
        failed_calls += o.failed_calls;
        fallbacks += o.fallbacks;
        kb_warnings += o.kb_warnings;
        return *this;
    }
};

struct RunReport {
    EngineConfig config;
    std::string mode; // partitioned | unpartitioned
    std::string objective_source; // true | predicted
    std::vector<EvaluatedArch> front;
    std::vector<std::vector<EvaluatedArch>> archives;
    std::vector<double> hv_trace; // index 0 = after initialization
    NormalizationBounds bounds;
    OperatorStats stats;
    std::size_t evaluations = 0;
    std::vector<LogEntry> log;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;

    /// Front accuracy as reported (true or predicted, per objective_source).
    [[nodiscard]] auto reported_accuracy(EvaluatedArch const& a) const -> double
    {
        return objective_source == "true" && a.true_accuracy ? *a.true_accuracy : a.z_pred;
    }
};

// ---------------------------------------------------------------------------
// Archive maintenance
// ---------------------------------------------------------------------------

struct ArchiveOutcome {
    bool accepted = false;
    std::vector<std::string> evicted;
};

/// Pareto archive insertion over (-z_pred, latency). In literal mode the
/// newcomer is inserted even when dominated.
inline auto archive_update(std::vector<EvaluatedArch>& archive, EvaluatedArch const& incoming, bool literal = false)
    -> ArchiveOutcome
{
    auto const p = incoming.objective();
    if (!literal) {
        for (auto const& m : archive) {
            if (dominates(m.objective(), p)) { return {}; }
        }
    }
    ArchiveOutcome out;
    out.accepted = true;
    std::erase_if(archive, [&](EvaluatedArch const& m) {
        if (dominates(p, m.objective())) {
            out.evicted.push_back(m.arch);
            return true;
        }
        return false;
    });
    archive.push_back(incoming);
    return out;
}

inline auto archive_update(NicheState& state, EvaluatedArch const& incoming, bool literal = false) -> bool
{
    return archive_update(state.archive, incoming, literal).accepted;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class Engine {
public:
    /// `service` is required for the llm operator and ignored otherwise.
    Engine(EngineConfig config, BenchmarkStore const& store, Predictor const& predictor, TextService* service = nullptr)
        : cfg_(std::move(config)), store_(store), predictor_(predictor), service_(service)
    {
        cfg_.validate();
        if (!cfg_.partitioned) {
            cfg_.niches = NicheSet::whole_space();
            cfg_.init_per_niche *= kDefaultNicheCount;
            cfg_.n_children *= kDefaultNicheCount;
        }
        if (cfg_.op == OperatorKind::llm && service_ == nullptr) {
            throw ConfigError("the llm operator needs a text service");
        }
        device_ = store_.device_index(cfg_.device);
        bounds_ = cfg_.bounds ? *cfg_.bounds : store_.bounds(cfg_.device, cfg_.dataset);
        complete_ = store_.is_complete(cfg_.dataset);
        use_true_ = cfg_.report_objective == ReportObjective::true_accuracy
                    || (cfg_.report_objective == ReportObjective::automatic && complete_);
        prompt_latency_ = cfg_.latency_limit > 0.0 ? cfg_.latency_limit : bounds_.lat_max;
    }

    [[nodiscard]] auto config() const noexcept -> EngineConfig const& { return cfg_; }
    [[nodiscard]] auto states() const noexcept -> std::vector<NicheState> const& { return states_; }
    [[nodiscard]] auto log() const noexcept -> std::vector<LogEntry> const& { return log_; }
    [[nodiscard]] auto stats() const noexcept -> OperatorStats const& { return stats_; }
    [[nodiscard]] auto evaluations() const noexcept -> std::size_t { return evaluations_; }

    /// Samples P_init distinct store members per niche by rejection.
    void initialize()
    {
        states_.clear();
        seen_.clear();
        log_.clear();
        for (std::size_t k = 0; k < cfg_.niches.size(); ++k) {
            NicheState s{NicheId{k}, cfg_.niches.predicate(NicheId{k}), {}, KnowledgeBase(cfg_.kb_capacity),
                         Rng(derive_seed(cfg_.seed, k)), {}};
            std::size_t found = 0;
            std::size_t tries = 0;
            constexpr std::size_t kMaxTries = 2'000'000;
            while (found < cfg_.init_per_niche && tries++ < kMaxTries) {
                auto const cell = ArchCell::from_index(uniform_index(s.rng, kSpaceSize));
                if (!s.predicate.accepts(cell)) { continue; }
                auto const arch = encode(cell);
                if (seen_.contains(arch) || store_.find(arch, cfg_.dataset) == nullptr) { continue; }
                seen_.insert(arch);
                admit(s, make_arch(cell, arch, k, "init", "random initial member", 0), "init");
                ++found;
            }
            if (found < cfg_.init_per_niche) {
                throw ConfigError(fmt::format("niche {} ({}) has fewer than {} stored members", k,
                                              to_string(s.predicate), cfg_.init_per_niche));
            }
            states_.push_back(std::move(s));
        }
        hv_trace_.assign(1, union_hv());
    }

    /// One generation across all niches: proposals in parallel, then merge in
    /// niche order.
    void evolve_generation(std::size_t g)
    {
        if (states_.empty()) { throw ConfigError("engine not initialized"); }
        if (cfg_.op == OperatorKind::llm && cfg_.share_knowledge && g >= 2) { shared_stage1(g); }

        std::vector<NicheProposals> props(states_.size());
        auto work = [&](std::size_t k) { props[k] = propose(states_[k], g); };
        auto const workers = std::clamp<std::size_t>(cfg_.workers == 0 ? states_.size() : cfg_.workers, 1,
                                                     states_.size());
        if (workers == 1) {
            for (std::size_t k = 0; k < states_.size(); ++k) { work(k); }
        } else {
            std::vector<std::jthread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t k = w; k < states_.size(); k += workers) { work(k); }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            pool.clear();
            for (auto const& e : errors) {
                if (e) { std::rethrow_exception(e); }
            }
        }

        for (std::size_t k = 0; k < states_.size(); ++k) {
            auto& s = states_[k];
            stats_ += props[k].stats;
            if (props[k].kb_warning) { warnings_.push_back(*props[k].kb_warning); }
            s.last_results.clear();
            for (auto& d : props[k].rejected) { push_log(std::move(d)); }
            for (auto& c : props[k].children) { consider(s, std::move(c), g); }
        }
        hv_trace_.push_back(union_hv());
    }

    auto run() -> RunReport
    {
        auto const t0 = std::chrono::steady_clock::now();
        initialize();
        for (std::size_t g = 1; g <= cfg_.generations; ++g) { evolve_generation(g); }
        auto report = aggregate();
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }

    /// Union of archives reduced to its rank-0 front over the reporting objective.
    [[nodiscard]] auto aggregate() const -> RunReport
    {
        RunReport r;
        r.config = cfg_;
        r.mode = cfg_.partitioned ? "partitioned" : "unpartitioned";
        r.objective_source = use_true_ ? "true" : "predicted";
        r.bounds = bounds_;
        r.stats = stats_;
        r.evaluations = evaluations_;
        r.log = log_;
        r.hv_trace = hv_trace_;
        r.warnings = warnings_;
        if (use_true_ && !complete_) {
            r.warnings.emplace_back("true accuracy requested on a partial store; scores are lookups, not a full-space oracle");
        }
        std::vector<EvaluatedArch> all;
        for (auto const& s : states_) {
            r.archives.push_back(s.archive);
            all.insert(all.end(), s.archive.begin(), s.archive.end());
        }
        r.front = non_dominated_subset(std::span<EvaluatedArch const>(all), [&](EvaluatedArch const& a) {
            return as_minimization({report_accuracy(a), a.latency});
        });
        return r;
    }

private:
    struct Child {
        std::optional<ArchCell> cell;
        std::string text;
        std::string operation;
        std::string rationale;
    };

    struct NicheProposals {
        std::vector<Child> children;
        std::vector<LogEntry> rejected;
        OperatorStats stats;
        std::optional<std::string> kb_warning;
    };

    [[nodiscard]] auto report_accuracy(EvaluatedArch const& a) const -> double
    {
        return use_true_ && a.true_accuracy ? *a.true_accuracy : a.z_pred;
    }

    auto make_arch(ArchCell const& cell, std::string const& arch, std::size_t niche, std::string operation,
                   std::string rationale, std::size_t generation) const -> EvaluatedArch
    {
        auto const& rec = store_.record(arch, cfg_.dataset);
        EvaluatedArch e;
        e.cell = cell;
        e.arch = arch;
        e.niche = niche;
        e.z_pred = predictor_.score(rec);
        e.latency = rec.latency[device_];
        e.true_accuracy = rec.accuracy;
        e.rationale = std::move(rationale);
        e.generation = generation;
        e.operation = std::move(operation);
        return e;
    }

    void push_log(LogEntry e)
    {
        e.seq = log_.size();
        log_.push_back(std::move(e));
    }

    auto admit(NicheState& s, EvaluatedArch const& a, std::string const& operation) -> bool
    {
        ++evaluations_;
        auto outcome = archive_update(s.archive, a, cfg_.archive_literal);
        LogEntry e;
        e.generation = a.generation;
        e.niche = s.id.value;
        e.arch = a.arch;
        e.operation = operation;
        e.status = outcome.accepted ? LogStatus::accepted : LogStatus::dominated;
        e.z_pred = a.z_pred;
        e.latency = a.latency;
        e.evicted = std::move(outcome.evicted);
        push_log(std::move(e));
        return outcome.accepted;
    }

    void reject(NicheState const& s, Child const& c, std::size_t g, LogStatus status, std::string detail = {})
    {
        LogEntry e;
        e.generation = g;
        e.niche = s.id.value;
        e.arch = c.text;
        e.operation = c.operation;
        e.status = status;
        e.detail = std::move(detail);
        push_log(std::move(e));
    }

    /// Gate, evaluate and archive one child (sequential phase).
    void consider(NicheState& s, Child c, std::size_t g)
    {
        if (!c.cell) { return reject(s, c, g, LogStatus::invalid); }
        if (seen_.contains(c.text)) { return reject(s, c, g, LogStatus::non_novel); }
        if (!s.predicate.accepts(*c.cell)) { return reject(s, c, g, LogStatus::constraint, profile_text(complexity(*c.cell))); }
        seen_.insert(c.text);
        if (store_.find(c.text, cfg_.dataset) == nullptr) { return reject(s, c, g, LogStatus::not_found); }
        auto a = make_arch(*c.cell, c.text, s.id.value, c.operation, c.rationale, g);
        if (cfg_.latency_limit > 0.0 && a.latency > cfg_.latency_limit) {
            return reject(s, c, g, LogStatus::latency, fmt::format("{:.3f} ms", a.latency));
        }
        bool const accepted = admit(s, a, c.operation);
        s.last_results.push_back({a.arch, a.z_pred, a.latency, a.rationale, accepted});
    }

    static auto profile_text(ComplexityProfile p) -> std::string
    {
        return fmt::format("n_conv3x3={} n_conv1x1={}", p.n_conv3x3, p.n_conv1x1);
    }

    auto context(NicheState const& s, std::size_t g) const -> GenerationContext
    {
        GenerationContext ctx;
        ctx.device = cfg_.device;
        ctx.dataset = cfg_.dataset;
        ctx.niche = s.predicate;
        ctx.niche_id = s.id.value;
        for (auto const& a : s.archive) { ctx.parents.push_back({a.arch, a.z_pred, a.latency, a.rationale, {}}); }
        ctx.kb = cfg_.share_knowledge ? shared_kb_ : s.kb;
        ctx.n_children = 1;
        ctx.latency_limit = prompt_latency_;
        ctx.crossover_probability = cfg_.crossover_probability;
        ctx.generation = g;
        return ctx;
    }

    void shared_stage1(std::size_t g)
    {
        GenerationContext ctx;
        ctx.device = cfg_.device;
        ctx.dataset = cfg_.dataset;
        ctx.niche = NichePredicate{};
        ctx.kb = shared_kb_;
        ctx.latency_limit = prompt_latency_;
        ctx.generation = g - 1;
        std::vector<PromptArch> results;
        for (auto const& s : states_) {
            for (auto const& a : s.archive) { ctx.parents.push_back({a.arch, a.z_pred, a.latency, a.rationale, {}}); }
            results.insert(results.end(), s.last_results.begin(), s.last_results.end());
        }
        ++stats_.stage1_calls;
        auto upd = llm_update_knowledge(results, ctx, *service_);
        if (upd.warning) {
            ++stats_.kb_warnings;
            warnings_.push_back(fmt::format("generation {}: {}", g, *upd.warning));
        }
        shared_kb_ = std::move(upd.kb);
    }

    /// Novel with respect to the start-of-generation seen set and this
    /// niche's earlier children. Niches are disjoint, so gated children of
    /// different niches can never collide.
    static auto fresh(std::unordered_set<std::string> const& seen, std::vector<Child> const& mine, std::string const& t)
        -> bool
    {
        if (seen.contains(t)) { return false; }
        return std::none_of(mine.begin(), mine.end(), [&](Child const& c) { return c.text == t; });
    }

    auto baseline_child(NicheState& s) const -> Child
    {
        Child c;
        auto const& arc = s.archive;
        if (bernoulli(s.rng, cfg_.crossover_probability) && arc.size() >= 2) {
            auto const i = uniform_index(s.rng, arc.size());
            auto const j = (i + 1 + uniform_index(s.rng, arc.size() - 1)) % arc.size();
            auto const& p1 = arc[i];
            auto const& p2 = arc[j];
            c.cell = baseline_crossover(p1.cell, p2.cell, s.predicate, s.rng);
            c.operation = "crossover";
            c.rationale = fmt::format("crossover of {} and {}", p1.arch, p2.arch);
        } else {
            auto const& p = arc[uniform_index(s.rng, arc.size())];
            c.cell = baseline_mutate(p.cell, s.predicate, s.rng);
            c.operation = "mutation";
            c.rationale = fmt::format("mutation of {}", p.arch);
        }
        c.text = encode(*c.cell);
        return c;
    }

    /// Read-only on shared state; writes only to `s` and the returned value.
    auto propose(NicheState& s, std::size_t g) const -> NicheProposals
    {
        NicheProposals out;
        auto note = [&](Child const& c, LogStatus st, std::string detail = {}) {
            LogEntry e;
            e.generation = g;
            e.niche = s.id.value;
            e.arch = c.text;
            e.operation = c.operation;
            e.status = st;
            e.detail = std::move(detail);
            out.rejected.push_back(std::move(e));
        };

        if (cfg_.op == OperatorKind::baseline) {
            for (std::size_t i = 0; i < cfg_.n_children; ++i) {
                auto c = baseline_child(s);
                for (std::size_t r = 0; r < kBaselineRedraws && !fresh(seen_, out.children, c.text); ++r) {
                    c = baseline_child(s);
                }
                out.children.push_back(std::move(c));
            }
            return out;
        }

        if (!cfg_.share_knowledge && g >= 2) {
            auto ctx = context(s, g - 1);
            ++out.stats.stage1_calls;
            auto upd = llm_update_knowledge(s.last_results, ctx, *service_);
            if (upd.warning) {
                ++out.stats.kb_warnings;
                out.kb_warning = fmt::format("generation {} niche {}: {}", g, s.id.value, *upd.warning);
            }
            s.kb = std::move(upd.kb);
        }
        auto const ctx = context(s, g);
        for (std::size_t i = 0; i < cfg_.n_children; ++i) {
            std::optional<Child> got;
            for (std::size_t attempt = 0; attempt <= cfg_.max_operator_retries && !got; ++attempt) {
                ++out.stats.stage2_calls;
                auto res = llm_generate(ctx, *service_);
                for (auto const& d : res.diagnostics) {
                    Child bad;
                    bad.operation = "llm";
                    note(bad, LogStatus::invalid, d);
                }
                if (res.error || res.proposals.empty()) {
                    ++out.stats.failed_calls;
                    continue;
                }
                auto const& p = res.proposals.front();
                got = Child{decode(p.architecture_code), p.architecture_code, std::string(to_string(p.operation)),
                            p.rationale};
            }
            if (!got) {
                ++out.stats.fallbacks;
                auto draw = [&] {
                    auto const& parent = s.archive[uniform_index(s.rng, s.archive.size())];
                    Child c;
                    c.cell = baseline_mutate(parent.cell, s.predicate, s.rng);
                    c.text = encode(*c.cell);
                    c.operation = "fallback-mutation";
                    c.rationale = fmt::format("fallback mutation of {}", parent.arch);
                    return c;
                };
                auto c = draw();
                for (std::size_t r = 0; r < kBaselineRedraws && !fresh(seen_, out.children, c.text); ++r) { c = draw(); }
                got = std::move(c);
            }
            out.children.push_back(std::move(*got));
        }
        return out;
    }

    [[nodiscard]] auto union_hv() const -> double
    {
        std::vector<NormalizedPoint> pts;
        for (auto const& s : states_) {
            for (auto const& a : s.archive) { pts.push_back(normalize({report_accuracy(a), a.latency}, bounds_)); }
        }
        return hypervolume(pts).volume;
    }

    EngineConfig cfg_;
    BenchmarkStore const& store_;
    Predictor const& predictor_;
    TextService* service_;
    std::size_t device_ = 0;
    NormalizationBounds bounds_;
    bool complete_ = false;
    bool use_true_ = false;
    double prompt_latency_ = 0.0;

    std::vector<NicheState> states_;
    std::unordered_set<std::string> seen_;
    std::vector<LogEntry> log_;
    std::vector<double> hv_trace_;
    std::vector<std::string> warnings_;
    KnowledgeBase shared_kb_;
    OperatorStats stats_;
    std::size_t evaluations_ = 0;
};

inline auto run_search(EngineConfig const& config, BenchmarkStore const& store, Predictor const& predictor,
                       TextService* service = nullptr) -> RunReport
{
    Engine engine(config, store, predictor, service);
    return engine.run();
}

} // namespace pelnas
