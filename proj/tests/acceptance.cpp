// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "archive_replay.hpp"
#include "cli_app.hpp"
#include "golden_context.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace pelnas;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

auto fixture(std::string const& name) -> fs::path { return fs::path(PELNAS_FIXTURE_DIR) / name; }

auto slurp(fs::path const& p) -> std::string
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

auto const& default_store()
{
    static auto const store = synthesize(SyntheticModel::from_seed(0));
    return store;
}

auto front_text(RunReport const& r) -> std::string
{
    std::ostringstream out;
    write_front_csv(out, front_rows(r));
    return out.str();
}

auto to_oracle(std::vector<NormalizedPoint> const& pts) -> std::vector<oracle::P>
{
    std::vector<oracle::P> out;
    for (auto p : pts) { out.push_back({p.f1, p.f2}); }
    return out;
}

auto seconds_since(std::chrono::steady_clock::time_point t0) -> double
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

auto criterion1() -> Outcome
{
    auto const t0 = std::chrono::steady_clock::now();
    std::set<std::size_t> seen;
    std::size_t n = 0;
    std::array<std::size_t, 6> card{};
    for (auto const& c : enumerate_space()) {
        seen.insert(c.index());
        ++n;
        auto const p = complexity(c);
        // Table rows written out directly, independent of NicheSet.
        std::size_t k = 0;
        if (p.n_conv3x3 == 0) { k = p.n_conv1x1 == 0 ? 0 : 1; }
        else if (p.n_conv3x3 <= 3) { k = static_cast<std::size_t>(p.n_conv3x3) + 1; }
        else { k = 5; }
        ++card[k];
    }
    auto const lib = NicheSet::complexity_default().cardinalities();
    double const dt = seconds_since(t0);
    std::array<std::size_t, 6> const want{729, 3367, 6144, 3840, 1280, 265};
    bool const ok = n == 15625 && seen.size() == 15625 && card == want
                    && std::equal(lib.begin(), lib.end(), want.begin()) && dt < 1.0;
    return {ok, fmt::format("cells={} unique={} cardinalities=[{}] time={:.3f}s", n, seen.size(), fmt::join(lib, ","), dt)};
}

auto criterion2() -> Outcome
{
    auto const t0 = std::chrono::steady_clock::now();
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_exact = 0.0;
    double worst_sigma = 0.0;
    double worst_igd = 0.0;
    std::size_t nds_mismatch = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<NormalizedPoint> pts(1 + static_cast<std::size_t>(t % 8));
        for (auto& p : pts) { p = {u(gen), u(gen)}; }
        double const hv = hypervolume(pts).volume;
        worst_exact = std::max(worst_exact, std::abs(hv - oracle::hv_grid(to_oracle(pts), {1, 1})));
        auto const mc = oracle::hv_monte_carlo(to_oracle(pts), {1, 1}, 20000, 7000 + static_cast<unsigned>(t));
        worst_sigma = std::max(worst_sigma, std::abs(hv - mc.mean) / std::max(mc.sigma, 1e-12));

        std::vector<NormalizedPoint> truth(1 + static_cast<std::size_t>(t % 11));
        for (auto& p : truth) { p = {u(gen), u(gen)}; }
        worst_igd = std::max(worst_igd, std::abs(igd(pts, truth) - oracle::igd(to_oracle(pts), to_oracle(truth))));
    }
    std::uniform_int_distribution<int> g(0, 15);
    for (int t = 0; t < 50; ++t) {
        std::vector<NormalizedPoint> pts(200);
        for (auto& p : pts) { p = t % 2 == 0 ? NormalizedPoint{u(gen), u(gen)} : NormalizedPoint{g(gen) / 15.0, g(gen) / 15.0}; }
        auto idx = non_dominated_indices(std::span<NormalizedPoint const>(pts), std::identity{});
        std::sort(idx.begin(), idx.end());
        nds_mismatch += idx != oracle::pairwise_front(to_oracle(pts));
    }
    double const dt = seconds_since(t0);
    bool const ok = worst_exact <= 1e-9 && worst_sigma <= 3.0 && worst_igd <= 1e-12 && nds_mismatch == 0 && dt < 10.0;
    return {ok, fmt::format("hv_exact_err={:.2e} hv_mc_max_sigma={:.2f} igd_err={:.2e} nds_mismatches={} time={:.2f}s",
                            worst_exact, worst_sigma, worst_igd, nds_mismatch, dt)};
}

auto criterion3() -> Outcome
{
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        EngineConfig cfg;
        cfg.generations = 3;
        cfg.seed = seed;
        cfg.crossover_probability = (seed % 5) / 4.0;
        auto const r = run_search(cfg, default_store(), Predictor::oracle());
        std::map<std::size_t, std::vector<support::ReplayedPoint>> rebuilt;
        if (auto err = support::check_archive_log(r.log, false, &rebuilt)) {
            return {false, fmt::format("seed {}: {}", seed, *err)};
        }
        for (std::size_t k = 0; k < r.archives.size(); ++k) {
            std::set<std::string> a;
            std::set<std::string> b;
            for (auto const& m : r.archives[k]) { a.insert(m.arch); }
            for (auto const& m : rebuilt[k]) { b.insert(m.arch); }
            if (a != b) { return {false, fmt::format("seed {} niche {}: final archive differs from replay", seed, k)}; }
        }
        checked += r.log.size();
    }
    return {true, fmt::format("100 runs at G=3, {} log entries replayed", checked)};
}

auto criterion4() -> Outcome
{
    EngineConfig cfg;
    cfg.seed = 7;
    std::vector<std::string> fronts;
    for (std::size_t w : {1U, 6U}) {
        cfg.workers = w;
        fronts.push_back(front_text(run_search(cfg, default_store(), Predictor::oracle())));
    }
    TextServiceConfig svc;
    svc.mode = TranscriptMode::replay;
    svc.transcript = fixture("run1.jsonl");
    EngineConfig llm;
    llm.op = OperatorKind::llm;
    for (std::size_t w : {1U, 6U}) {
        ChatClient client(svc);
        llm.workers = w;
        fronts.push_back(front_text(run_search(llm, default_store(), Predictor::oracle(), &client)));
    }
    bool const ok = fronts[0] == fronts[1] && fronts[2] == fronts[3];
    return {ok, fmt::format("baseline 1 vs 6 workers {}; replay 1 vs 6 workers {}",
                            fronts[0] == fronts[1] ? "identical" : "DIFFER", fronts[2] == fronts[3] ? "identical" : "DIFFER")};
}

auto criterion5() -> Outcome
{
    TextServiceConfig svc;
    svc.mode = TranscriptMode::replay;
    svc.transcript = fixture("run1.jsonl");
    ChatClient client(svc);
    EngineConfig cfg;
    cfg.op = OperatorKind::llm;
    auto const t0 = std::chrono::steady_clock::now();
    auto const r = run_search(cfg, default_store(), Predictor::oracle(), &client);
    double const dt = seconds_since(t0);
    bool const ok = r.stats.stage2_calls == 120 && r.stats.failed_calls == 0 && dt < 180.0;
    return {ok, fmt::format("stage2_calls={} stage1_calls={} failed={} time={:.2f}s", r.stats.stage2_calls,
                            r.stats.stage1_calls, r.stats.failed_calls, dt)};
}

auto criterion6() -> Outcome
{
    auto const t0 = std::chrono::steady_clock::now();
    auto const& store = default_store();
    auto const bounds = store.bounds("edgegpu", "cifar10");
    std::vector<NormalizedPoint> truth;
    for (auto const& s : true_front(store, "edgegpu", "cifar10")) { truth.push_back(normalize(s.point, bounds)); }
    double const hv_true = oracle::hv_grid(to_oracle(truth), {1, 1});

    auto front_points = [&](RunReport const& r) {
        std::vector<NormalizedPoint> pts;
        for (auto const& a : r.front) { pts.push_back(normalize({r.reported_accuracy(a), a.latency}, bounds)); }
        return pts;
    };
    double ratio_sum = 0.0;
    double igd_sum = 0.0;
    int wins = 0;
    std::size_t budget_mismatch = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EngineConfig cfg;
        cfg.seed = seed;
        auto const part = run_search(cfg, store, Predictor::oracle());
        cfg.partitioned = false;
        auto const flat = run_search(cfg, store, Predictor::oracle());
        auto const pp = front_points(part);
        auto const fp = front_points(flat);
        double const hv_part = oracle::hv_grid(to_oracle(pp), {1, 1});
        double const hv_flat = oracle::hv_grid(to_oracle(fp), {1, 1});
        ratio_sum += hv_part / hv_true;
        igd_sum += oracle::igd(to_oracle(pp), to_oracle(truth));
        wins += hv_part > hv_flat;
        budget_mismatch += part.evaluations != flat.evaluations;
    }
    double const dt = seconds_since(t0);
    double const ratio = ratio_sum / 10.0;
    double const mean_igd = igd_sum / 10.0;
    bool const ok = ratio >= 0.90 && mean_igd <= 0.05 && wins >= 8 && budget_mismatch == 0 && dt < 60.0;
    return {ok, fmt::format("mean_hv_ratio={:.4f} (>=0.90) mean_igd={:.4f} (<=0.05) partitioned_wins={}/10 (>=8) "
                            "budget_mismatches={} time={:.2f}s",
                            ratio, mean_igd, wins, budget_mismatch, dt)};
}

auto criterion7() -> Outcome
{
    auto const& store = default_store();
    auto const fitted = fit(store, "cifar10", 1000, 0);
    auto const holdout = evaluate_predictor(fitted.predictor, store, "cifar10", 1);
    auto const oracle_rho = evaluate_predictor(Predictor::oracle(), store, "cifar10", 1).spearman_holdout;
    bool const ok = holdout.spearman_holdout >= 0.85 && oracle_rho == 1.0;
    return {ok, fmt::format("fitted_holdout_spearman={:.4f} (>=0.85) oracle_spearman={}", holdout.spearman_holdout,
                            oracle_rho)};
}

auto criterion8() -> Outcome
{
    auto const ctx = support::golden_context();
    bool const s1 = build_stage1_prompt(support::golden_results(), ctx.kb, ctx) == slurp(fixture("stage1_golden.txt"));
    bool const s2 = build_stage2_prompt(ctx) == slurp(fixture("stage2_golden.txt"));
    std::vector<std::string> const blocks{"[System role]", "[Context]", "[Instruction]", "[Output format]",
                                          "[Knowledge Base]", "[Evolution Operation]", "Updated_Knowledge_Base"};
    auto const both = slurp(fixture("stage1_golden.txt")) + slurp(fixture("stage2_golden.txt"));
    std::size_t missing = 0;
    for (auto const& b : blocks) { missing += both.find(b) == std::string::npos; }

    std::size_t responses = 0;
    std::size_t fenced = 0;
    std::size_t failures = 0;
    for (auto const& e : read_transcript(fixture("run1.jsonl"))) {
        if (e.prompt.find("You are a NAS analyst.") != std::string::npos) { continue; }
        ++responses;
        fenced += e.response.find("```") != std::string::npos;
        try {
            auto const p = parse_proposals(e.response);
            failures += p.proposals.empty();
        } catch (ParseError const&) {
            ++failures;
        }
    }
    bool const ok = s1 && s2 && missing == 0 && responses > 0 && fenced > 0 && failures == 0;
    return {ok, fmt::format("stage1_golden={} stage2_golden={} missing_blocks={} responses={} fenced={} parse_failures={}",
                            s1 ? "match" : "DIFF", s2 ? "match" : "DIFF", missing, responses, fenced, failures)};
}

auto criterion9() -> Outcome
{
    auto const dir = fs::temp_directory_path() / "pelnas_acceptance_c9";
    fs::create_directories(dir);
    auto const& store = default_store();
    auto const d = store.device_index("raspi4");
    {
        std::ofstream f(dir / "hw_export.csv", std::ios::binary);
        f << "arch_str,cifar10_test_acc,raspi4_latency_ms\n";
        for (auto const& r : store.records()) {
            f << r.arch << ',' << text::format_double(r.accuracy) << ',' << text::format_double(r.latency[d]) << '\n';
        }
        std::ofstream(dir / "mapping.toml") << "dataset_value = \"cifar10\"\n[columns]\narch = \"arch_str\"\n"
                                               "accuracy = \"cifar10_test_acc\"\nlat_raspi4 = \"raspi4_latency_ms\"\n";
    }
    EngineConfig cfg;
    cfg.device = "raspi4";
    cfg.seed = 3;
    auto const r = run_search(cfg, store, Predictor::oracle());
    {
        std::ofstream f(dir / "found.csv", std::ios::binary);
        write_front_csv(f, front_rows(r));
    }
    std::vector<std::string> args{"pelnas", "metrics", "--front", (dir / "found.csv").string(), "--truth-store",
                                  (dir / "hw_export.csv").string(), "--mapping", (dir / "mapping.toml").string(),
                                  "--device", "raspi4"};
    std::vector<char const*> argv;
    for (auto const& a : args) { argv.push_back(a.c_str()); }
    std::ostringstream out;
    std::ostringstream err;
    int const code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) { return {false, fmt::format("metrics exited {}: {}", code, err.str())}; }
    std::istringstream in(out.str());
    auto const kv = read_kv(in);

    std::vector<oracle::P> all;
    std::vector<ObjectivePoint> raw;
    for (auto const& rec : store.records()) {
        all.push_back({-rec.accuracy, rec.latency[d]});
        raw.push_back({rec.accuracy, rec.latency[d]});
    }
    NormalizationBounds b{1e300, -1e300, 1e300, -1e300};
    for (auto const& p : raw) {
        b.acc_min = std::min(b.acc_min, p.accuracy);
        b.acc_max = std::max(b.acc_max, p.accuracy);
        b.lat_min = std::min(b.lat_min, p.latency);
        b.lat_max = std::max(b.lat_max, p.latency);
    }
    auto norm = [&](ObjectivePoint p) {
        return oracle::P{(b.acc_max - p.accuracy) / (b.acc_max - b.acc_min), (p.latency - b.lat_min) / (b.lat_max - b.lat_min)};
    };
    std::vector<oracle::P> truth;
    for (auto i : oracle::pairwise_front(all)) { truth.push_back(norm(raw[i])); }
    std::vector<oracle::P> found;
    for (auto const& a : r.front) { found.push_back(norm({r.reported_accuracy(a), a.latency})); }
    double const hv_ref = oracle::hv_grid(found, {1, 1});
    double const igd_ref = oracle::igd(found, truth);
    double const hv = std::stod(kv.at("hv"));
    double const ig = std::stod(kv.at("igd"));
    bool const ok = std::abs(hv - hv_ref) <= 1e-9 && std::abs(ig - igd_ref) <= 1e-12
                    && std::stoul(kv.at("n_truth")) == truth.size();
    return {ok, fmt::format("foreign-mapped export: hv={:.6f} (oracle {:.6f}) igd={:.6f} (oracle {:.6f}) n_truth={}", hv,
                            hv_ref, ig, igd_ref, kv.at("n_truth"))};
}

} // namespace

int main()
{
    std::vector<std::pair<std::string, std::function<Outcome()>>> const criteria{
        {"space and partition exactness", criterion1},
        {"metric oracle equivalence", criterion2},
        {"archive invariant suite", criterion3},
        {"determinism", criterion4},
        {"budget fidelity", criterion5},
        {"search quality at desk scale", criterion6},
        {"predictor fidelity", criterion7},
        {"prompt/protocol fidelity", criterion8},
        {"reproduction mode", criterion9},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (std::exception const& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failed += !o.pass;
        std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
