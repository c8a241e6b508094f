#include <cstdio>

#include "pelnas/pelnas.hpp"

// Synthesize a benchmark, search it with the baseline operator and compare
// the result against the brute-force front.
int main()
{
    using namespace pelnas;
    auto const store = synthesize(SyntheticModel::from_seed(0));
    auto const predictor = Predictor::oracle();

    EngineConfig cfg;
    cfg.seed = 7;
    auto const report = run_search(cfg, store, predictor);

    std::vector<ObjectivePoint> found;
    for (auto const& a : report.front) { found.push_back({report.reported_accuracy(a), a.latency}); }
    std::vector<ObjectivePoint> truth;
    for (auto const& s : true_front(store, cfg.device, cfg.dataset)) { truth.push_back(s.point); }
    auto const m = evaluate_front(found, truth, report.bounds);

    std::printf("%zu evaluations, %zu front points\n", report.evaluations, report.front.size());
    std::printf("HV %.4f (true front %.4f), IGD %.4f\n", m.hv, m.hv_truth, m.igd);
    for (auto const& a : report.front) {
        std::printf("  niche %zu  %s  acc %.2f  lat %.2f ms\n", a.niche, a.arch.c_str(), report.reported_accuracy(a), a.latency);
    }
}
