// Regenerates the frozen fixtures under tests/fixtures:
//   stage1_golden.txt, stage2_golden.txt   prompt builder output
//   run1.jsonl                             transcript recorded against the stub service
//   run1_front.csv                         front produced by that recorded run
// Usage: make_fixtures <fixture-dir>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "golden_context.hpp"
#include "stub_architect.hpp"

int main(int argc, char** argv)
{
    using namespace pelnas;
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <fixture-dir>\n", argv[0]);
        return 2;
    }
    std::filesystem::path const dir = argv[1];
    std::filesystem::create_directories(dir);

    auto const ctx = support::golden_context();
    std::ofstream(dir / "stage1_golden.txt", std::ios::binary) << build_stage1_prompt(support::golden_results(), ctx.kb, ctx);
    std::ofstream(dir / "stage2_golden.txt", std::ios::binary) << build_stage2_prompt(ctx);

    support::StubServer server;
    TextServiceConfig svc;
    svc.endpoint = server.endpoint();
    svc.model = "stub-architect";
    svc.retry_backoff_ms = 0;
    svc.mode = TranscriptMode::record;
    svc.transcript = dir / "run1.jsonl";
    std::filesystem::remove(svc.transcript);
    ChatClient client(svc);

    auto const store = synthesize(SyntheticModel::from_seed(0));
    auto const predictor = Predictor::oracle();
    EngineConfig cfg;
    cfg.op = OperatorKind::llm;
    cfg.seed = 0;
    cfg.workers = 1;
    auto const report = run_search(cfg, store, predictor, &client);
    std::ofstream front(dir / "run1_front.csv", std::ios::binary);
    write_front_csv(front, front_rows(report));
    std::printf("stage1 %zu stage2 %zu failed %zu fallbacks %zu requests %d front %zu\n", report.stats.stage1_calls,
                report.stats.stage2_calls, report.stats.failed_calls, report.stats.fallbacks, server.requests(),
                report.front.size());
    return 0;
}
