#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "golden_context.hpp"
#include "stub_architect.hpp"

using namespace pelnas;

namespace {

auto temp_file(std::string const& name) -> std::filesystem::path
{
    auto dir = std::filesystem::temp_directory_path() / "pelnas_service_test";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

auto live_config(std::string endpoint) -> TextServiceConfig
{
    TextServiceConfig c;
    c.endpoint = std::move(endpoint);
    c.model = "stub";
    c.token_env = "PELNAS_TEST_TOKEN";
    c.retry_backoff_ms = 0;
    c.timeout_s = 5;
    return c;
}

/// Counts calls and answers from a fixed function.
class FakeService final : public TextService {
public:
    explicit FakeService(std::function<ServiceReply(std::string const&)> f) : f_(std::move(f)) {}
    auto complete(std::string const& prompt) -> ServiceReply override
    {
        ++calls;
        return f_(prompt);
    }
    int calls = 0;

private:
    std::function<ServiceReply(std::string const&)> f_;
};

} // namespace

TEST(TextService, LiveCallParsesCompletionAndSendsBearer)
{
    support::StubServer server;
    ::setenv("PELNAS_TEST_TOKEN", "sk-test-123", 1);
    ChatClient client(live_config(server.endpoint()));
    auto const ctx = support::golden_context();
    auto const out = llm_generate(ctx, client);
    EXPECT_FALSE(out.error) << *out.error;
    EXPECT_FALSE(out.proposals.empty());
    EXPECT_EQ(server.last_auth(), "Bearer sk-test-123");
    EXPECT_EQ(client.successes(), 1U);
    ::unsetenv("PELNAS_TEST_TOKEN");
}

TEST(TextService, RetriesAfterServerErrors)
{
    support::StubServer server(2);
    ChatClient client(live_config(server.endpoint()));
    auto const reply = client.complete(build_stage2_prompt(support::golden_context()));
    ASSERT_TRUE(reply.text);
    EXPECT_EQ(reply.attempts, 3);
    EXPECT_EQ(server.requests(), 3);
}

TEST(TextService, ServiceDownYieldsEmptyListAndError)
{
    support::StubServer server(100);
    auto cfg = live_config(server.endpoint());
    cfg.max_retries = 2;
    ChatClient client(cfg);
    GenerateResult out;
    EXPECT_NO_THROW(out = llm_generate(support::golden_context(), client));
    EXPECT_TRUE(out.proposals.empty());
    ASSERT_TRUE(out.error);
    EXPECT_NE(out.error->find("HTTP 500"), std::string::npos);
    EXPECT_EQ(server.requests(), 3);

    auto refused = live_config("http://127.0.0.1:1/v1/chat/completions");
    refused.max_retries = 0;
    refused.timeout_s = 1;
    ChatClient down(refused);
    auto const r = llm_generate(support::golden_context(), down);
    EXPECT_TRUE(r.proposals.empty());
    EXPECT_TRUE(r.error);
}

TEST(TextService, RecordThenReplayIsHermeticAndIdentical)
{
    auto const path = temp_file("rec.jsonl");
    std::vector<std::string> prompts;
    auto ctx = support::golden_context();
    for (std::size_t g = 0; g < 4; ++g) {
        ctx.generation = g;
        prompts.push_back(build_stage2_prompt(ctx));
    }
    std::vector<GenerateResult> recorded;
    {
        support::StubServer server;
        auto cfg = live_config(server.endpoint());
        cfg.mode = TranscriptMode::record;
        cfg.transcript = path;
        ChatClient client(cfg);
        for (std::size_t g = 0; g < 4; ++g) {
            ctx.generation = g;
            recorded.push_back(llm_generate(ctx, client));
        }
        EXPECT_EQ(read_transcript(path).size(), 4U);
    }
    for (int pass = 0; pass < 2; ++pass) {
        TextServiceConfig cfg;
        cfg.endpoint = "http://127.0.0.1:1/unreachable";
        cfg.mode = TranscriptMode::replay;
        cfg.transcript = path;
        ChatClient client(cfg);
        for (std::size_t g = 0; g < 4; ++g) {
            ctx.generation = g;
            auto const r = llm_generate(ctx, client);
            EXPECT_FALSE(r.error);
            EXPECT_EQ(r.proposals, recorded[g].proposals);
        }
        ctx.generation = 99;
        auto const miss = llm_generate(ctx, client);
        ASSERT_TRUE(miss.error);
        EXPECT_NE(miss.error->find("no response"), std::string::npos);
    }
}

TEST(TextService, ReplayOfCheckedInTranscriptIsDeterministic)
{
    auto const path = std::filesystem::path(PELNAS_FIXTURE_DIR) / "run1.jsonl";
    auto const entries = read_transcript(path);
    TextServiceConfig cfg;
    cfg.mode = TranscriptMode::replay;
    cfg.transcript = path;
    ChatClient a(cfg);
    ChatClient b(cfg);
    for (std::size_t i = 0; i < 10; ++i) {
        auto const ra = a.complete(entries[i].prompt);
        auto const rb = b.complete(entries[i].prompt);
        ASSERT_TRUE(ra.text);
        EXPECT_EQ(ra.text, rb.text);
        EXPECT_EQ(request_hash(entries[i].prompt), entries[i].request_hash);
    }
}

TEST(TextService, ConfigValidation)
{
    TextServiceConfig c;
    c.mode = TranscriptMode::replay;
    EXPECT_THROW(c.validate(), ConfigError);
    c.transcript = "/nonexistent/transcript.jsonl";
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.max_retries = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW((void)parse_transcript_mode("rewind"), ConfigError);
    EXPECT_EQ(request_hash("abc").size(), 16U);
}

TEST(TextService, Stage1UpdateThroughService)
{
    FakeService ok([](std::string const& p) {
        return ServiceReply{support::stub_stage1_reply(p), "", 1};
    });
    auto const ctx = support::golden_context();
    auto const up = llm_update_knowledge(support::golden_results(), ctx, ok);
    EXPECT_FALSE(up.warning);
    EXPECT_GE(up.kb.size(), 2U);
    EXPECT_EQ(ok.calls, 1);

    FakeService broken([](std::string const&) { return ServiceReply{std::nullopt, "boom", 4}; });
    auto const kept = llm_update_knowledge(support::golden_results(), ctx, broken);
    ASSERT_TRUE(kept.warning);
    EXPECT_EQ(*kept.warning, "boom");
    EXPECT_EQ(kept.kb, ctx.kb);
}
