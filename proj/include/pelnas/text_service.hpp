#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "pelnas/coevolve_operator.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/rng.hpp"

namespace pelnas {

enum class TranscriptMode { live, record, replay };

constexpr auto to_string(TranscriptMode m) noexcept -> std::string_view
{
    switch (m) {
    case TranscriptMode::live: return "live";
    case TranscriptMode::record: return "record";
    case TranscriptMode::replay: return "replay";
    }
    return "?";
}

inline auto parse_transcript_mode(std::string_view s) -> TranscriptMode
{
    if (s == "live") { return TranscriptMode::live; }
    if (s == "record") { return TranscriptMode::record; }
    if (s == "replay") { return TranscriptMode::replay; }
    throw ConfigError(fmt::format("unknown transcript mode '{}' (expected live, record or replay)", s));
}

struct TextServiceConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4.1";
    std::string token_env = "OPENAI_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 3;
    int retry_backoff_ms = 500;
    double temperature = 0.7;
    std::string response_path = "/choices/0/message/content";
    TranscriptMode mode = TranscriptMode::live;
    std::filesystem::path transcript;

    void validate() const
    {
        if (max_retries < 0) { throw ConfigError("max_retries must be >= 0"); }
        if (timeout_s <= 0.0) { throw ConfigError("timeout must be positive"); }
        if (mode != TranscriptMode::live && transcript.empty()) {
            throw ConfigError(fmt::format("{} mode needs a transcript path", to_string(mode)));
        }
        if (mode == TranscriptMode::replay && !std::filesystem::exists(transcript)) {
            throw ConfigError(fmt::format("transcript '{}' does not exist", transcript.string()));
        }
    }
};

struct ServiceReply {
    std::optional<std::string> text;
    std::string error;
    int attempts = 0;
};

/// Anything that turns a prompt into a completion. Implementations must be
/// safe to call from several threads at once.
class TextService {
public:
    virtual ~TextService() = default;
    virtual auto complete(std::string const& prompt) -> ServiceReply = 0;
};

inline auto request_hash(std::string_view prompt) -> std::string { return fmt::format("{:016x}", fnv1a64(prompt)); }

struct TranscriptEntry {
    std::string request_hash;
    std::string prompt;
    std::string response;
    std::string timestamp;
};

inline auto read_transcript(std::filesystem::path const& path) -> std::vector<TranscriptEntry>
{
    std::ifstream in(path);
    if (!in) { throw DataError(fmt::format("cannot open transcript '{}'", path.string())); }
    std::vector<TranscriptEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) { continue; }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("prompt") || !j.contains("response")) {
            throw ParseError(fmt::format("{}: line {}: malformed transcript entry", path.string(), line_no));
        }
        TranscriptEntry e;
        e.prompt = j.at("prompt").get<std::string>();
        e.response = j.at("response").get<std::string>();
        e.request_hash = j.value("request_hash", request_hash(e.prompt));
        e.timestamp = j.value("timestamp", "");
        out.push_back(std::move(e));
    }
    return out;
}

namespace detail {

inline auto utc_timestamp() -> std::string
{
    auto const now = std::chrono::system_clock::now();
    auto const t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                       tm.tm_min, tm.tm_sec);
}

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

inline auto split_url(std::string const& url) -> SplitUrl
{
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos) { throw ConfigError(fmt::format("endpoint '{}' lacks a scheme", url)); }
    auto const path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) { return {url, "/"}; }
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace detail

/// Chat-completion client with transcript record/replay.
class ChatClient final : public TextService {
public:
    explicit ChatClient(TextServiceConfig cfg) : cfg_(std::move(cfg))
    {
        cfg_.validate();
        if (cfg_.mode == TranscriptMode::replay) {
            for (auto& e : read_transcript(cfg_.transcript)) { replay_[e.request_hash].push_back(std::move(e.response)); }
        } else {
            url_ = detail::split_url(cfg_.endpoint);
        }
    }

    auto complete(std::string const& prompt) -> ServiceReply override
    {
        if (cfg_.mode == TranscriptMode::replay) { return replay(prompt); }
        ServiceReply reply;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0 && cfg_.retry_backoff_ms > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry_backoff_ms * attempt));
            }
            ++reply.attempts;
            auto r = post(prompt);
            if (r) {
                reply.text = std::move(r);
                reply.error.clear();
                if (cfg_.mode == TranscriptMode::record) { append(prompt, *reply.text); }
                std::lock_guard lock(mu_);
                ++successes_;
                return reply;
            }
            reply.error = last_error();
        }
        return reply;
    }

    [[nodiscard]] auto config() const noexcept -> TextServiceConfig const& { return cfg_; }

    /// Successful live or record calls so far.
    [[nodiscard]] auto successes() const -> std::size_t
    {
        std::lock_guard lock(mu_);
        return successes_;
    }

private:
    auto replay(std::string const& prompt) -> ServiceReply
    {
        ServiceReply reply;
        reply.attempts = 1;
        auto const h = request_hash(prompt);
        std::lock_guard lock(mu_);
        auto it = replay_.find(h);
        if (it == replay_.end() || it->second.empty()) {
            reply.error = fmt::format("transcript has no response for request {}", h);
            return reply;
        }
        reply.text = std::move(it->second.front());
        it->second.pop_front();
        return reply;
    }

    auto post(std::string const& prompt) -> std::optional<std::string>
    {
        httplib::Client cli(url_.origin);
        auto const secs = static_cast<time_t>(cfg_.timeout_s);
        auto const usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!cfg_.token_env.empty()) {
            if (char const* token = std::getenv(cfg_.token_env.c_str()); token != nullptr && *token != '\0') {
                headers.emplace("Authorization", std::string("Bearer ") + token);
            }
        }
        nlohmann::json body{{"model", cfg_.model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                            {"temperature", cfg_.temperature}};
        auto res = cli.Post(url_.path, headers, body.dump(), "application/json");
        if (!res) { return fail(fmt::format("connection to {} failed: {}", url_.origin, httplib::to_string(res.error()))); }
        if (res->status != 200) { return fail(fmt::format("HTTP {} from {}", res->status, cfg_.endpoint)); }
        auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) { return fail("response body is not JSON"); }
        nlohmann::json::json_pointer ptr(cfg_.response_path);
        if (!j.contains(ptr) || !j.at(ptr).is_string()) {
            return fail(fmt::format("response has no string at {}", cfg_.response_path));
        }
        return j.at(ptr).get<std::string>();
    }

    auto fail(std::string msg) -> std::optional<std::string>
    {
        std::lock_guard lock(mu_);
        errors_[std::this_thread::get_id()] = std::move(msg);
        return std::nullopt;
    }

    auto last_error() -> std::string
    {
        std::lock_guard lock(mu_);
        return errors_[std::this_thread::get_id()];
    }

    void append(std::string const& prompt, std::string const& response)
    {
        nlohmann::json j{{"request_hash", request_hash(prompt)},
                         {"prompt", prompt},
                         {"response", response},
                         {"timestamp", detail::utc_timestamp()}};
        std::lock_guard lock(mu_);
        std::ofstream out(cfg_.transcript, std::ios::app);
        if (!out) { throw DataError(fmt::format("cannot append to transcript '{}'", cfg_.transcript.string())); }
        out << j.dump() << '\n';
    }

    TextServiceConfig cfg_;
    detail::SplitUrl url_;
    mutable std::mutex mu_;
    std::map<std::string, std::deque<std::string>> replay_;
    std::map<std::thread::id, std::string> errors_;
    std::size_t successes_ = 0;
};

// ---------------------------------------------------------------------------
// Operator calls
// ---------------------------------------------------------------------------

struct GenerateResult {
    std::vector<CandidateProposal> proposals;
    std::vector<std::string> diagnostics;
    std::optional<std::string> error;
};

/// Stage 2: prompt, call, parse. Never throws on service or parse failure.
inline auto llm_generate(GenerationContext const& ctx, TextService& service) -> GenerateResult
{
    GenerateResult out;
    auto reply = service.complete(build_stage2_prompt(ctx));
    if (!reply.text) {
        out.error = reply.error.empty() ? std::string("service call failed") : reply.error;
        return out;
    }
    try {
        auto parsed = parse_proposals(*reply.text);
        out.proposals = std::move(parsed.proposals);
        out.diagnostics = std::move(parsed.diagnostics);
    } catch (ParseError const& e) {
        out.error = e.what();
    }
    return out;
}

/// Stage 1: returns the revised knowledge base, or the old one with a warning.
inline auto llm_update_knowledge(std::vector<PromptArch> const& results, GenerationContext const& ctx,
                                 TextService& service) -> KnowledgeUpdate
{
    auto reply = service.complete(build_stage1_prompt(results, ctx.kb, ctx));
    if (!reply.text) { return {ctx.kb, reply.error.empty() ? std::string("service call failed") : reply.error}; }
    return update_knowledge_base(ctx.kb, *reply.text, ctx.generation);
}

} // namespace pelnas
