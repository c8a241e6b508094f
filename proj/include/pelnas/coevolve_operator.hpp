#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "pelnas/arch_space.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/rng.hpp"

namespace pelnas {

// ---------------------------------------------------------------------------
// Knowledge base
// ---------------------------------------------------------------------------

struct KnowledgeRule {
    std::string text;
    std::size_t generation_added = 0;

    friend auto operator==(KnowledgeRule const&, KnowledgeRule const&) -> bool = default;
};

/// Ordered design rules; when full, the oldest rule is evicted first.
class KnowledgeBase {
public:
    static constexpr std::size_t kDefaultCapacity = 20;

    explicit KnowledgeBase(std::size_t capacity = kDefaultCapacity) : capacity_(capacity)
    {
        if (capacity_ == 0) { throw ConfigError("knowledge base capacity must be positive"); }
    }

    void add(std::string text, std::size_t generation)
    {
        if (text.empty()) { return; }
        rules_.push_back({std::move(text), generation});
        if (rules_.size() > capacity_) { rules_.erase(rules_.begin()); }
    }

    /// Replaces every rule (the revised list may drop old rules).
    void replace(std::vector<std::string> const& texts, std::size_t generation)
    {
        rules_.clear();
        for (auto const& t : texts) { add(t, generation); }
    }

    [[nodiscard]] auto rules() const noexcept -> std::vector<KnowledgeRule> const& { return rules_; }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return rules_.size(); }
    [[nodiscard]] auto empty() const noexcept -> bool { return rules_.empty(); }
    [[nodiscard]] auto capacity() const noexcept -> std::size_t { return capacity_; }

    friend auto operator==(KnowledgeBase const&, KnowledgeBase const&) -> bool = default;

private:
    std::size_t capacity_;
    std::vector<KnowledgeRule> rules_;
};

// ---------------------------------------------------------------------------
// Baseline operators
// ---------------------------------------------------------------------------

/// Operators a niche may use freely, i.e. whose count is not pinned to zero.
inline auto allowed_ops(NichePredicate const& pred) -> std::vector<OpKind>
{
    std::vector<OpKind> ops;
    for (auto op : kAllOps) {
        if (op == OpKind::nor_conv_3x3 && pred.conv3x3.kind == CountBound::Kind::exact && pred.conv3x3.value == 0) {
            continue;
        }
        if (op == OpKind::nor_conv_1x1 && pred.conv1x1.kind == CountBound::Kind::exact && pred.conv1x1.value == 0) {
            continue;
        }
        ops.push_back(op);
    }
    return ops;
}

/// Moves `cell` into the niche by editing conv edges only. Edges flagged in
/// `fixed` are touched last. Terminates after at most six edits for any
/// satisfiable predicate.
inline auto repair(ArchCell cell, NichePredicate const& pred, Rng& rng, std::array<bool, kEdgeCount> fixed = {})
    -> ArchCell
{
    constexpr int kEdges = static_cast<int>(kEdgeCount);
    auto pick = [&](auto&& eligible) -> std::optional<std::size_t> {
        std::vector<std::size_t> free_edges;
        std::vector<std::size_t> fixed_edges;
        for (std::size_t e = 0; e < kEdgeCount; ++e) {
            if (eligible(e)) { (fixed[e] ? fixed_edges : free_edges).push_back(e); }
        }
        auto const& pool = free_edges.empty() ? fixed_edges : free_edges;
        if (pool.empty()) { return std::nullopt; }
        return pool[uniform_index(rng, pool.size())];
    };
    constexpr std::array<OpKind, 3> plain{OpKind::none, OpKind::skip_connect, OpKind::avg_pool_3x3};

    auto p = complexity(cell);
    int const min1 = pred.conv1x1.lower();
    int const max3 = pred.conv3x3.kind == CountBound::Kind::exact ? pred.conv3x3.value : kEdges - min1;
    int const min3 = pred.conv3x3.lower();

    while (p.n_conv3x3 > max3) {
        auto e = pick([&](std::size_t i) { return cell.edges[i] == OpKind::nor_conv_3x3; });
        if (!e) { break; }
        std::vector<OpKind> targets(plain.begin(), plain.end());
        if (pred.conv1x1.accepts(p.n_conv1x1 + 1) && pred.conv1x1.kind != CountBound::Kind::exact) {
            targets.push_back(OpKind::nor_conv_1x1);
        }
        cell.edges[*e] = targets[uniform_index(rng, targets.size())];
        p = complexity(cell);
    }
    while (p.n_conv3x3 < min3) {
        auto e = pick([&](std::size_t i) {
            auto const op = cell.edges[i];
            return op != OpKind::nor_conv_3x3 && (op != OpKind::nor_conv_1x1 || p.n_conv1x1 - 1 >= min1);
        });
        if (!e) { e = pick([&](std::size_t i) { return cell.edges[i] != OpKind::nor_conv_3x3; }); }
        if (!e) { break; }
        cell.edges[*e] = OpKind::nor_conv_3x3;
        p = complexity(cell);
    }
    int const max1 = pred.conv1x1.upper(kEdges - p.n_conv3x3);
    while (p.n_conv1x1 > max1) {
        auto e = pick([&](std::size_t i) { return cell.edges[i] == OpKind::nor_conv_1x1; });
        if (!e) { break; }
        cell.edges[*e] = plain[uniform_index(rng, plain.size())];
        p = complexity(cell);
    }
    while (p.n_conv1x1 < min1) {
        auto e = pick([&](std::size_t i) { return cell.edges[i] == OpKind::none; });
        if (!e) {
            e = pick([&](std::size_t i) {
                return cell.edges[i] == OpKind::skip_connect || cell.edges[i] == OpKind::avg_pool_3x3;
            });
        }
        if (!e) { break; }
        cell.edges[*e] = OpKind::nor_conv_1x1;
        p = complexity(cell);
    }
    return cell;
}

inline constexpr int kMaxMutationAttempts = 64;

/// Changes one edge to a different allowed op, then repairs into the niche.
/// The child always differs from the parent unless the niche has one member.
inline auto baseline_mutate(ArchCell const& parent, NichePredicate const& pred, Rng& rng) -> ArchCell
{
    auto const ops = allowed_ops(pred);
    for (int attempt = 0; attempt < kMaxMutationAttempts; ++attempt) {
        auto const e = uniform_index(rng, kEdgeCount);
        std::vector<OpKind> choices;
        for (auto op : ops) {
            if (op != parent.edges[e]) { choices.push_back(op); }
        }
        if (choices.empty()) { continue; }
        ArchCell child = parent;
        child.edges[e] = choices[uniform_index(rng, choices.size())];
        std::array<bool, kEdgeCount> fixed{};
        fixed[e] = true;
        child = repair(child, pred, rng, fixed);
        if (child != parent && pred.accepts(child)) { return child; }
    }
    // Exhaustive fallback: first distinct member reachable by one edit plus repair.
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        for (auto op : ops) {
            ArchCell child = parent;
            child.edges[e] = op;
            std::array<bool, kEdgeCount> fixed{};
            fixed[e] = true;
            child = repair(child, pred, rng, fixed);
            if (child != parent && pred.accepts(child)) { return child; }
        }
    }
    return parent;
}

/// Uniform per-edge crossover followed by repair.
inline auto baseline_crossover(ArchCell const& p1, ArchCell const& p2, NichePredicate const& pred, Rng& rng) -> ArchCell
{
    ArchCell child;
    for (std::size_t e = 0; e < kEdgeCount; ++e) { child.edges[e] = bernoulli(rng, 0.5) ? p1.edges[e] : p2.edges[e]; }
    return repair(child, pred, rng);
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

enum class Operation { crossover, mutation };

constexpr auto to_string(Operation op) noexcept -> std::string_view
{
    return op == Operation::crossover ? "crossover" : "mutation";
}

/// An architecture as shown to the model: code, scores and the rationale
/// that produced it.
struct PromptArch {
    std::string arch;
    double accuracy = 0.0;
    double latency = 0.0;
    std::string rationale;
    std::optional<bool> accepted; // set for evaluated children only
};

struct GenerationContext {
    std::string device;
    std::string dataset;
    NichePredicate niche;
    std::size_t niche_id = 0;
    std::vector<PromptArch> parents;
    KnowledgeBase kb;
    std::size_t n_children = 1;
    double latency_limit = 0.0;
    double crossover_probability = 0.5;
    std::size_t generation = 0;
};

/// Constraint lines for a niche, e.g. "MUST use exactly 2 × nor_conv_3x3".
inline auto describe_constraints(NichePredicate const& pred, double latency_limit) -> std::vector<std::string>
{
    std::vector<std::string> lines;
    switch (pred.conv3x3.kind) {
    case CountBound::Kind::exact: lines.push_back(fmt::format("MUST use exactly {} × nor_conv_3x3", pred.conv3x3.value)); break;
    case CountBound::Kind::min: lines.push_back(fmt::format("MUST use at least {} × nor_conv_3x3", pred.conv3x3.value)); break;
    case CountBound::Kind::any: lines.emplace_back("CAN use any number of nor_conv_3x3"); break;
    }
    switch (pred.conv1x1.kind) {
    case CountBound::Kind::exact: lines.push_back(fmt::format("MUST use exactly {} × nor_conv_1x1", pred.conv1x1.value)); break;
    case CountBound::Kind::min: lines.push_back(fmt::format("MUST use at least {} × nor_conv_1x1", pred.conv1x1.value)); break;
    case CountBound::Kind::any:
        lines.push_back(fmt::format("CAN use 0–{} × nor_conv_1x1", static_cast<int>(kEdgeCount) - pred.conv3x3.lower()));
        break;
    }
    lines.emplace_back("ALLOWED operators: none, skip_connect, avg_pool_3x3");
    lines.push_back(fmt::format("Hardware latency must remain below {:.2f} ms", latency_limit));
    return lines;
}

namespace detail {

inline void append_constraints(std::string& out, GenerationContext const& ctx)
{
    for (auto const& line : describe_constraints(ctx.niche, ctx.latency_limit)) { out += fmt::format("  - {}\n", line); }
}

inline void append_archs(std::string& out, std::vector<PromptArch> const& archs)
{
    if (archs.empty()) {
        out += "  (none)\n";
        return;
    }
    for (std::size_t i = 0; i < archs.size(); ++i) {
        auto const& a = archs[i];
        out += fmt::format("  {}. {} accuracy={:.2f}% latency={:.3f} ms", i + 1, a.arch, a.accuracy, a.latency);
        if (a.accepted) { out += *a.accepted ? " [kept in Pareto archive]" : " [not kept]"; }
        out += '\n';
        if (!a.rationale.empty()) { out += fmt::format("     rationale: {}\n", a.rationale); }
    }
}

inline void append_rules(std::string& out, KnowledgeBase const& kb)
{
    if (kb.empty()) {
        out += "(empty)\n";
        return;
    }
    for (std::size_t i = 0; i < kb.rules().size(); ++i) { out += fmt::format("{}. {}\n", i + 1, kb.rules()[i].text); }
}

inline constexpr std::string_view kCodeFormat =
    "|op~0|+|op~0|op~1|+|op~0|op~1|op~2| with op in {none, skip_connect, nor_conv_1x1, nor_conv_3x3, avg_pool_3x3}";

} // namespace detail

/// Knowledge-base update prompt. `results` are the children evaluated in the
/// last generation; `ctx.parents` is the niche's current Pareto archive.
inline auto build_stage1_prompt(std::vector<PromptArch> const& results, KnowledgeBase const& kb,
                                GenerationContext const& ctx) -> std::string
{
    std::string out;
    out += "[System role]\n"
           "You are a NAS analyst. Summarize design heuristics\n"
           "for the given hardware-aware search space.\n"
           "\n"
           "[Context]\n";
    out += fmt::format("- Target device and dataset: {}, {}\n", ctx.device, ctx.dataset);
    out += "- Niche definition:\n";
    detail::append_constraints(out, ctx);
    out += fmt::format("- Top Pareto parents from generation {}:\n", ctx.generation);
    detail::append_archs(out, ctx.parents);
    out += fmt::format("- Children evaluated in generation {}:\n", ctx.generation);
    detail::append_archs(out, results);
    out += "- Current knowledge base:\n";
    {
        std::string rules;
        detail::append_rules(rules, kb);
        std::size_t pos = 0;
        while (pos < rules.size()) {
            auto const nl = rules.find('\n', pos);
            out += "  " + rules.substr(pos, nl - pos) + "\n";
            pos = nl + 1;
        }
    }
    out += "\n"
           "[Instruction]\n"
           "1. Identify operator or connection patterns that\n"
           "   consistently improve accuracy at acceptable latency.\n"
           "2. Identify patterns that consistently hurt either metric.\n"
           "3. Write explicit, concise rules of the form\n"
           "   \"Use/avoid ... because ...\".\n"
           "4. Remove or revise outdated rules that conflict with new evidence.\n"
           "\n"
           "[Output format]\n"
           "Return a JSON-like list called Updated_Knowledge_Base:\n"
           "[\n"
           "  {rule_1},\n"
           "  {rule_2},\n"
           "  ...\n"
           "]\n";
    return out;
}

/// Architecture generation prompt.
inline auto build_stage2_prompt(GenerationContext const& ctx) -> std::string
{
    std::string out;
    out += "[System role]\n"
           "You are an expert NAS designer that performs evolutionary\n"
           "search inside a given niche under hardware constraints.\n"
           "\n"
           "[Context]\n";
    out += fmt::format("- Target device and dataset: {}, {}\n", ctx.device, ctx.dataset);
    out += "- Niche constraints:\n";
    detail::append_constraints(out, ctx);
    out += fmt::format("- Architecture code format: {}\n", detail::kCodeFormat);
    out += fmt::format("- Suggested crossover probability: {:.2f}\n", ctx.crossover_probability);
    out += "- Current Pareto parents with metrics:\n";
    detail::append_archs(out, ctx.parents);
    out += "\n[Knowledge Base]\n";
    detail::append_rules(out, ctx.kb);
    out += "\n[Evolution Operation]\n";
    out += fmt::format("Perform {} new candidate generations.\n", ctx.n_children);
    out += "For each child:\n"
           "  * Decide Crossover or Mutation.\n"
           "  * Describe exactly which blocks/edges you combine or modify.\n"
           "  * Justify each change with expected effect on\n";
    out += fmt::format("    accuracy and latency (≤ {:.2f} ms).\n", ctx.latency_limit);
    out += "  * Ensure all constraints are satisfied.\n"
           "\n"
           "[Output format]\n"
           "Return a list of JSON objects:\n"
           "[\n"
           "  {\n"
           "    \"child_id\": \"...\",\n"
           "    \"operation\": \"crossover/mutation\",\n"
           "    \"architecture_code\": \"...\",\n"
           "    \"rationale\": \"...\"\n"
           "  },\n"
           "  ...\n"
           "]\n";
    return out;
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

/// First balanced [...] span in `text` (starting at or after `from`) that
/// parses as a JSON array. Tolerates prose and code fences around it.
inline auto extract_json_array(std::string_view text, std::size_t from = 0) -> std::optional<nlohmann::json>
{
    for (auto start = text.find('[', from); start != std::string_view::npos; start = text.find('[', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char const c = text[i];
            if (in_string) {
                if (escaped) { escaped = false; }
                else if (c == '\\') { escaped = true; }
                else if (c == '"') { in_string = false; }
                continue;
            }
            if (c == '"') { in_string = true; }
            else if (c == '[' || c == '{') { ++depth; }
            else if (c == ']' || c == '}') {
                if (--depth == 0) {
                    auto parsed = nlohmann::json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_array()) { return parsed; }
                    break;
                }
                if (depth < 0) { break; }
            }
        }
    }
    return std::nullopt;
}

struct CandidateProposal {
    std::string child_id;
    Operation operation = Operation::mutation;
    std::string architecture_code; // canonical
    std::string rationale;

    friend auto operator==(CandidateProposal const&, CandidateProposal const&) -> bool = default;
};

struct ProposalParse {
    std::vector<CandidateProposal> proposals;
    std::vector<std::string> diagnostics;
};

/// Throws ParseError when the response holds no JSON array at all.
inline auto parse_proposals(std::string_view response) -> ProposalParse
{
    auto arr = extract_json_array(response);
    if (!arr) { throw ParseError("response contains no JSON array of proposals"); }
    ProposalParse out;
    std::size_t index = 0;
    for (auto const& el : *arr) {
        ++index;
        if (!el.is_object()) {
            out.diagnostics.push_back(fmt::format("element {}: not a JSON object", index));
            continue;
        }
        auto const code = el.find("architecture_code");
        if (code == el.end() || !code->is_string()) {
            out.diagnostics.push_back(fmt::format("element {}: missing architecture_code", index));
            continue;
        }
        auto cell = try_decode(code->get<std::string>());
        if (!cell) {
            out.diagnostics.push_back(fmt::format("element {}: invalid architecture_code '{}'", index, code->get<std::string>()));
            continue;
        }
        auto const op = el.find("operation");
        std::string op_text = op != el.end() && op->is_string() ? op->get<std::string>() : "";
        std::transform(op_text.begin(), op_text.end(), op_text.begin(), [](unsigned char c) { return std::tolower(c); });
        CandidateProposal p;
        if (op_text == "crossover") { p.operation = Operation::crossover; }
        else if (op_text == "mutation") { p.operation = Operation::mutation; }
        else {
            out.diagnostics.push_back(fmt::format("element {}: invalid operation '{}'", index, op_text));
            continue;
        }
        p.architecture_code = encode(*cell);
        if (auto id = el.find("child_id"); id != el.end() && id->is_string()) { p.child_id = id->get<std::string>(); }
        else if (id != el.end() && id->is_number_integer()) { p.child_id = std::to_string(id->get<long long>()); }
        else { p.child_id = fmt::format("child_{}", index); }
        if (auto r = el.find("rationale"); r != el.end() && r->is_string()) { p.rationale = r->get<std::string>(); }
        out.proposals.push_back(std::move(p));
    }
    return out;
}

/// Rule texts from a knowledge-base update response, or nullopt when no list
/// can be found. Elements may be strings or objects with a rule/text field.
inline auto parse_rules(std::string_view response) -> std::optional<std::vector<std::string>>
{
    std::optional<nlohmann::json> arr;
    if (auto label = response.find("Updated_Knowledge_Base"); label != std::string_view::npos) {
        arr = extract_json_array(response, label);
    }
    if (!arr) { arr = extract_json_array(response); }
    if (!arr) { return std::nullopt; }
    std::vector<std::string> rules;
    for (auto const& el : *arr) {
        std::string text;
        if (el.is_string()) { text = el.get<std::string>(); }
        else if (el.is_object()) {
            for (auto const* key : {"rule", "text", "content"}) {
                if (auto it = el.find(key); it != el.end() && it->is_string()) {
                    text = it->get<std::string>();
                    break;
                }
            }
            if (text.empty()) { text = el.dump(); }
        } else {
            text = el.dump();
        }
        while (!text.empty() && (text.back() == ' ' || text.back() == '\n')) { text.pop_back(); }
        if (!text.empty()) { rules.push_back(std::move(text)); }
    }
    return rules;
}

struct KnowledgeUpdate {
    KnowledgeBase kb;
    std::optional<std::string> warning;
};

/// Replaces the rules with the list in `response`; on failure the base is
/// returned unchanged with a warning.
inline auto update_knowledge_base(KnowledgeBase const& kb, std::string_view response, std::size_t generation)
    -> KnowledgeUpdate
{
    auto rules = parse_rules(response);
    if (!rules) { return {kb, "knowledge-base response had no parseable rule list; keeping previous rules"}; }
    KnowledgeBase next(kb.capacity());
    next.replace(*rules, generation);
    return {std::move(next), std::nullopt};
}

} // namespace pelnas
