#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "pelnas/errors.hpp"

namespace pelnas {

// ---------------------------------------------------------------------------
// Operators and the cell genome
// ---------------------------------------------------------------------------

enum class OpKind : std::uint8_t {
    none = 0,
    skip_connect = 1,
    nor_conv_1x1 = 2,
    nor_conv_3x3 = 3,
    avg_pool_3x3 = 4,
};

inline constexpr std::size_t kOpCount = 5;
inline constexpr std::size_t kEdgeCount = 6;
inline constexpr std::size_t kSpaceSize = 15625; // kOpCount ^ kEdgeCount

inline constexpr std::array<OpKind, kOpCount> kAllOps{
    OpKind::none, OpKind::skip_connect, OpKind::nor_conv_1x1, OpKind::nor_conv_3x3, OpKind::avg_pool_3x3};

constexpr auto op_id(OpKind op) noexcept -> std::size_t { return static_cast<std::size_t>(op); }

constexpr auto op_name(OpKind op) noexcept -> std::string_view
{
    switch (op) {
    case OpKind::none: return "none";
    case OpKind::skip_connect: return "skip_connect";
    case OpKind::nor_conv_1x1: return "nor_conv_1x1";
    case OpKind::nor_conv_3x3: return "nor_conv_3x3";
    case OpKind::avg_pool_3x3: return "avg_pool_3x3";
    }
    return "?";
}

constexpr auto parse_op(std::string_view name) noexcept -> std::optional<OpKind>
{
    for (auto op : kAllOps) {
        if (op_name(op) == name) { return op; }
    }
    return std::nullopt;
}

constexpr auto is_conv(OpKind op) noexcept -> bool
{
    return op == OpKind::nor_conv_1x1 || op == OpKind::nor_conv_3x3;
}

// Edge i connects kEdgeSource[i] -> kEdgeTarget[i] in the 4-node cell DAG.
// Ordered (1<-0), (2<-0), (2<-1), (3<-0), (3<-1), (3<-2).
inline constexpr std::array<int, kEdgeCount> kEdgeSource{0, 0, 1, 0, 1, 2};
inline constexpr std::array<int, kEdgeCount> kEdgeTarget{1, 2, 2, 3, 3, 3};

struct ArchCell {
    std::array<OpKind, kEdgeCount> edges{};

    friend constexpr auto operator==(ArchCell const&, ArchCell const&) -> bool = default;
    friend constexpr auto operator<=>(ArchCell const&, ArchCell const&) = default;

    /// Position in lexicographic edge-id order, edge 0 most significant.
    [[nodiscard]] constexpr auto index() const noexcept -> std::size_t
    {
        std::size_t idx = 0;
        for (auto op : edges) { idx = idx * kOpCount + op_id(op); }
        return idx;
    }

    static constexpr auto from_index(std::size_t idx) -> ArchCell
    {
        if (idx >= kSpaceSize) { throw ParseError(fmt::format("cell index {} outside the search space", idx)); }
        ArchCell c;
        for (std::size_t e = kEdgeCount; e-- > 0;) {
            c.edges[e] = static_cast<OpKind>(idx % kOpCount);
            idx /= kOpCount;
        }
        return c;
    }
};

// ---------------------------------------------------------------------------
// Canonical string encoding: |op~0|+|op~0|op~1|+|op~0|op~1|op~2|
// ---------------------------------------------------------------------------

inline auto encode(ArchCell const& cell) -> std::string
{
    std::string out;
    out.reserve(96);
    out += '|';
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        if (e > 0 && kEdgeTarget[e] != kEdgeTarget[e - 1]) { out += "+|"; }
        out += op_name(cell.edges[e]);
        out += '~';
        out += static_cast<char>('0' + kEdgeSource[e]);
        out += '|';
    }
    return out;
}

inline auto try_decode(std::string_view text) noexcept -> std::optional<ArchCell>
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) { text.remove_prefix(1); }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r' || text.back() == '\n')) { text.remove_suffix(1); }

    ArchCell cell;
    std::size_t edge = 0;
    int target = 1;
    int expected_source = 0;
    std::size_t pos = 0;
    // Node groups are separated by "+"; each group is |tok|tok|...|
    while (pos < text.size()) {
        if (text[pos] != '|') { return std::nullopt; }
        ++pos;
        while (pos < text.size() && text[pos] != '+') {
            auto const end = text.find('|', pos);
            if (end == std::string_view::npos) { return std::nullopt; }
            auto const token = text.substr(pos, end - pos);
            auto const tilde = token.find('~');
            if (tilde == std::string_view::npos || tilde + 2 != token.size()) { return std::nullopt; }
            auto const op = parse_op(token.substr(0, tilde));
            int const src = token[tilde + 1] - '0';
            if (!op || edge >= kEdgeCount || src != expected_source || kEdgeTarget[edge] != target) {
                return std::nullopt;
            }
            cell.edges[edge++] = *op;
            ++expected_source;
            pos = end + 1;
        }
        if (expected_source != target) { return std::nullopt; }
        if (pos < text.size()) {
            ++pos; // '+'
            if (pos >= text.size()) { return std::nullopt; }
            ++target;
            expected_source = 0;
        }
    }
    if (edge != kEdgeCount) { return std::nullopt; }
    return cell;
}

inline auto decode(std::string_view text) -> ArchCell
{
    if (auto cell = try_decode(text)) { return *cell; }
    throw ParseError(fmt::format("invalid architecture string '{}'", text));
}

/// All 15,625 cells in lexicographic edge-id order (lazy).
inline auto enumerate_space()
{
    return std::views::iota(std::size_t{0}, kSpaceSize)
        | std::views::transform([](std::size_t i) { return ArchCell::from_index(i); });
}

// ---------------------------------------------------------------------------
// Complexity and niches
// ---------------------------------------------------------------------------

struct ComplexityProfile {
    int n_conv3x3 = 0;
    int n_conv1x1 = 0;

    friend constexpr auto operator==(ComplexityProfile const&, ComplexityProfile const&) -> bool = default;
};

constexpr auto complexity(ArchCell const& cell) noexcept -> ComplexityProfile
{
    ComplexityProfile p;
    for (auto op : cell.edges) {
        p.n_conv3x3 += static_cast<int>(op == OpKind::nor_conv_3x3);
        p.n_conv1x1 += static_cast<int>(op == OpKind::nor_conv_1x1);
    }
    return p;
}

struct NicheId {
    std::size_t value = 0;

    friend constexpr auto operator==(NicheId, NicheId) -> bool = default;
    friend constexpr auto operator<=>(NicheId, NicheId) = default;
};

/// Count constraint on one operator kind.
struct CountBound {
    enum class Kind : std::uint8_t { exact, min, any };
    Kind kind = Kind::any;
    int value = 0;

    static constexpr auto exactly(int n) -> CountBound { return {Kind::exact, n}; }
    static constexpr auto at_least(int n) -> CountBound { return {Kind::min, n}; }
    static constexpr auto unconstrained() -> CountBound { return {Kind::any, 0}; }

    [[nodiscard]] constexpr auto accepts(int count) const noexcept -> bool
    {
        switch (kind) {
        case Kind::exact: return count == value;
        case Kind::min: return count >= value;
        case Kind::any: return true;
        }
        return false;
    }
    [[nodiscard]] constexpr auto lower() const noexcept -> int { return kind == Kind::any ? 0 : value; }
    /// Largest admissible count given that at most `room` edges are available.
    [[nodiscard]] constexpr auto upper(int room) const noexcept -> int
    {
        return kind == Kind::exact ? value : room;
    }

    friend constexpr auto operator==(CountBound const&, CountBound const&) -> bool = default;
};

struct NichePredicate {
    CountBound conv3x3;
    CountBound conv1x1;

    [[nodiscard]] constexpr auto accepts(ComplexityProfile p) const noexcept -> bool
    {
        return conv3x3.accepts(p.n_conv3x3) && conv1x1.accepts(p.n_conv1x1);
    }
    [[nodiscard]] constexpr auto accepts(ArchCell const& cell) const noexcept -> bool
    {
        return accepts(complexity(cell));
    }

    friend constexpr auto operator==(NichePredicate const&, NichePredicate const&) -> bool = default;
};

namespace detail {

inline auto bound_to_string(CountBound b) -> std::string
{
    switch (b.kind) {
    case CountBound::Kind::exact: return fmt::format("={}", b.value);
    case CountBound::Kind::min: return fmt::format(">={}", b.value);
    case CountBound::Kind::any: return "=any";
    }
    return "";
}

inline auto parse_bound(std::string_view text) -> std::optional<CountBound>
{
    auto parse_int = [](std::string_view s) -> std::optional<int> {
        if (s.empty() || s.size() > 2) { return std::nullopt; }
        int v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') { return std::nullopt; }
            v = v * 10 + (c - '0');
        }
        if (v > static_cast<int>(kEdgeCount)) { return std::nullopt; }
        return v;
    };
    if (text.starts_with(">=")) {
        if (auto v = parse_int(text.substr(2))) { return CountBound::at_least(*v); }
        return std::nullopt;
    }
    if (text.starts_with("=")) {
        auto rest = text.substr(1);
        if (rest == "any") { return CountBound::unconstrained(); }
        if (auto v = parse_int(rest)) { return CountBound::exactly(*v); }
    }
    return std::nullopt;
}

} // namespace detail

/// Text form: "n_conv3x3=2 n_conv1x1=any"; "n_conv3x3>=4"; omitted terms mean any.
inline auto to_string(NichePredicate const& p) -> std::string
{
    return fmt::format("n_conv3x3{} n_conv1x1{}", detail::bound_to_string(p.conv3x3), detail::bound_to_string(p.conv1x1));
}

inline auto parse_niche_predicate(std::string_view text) -> NichePredicate
{
    NichePredicate p;
    bool seen3 = false;
    bool seen1 = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == ',' || text[pos] == '\t')) { ++pos; }
        if (pos >= text.size()) { break; }
        auto end = text.find_first_of(" ,\t", pos);
        if (end == std::string_view::npos) { end = text.size(); }
        auto const term = text.substr(pos, end - pos);
        pos = end;

        auto const op_end = term.find_first_of("=>");
        auto const key = term.substr(0, op_end);
        auto const bound = op_end == std::string_view::npos ? std::nullopt : detail::parse_bound(term.substr(op_end));
        if (!bound) { throw ConfigError(fmt::format("invalid niche term '{}'", term)); }
        if (key == "n_conv3x3" && !seen3) {
            p.conv3x3 = *bound;
            seen3 = true;
        } else if (key == "n_conv1x1" && !seen1) {
            p.conv1x1 = *bound;
            seen1 = true;
        } else {
            throw ConfigError(fmt::format("invalid or repeated niche key '{}'", key));
        }
    }
    return p;
}

/// An ordered list of niche predicates. Ids are positions in the list.
class NicheSet {
public:
    NicheSet() = default;
    explicit NicheSet(std::vector<NichePredicate> predicates) : predicates_(std::move(predicates)) {}

    /// The six complexity niches: (0,0) (0,>=1) (1,*) (2,*) (3,*) (>=4,*).
    static auto complexity_default() -> NicheSet
    {
        using B = CountBound;
        return NicheSet({
            {B::exactly(0), B::exactly(0)},
            {B::exactly(0), B::at_least(1)},
            {B::exactly(1), B::unconstrained()},
            {B::exactly(2), B::unconstrained()},
            {B::exactly(3), B::unconstrained()},
            {B::at_least(4), B::unconstrained()},
        });
    }

    /// A single niche covering the whole space (partitioning disabled).
    static auto whole_space() -> NicheSet
    {
        return NicheSet({{CountBound::unconstrained(), CountBound::unconstrained()}});
    }

    [[nodiscard]] auto size() const noexcept -> std::size_t { return predicates_.size(); }
    [[nodiscard]] auto predicate(NicheId id) const -> NichePredicate const& { return predicates_.at(id.value); }
    [[nodiscard]] auto predicates() const noexcept -> std::vector<NichePredicate> const& { return predicates_; }

    [[nodiscard]] auto assign(ComplexityProfile p) const noexcept -> std::optional<NicheId>
    {
        for (std::size_t k = 0; k < predicates_.size(); ++k) {
            if (predicates_[k].accepts(p)) { return NicheId{k}; }
        }
        return std::nullopt;
    }
    [[nodiscard]] auto assign(ArchCell const& cell) const noexcept -> std::optional<NicheId>
    {
        return assign(complexity(cell));
    }

    /// Number of cells in each niche over the full space.
    [[nodiscard]] auto cardinalities() const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> counts(predicates_.size(), 0);
        for (auto const& cell : enumerate_space()) {
            auto const p = complexity(cell);
            for (std::size_t k = 0; k < predicates_.size(); ++k) {
                if (predicates_[k].accepts(p)) { ++counts[k]; }
            }
        }
        return counts;
    }

    /// Throws ConfigError unless the niches are non-empty, pairwise disjoint and exhaustive.
    void validate_partition() const
    {
        if (predicates_.empty()) { throw ConfigError("niche set is empty"); }
        // Membership depends only on the complexity profile, so checking all
        // (n3, n1) pairs with n3 + n1 <= 6 covers the space.
        std::vector<int> hits(predicates_.size(), 0);
        for (int n3 = 0; n3 <= static_cast<int>(kEdgeCount); ++n3) {
            for (int n1 = 0; n3 + n1 <= static_cast<int>(kEdgeCount); ++n1) {
                int owners = 0;
                for (std::size_t k = 0; k < predicates_.size(); ++k) {
                    if (predicates_[k].accepts(ComplexityProfile{n3, n1})) {
                        ++owners;
                        ++hits[k];
                    }
                }
                if (owners != 1) {
                    throw ConfigError(fmt::format(
                        "niche set is not a partition: profile (n_conv3x3={}, n_conv1x1={}) belongs to {} niches",
                        n3, n1, owners));
                }
            }
        }
        for (std::size_t k = 0; k < hits.size(); ++k) {
            if (hits[k] == 0) { throw ConfigError(fmt::format("niche {} is unsatisfiable", k)); }
        }
    }

private:
    std::vector<NichePredicate> predicates_;
};

/// Niche under the default six-way complexity partition.
constexpr auto assign_niche(ArchCell const& cell) noexcept -> NicheId
{
    auto const p = complexity(cell);
    switch (p.n_conv3x3) {
    case 0: return NicheId{p.n_conv1x1 == 0 ? 0U : 1U};
    case 1: return NicheId{2};
    case 2: return NicheId{3};
    case 3: return NicheId{4};
    default: return NicheId{5};
    }
}

// ---------------------------------------------------------------------------
// ViT FLOPs estimate
// ---------------------------------------------------------------------------

/// MLP expansion ratio as an exact fraction (e.g. 7/2 for 3.5).
struct MlpRatio {
    std::uint64_t num = 4;
    std::uint64_t den = 1;
};

struct ViTConfig {
    std::uint64_t embed_dim = 0;   // D
    std::uint64_t depth = 0;       // L
    MlpRatio mlp_ratio{};
    std::uint64_t qkv_dim = 0;     // D_h
    std::uint64_t num_heads = 0;   // h
    std::uint64_t num_patches = 0; // N

    void validate() const
    {
        if (embed_dim == 0 || depth == 0 || mlp_ratio.num == 0 || mlp_ratio.den == 0 || qkv_dim == 0
            || num_heads == 0 || num_patches == 0) {
            throw ConfigError("ViT configuration fields must be strictly positive");
        }
        if (qkv_dim % num_heads != 0) {
            throw ConfigError(fmt::format("qkv_dim {} is not divisible by num_heads {}", qkv_dim, num_heads));
        }
    }
};

namespace detail {

inline auto checked_mul(std::uint64_t a, std::uint64_t b) -> std::uint64_t
{
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) { throw OverflowError("ViT FLOPs estimate overflows 64 bits"); }
    return r;
}

inline auto checked_add(std::uint64_t a, std::uint64_t b) -> std::uint64_t
{
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) { throw OverflowError("ViT FLOPs estimate overflows 64 bits"); }
    return r;
}

} // namespace detail

/// FLOPs of the MLP block of one layer: 2 * N * D * (D * ratio).
inline auto vit_mlp_flops(ViTConfig const& cfg) -> std::uint64_t
{
    using detail::checked_mul;
    auto const numerator = checked_mul(checked_mul(checked_mul(2, cfg.num_patches), checked_mul(cfg.embed_dim, cfg.embed_dim)),
                                       cfg.mlp_ratio.num);
    return numerator / cfg.mlp_ratio.den;
}

/// FLOPs of the attention block of one layer:
/// 3*N*D*D_h (Q/K/V) + 2*N^2*D_h (scores and value aggregation) + N*D_h*D (output projection).
inline auto vit_mhsa_flops(ViTConfig const& cfg) -> std::uint64_t
{
    using detail::checked_add;
    using detail::checked_mul;
    auto const n = cfg.num_patches;
    auto const proj = checked_mul(checked_mul(n, cfg.embed_dim), cfg.qkv_dim);
    auto const qkv = checked_mul(3, proj);
    auto const attn = checked_mul(2, checked_mul(checked_mul(n, n), cfg.qkv_dim));
    return checked_add(checked_add(qkv, attn), proj);
}

/// Total FLOPs: L * (MHSA + MLP). Throws OverflowError instead of wrapping.
inline auto vit_flops_estimate(ViTConfig const& cfg) -> std::uint64_t
{
    cfg.validate();
    return detail::checked_mul(cfg.depth, detail::checked_add(vit_mhsa_flops(cfg), vit_mlp_flops(cfg)));
}

} // namespace pelnas
