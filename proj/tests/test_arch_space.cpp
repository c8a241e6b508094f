#include <gtest/gtest.h>

#include <set>

#include "pelnas/arch_space.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/rng.hpp"

using namespace pelnas;

TEST(OpKind, IdsAreABijection)
{
    std::set<std::size_t> ids;
    for (auto op : kAllOps) { ids.insert(op_id(op)); }
    EXPECT_EQ(ids, (std::set<std::size_t>{0, 1, 2, 3, 4}));
    for (auto op : kAllOps) { EXPECT_EQ(parse_op(op_name(op)), op); }
    EXPECT_FALSE(parse_op("nor_conv_5x5"));
}

TEST(Encode, AllNone)
{
    EXPECT_EQ(encode(ArchCell{}), "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|");
}

TEST(Encode, PositionalLayout)
{
    ArchCell c{{OpKind::skip_connect, OpKind::none, OpKind::nor_conv_3x3, OpKind::none, OpKind::nor_conv_1x1,
                OpKind::avg_pool_3x3}};
    EXPECT_EQ(encode(c),
              "|skip_connect~0|+|none~0|nor_conv_3x3~1|+|none~0|nor_conv_1x1~1|avg_pool_3x3~2|");
}

TEST(Encode, RoundTripsRandomCells)
{
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        auto const c = ArchCell::from_index(uniform_index(rng, kSpaceSize));
        EXPECT_EQ(decode(encode(c)), c);
    }
}

TEST(Decode, RejectsMalformed)
{
    EXPECT_FALSE(try_decode(""));
    EXPECT_FALSE(try_decode("|none~0|+|none~0|none~1|"));
    EXPECT_FALSE(try_decode("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|"));
    EXPECT_FALSE(try_decode("|conv~0|+|none~0|none~1|+|none~0|none~1|none~2|"));
    EXPECT_THROW(decode("garbage"), ParseError);
    EXPECT_TRUE(try_decode("  |none~0|+|none~0|none~1|+|none~0|none~1|none~2|\r\n"));
}

TEST(Enumerate, CountOrderAndUniqueness)
{
    std::set<std::string> seen;
    std::size_t n = 0;
    std::optional<std::size_t> prev;
    for (auto const& c : enumerate_space()) {
        if (n == 0) { EXPECT_EQ(c, ArchCell{}); }
        if (prev) { EXPECT_LT(*prev, c.index()); }
        prev = c.index();
        seen.insert(encode(c));
        ++n;
    }
    EXPECT_EQ(n, 15625U);
    EXPECT_EQ(seen.size(), 15625U);
}

TEST(Complexity, Counts)
{
    EXPECT_EQ(complexity(ArchCell{}).n_conv3x3, 0);
    ArchCell c{{OpKind::nor_conv_3x3, OpKind::nor_conv_1x1, OpKind::none, OpKind::nor_conv_3x3, OpKind::skip_connect,
                OpKind::avg_pool_3x3}};
    EXPECT_EQ(complexity(c).n_conv3x3, 2);
    EXPECT_EQ(complexity(c).n_conv1x1, 1);
    long total = 0;
    for (auto const& cell : enumerate_space()) { total += complexity(cell).n_conv3x3; }
    EXPECT_EQ(total, 18750);
}

TEST(Niche, TableRows)
{
    auto cell_with = [](int n3, int n1) {
        ArchCell c;
        int e = 0;
        for (int i = 0; i < n3; ++i) { c.edges[e++] = OpKind::nor_conv_3x3; }
        for (int i = 0; i < n1; ++i) { c.edges[e++] = OpKind::nor_conv_1x1; }
        return c;
    };
    EXPECT_EQ(assign_niche(cell_with(0, 0)).value, 0U);
    EXPECT_EQ(assign_niche(cell_with(0, 2)).value, 1U);
    EXPECT_EQ(assign_niche(cell_with(1, 5)).value, 2U);
    EXPECT_EQ(assign_niche(cell_with(2, 3)).value, 3U);
    EXPECT_EQ(assign_niche(cell_with(3, 0)).value, 4U);
    EXPECT_EQ(assign_niche(cell_with(6, 0)).value, 5U);
}

TEST(Niche, CardinalitiesMatchClosedForms)
{
    std::array<std::size_t, 6> brute{};
    for (auto const& c : enumerate_space()) { ++brute[assign_niche(c).value]; }
    std::array<std::size_t, 6> const closed{729, 4096 - 729, 6 * 1024, 15 * 256, 20 * 64, 15 * 16 + 6 * 4 + 1};
    EXPECT_EQ(brute, closed);
    auto const set = NicheSet::complexity_default();
    auto const card = set.cardinalities();
    EXPECT_EQ(std::vector<std::size_t>(brute.begin(), brute.end()), card);
}

TEST(Niche, DefaultSetAgreesWithAssignAndIsAPartition)
{
    auto const set = NicheSet::complexity_default();
    EXPECT_NO_THROW(set.validate_partition());
    for (auto const& c : enumerate_space()) {
        auto const id = set.assign(c);
        ASSERT_TRUE(id);
        EXPECT_EQ(id->value, assign_niche(c).value);
    }
}

TEST(Niche, DependsOnlyOnComplexity)
{
    std::map<std::pair<int, int>, std::size_t> by_profile;
    for (auto const& c : enumerate_space()) {
        auto const p = complexity(c);
        auto [it, inserted] = by_profile.emplace(std::pair{p.n_conv3x3, p.n_conv1x1}, assign_niche(c).value);
        if (!inserted) { EXPECT_EQ(it->second, assign_niche(c).value); }
    }
}

TEST(Niche, PredicateTextRoundTrips)
{
    auto const niches = NicheSet::complexity_default();
    for (auto const& p : niches.predicates()) {
        EXPECT_EQ(parse_niche_predicate(to_string(p)), p);
    }
    EXPECT_THROW(parse_niche_predicate("n_conv3x3=banana"), ConfigError);
}

TEST(Niche, InvalidPartitionsRejected)
{
    using B = CountBound;
    NicheSet overlap({{B::unconstrained(), B::unconstrained()}, {B::exactly(0), B::unconstrained()}});
    EXPECT_THROW(overlap.validate_partition(), ConfigError);
    NicheSet gap({{B::exactly(0), B::unconstrained()}});
    EXPECT_THROW(gap.validate_partition(), ConfigError);
    EXPECT_NO_THROW(NicheSet::whole_space().validate_partition());
}

TEST(ViT, MlpWorkedExample)
{
    ViTConfig cfg{192, 12, {4, 1}, 192, 3, 196};
    EXPECT_EQ(vit_mlp_flops(cfg), 57'802'752U);
    auto doubled = cfg;
    doubled.embed_dim *= 2;
    EXPECT_EQ(vit_mlp_flops(doubled), 4 * vit_mlp_flops(cfg));
}

TEST(ViT, TotalFormulaAndDepthScaling)
{
    ViTConfig cfg{192, 12, {4, 1}, 192, 3, 196};
    std::uint64_t const N = 196, D = 192, Dh = 192, L = 12;
    EXPECT_EQ(vit_flops_estimate(cfg), L * (3 * N * D * Dh + 2 * N * N * Dh + N * Dh * D + 2 * N * D * D * 4));
    auto deeper = cfg;
    deeper.depth *= 2;
    EXPECT_EQ(vit_flops_estimate(deeper), 2 * vit_flops_estimate(cfg));
}

TEST(ViT, MonotoneInEveryField)
{
    ViTConfig base{64, 4, {4, 1}, 64, 4, 49};
    auto const f0 = vit_flops_estimate(base);
    for (int field = 0; field < 4; ++field) {
        auto c = base;
        (field == 0 ? c.embed_dim : field == 1 ? c.depth : field == 2 ? c.qkv_dim : c.num_patches) += 4;
        EXPECT_GE(vit_flops_estimate(c), f0);
    }
    auto r = base;
    r.mlp_ratio = {9, 2};
    EXPECT_GE(vit_flops_estimate(r), f0);
}

TEST(ViT, OverflowAndValidation)
{
    ViTConfig huge{1ULL << 40, 1ULL << 20, {4, 1}, 1ULL << 20, 1, 1ULL << 30};
    EXPECT_THROW(vit_flops_estimate(huge), OverflowError);
    ViTConfig bad{192, 12, {4, 1}, 190, 3, 196};
    EXPECT_THROW(vit_flops_estimate(bad), ConfigError);
    ViTConfig zero{0, 12, {4, 1}, 192, 3, 196};
    EXPECT_THROW(vit_flops_estimate(zero), ConfigError);
}
