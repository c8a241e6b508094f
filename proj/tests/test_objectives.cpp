#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pelnas/objectives.hpp"

using namespace pelnas;

namespace {

auto random_points(std::mt19937& gen, std::size_t n, bool grid = false) -> std::vector<NormalizedPoint>
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> g(0, 9);
    std::vector<NormalizedPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
        if (grid) { pts.push_back({g(gen) / 10.0, g(gen) / 10.0}); }
        else { pts.push_back({u(gen), u(gen)}); }
    }
    return pts;
}

auto to_oracle(std::vector<NormalizedPoint> const& pts) -> std::vector<oracle::P>
{
    std::vector<oracle::P> out;
    for (auto p : pts) { out.push_back({p.f1, p.f2}); }
    return out;
}

} // namespace

TEST(Dominance, Basics)
{
    EXPECT_TRUE(dominates({0.1, 0.1}, {0.2, 0.1}));
    EXPECT_FALSE(dominates({0.1, 0.1}, {0.1, 0.1}));
    EXPECT_FALSE(dominates({0.1, 0.3}, {0.2, 0.1}));
    EXPECT_EQ(as_minimization({90.0, 5.0}), (NormalizedPoint{-90.0, 5.0}));
}

TEST(NonDominatedSort, MatchesPairwiseFilter)
{
    std::mt19937 gen(7);
    for (int trial = 0; trial < 100; ++trial) {
        auto const pts = random_points(gen, 200, trial % 2 == 1);
        auto ours = non_dominated_indices(std::span<NormalizedPoint const>(pts), std::identity{});
        std::sort(ours.begin(), ours.end());
        EXPECT_EQ(ours, oracle::pairwise_front(to_oracle(pts))) << "trial " << trial;
    }
}

TEST(NonDominatedSort, DuplicatesCollapseToFirst)
{
    FrontSet s{{{0.5, 0.5}, "a"}, {{0.5, 0.5}, "b"}, {{0.2, 0.9}, "c"}};
    auto const f = non_dominated_sort(s);
    ASSERT_EQ(f.size(), 2U);
    EXPECT_EQ(f[0].id, "c");
    EXPECT_EQ(f[1].id, "a");
}

TEST(Hypervolume, WorkedExample)
{
    std::vector<NormalizedPoint> pts{{0.2, 0.7}, {0.6, 0.3}};
    EXPECT_NEAR(hypervolume(pts).volume, 0.40, 1e-12);
}

TEST(Hypervolume, EdgeCases)
{
    std::vector<NormalizedPoint> corner{{1.0, 1.0}};
    EXPECT_EQ(hypervolume(corner).volume, 0.0);
    std::vector<NormalizedPoint> ideal{{0.0, 0.0}};
    EXPECT_EQ(hypervolume(ideal).volume, 1.0);
    std::vector<NormalizedPoint> outside{{1.5, 0.2}, {0.5, 0.5}};
    auto const r = hypervolume(outside);
    EXPECT_EQ(r.excluded, 1U);
    EXPECT_NEAR(r.volume, 0.25, 1e-15);
    EXPECT_EQ(hypervolume(std::vector<NormalizedPoint>{}).volume, 0.0);
}

TEST(Hypervolume, MatchesGridOracleAndMonteCarlo)
{
    std::mt19937 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto const n = 1 + trial % 8;
        auto const pts = random_points(gen, n);
        auto const exact = oracle::hv_grid(to_oracle(pts), {1, 1});
        EXPECT_NEAR(hypervolume(pts).volume, exact, 1e-9);
        auto const mc = oracle::hv_monte_carlo(to_oracle(pts), {1, 1}, 20000, 100 + trial);
        EXPECT_LE(std::abs(hypervolume(pts).volume - mc.mean), 3 * mc.sigma + 1e-12);
    }
}

TEST(Hypervolume, AddingAPointNeverDecreases)
{
    std::mt19937 gen(3);
    auto pts = random_points(gen, 5);
    double prev = hypervolume(pts).volume;
    for (int i = 0; i < 50; ++i) {
        auto more = random_points(gen, 1);
        pts.push_back(more[0]);
        double const now = hypervolume(pts).volume;
        EXPECT_GE(now, prev);
        prev = now;
    }
}

TEST(Igd, WorkedExampleAndIdentity)
{
    std::vector<NormalizedPoint> truth{{0, 1}, {1, 0}};
    std::vector<NormalizedPoint> found{{0, 1}};
    EXPECT_NEAR(igd(found, truth), std::sqrt(2.0) / 2.0, 1e-15);
    EXPECT_EQ(igd(truth, truth), 0.0);
    EXPECT_THROW(igd(std::vector<NormalizedPoint>{}, truth), DataError);
}

TEST(Igd, MatchesDirectDefinition)
{
    std::mt19937 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto const a = random_points(gen, 1 + trial % 9);
        auto const b = random_points(gen, 1 + trial % 13);
        EXPECT_NEAR(igd(a, b), oracle::igd(to_oracle(a), to_oracle(b)), 1e-12);
    }
}

TEST(Normalize, ClampsAndOrients)
{
    NormalizationBounds b{10, 90, 2, 22};
    EXPECT_EQ(normalize({90, 2}, b), (NormalizedPoint{0, 0}));
    EXPECT_EQ(normalize({10, 22}, b), (NormalizedPoint{1, 1}));
    EXPECT_EQ(normalize({100, 30}, b), (NormalizedPoint{0, 1}));
    EXPECT_THROW((NormalizationBounds{5, 5, 1, 2}.validate()), DataError);
}

TEST(Spearman, MatchesBruteForceWithTies)
{
    std::mt19937 gen(9);
    std::uniform_int_distribution<int> d(0, 6);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 40; ++i) {
            x.push_back(d(gen));
            y.push_back(d(gen) + 0.5 * x.back());
        }
        EXPECT_NEAR(spearman(x, y), oracle::spearman(x, y), 1e-12);
    }
    std::vector<double> a{1, 2, 3, 4};
    std::vector<double> b{10, 20, 30, 40};
    EXPECT_DOUBLE_EQ(spearman(a, b), 1.0);
    std::vector<double> c{1, 1, 1, 1};
    EXPECT_THROW(spearman(a, c), DataError);
}

TEST(Metrics, EvaluateFrontReport)
{
    std::vector<ObjectivePoint> truth{{90, 10}, {80, 5}};
    NormalizationBounds b{0, 100, 0, 20};
    auto const r = evaluate_front(truth, truth, b);
    EXPECT_EQ(r.igd, 0.0);
    EXPECT_EQ(r.hv, r.hv_truth);
    EXPECT_NE(r.to_kv().find("hv="), std::string::npos);
}
