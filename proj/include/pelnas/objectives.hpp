#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pelnas/errors.hpp"

namespace pelnas {

/// Raw objectives: accuracy in percent (maximize), latency in ms (minimize).
struct ObjectivePoint {
    double accuracy = 0.0;
    double latency = 0.0;

    friend constexpr auto operator==(ObjectivePoint const&, ObjectivePoint const&) -> bool = default;
};

/// Both coordinates minimized: f1 is normalized error, f2 normalized latency.
struct NormalizedPoint {
    double f1 = 0.0;
    double f2 = 0.0;

    friend constexpr auto operator==(NormalizedPoint const&, NormalizedPoint const&) -> bool = default;
};

struct FrontMember {
    NormalizedPoint point;
    std::string id;
};

using FrontSet = std::vector<FrontMember>;

constexpr auto dominates(NormalizedPoint const& a, NormalizedPoint const& b) noexcept -> bool
{
    return a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2);
}

/// Minimization view of a raw point: (-accuracy, latency).
constexpr auto as_minimization(ObjectivePoint const& p) noexcept -> NormalizedPoint
{
    return {-p.accuracy, p.latency};
}

/// Indices of the rank-0 front of `items` under `proj` (which maps an item to
/// a NormalizedPoint). Equal points collapse to the first one in input order.
/// Result is ordered by f1 ascending.
template <class T, class Proj>
auto non_dominated_indices(std::span<T const> items, Proj proj) -> std::vector<std::size_t>
{
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<NormalizedPoint> pts;
    pts.reserve(items.size());
    for (auto const& item : items) { pts.push_back(std::invoke(proj, item)); }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pts[a].f1 < pts[b].f1 || (pts[a].f1 == pts[b].f1 && pts[a].f2 < pts[b].f2);
    });

    std::vector<std::size_t> front;
    double best_f2 = std::numeric_limits<double>::infinity();
    for (auto i : order) {
        if (pts[i].f2 < best_f2) {
            front.push_back(i);
            best_f2 = pts[i].f2;
        }
    }
    return front;
}

template <class T, class Proj>
auto non_dominated_subset(std::span<T const> items, Proj proj) -> std::vector<T>
{
    std::vector<T> out;
    for (auto i : non_dominated_indices(items, proj)) { out.push_back(items[i]); }
    return out;
}

inline auto non_dominated_sort(std::span<FrontMember const> points) -> FrontSet
{
    return non_dominated_subset(points, &FrontMember::point);
}

inline auto is_mutually_non_dominated(std::span<NormalizedPoint const> pts) -> bool
{
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i != j && dominates(pts[i], pts[j])) { return false; }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct NormalizationBounds {
    double acc_min = 0.0;
    double acc_max = 100.0;
    double lat_min = 0.0;
    double lat_max = 1.0;

    void validate() const
    {
        if (!(acc_max > acc_min) || !(lat_max > lat_min)) {
            throw DataError(fmt::format("degenerate normalization bounds: accuracy [{}, {}], latency [{}, {}]",
                                        acc_min, acc_max, lat_min, lat_max));
        }
    }

    static auto from_points(std::span<ObjectivePoint const> pts) -> NormalizationBounds
    {
        if (pts.empty()) { throw DataError("cannot derive normalization bounds from an empty point set"); }
        NormalizationBounds b{pts[0].accuracy, pts[0].accuracy, pts[0].latency, pts[0].latency};
        for (auto const& p : pts) {
            b.acc_min = std::min(b.acc_min, p.accuracy);
            b.acc_max = std::max(b.acc_max, p.accuracy);
            b.lat_min = std::min(b.lat_min, p.latency);
            b.lat_max = std::max(b.lat_max, p.latency);
        }
        return b;
    }
};

inline auto normalize(ObjectivePoint const& p, NormalizationBounds const& b) -> NormalizedPoint
{
    b.validate();
    auto const f1 = (b.acc_max - p.accuracy) / (b.acc_max - b.acc_min);
    auto const f2 = (p.latency - b.lat_min) / (b.lat_max - b.lat_min);
    return {std::clamp(f1, 0.0, 1.0), std::clamp(f2, 0.0, 1.0)};
}

inline auto normalize(std::span<ObjectivePoint const> pts, NormalizationBounds const& b) -> std::vector<NormalizedPoint>
{
    b.validate();
    std::vector<NormalizedPoint> out;
    out.reserve(pts.size());
    for (auto const& p : pts) { out.push_back(normalize(p, b)); }
    return out;
}

// ---------------------------------------------------------------------------
// Hypervolume (2-D, exact)
// ---------------------------------------------------------------------------

struct HypervolumeResult {
    double volume = 0.0;
    /// Points that do not weakly dominate the reference point.
    std::size_t excluded = 0;
};

/// Area of the union of boxes [s.f1, r.f1] x [s.f2, r.f2].
inline auto hypervolume(std::span<NormalizedPoint const> pts, NormalizedPoint ref = {1.0, 1.0}) -> HypervolumeResult
{
    HypervolumeResult result;
    std::vector<NormalizedPoint> inside;
    inside.reserve(pts.size());
    for (auto const& p : pts) {
        if (p.f1 <= ref.f1 && p.f2 <= ref.f2) { inside.push_back(p); }
        else { ++result.excluded; } // also catches NaN
    }
    auto const front = non_dominated_subset(std::span<NormalizedPoint const>(inside), std::identity{});
    // front is sorted by f1 ascending, hence f2 strictly descending.
    for (std::size_t i = 0; i < front.size(); ++i) {
        auto const next_f1 = i + 1 < front.size() ? front[i + 1].f1 : ref.f1;
        result.volume += (next_f1 - front[i].f1) * (ref.f2 - front[i].f2);
    }
    return result;
}

inline auto hypervolume(FrontSet const& front, NormalizedPoint ref = {1.0, 1.0}) -> HypervolumeResult
{
    std::vector<NormalizedPoint> pts;
    pts.reserve(front.size());
    for (auto const& m : front) { pts.push_back(m.point); }
    return hypervolume(pts, ref);
}

// ---------------------------------------------------------------------------
// Inverted generational distance
// ---------------------------------------------------------------------------

inline auto igd(std::span<NormalizedPoint const> found, std::span<NormalizedPoint const> truth) -> double
{
    if (found.empty()) { throw DataError("IGD is undefined for an empty found front"); }
    if (truth.empty()) { throw DataError("IGD is undefined for an empty reference front"); }
    double total = 0.0;
    for (auto const& t : truth) {
        double best = std::numeric_limits<double>::infinity();
        for (auto const& s : found) { best = std::min(best, std::hypot(t.f1 - s.f1, t.f2 - s.f2)); }
        total += best;
    }
    return total / static_cast<double>(truth.size());
}

inline auto igd(FrontSet const& found, FrontSet const& truth) -> double
{
    std::vector<NormalizedPoint> a;
    std::vector<NormalizedPoint> b;
    for (auto const& m : found) { a.push_back(m.point); }
    for (auto const& m : truth) { b.push_back(m.point); }
    return igd(a, b);
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

/// 1-based ranks; ties share the average of the positions they span.
inline auto average_ranks(std::span<double const> xs) -> std::vector<double>
{
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) { ++j; }
        double const avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) { ranks[order[k]] = avg; }
        i = j + 1;
    }
    return ranks;
}

inline auto pearson(std::span<double const> xs, std::span<double const> ys) -> double
{
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw DataError(fmt::format("correlation needs two equal-length vectors of size >= 2 (got {} and {})",
                                    xs.size(), ys.size()));
    }
    auto const n = static_cast<double>(xs.size());
    double const mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double const my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) { throw DataError("correlation is undefined for a constant vector"); }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline auto spearman(std::span<double const> xs, std::span<double const> ys) -> double
{
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw DataError(fmt::format("spearman needs two equal-length vectors of size >= 2 (got {} and {})",
                                    xs.size(), ys.size()));
    }
    auto const rx = average_ranks(xs);
    auto const ry = average_ranks(ys);
    return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Metrics report
// ---------------------------------------------------------------------------

struct MetricsReport {
    double hv = 0.0;
    double hv_truth = 0.0;
    double igd = 0.0;
    NormalizationBounds bounds;
    NormalizedPoint ref{1.0, 1.0};
    std::size_t hv_excluded = 0;
    std::size_t n_found = 0;
    std::size_t n_truth = 0;

    /// Flat key=value block, one entry per line.
    [[nodiscard]] auto to_kv() const -> std::string
    {
        return fmt::format("hv={}\nhv_truth={}\nigd={}\nbounds_acc_min={}\nbounds_acc_max={}\n"
                           "bounds_lat_min={}\nbounds_lat_max={}\nref_f1={}\nref_f2={}\nhv_excluded={}\n"
                           "n_found={}\nn_truth={}\n",
                           hv, hv_truth, igd, bounds.acc_min, bounds.acc_max, bounds.lat_min, bounds.lat_max,
                           ref.f1, ref.f2, hv_excluded, n_found, n_truth);
    }
};

/// HV of `found` and IGD against `truth`, both given as raw objective points.
inline auto evaluate_front(std::span<ObjectivePoint const> found, std::span<ObjectivePoint const> truth,
                           NormalizationBounds const& bounds, NormalizedPoint ref = {1.0, 1.0}) -> MetricsReport
{
    MetricsReport r;
    r.bounds = bounds;
    r.ref = ref;
    auto const nf = normalize(found, bounds);
    auto const nt = normalize(truth, bounds);
    auto const hv = hypervolume(nf, ref);
    r.hv = hv.volume;
    r.hv_excluded = hv.excluded;
    r.hv_truth = hypervolume(nt, ref).volume;
    r.igd = igd(nf, nt);
    r.n_found = found.size();
    r.n_truth = truth.size();
    return r;
}

} // namespace pelnas
