#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "pelnas/arch_space.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/objectives.hpp"
#include "pelnas/rng.hpp"

namespace pelnas {

inline constexpr std::size_t kProxyCount = 13;

using ProxyVector = std::array<double, kProxyCount>;

inline auto default_devices() -> std::vector<std::string>
{
    return {"edgegpu", "raspi4", "edgetpu", "pixel3", "eyeriss", "fpga"};
}

inline auto proxy_column_name(std::size_t j) -> std::string { return fmt::format("zc_{:02}", j); }

struct BenchmarkRecord {
    std::string arch; // canonical string
    ArchCell cell;
    std::string dataset;
    double accuracy = 0.0;
    std::vector<double> latency; // one entry per store device, same order
    std::optional<ProxyVector> proxies;
};

struct LookupResult {
    ObjectivePoint point;
    ProxyVector const* proxies = nullptr; // null when the record carries none
};

/// Read-only after construction; lookups are safe from any thread.
class BenchmarkStore {
public:
    BenchmarkStore() : devices_(default_devices()) {}
    explicit BenchmarkStore(std::vector<std::string> devices) : devices_(std::move(devices))
    {
        if (devices_.empty()) { throw DataError("a benchmark store needs at least one device"); }
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            if (devices_[i].empty()) { throw DataError("device names must be non-empty"); }
            for (std::size_t j = 0; j < i; ++j) {
                if (devices_[i] == devices_[j]) { throw DataError(fmt::format("duplicate device '{}'", devices_[i])); }
            }
        }
    }

    /// Adds a record; throws DataError on a duplicate (arch, dataset) key or a bad record.
    void add(BenchmarkRecord rec)
    {
        if (rec.latency.size() != devices_.size()) {
            throw DataError(fmt::format("record for {} has {} latencies, store has {} devices", rec.arch,
                                        rec.latency.size(), devices_.size()));
        }
        for (std::size_t d = 0; d < rec.latency.size(); ++d) {
            if (!(rec.latency[d] > 0.0)) {
                throw DataError(fmt::format("record for {} has non-positive latency on {}", rec.arch, devices_[d]));
            }
        }
        rec.arch = encode(rec.cell);
        auto const k = key(rec.arch, rec.dataset);
        if (index_.contains(k)) {
            throw DataError(fmt::format("duplicate architecture '{}' for dataset '{}'", rec.arch, rec.dataset));
        }
        if (rec.proxies) { ++proxy_records_; }
        index_.emplace(k, records_.size());
        if (std::find(datasets_.begin(), datasets_.end(), rec.dataset) == datasets_.end()) {
            datasets_.push_back(rec.dataset);
        }
        records_.push_back(std::move(rec));
    }

    [[nodiscard]] auto size() const noexcept -> std::size_t { return records_.size(); }
    [[nodiscard]] auto records() const noexcept -> std::span<BenchmarkRecord const> { return records_; }
    [[nodiscard]] auto devices() const noexcept -> std::vector<std::string> const& { return devices_; }
    [[nodiscard]] auto datasets() const noexcept -> std::vector<std::string> const& { return datasets_; }
    /// True when every record carries a proxy vector.
    [[nodiscard]] auto has_proxies() const noexcept -> bool
    {
        return !records_.empty() && proxy_records_ == records_.size();
    }

    [[nodiscard]] auto device_index(std::string_view device) const -> std::size_t
    {
        for (std::size_t i = 0; i < devices_.size(); ++i) {
            if (devices_[i] == device) { return i; }
        }
        throw NotFoundError(fmt::format("unknown device '{}'", device));
    }

    [[nodiscard]] auto find(ArchCell const& cell, std::string_view dataset) const -> BenchmarkRecord const*
    {
        auto it = index_.find(key(encode(cell), dataset));
        return it == index_.end() ? nullptr : &records_[it->second];
    }

    /// Accepts any decodable spelling of the architecture.
    [[nodiscard]] auto find(std::string_view arch, std::string_view dataset) const -> BenchmarkRecord const*
    {
        auto cell = try_decode(arch);
        return cell ? find(*cell, dataset) : nullptr;
    }

    [[nodiscard]] auto record(std::string_view arch, std::string_view dataset) const -> BenchmarkRecord const&
    {
        if (auto const* r = find(arch, dataset)) { return *r; }
        throw NotFoundError(fmt::format("architecture '{}' not found for dataset '{}'", arch, dataset));
    }

    [[nodiscard]] auto lookup(std::string_view arch, std::string_view device, std::string_view dataset) const
        -> LookupResult
    {
        auto const d = device_index(device);
        auto const& r = record(arch, dataset);
        return {{r.accuracy, r.latency[d]}, r.proxies ? &*r.proxies : nullptr};
    }

    /// Every cell of the space is present for `dataset`.
    [[nodiscard]] auto is_complete(std::string_view dataset) const -> bool
    {
        std::size_t n = 0;
        for (auto const& r : records_) { n += static_cast<std::size_t>(r.dataset == dataset); }
        return n == kSpaceSize;
    }

    [[nodiscard]] auto objective_points(std::string_view device, std::string_view dataset) const
        -> std::vector<ObjectivePoint>
    {
        auto const d = device_index(device);
        std::vector<ObjectivePoint> out;
        for (auto const& r : records_) {
            if (r.dataset == dataset) { out.push_back({r.accuracy, r.latency[d]}); }
        }
        return out;
    }

    /// Min/max of accuracy and latency over all records of (device, dataset).
    [[nodiscard]] auto bounds(std::string_view device, std::string_view dataset) const -> NormalizationBounds
    {
        auto const pts = objective_points(device, dataset);
        if (pts.empty()) { throw DataError(fmt::format("store has no records for dataset '{}'", dataset)); }
        return NormalizationBounds::from_points(pts);
    }

private:
    static auto key(std::string_view arch, std::string_view dataset) -> std::string
    {
        std::string k(arch);
        k += '\n';
        k += dataset;
        return k;
    }

    std::vector<std::string> devices_;
    std::vector<std::string> datasets_;
    std::vector<BenchmarkRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t proxy_records_ = 0;
};

// ---------------------------------------------------------------------------
// Ground-truth front
// ---------------------------------------------------------------------------

struct ScoredArch {
    std::string arch;
    ObjectivePoint point;
};

/// Brute-force rank-0 front over every record of (device, dataset), in
/// minimization form (-accuracy, latency). Ties keep the lowest cell index.
inline auto true_front(BenchmarkStore const& store, std::string_view device, std::string_view dataset,
                       bool allow_partial = false) -> std::vector<ScoredArch>
{
    if (!allow_partial && !store.is_complete(dataset)) {
        throw DataError(fmt::format("store does not cover the full space for dataset '{}' (use --allow-partial)",
                                    dataset));
    }
    auto const d = store.device_index(device);
    std::vector<BenchmarkRecord const*> rows;
    for (auto const& r : store.records()) {
        if (r.dataset == dataset) { rows.push_back(&r); }
    }
    if (rows.empty()) { throw DataError(fmt::format("store has no records for dataset '{}'", dataset)); }
    std::sort(rows.begin(), rows.end(), [](auto const* a, auto const* b) { return a->cell.index() < b->cell.index(); });
    std::vector<ScoredArch> all;
    all.reserve(rows.size());
    for (auto const* r : rows) { all.push_back({r->arch, {r->accuracy, r->latency[d]}}); }
    return non_dominated_subset(std::span<ScoredArch const>(all),
                                [](ScoredArch const& s) { return as_minimization(s.point); });
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

/// Offline stand-in for a hardware-aware benchmark table. Every parameter is
/// explicit so that a serialized model re-synthesizes the same store.
struct SyntheticModel {
    std::uint64_t seed = 0;
    std::string dataset = "cifar10";
    std::vector<std::string> devices = default_devices();

    // Latency: base[d] + sum_e op_cost[d][op_e] * (1 + edge_jitter[d][e][op_e]) + cell jitter in [0, jitter_ms).
    std::vector<double> base_latency;
    std::vector<std::array<double, kOpCount>> op_cost;
    std::vector<std::array<std::array<double, kOpCount>, kEdgeCount>> edge_jitter;
    double jitter_ms = 0.0;

    // Accuracy: 10 + 85 * sigmoid((sum_e op_weight[op_e] * edge_scale[e]
    //           + sum_{consecutive path edges} interaction[op_a][op_b] - center) / spread) + noise.
    std::array<double, kOpCount> op_weight{};
    std::array<double, kEdgeCount> edge_scale{};
    std::array<std::array<double, kOpCount>, kOpCount> interaction{};
    double center = 0.0;
    double spread = 1.0;
    double noise = 0.0; // accuracy noise sd, percentage points

    // Proxies: feature j = transform_j(accuracy + proxy_noise_scale * proxy_noise[j] * N(0,1)).
    std::array<double, kProxyCount> proxy_noise{};
    double proxy_noise_scale = 1.0;

    void validate() const
    {
        if (devices.empty()) { throw ConfigError("synthetic model needs at least one device"); }
        if (base_latency.size() != devices.size() || op_cost.size() != devices.size()
            || edge_jitter.size() != devices.size()) {
            throw ConfigError("synthetic model tables do not match the device list");
        }
        for (std::size_t d = 0; d < devices.size(); ++d) {
            if (!(base_latency[d] > 0.0)) { throw ConfigError("synthetic base latency must be positive"); }
            for (auto c : op_cost[d]) {
                if (c < 0.0) { throw ConfigError("synthetic op costs must be >= 0"); }
            }
            for (auto const& row : edge_jitter[d]) {
                for (auto j : row) {
                    if (j < 0.0) { throw ConfigError("synthetic edge jitter must be >= 0"); }
                }
            }
        }
        if (noise < 0.0 || jitter_ms < 0.0 || proxy_noise_scale < 0.0) {
            throw ConfigError("synthetic noise amplitudes must be >= 0");
        }
        for (auto p : proxy_noise) {
            if (p < 0.0) { throw ConfigError("synthetic proxy noise levels must be >= 0"); }
        }
        if (!(spread > 0.0)) { throw ConfigError("synthetic accuracy spread must be positive"); }
    }

    /// Default model: all tables derived from `seed`.
    static auto from_seed(std::uint64_t seed) -> SyntheticModel
    {
        SyntheticModel m;
        m.seed = seed;
        Rng rng(derive_seed(seed, 0xA11));
        auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uniform_unit(rng); };

        // ms per op; none costs nothing, 3x3 conv dominates.
        constexpr std::array<double, kOpCount> nominal{0.0, 0.08, 0.55, 1.6, 0.3};
        for (std::size_t d = 0; d < m.devices.size(); ++d) {
            double const scale = uniform(0.5, 2.5);
            m.base_latency.push_back(scale * uniform(0.6, 1.2));
            std::array<double, kOpCount> cost{};
            for (std::size_t o = 0; o < kOpCount; ++o) { cost[o] = nominal[o] * scale * uniform(0.7, 1.3); }
            m.op_cost.push_back(cost);
            std::array<std::array<double, kOpCount>, kEdgeCount> jit{};
            for (auto& row : jit) {
                for (std::size_t o = 0; o < kOpCount; ++o) { row[o] = uniform(0.0, 0.25); }
            }
            m.edge_jitter.push_back(jit);
        }
        m.jitter_ms = 0.02;

        m.op_weight = {0.0, 0.9, 1.5, 2.4, 0.55};
        for (auto& s : m.edge_scale) { s = uniform(0.75, 1.25); }
        for (auto& row : m.interaction) {
            for (auto& w : row) { w = 0.45 * standard_normal(rng); }
        }
        m.center = 5.0;
        m.spread = 2.2;
        m.noise = 0.6;
        for (std::size_t j = 0; j < kProxyCount; ++j) { m.proxy_noise[j] = uniform(14.0, 32.0); }
        m.proxy_noise[0] = 20.0;
        m.proxy_noise_scale = 1.0;
        return m;
    }
};

namespace detail {

// Consecutive edge pairs along the cell's input-to-output paths.
inline constexpr std::array<std::array<std::size_t, 2>, 4> kPathPairs{{{0, 4}, {1, 5}, {0, 2}, {2, 5}}};

/// True when some input-to-output path avoids `none` edges.
constexpr auto is_connected(ArchCell const& c) noexcept -> bool
{
    auto on = [&](std::size_t e) { return c.edges[e] != OpKind::none; };
    return on(3) || (on(0) && on(4)) || (on(1) && on(5)) || (on(0) && on(2) && on(5));
}

/// Strictly increasing transform assigned to proxy feature j.
inline auto proxy_transform(std::size_t j, double x) -> double
{
    switch (j % 5) {
    case 0: return 0.8 * x + 3.0;
    case 1: return std::exp(x / 25.0);
    case 2: return std::atan((x - 50.0) / 15.0);
    case 3: return x * x * x / 1000.0 + x;
    default: return 1.0 / (1.0 + std::exp(-(x - 55.0) / 12.0));
    }
}

} // namespace detail

/// Accuracy of `cell` under `model` before noise.
inline auto synthetic_clean_accuracy(SyntheticModel const& m, ArchCell const& cell) -> double
{
    if (!detail::is_connected(cell)) { return 10.0; }
    double raw = 0.0;
    for (std::size_t e = 0; e < kEdgeCount; ++e) { raw += m.op_weight[op_id(cell.edges[e])] * m.edge_scale[e]; }
    for (auto const& [a, b] : detail::kPathPairs) {
        raw += m.interaction[op_id(cell.edges[a])][op_id(cell.edges[b])];
    }
    return 10.0 + 85.0 / (1.0 + std::exp(-(raw - m.center) / m.spread));
}

inline auto synthetic_latency(SyntheticModel const& m, ArchCell const& cell, std::size_t device, double jitter_unit)
    -> double
{
    double lat = m.base_latency[device];
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        auto const o = op_id(cell.edges[e]);
        lat += m.op_cost[device][o] * (1.0 + m.edge_jitter[device][e][o]);
    }
    return lat + m.jitter_ms * jitter_unit;
}

/// One record per cell of the space, in enumeration order.
inline auto synthesize(SyntheticModel const& m) -> BenchmarkStore
{
    m.validate();
    BenchmarkStore store(m.devices);
    for (auto const& cell : enumerate_space()) {
        Rng rng(derive_seed(m.seed, cell.index() + 1));
        BenchmarkRecord rec;
        rec.cell = cell;
        rec.arch = encode(cell);
        rec.dataset = m.dataset;
        double const noise = m.noise * standard_normal(rng);
        rec.accuracy = std::clamp(synthetic_clean_accuracy(m, cell) + noise, 10.0, 95.0);
        for (std::size_t d = 0; d < m.devices.size(); ++d) {
            rec.latency.push_back(synthetic_latency(m, cell, d, uniform_unit(rng)));
        }
        ProxyVector px{};
        for (std::size_t j = 0; j < kProxyCount; ++j) {
            double const eps = standard_normal(rng);
            px[j] = detail::proxy_transform(j, rec.accuracy + m.proxy_noise_scale * m.proxy_noise[j] * eps);
        }
        rec.proxies = px;
        store.add(std::move(rec));
    }
    return store;
}

} // namespace pelnas
