#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "pelnas/benchmark_store.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/objectives.hpp"
#include "pelnas/rng.hpp"
#include "pelnas/text_util.hpp"

namespace pelnas {

enum class PredictorKind { oracle, rank_ensemble, fitted };

constexpr auto to_string(PredictorKind k) noexcept -> std::string_view
{
    switch (k) {
    case PredictorKind::oracle: return "oracle";
    case PredictorKind::rank_ensemble: return "rank_ensemble";
    case PredictorKind::fitted: return "fitted";
    }
    return "?";
}

inline auto parse_predictor_kind(std::string_view s) -> PredictorKind
{
    if (s == "oracle") { return PredictorKind::oracle; }
    if (s == "rank_ensemble") { return PredictorKind::rank_ensemble; }
    if (s == "fitted") { return PredictorKind::fitted; }
    throw ConfigError(fmt::format("unknown predictor kind '{}' (oracle|rank_ensemble|fitted)", s));
}

struct FitReport {
    PredictorKind kind = PredictorKind::oracle;
    std::string method;
    std::size_t train_size = 0;
    std::size_t holdout_size = 0;
    double spearman_holdout = 0.0;
    std::vector<double> weights; // fitted kind only

    friend auto operator==(FitReport const&, FitReport const&) -> bool = default;

    [[nodiscard]] auto to_kv() const -> std::string
    {
        std::string w;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            w += (i == 0 ? "" : ",") + text::format_double(weights[i]);
        }
        return fmt::format("kind={}\nmethod={}\ntrain_size={}\nholdout_size={}\nspearman_holdout={}\nweights={}\n",
                           to_string(kind), method, train_size, holdout_size, spearman_holdout, w);
    }
};

/// Piecewise-linear empirical CDF over the distinct training values of one
/// feature, extended linearly past both ends so it stays strictly increasing.
struct RankNormalizer {
    std::vector<double> knots; // sorted, distinct

    static auto fit(std::vector<double> values) -> RankNormalizer
    {
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        return {std::move(values)};
    }

    [[nodiscard]] auto operator()(double x) const -> double
    {
        auto const m = knots.size();
        if (m == 0) { return 0.0; }
        if (m == 1) { return 0.5; }
        auto const step = 1.0 / static_cast<double>(m - 1);
        auto segment = [&](std::size_t i) { // value on segment [i, i+1]
            return (static_cast<double>(i) + (x - knots[i]) / (knots[i + 1] - knots[i])) * step;
        };
        if (x <= knots.front()) { return segment(0); }
        if (x >= knots.back()) { return segment(m - 2); }
        auto const hi = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
        return segment(hi - 1);
    }
};

/// Frozen, immutable performance surrogate. Scores are pure functions of a
/// benchmark record.
class Predictor {
public:
    static auto oracle() -> Predictor
    {
        Predictor p;
        p.kind_ = PredictorKind::oracle;
        return p;
    }

    /// Mean per-feature rank (scaled to [0, 1]) against every record of `dataset`.
    static auto rank_ensemble(BenchmarkStore const& store, std::string_view dataset) -> Predictor
    {
        if (!store.has_proxies()) { throw DataError("rank_ensemble predictor needs proxy features in the store"); }
        Predictor p;
        p.kind_ = PredictorKind::rank_ensemble;
        p.columns_.assign(kProxyCount, {});
        for (auto const& r : store.records()) {
            if (r.dataset != dataset) { continue; }
            for (std::size_t j = 0; j < kProxyCount; ++j) { p.columns_[j].push_back((*r.proxies)[j]); }
        }
        if (p.columns_[0].empty()) { throw DataError(fmt::format("store has no records for dataset '{}'", dataset)); }
        for (auto& c : p.columns_) { std::sort(c.begin(), c.end()); }
        return p;
    }

    /// Assembles a fitted predictor from explicit parameters.
    static auto fitted(std::vector<RankNormalizer> normalizers, std::vector<double> weights, double bias,
                       double lambda = 0.0, std::vector<std::size_t> training = {}) -> Predictor
    {
        if (normalizers.size() != kProxyCount || weights.size() != kProxyCount) {
            throw ConfigError(fmt::format("fitted predictor needs {} normalizers and weights", kProxyCount));
        }
        Predictor p;
        p.kind_ = PredictorKind::fitted;
        p.normalizers_ = std::move(normalizers);
        p.weights_ = std::move(weights);
        p.bias_ = bias;
        p.lambda_ = lambda;
        p.training_ = std::move(training);
        std::sort(p.training_.begin(), p.training_.end());
        return p;
    }

    [[nodiscard]] auto kind() const noexcept -> PredictorKind { return kind_; }
    [[nodiscard]] auto weights() const noexcept -> std::vector<double> const& { return weights_; }
    [[nodiscard]] auto bias() const noexcept -> double { return bias_; }
    /// Cell indices used for fitting; empty for the other kinds.
    [[nodiscard]] auto training_cells() const noexcept -> std::vector<std::size_t> const& { return training_; }

    [[nodiscard]] auto score(BenchmarkRecord const& rec) const -> double
    {
        switch (kind_) {
        case PredictorKind::oracle: return rec.accuracy;
        case PredictorKind::rank_ensemble: return ensemble_score(features(rec));
        case PredictorKind::fitted: return fitted_score(features(rec));
        }
        return 0.0;
    }

    /// Score of a stored architecture; NotFoundError when absent.
    [[nodiscard]] auto predict(BenchmarkStore const& store, std::string_view arch, std::string_view dataset) const
        -> double
    {
        return score(store.record(arch, dataset));
    }

    // -- persistence ------------------------------------------------------

    [[nodiscard]] auto to_json() const -> nlohmann::ordered_json
    {
        nlohmann::ordered_json j;
        j["format"] = "pelnas-predictor";
        j["version"] = 1;
        j["kind"] = std::string(to_string(kind_));
        if (kind_ == PredictorKind::rank_ensemble) { j["columns"] = columns_; }
        if (kind_ == PredictorKind::fitted) {
            j["method"] = "ridge on rank-normalized proxy features";
            j["lambda"] = lambda_;
            j["bias"] = bias_;
            j["weights"] = weights_;
            auto knots = nlohmann::ordered_json::array();
            for (auto const& n : normalizers_) { knots.push_back(n.knots); }
            j["knots"] = knots;
            j["training_cells"] = training_;
        }
        return j;
    }

    static auto from_json(nlohmann::json const& j) -> Predictor
    {
        try {
            if (j.at("format").get<std::string>() != "pelnas-predictor" || j.at("version").get<int>() != 1) {
                throw ConfigError("not a version-1 predictor file");
            }
            auto const kind = parse_predictor_kind(j.at("kind").get<std::string>());
            if (kind == PredictorKind::oracle) { return oracle(); }
            if (kind == PredictorKind::rank_ensemble) {
                Predictor p;
                p.kind_ = kind;
                p.columns_ = j.at("columns").get<std::vector<std::vector<double>>>();
                if (p.columns_.size() != kProxyCount) { throw ConfigError("predictor file has the wrong column count"); }
                return p;
            }
            std::vector<RankNormalizer> norms;
            for (auto const& k : j.at("knots")) { norms.push_back({k.get<std::vector<double>>()}); }
            return fitted(std::move(norms), j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(),
                          j.at("lambda").get<double>(), j.at("training_cells").get<std::vector<std::size_t>>());
        } catch (nlohmann::json::exception const& e) {
            throw ConfigError(fmt::format("invalid predictor file: {}", e.what()));
        }
    }

    void save(std::filesystem::path const& path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) { throw DataError(fmt::format("cannot write predictor file '{}'", path.string())); }
        out << to_json().dump() << '\n';
    }

    static auto load(std::filesystem::path const& path) -> Predictor
    {
        std::ifstream in(path);
        if (!in) { throw ConfigError(fmt::format("cannot open predictor file '{}'", path.string())); }
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (nlohmann::json::parse_error const& e) {
            throw ConfigError(fmt::format("invalid predictor file '{}': {}", path.string(), e.what()));
        }
    }

private:
    static auto features(BenchmarkRecord const& rec) -> ProxyVector const&
    {
        if (!rec.proxies) { throw DataError(fmt::format("record {} has no proxy features", rec.arch)); }
        return *rec.proxies;
    }

    [[nodiscard]] auto ensemble_score(ProxyVector const& x) const -> double
    {
        double total = 0.0;
        for (std::size_t j = 0; j < kProxyCount; ++j) {
            auto const& col = columns_[j];
            auto const lo = std::lower_bound(col.begin(), col.end(), x[j]) - col.begin();
            auto const hi = std::upper_bound(col.begin(), col.end(), x[j]) - col.begin();
            total += (static_cast<double>(lo + hi) + 1.0) / (2.0 * static_cast<double>(col.size()));
        }
        return total / static_cast<double>(kProxyCount);
    }

    [[nodiscard]] auto fitted_score(ProxyVector const& x) const -> double
    {
        double s = bias_;
        for (std::size_t j = 0; j < kProxyCount; ++j) { s += weights_[j] * normalizers_[j](x[j]); }
        return s;
    }

    PredictorKind kind_ = PredictorKind::oracle;
    std::vector<std::vector<double>> columns_;
    std::vector<RankNormalizer> normalizers_;
    std::vector<double> weights_;
    double bias_ = 0.0;
    double lambda_ = 0.0;
    std::vector<std::size_t> training_;
};

namespace detail {

inline auto dataset_records(BenchmarkStore const& store, std::string_view dataset)
    -> std::vector<BenchmarkRecord const*>
{
    std::vector<BenchmarkRecord const*> rows;
    for (auto const& r : store.records()) {
        if (r.dataset == dataset) { rows.push_back(&r); }
    }
    std::sort(rows.begin(), rows.end(), [](auto const* a, auto const* b) { return a->cell.index() < b->cell.index(); });
    return rows;
}

inline auto holdout_spearman(Predictor const& p, std::span<BenchmarkRecord const* const> rows) -> double
{
    std::vector<double> pred;
    std::vector<double> truth;
    for (auto const* r : rows) {
        pred.push_back(p.score(*r));
        truth.push_back(r->accuracy);
    }
    return spearman(pred, truth);
}

} // namespace detail

struct FitResult {
    Predictor predictor;
    FitReport report;
};

inline constexpr double kDefaultRidgeLambda = 1.0;

/// Ridge regression of accuracy on rank-normalized proxies over `sample_size`
/// records drawn with `seed`; holdout Spearman on a disjoint sample of the
/// same size (or whatever remains).
inline auto fit(BenchmarkStore const& store, std::string_view dataset, std::size_t sample_size, std::uint64_t seed,
                double lambda = kDefaultRidgeLambda) -> FitResult
{
    if (!store.has_proxies()) { throw DataError("fitting a predictor needs proxy features in the store"); }
    auto rows = detail::dataset_records(store, dataset);
    if (sample_size < 2 || sample_size > rows.size()) {
        throw ConfigError(fmt::format("sample size {} must be in [2, {}]", sample_size, rows.size()));
    }
    Rng rng(derive_seed(seed, 0xF17));
    shuffle(rows, rng);
    std::vector<BenchmarkRecord const*> train(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(sample_size));
    auto const holdout_end = std::min(rows.size(), 2 * sample_size);
    std::vector<BenchmarkRecord const*> holdout(rows.begin() + static_cast<std::ptrdiff_t>(sample_size),
                                                rows.begin() + static_cast<std::ptrdiff_t>(holdout_end));

    std::vector<RankNormalizer> norms;
    for (std::size_t j = 0; j < kProxyCount; ++j) {
        std::vector<double> v;
        for (auto const* r : train) { v.push_back((*r->proxies)[j]); }
        norms.push_back(RankNormalizer::fit(std::move(v)));
    }

    auto const n = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kProxyCount));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const& rec = *train[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < kProxyCount; ++j) { x(i, static_cast<Eigen::Index>(j)) = norms[j]((*rec.proxies)[j]); }
        y(i) = rec.accuracy;
    }
    Eigen::RowVectorXd const xm = x.colwise().mean();
    double const ym = y.mean();
    Eigen::MatrixXd const xc = x.rowwise() - xm;
    Eigen::VectorXd const yc = y.array() - ym;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    Eigen::VectorXd const w = gram.ldlt().solve(xc.transpose() * yc);
    double const b = ym - xm.dot(w);

    std::vector<double> weights(w.data(), w.data() + w.size());
    std::vector<std::size_t> cells;
    for (auto const* r : train) { cells.push_back(r->cell.index()); }
    auto predictor = Predictor::fitted(std::move(norms), weights, b, lambda, std::move(cells));

    FitReport report;
    report.kind = PredictorKind::fitted;
    report.method = "ridge on rank-normalized proxy features";
    report.train_size = train.size();
    report.holdout_size = holdout.size();
    report.weights = std::move(weights);
    if (holdout.size() >= 2) { report.spearman_holdout = detail::holdout_spearman(predictor, holdout); }
    return {std::move(predictor), std::move(report)};
}

inline constexpr std::size_t kMinHoldout = 30;

/// Spearman between predictions and true accuracy on `holdout_size` records
/// drawn with `holdout_seed`, excluding any record the predictor was fit on.
inline auto evaluate_predictor(Predictor const& p, BenchmarkStore const& store, std::string_view dataset,
                               std::uint64_t holdout_seed, std::size_t holdout_size = 1000) -> FitReport
{
    auto rows = detail::dataset_records(store, dataset);
    auto const& trained = p.training_cells();
    std::erase_if(rows, [&](auto const* r) { return std::binary_search(trained.begin(), trained.end(), r->cell.index()); });
    Rng rng(derive_seed(holdout_seed, 0xE7A1));
    shuffle(rows, rng);
    rows.resize(std::min(rows.size(), holdout_size));
    if (rows.size() < kMinHoldout) {
        throw DataError(fmt::format("holdout of {} records is too small (need at least {})", rows.size(), kMinHoldout));
    }
    FitReport report;
    report.kind = p.kind();
    report.method = p.kind() == PredictorKind::fitted ? "ridge on rank-normalized proxy features"
                                                      : std::string(to_string(p.kind()));
    report.train_size = trained.size();
    report.holdout_size = rows.size();
    report.weights = p.weights();
    report.spearman_holdout = detail::holdout_spearman(p, rows);
    return report;
}

} // namespace pelnas
