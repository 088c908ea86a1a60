#pragma once

/**
 * @file evaluation.hpp
 * @brief Scoring, seeded Monte Carlo replications and regret certificates.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aggfc/aggregation.hpp"
#include "aggfc/predictors.hpp"
#include "aggfc/tvar.hpp"

namespace aggfc::evaluation {

using aggregation::Aggregator;
using aggregation::EtaCase;
using aggregation::ModelConstants;
using aggregation::Strategy;

/// L_T = (1/T) sum_t ((xhat_t - x_t)^2 - sigma^2(t/T)).
[[nodiscard]] inline double shifted_loss(std::span<const double> predictions, std::span<const double> x,
                                         std::span<const double> sigma_trace) {
    if (predictions.size() != x.size() || x.size() != sigma_trace.size())
        throw std::invalid_argument("shifted_loss: sequences differ in length");
    if (x.empty()) throw std::invalid_argument("shifted_loss: empty sequence");
    double s = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double e = predictions[t] - x[t];
        s += e * e - sigma_trace[t] * sigma_trace[t];
    }
    return s / static_cast<double>(x.size());
}

/// Running form of shifted_loss.
class ShiftedLossAccumulator {
public:
    void add(double prediction, double x, double sigma) {
        const double e = prediction - x;
        sum_ += e * e - sigma * sigma;
        ++n_;
    }
    [[nodiscard]] double value() const { return n_ == 0 ? 0.0 : sum_ / static_cast<double>(n_); }

private:
    double sum_ = 0.0;
    std::size_t n_ = 0;
};

struct FiveNumberSummary {
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;

    [[nodiscard]] double iqr() const { return q75 - q25; }
};

/// Linear-interpolation quantile of sorted data, q in [0,1].
[[nodiscard]] inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return w == 0.0 ? sorted[lo] : sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

[[nodiscard]] inline FiveNumberSummary summarize(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, 0.0), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
            quantile_sorted(values, 0.75), quantile_sorted(values, 1.0)};
}

// ---------------------------------------------------------------------------
// Deterministic regret certificates

/**
 * @brief Streaming evaluation of both sides of the deterministic regret
 * inequalities for an aggregated sequence.
 *
 * Strategy 2:
 *   (1/T) sum (xhat_t - x_t)^2 <= min_i (1/T) sum (xhat_t^(i) - x_t)^2
 *                                 + log N / (T eta) + (1/T) sum (y_t^2 - 1/(2 eta))_+
 * Strategy 1:
 *   (1/T) sum (xhat_t - x_t)^2 <= inf_nu (1/T) sum (xhat_t^[nu] - x_t)^2
 *                                 + log N / (T eta) + (2 eta / T) sum y_t^4
 * with y_t = |x_t| + max_i |xhat_t^(i)|. The infimum over the simplex is
 * replaced by a minimum over its vertices and a set of random interior
 * points, which can only enlarge the right-hand side's first term.
 */
class RegretTracker {
public:
    RegretTracker(std::size_t n, Strategy strategy, double eta, std::size_t grid_points = 100,
                  std::uint64_t grid_seed = 0x5eed)
        : n_(n), strategy_(strategy), eta_(eta) {
        if (n == 0) throw std::domain_error("RegretTracker: N must be >= 1");
        // vertices first, then Dirichlet(1,...,1) draws
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> v(n, 0.0);
            v[i] = 1.0;
            points_.push_back(std::move(v));
        }
        if (strategy == Strategy::gradient && n > 1) {
            std::mt19937_64 rng(grid_seed);
            std::exponential_distribution<double> expo(1.0);
            for (std::size_t g = 0; g < grid_points; ++g) {
                std::vector<double> v(n);
                double s = 0.0;
                for (double& w : v) s += (w = expo(rng));
                for (double& w : v) w /= s;
                points_.push_back(std::move(v));
            }
        }
        point_loss_.assign(points_.size(), 0.0);
    }

    void observe(std::span<const double> predictions, double aggregate, double x) {
        if (predictions.size() != n_) throw std::invalid_argument("RegretTracker: wrong number of predictions");
        double max_abs = 0.0;
        for (double p : predictions) max_abs = std::max(max_abs, std::abs(p));
        const double y = std::abs(x) + max_abs;
        const double e = aggregate - x;
        agg_loss_ += e * e;
        for (std::size_t k = 0; k < points_.size(); ++k) {
            double comb = 0.0;
            for (std::size_t i = 0; i < n_; ++i) comb += points_[k][i] * predictions[i];
            point_loss_[k] += (comb - x) * (comb - x);
        }
        if (strategy_ == Strategy::gradient) {
            slack_ += 2.0 * eta_ * y * y * y * y;
        } else {
            slack_ += std::max(y * y - 1.0 / (2.0 * eta_), 0.0);
        }
        ++T_;
    }

    [[nodiscard]] std::size_t steps() const { return T_; }

    [[nodiscard]] double lhs() const { return agg_loss_ / static_cast<double>(T_); }

    [[nodiscard]] double rhs() const {
        const double Td = static_cast<double>(T_);
        const std::size_t candidates = strategy_ == Strategy::gradient ? points_.size() : n_;
        const double best = *std::min_element(point_loss_.begin(),
                                              point_loss_.begin() + static_cast<std::ptrdiff_t>(candidates));
        return best / Td + std::log(static_cast<double>(n_)) / (Td * eta_) + slack_ / Td;
    }

    /// rhs - lhs; nonnegative whenever the inequality holds.
    [[nodiscard]] double margin() const {
        if (T_ == 0) return 0.0;
        return rhs() - lhs();
    }

private:
    std::size_t n_;
    Strategy strategy_;
    double eta_;
    std::vector<std::vector<double>> points_;
    std::vector<double> point_loss_;
    double agg_loss_ = 0.0;
    double slack_ = 0.0;
    std::size_t T_ = 0;
};

/// Predictions of N experts and the observed sequence.
struct RegretInstance {
    std::vector<std::vector<double>> predictions;  // [t][i]
    std::vector<double> x;

    [[nodiscard]] std::size_t horizon() const { return x.size(); }
    [[nodiscard]] std::size_t experts() const { return predictions.empty() ? 0 : predictions.front().size(); }
};

/// Runs the aggregation over the instance and returns rhs - lhs of the regret bound.
[[nodiscard]] inline double check_regret_lemma41(Strategy strategy, double eta, const RegretInstance& inst,
                                                 std::size_t grid_points = 100, std::uint64_t grid_seed = 0x5eed) {
    if (inst.predictions.size() != inst.x.size())
        throw std::invalid_argument("check_regret_lemma41: history lengths differ");
    if (inst.x.empty()) throw std::invalid_argument("check_regret_lemma41: empty instance");
    const std::size_t n = inst.experts();
    Aggregator agg(n, strategy, eta);
    RegretTracker tracker(n, strategy, eta, grid_points, grid_seed);
    for (std::size_t t = 0; t < inst.horizon(); ++t) {
        const double a = agg.predict(inst.predictions[t]);
        tracker.observe(inst.predictions[t], a, inst.x[t]);
        agg.update(inst.x[t]);
    }
    return tracker.margin();
}

/// Slack used by check_lemma_a2.
inline constexpr double kGaussianMomentSlack = 1e-12;

/// exp(-(E x)^2 + (a^2 - 1/2)_+) - E exp(-x^2) for P = sum_k p_k delta_{x_k}.
[[nodiscard]] inline double lemma_a2_margin(std::span<const double> support, std::span<const double> probabilities,
                                            double a) {
    if (support.size() != probabilities.size() || support.empty())
        throw std::invalid_argument("check_lemma_a2: support and probabilities must be nonempty and equal length");
    if (!(a > 0.0)) throw std::domain_error("check_lemma_a2: a must be positive");
    double lhs = 0.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) {
        const double x = support[k];
        if (std::abs(x) > a) throw std::domain_error("check_lemma_a2: support point outside [-a, a]");
        if (probabilities[k] < 0.0) throw std::domain_error("check_lemma_a2: negative probability");
        lhs += probabilities[k] * std::exp(-x * x);
        mean += probabilities[k] * x;
    }
    const double rhs = std::exp(-mean * mean + std::max(a * a - 0.5, 0.0));
    return rhs - lhs;
}

[[nodiscard]] inline bool check_lemma_a2(std::span<const double> support, std::span<const double> probabilities,
                                         double a) {
    return lemma_a2_margin(support, probabilities, a) >= -kGaussianMomentSlack;
}

/**
 * @brief K_bar = max over t in [1,T] and j <= j_max of delta1^-j |a_{t,T}(j)|.
 *
 * t_stride > 1 subsamples t.
 */
[[nodiscard]] inline double check_coefficient_decay(const tvar::TvarParams& params, std::size_t T, double delta1,
                                                    std::size_t j_max, std::size_t t_stride = 1) {
    if (!(delta1 > params.delta() && delta1 < 1.0))
        throw std::domain_error("check_coefficient_decay: delta1 must lie in (delta, 1)");
    if (t_stride == 0) t_stride = 1;
    double kbar = 0.0;
    for (std::size_t t = 1; t <= T; t += t_stride) {
        const auto a = tvar::impulse_coefficients(params, T, static_cast<std::ptrdiff_t>(t), j_max);
        double scale = 1.0;
        for (std::size_t j = 0; j <= j_max; ++j) {
            kbar = std::max(kbar, std::abs(a[j]) * scale);
            scale /= delta1;
        }
    }
    return kbar;
}

/// sup_t sum_j |a_{t,T}(j)| sigma((t-j)/T), truncated at j_max.
[[nodiscard]] inline double coefficient_mass(const tvar::TvarParams& params, std::size_t T, std::size_t j_max,
                                             std::size_t t_stride = 1) {
    if (t_stride == 0) t_stride = 1;
    double best = 0.0;
    const double Td = static_cast<double>(T);
    for (std::size_t t = 1; t <= T; t += t_stride) {
        const auto a = tvar::impulse_coefficients(params, T, static_cast<std::ptrdiff_t>(t), j_max);
        double s = 0.0;
        for (std::size_t j = 0; j <= j_max; ++j) {
            s += std::abs(a[j]) * params.sigma_at((static_cast<double>(t) - static_cast<double>(j)) / Td);
        }
        best = std::max(best, s);
    }
    return best;
}

/**
 * @brief Model constants for a TVAR configuration. A_* is taken from the
 * impulse-coefficient bound K_bar sigma_+ / (1 - delta1), delta1 = (1+delta)/2;
 * L_* is the predictors' l1 clip.
 */
[[nodiscard]] inline ModelConstants estimate_constants(const tvar::TvarParams& params, std::size_t T,
                                                       const tvar::InnovationSpec& innovations, double clip,
                                                       double zeta = 1.0) {
    const double delta1 = 0.5 * (1.0 + params.delta());
    const auto j_max = static_cast<std::size_t>(std::ceil(std::log(1e-12) / std::log(delta1)));
    const double kbar = check_coefficient_decay(params, T, delta1, std::min<std::size_t>(j_max, 2000),
                                                std::max<std::size_t>(1, T / 64));
    ModelConstants k;
    k.sigma_plus = params.sigma_plus() > 0.0 ? params.sigma_plus() : 1.0;
    k.A_star = kbar * k.sigma_plus / (1.0 - delta1);
    k.a_star = std::min(kbar * k.sigma_plus, k.A_star);
    k.L_star = clip;
    k.p = 4.0;
    k.m_p = innovations.absolute_moment(4.0);
    k.zeta = zeta;
    k.phi_zeta = innovations.exp_moment(zeta);
    return k;
}

// ---------------------------------------------------------------------------
// Monte Carlo experiment

enum class EtaMode { corollary, adaptive, manual };

[[nodiscard]] inline std::string to_string(EtaMode m) {
    switch (m) {
        case EtaMode::corollary: return "corollary";
        case EtaMode::adaptive: return "adaptive";
        case EtaMode::manual: return "manual";
    }
    return "unknown";
}

struct ExperimentConfig {
    tvar::TvarParams params;
    std::size_t T = 1024;
    std::size_t replications = 100;
    std::uint64_t base_seed = 1;
    tvar::InnovationSpec innovations;
    double beta_0 = 0.5;
    double c_mu = 0.5;
    double eps = 1.0;
    double clip = 8.0;
    std::vector<Strategy> strategies{Strategy::gradient, Strategy::loss};
    EtaMode eta_mode = EtaMode::adaptive;
    double eta_manual = 0.0;
    /// Learning-rate case used for Strategy 2 (ii or iii); Strategy 1 always uses case i.
    EtaCase strategy2_case = EtaCase::iii;
    std::optional<ModelConstants> constants;
    std::size_t jobs = 1;
    /// Tracks the regret certificate on every replication.
    bool certify = false;
    /// Keeps the weight trajectory of replication 0.
    bool record_weights = false;

    [[nodiscard]] std::size_t order() const { return params.order(); }

    void validate() const {
        if (params.order() == 0) throw std::invalid_argument("ExperimentConfig: parameter paths are missing");
        if (replications < 1) throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
        if (T < 2 * order()) throw std::invalid_argument("ExperimentConfig: T must be >= 2d");
        if (T < 3) throw std::invalid_argument("ExperimentConfig: T must be >= 3");
        if (strategies.empty()) throw std::invalid_argument("ExperimentConfig: no aggregation strategy selected");
        if (eta_mode == EtaMode::manual && !(eta_manual > 0.0))
            throw std::invalid_argument("ExperimentConfig: manual eta must be positive");
        if (strategy2_case == EtaCase::i)
            throw std::invalid_argument("ExperimentConfig: Strategy 2 learning rate must use case ii or iii");
    }
};

/// Learning rate used by the given strategy under the configuration.
[[nodiscard]] inline double resolve_eta(const ExperimentConfig& cfg, Strategy s, std::size_t N) {
    switch (cfg.eta_mode) {
        case EtaMode::manual: return cfg.eta_manual;
        case EtaMode::adaptive: {
            const double sp = cfg.params.sigma_plus() > 0.0 ? cfg.params.sigma_plus() : 1.0;
            const double p = cfg.constants ? cfg.constants->p : 4.0;
            return aggregation::eta_adaptive(s == Strategy::gradient ? EtaCase::i : cfg.strategy2_case, sp, cfg.T,
                                             p);
        }
        case EtaMode::corollary: {
            const ModelConstants k =
                cfg.constants ? *cfg.constants : estimate_constants(cfg.params, cfg.T, cfg.innovations, cfg.clip);
            return aggregation::eta_corollary(s == Strategy::gradient ? EtaCase::i : cfg.strategy2_case, k, cfg.T,
                                              N);
        }
    }
    throw std::invalid_argument("resolve_eta: unknown mode");
}

struct ReplicationRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<double> losses;  // aligned with LossReport::predictor_ids
    std::vector<double> regret_margins;  // one per strategy, when certified
    std::optional<std::string> error;

    [[nodiscard]] bool ok() const { return !error.has_value(); }
};

struct WeightTrajectory {
    Strategy strategy = Strategy::gradient;
    std::vector<std::vector<double>> weights;  // weights[t-1] = alpha_t
};

struct LossReport {
    predictors::PredictorBankSpec bank;
    std::vector<std::string> predictor_ids;
    std::vector<Strategy> strategies;
    std::vector<double> etas;  // one per strategy
    std::vector<ReplicationRecord> records;
    std::vector<WeightTrajectory> trajectories;

    [[nodiscard]] std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok(); }));
    }

    /// L_T of one predictor over all successful replications, in replication order.
    [[nodiscard]] std::vector<double> column(std::size_t k) const {
        std::vector<double> v;
        for (const auto& r : records)
            if (r.ok()) v.push_back(r.losses[k]);
        return v;
    }

    [[nodiscard]] std::vector<FiveNumberSummary> summaries() const {
        std::vector<FiveNumberSummary> out;
        for (std::size_t k = 0; k < predictor_ids.size(); ++k) out.push_back(summarize(column(k)));
        return out;
    }

    [[nodiscard]] std::size_t index_of(const std::string& id) const {
        const auto it = std::find(predictor_ids.begin(), predictor_ids.end(), id);
        if (it == predictor_ids.end()) throw std::out_of_range("LossReport: unknown predictor id " + id);
        return static_cast<std::size_t>(it - predictor_ids.begin());
    }
};

[[nodiscard]] inline std::string aggregate_id(Strategy s) { return "agg_strategy" + aggregation::to_string(s); }

[[nodiscard]] inline std::string predictor_id(std::size_t i) { return "nlms_" + std::to_string(i + 1); }

/**
 * @brief One replication: a TVAR path streamed through the NLMS bank and the
 * aggregators. Memory is O(dN) unless weights are recorded.
 */
inline ReplicationRecord run_replication(const ExperimentConfig& cfg, const predictors::PredictorBankSpec& spec,
                                         std::span<const double> etas, std::size_t index,
                                         std::vector<WeightTrajectory>* trajectories = nullptr) {
    ReplicationRecord rec;
    rec.index = index;
    rec.seed = cfg.base_seed + index;
    const std::size_t N = spec.N;
    const std::size_t S = cfg.strategies.size();

    tvar::TvarStream stream(cfg.params, cfg.T, cfg.innovations, rec.seed);
    auto bank = predictors::instantiate(spec);
    std::vector<Aggregator> aggs;
    std::vector<RegretTracker> trackers;
    for (std::size_t k = 0; k < S; ++k) {
        aggs.emplace_back(N, cfg.strategies[k], etas[k]);
        if (cfg.certify) trackers.emplace_back(N, cfg.strategies[k], etas[k]);
    }
    if (trajectories) {
        trajectories->clear();
        for (std::size_t k = 0; k < S; ++k) trajectories->push_back({cfg.strategies[k], {}});
    }
    std::vector<ShiftedLossAccumulator> acc(N + S);
    std::vector<double> preds(N);
    std::vector<double> agg_preds(S);

    while (!stream.done()) {
        for (std::size_t i = 0; i < N; ++i) preds[i] = bank[i].predict();
        for (std::size_t k = 0; k < S; ++k) {
            if (trajectories) {
                const auto w = aggs[k].weights();
                (*trajectories)[k].weights.emplace_back(w.begin(), w.end());
            }
            agg_preds[k] = aggs[k].predict(preds);
        }
        const double x = stream.next();
        const double sigma = stream.last_sigma();
        if (!std::isfinite(x)) throw std::runtime_error("non-finite observation at t = " + std::to_string(stream.time()));
        for (std::size_t i = 0; i < N; ++i) acc[i].add(preds[i], x, sigma);
        for (std::size_t k = 0; k < S; ++k) {
            acc[N + k].add(agg_preds[k], x, sigma);
            if (cfg.certify) trackers[k].observe(preds, agg_preds[k], x);
            aggs[k].update(x);
        }
        for (auto& p : bank) p.update(x);
    }
    for (const auto& a : acc) rec.losses.push_back(a.value());
    for (const auto& tr : trackers) rec.regret_margins.push_back(tr.margin());
    return rec;
}

/**
 * @brief Seeded Monte Carlo replications (seed = base_seed + r). The result
 * does not depend on cfg.jobs.
 */
inline LossReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    LossReport report;
    report.bank = predictors::make_bank_spec(cfg.T, cfg.beta_0, cfg.c_mu, cfg.order(), cfg.eps, cfg.clip);
    report.strategies = cfg.strategies;
    for (std::size_t i = 0; i < report.bank.N; ++i) report.predictor_ids.push_back(predictor_id(i));
    for (Strategy s : cfg.strategies) {
        report.predictor_ids.push_back(aggregate_id(s));
        report.etas.push_back(resolve_eta(cfg, s, report.bank.N));
    }
    report.records.resize(cfg.replications);

    auto work = [&](std::size_t r) {
        try {
            auto* traj = (cfg.record_weights && r == 0) ? &report.trajectories : nullptr;
            report.records[r] = run_replication(cfg, report.bank, report.etas, r, traj);
        } catch (const std::exception& e) {
            report.records[r].index = r;
            report.records[r].seed = cfg.base_seed + r;
            report.records[r].error = e.what();
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.replications));
    if (jobs == 1) {
        for (std::size_t r = 0; r < cfg.replications; ++r) work(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < cfg.replications; r = next++) work(r);
            });
        }
    }
    return report;
}

}  // namespace aggfc::evaluation
