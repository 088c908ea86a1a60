#pragma once

/**
 * @file aggregation.hpp
 * @brief Exponentially weighted convex aggregation of N predictor streams.
 *
 * Strategy 1 (gradient): alpha_{i,t} ~ exp(-2 eta sum_{s<t} (xhat_s - x_s) xhat_s^(i))
 * Strategy 2 (loss):     alpha_{i,t} ~ exp(-eta sum_{s<t} (xhat_s^(i) - x_s)^2)
 *
 * where xhat_s is the aggregate at s. Weights are kept in the log domain and
 * renormalized by subtracting the log-sum-exp after every step.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aggfc::aggregation {

enum class Strategy { gradient = 1, loss = 2 };

[[nodiscard]] inline std::string to_string(Strategy s) { return s == Strategy::gradient ? "1" : "2"; }

/// log(sum exp(v)); -inf for an empty or all -inf input.
[[nodiscard]] inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/**
 * @brief Normalizes log-weights in place so that sum exp = 1.
 *
 * Entries equal to +inf share the mass equally. If every entry is -inf or
 * NaN, returns false and leaves the input untouched.
 */
inline bool normalize_log_weights(std::span<double> lw) {
    std::size_t n_pos_inf = 0;
    bool any_usable = false;
    for (double v : lw) {
        if (v == std::numeric_limits<double>::infinity()) ++n_pos_inf;
        if (!std::isnan(v) && v != -std::numeric_limits<double>::infinity()) any_usable = true;
    }
    if (!any_usable) return false;
    if (n_pos_inf > 0) {
        const double share = -std::log(static_cast<double>(n_pos_inf));
        for (double& v : lw) v = (v == std::numeric_limits<double>::infinity()) ? share : -std::numeric_limits<double>::infinity();
        return true;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (double v : lw)
        if (!std::isnan(v)) m = std::max(m, v);
    double s = 0.0;
    for (double v : lw)
        if (!std::isnan(v)) s += std::exp(v - m);
    const double log_s = std::log(s);
    for (double& v : lw) v = std::isnan(v) ? -std::numeric_limits<double>::infinity() : (v - m) - log_s;
    return true;
}

/// Per-step log-weight increment of predictor i.
[[nodiscard]] inline double log_weight_increment(Strategy strategy, double eta, double prediction, double aggregate,
                                                 double x) {
    if (strategy == Strategy::gradient) return -2.0 * eta * (aggregate - x) * prediction;
    const double r = prediction - x;
    return -eta * r * r;
}

/**
 * @brief Online aggregation state.
 *
 * Two-phase protocol per step: predict(predictions) returns the aggregate
 * and caches what update(x_t) needs; update before predict throws
 * std::logic_error.
 */
class Aggregator {
public:
    Aggregator(std::size_t n, Strategy strategy, double eta) : strategy_(strategy), eta_(eta) {
        if (n == 0) throw std::domain_error("Aggregator: N must be >= 1");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw std::domain_error("Aggregator: eta must be positive and finite");
        log_weights_.assign(n, -std::log(static_cast<double>(n)));
        weights_.assign(n, 1.0 / static_cast<double>(n));
        last_predictions_.assign(n, 0.0);
        scratch_.assign(n, 0.0);
    }

    [[nodiscard]] std::size_t size() const { return weights_.size(); }
    [[nodiscard]] Strategy strategy() const { return strategy_; }
    [[nodiscard]] double eta() const { return eta_; }
    /// Number of completed updates; weights in effect are alpha_{., step()+1}.
    [[nodiscard]] std::size_t step() const { return step_; }
    [[nodiscard]] std::span<const double> weights() const { return weights_; }
    [[nodiscard]] std::span<const double> log_weights() const { return log_weights_; }
    [[nodiscard]] double last_aggregate() const { return last_aggregate_; }

    double predict(std::span<const double> predictions) {
        if (predictions.size() != size())
            throw std::invalid_argument("Aggregator::predict: expected " + std::to_string(size()) +
                                        " predictions, got " + std::to_string(predictions.size()));
        double agg = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            // zero weight must not propagate an infinite prediction
            if (weights_[i] != 0.0) agg += weights_[i] * predictions[i];
        }
        std::copy(predictions.begin(), predictions.end(), last_predictions_.begin());
        last_aggregate_ = agg;
        pending_ = true;
        return agg;
    }

    void update(double x) {
        if (!pending_) throw std::logic_error("Aggregator::update called before predict for this step");
        for (std::size_t i = 0; i < size(); ++i) {
            double inc = log_weight_increment(strategy_, eta_, last_predictions_[i], last_aggregate_, x);
            if (std::isnan(inc)) inc = 0.0;
            scratch_[i] = log_weights_[i] + inc;
        }
        if (normalize_log_weights(scratch_)) {
            log_weights_.swap(scratch_);
            for (std::size_t i = 0; i < size(); ++i) weights_[i] = std::exp(log_weights_[i]);
        }
        pending_ = false;
        ++step_;
    }

private:
    Strategy strategy_;
    double eta_;
    std::vector<double> log_weights_;
    std::vector<double> weights_;
    std::vector<double> last_predictions_;
    std::vector<double> scratch_;
    double last_aggregate_ = 0.0;
    bool pending_ = false;
    std::size_t step_ = 0;
};

inline Aggregator agg_init(std::size_t n, Strategy strategy, double eta) { return Aggregator(n, strategy, eta); }

/**
 * @brief Closed-form weights alpha_t from a history of t-1 steps.
 *
 * predictions[s][i] is xhat_{s+1}^(i), observations[s] is x_{s+1}. The
 * cumulative exponent is accumulated directly and normalized once; for
 * Strategy 1 the aggregate at each past step is rebuilt from the closed form
 * at that step.
 */
[[nodiscard]] inline std::vector<double> batch_weights(Strategy strategy, double eta,
                                                       const std::vector<std::vector<double>>& predictions,
                                                       std::span<const double> observations, std::size_t n) {
    if (predictions.size() != observations.size())
        throw std::invalid_argument("batch_weights: history lengths differ");
    if (n == 0) throw std::domain_error("batch_weights: N must be >= 1");
    std::vector<double> cumulative(n, 0.0);
    auto weights_from = [&](const std::vector<double>& c) {
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = -eta * c[i];
        const double lse = log_sum_exp(e);
        for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(e[i] - lse);
        return e;
    };
    for (std::size_t s = 0; s < predictions.size(); ++s) {
        const auto& p = predictions[s];
        if (p.size() != n) throw std::invalid_argument("batch_weights: prediction row has wrong length");
        const double x = observations[s];
        if (strategy == Strategy::gradient) {
            const auto alpha = weights_from(cumulative);
            double agg = 0.0;
            for (std::size_t i = 0; i < n; ++i) agg += alpha[i] * p[i];
            for (std::size_t i = 0; i < n; ++i) cumulative[i] += 2.0 * (agg - x) * p[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) cumulative[i] += (p[i] - x) * (p[i] - x);
        }
    }
    return weights_from(cumulative);
}

/**
 * Constants of the sub-linear model and noise assumptions that enter the
 * learning-rate formulas. zeta and phi_zeta are only needed for case iii.
 */
struct ModelConstants {
    double A_star = 1.0;
    double a_star = 1.0;
    double L_star = 0.0;
    double m_p = 3.0;
    double p = 4.0;
    double zeta = 1.0;
    double phi_zeta = 1.0;
    double sigma_plus = 1.0;

    void validate() const {
        if (!(A_star > 0.0 && a_star > 0.0 && m_p > 0.0 && zeta > 0.0 && phi_zeta > 0.0 && sigma_plus > 0.0))
            throw std::domain_error("ModelConstants: A_star, a_star, m_p, zeta, phi_zeta, sigma_plus must be positive");
        if (!(L_star >= 0.0)) throw std::domain_error("ModelConstants: L_star must be nonnegative");
        if (!(p > 2.0)) throw std::domain_error("ModelConstants: p must exceed 2");
        if (a_star > A_star) throw std::domain_error("ModelConstants: a_star must not exceed A_star");
    }
};

/// Noise regimes: (i) fourth moment, (ii) p-th moment, (iii) exponential moment.
enum class EtaCase { i, ii, iii };

/**
 * @brief Learning rate optimizing the oracle-bound remainder.
 *
 *   (i)   eta = (2 m_4)^(-1/2) (1+L_*)^(-2) A_*^(-2) (log N / T)^(1/2)      [Strategy 1]
 *   (ii)  eta = (2 m_p^(2/p))^(-1) (1+L_*)^(-2) A_*^(-2) (log N / T)^(2/p)  [Strategy 2]
 *   (iii) eta = zeta^2 / (2 (1+L_*)^2 A_*^2) (log(T / log N))^(-2)         [Strategy 2]
 *
 * Case (i) reads m_4 from constants.m_p and requires constants.p == 4.
 */
[[nodiscard]] inline double eta_corollary(EtaCase c, const ModelConstants& k, std::size_t T, std::size_t N) {
    if (N < 2) throw std::domain_error("eta_corollary: N must be >= 2");
    if (T < 1) throw std::domain_error("eta_corollary: T must be >= 1");
    k.validate();
    const double logN = std::log(static_cast<double>(N));
    const double Td = static_cast<double>(T);
    const double scale = (1.0 + k.L_star) * (1.0 + k.L_star) * k.A_star * k.A_star;
    switch (c) {
        case EtaCase::i:
            if (k.p != 4.0) throw std::domain_error("eta_corollary: case i needs the fourth moment (p = 4)");
            return std::sqrt(logN / Td) / (std::sqrt(2.0 * k.m_p) * scale);
        case EtaCase::ii:
            return std::pow(logN / Td, 2.0 / k.p) / (2.0 * std::pow(k.m_p, 2.0 / k.p) * scale);
        case EtaCase::iii: {
            const double l = std::log(Td / logN);
            if (!(l > 0.0)) throw std::domain_error("eta_corollary: case iii requires T > log N");
            return k.zeta * k.zeta / (2.0 * scale * l * l);
        }
    }
    throw std::invalid_argument("eta_corollary: unknown case");
}

/**
 * @brief Learning rates of the adaptive minimax aggregation (natural logs):
 *   (i)   sigma_+^-2 (log(ceil(log T)) / T)^(1/2)
 *   (ii)  sigma_+^-2 (log(ceil(log T)) / T)^(2/p)
 *   (iii) sigma_+^-2 (log T)^-3
 */
[[nodiscard]] inline double eta_adaptive(EtaCase c, double sigma_plus, std::size_t T, double p = 4.0) {
    if (T < 3) throw std::domain_error("eta_adaptive: T must be >= 3");
    if (!(sigma_plus > 0.0)) throw std::domain_error("eta_adaptive: sigma_plus must be positive");
    const double Td = static_cast<double>(T);
    const double logT = std::log(Td);
    const double ratio = std::log(std::ceil(logT)) / Td;
    const double inv_var = 1.0 / (sigma_plus * sigma_plus);
    switch (c) {
        case EtaCase::i: return inv_var * std::sqrt(ratio);
        case EtaCase::ii:
            if (!(p > 2.0)) throw std::domain_error("eta_adaptive: case ii requires p > 2");
            return inv_var * std::pow(ratio, 2.0 / p);
        case EtaCase::iii: return inv_var / (logT * logT * logT);
    }
    throw std::invalid_argument("eta_adaptive: unknown case");
}

}  // namespace aggfc::aggregation
