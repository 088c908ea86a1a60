#pragma once

// One-step-ahead predictors. Each predictor sees observations strictly
// before t: predict() is called first, then update(x_t).

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace aggfc::predictors {

template <typename P>
concept Predictor = requires(P p, const P cp, double x) {
    { cp.predict() } -> std::convertible_to<double>;
    p.update(x);
};

/// Fixed-length window of past observations, most recent first, zero padded.
class LagBuffer {
public:
    explicit LagBuffer(std::size_t d) : lags_(d, 0.0) {}

    void push(double x) {
        for (std::size_t j = lags_.size(); j-- > 1;) lags_[j] = lags_[j - 1];
        if (!lags_.empty()) lags_[0] = x;
    }

    [[nodiscard]] std::span<const double> values() const { return lags_; }
    [[nodiscard]] std::size_t size() const { return lags_.size(); }

    [[nodiscard]] double energy() const {
        double e = 0.0;
        for (double v : lags_) e += v * v;
        return e;
    }

private:
    std::vector<double> lags_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

inline double l1_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += std::abs(v);
    return s;
}

struct NlmsConfig {
    std::size_t order = 3;
    double mu = 0.1;
    double eps = 1.0;
    double clip = 8.0;
};

/**
 * @brief Normalized LMS predictor of an AR(d) process.
 *
 * With phi the lag buffer and e = x_t - theta_hat . phi:
 *
 *     theta_hat <- theta_hat + mu * e * phi / (eps + |phi|^2),
 *
 * followed by l1 rescaling so that ||theta_hat||_1 <= clip. The prediction
 * is then bounded by clip * max_s |x_{t-s}|, which makes the predictor
 * L-Lipschitz with L supported on {1..d} and L_* = clip.
 */
class NlmsPredictor {
public:
    explicit NlmsPredictor(NlmsConfig cfg) : cfg_(cfg), theta_(cfg.order, 0.0), buffer_(cfg.order) {
        if (cfg.order == 0) throw std::invalid_argument("NlmsPredictor: order must be >= 1");
        if (!(cfg.mu >= 0.0)) throw std::domain_error("NlmsPredictor: mu must be nonnegative");
        if (!(cfg.eps > 0.0)) throw std::domain_error("NlmsPredictor: eps must be positive");
        if (!(cfg.clip > 0.0)) throw std::domain_error("NlmsPredictor: clip must be positive");
    }

    [[nodiscard]] double predict() const { return dot(theta_, buffer_.values()); }

    void update(double x) {
        const auto phi = buffer_.values();
        const double e = x - dot(theta_, phi);
        const double gain = cfg_.mu * e / (cfg_.eps + buffer_.energy());
        for (std::size_t j = 0; j < theta_.size(); ++j) theta_[j] += gain * phi[j];
        const double norm = l1_norm(theta_);
        if (norm > cfg_.clip) {
            const double scale = cfg_.clip / norm;
            for (double& v : theta_) v *= scale;
        }
        buffer_.push(x);
    }

    [[nodiscard]] std::span<const double> coefficients() const { return theta_; }
    [[nodiscard]] std::span<const double> buffer() const { return buffer_.values(); }
    [[nodiscard]] const NlmsConfig& config() const { return cfg_; }

    // Test hook: seeds the estimate and the lag window directly.
    void reset(std::span<const double> theta, std::span<const double> lags_recent_first) {
        if (theta.size() != theta_.size() || lags_recent_first.size() != theta_.size())
            throw std::invalid_argument("NlmsPredictor::reset: size mismatch");
        theta_.assign(theta.begin(), theta.end());
        buffer_ = LagBuffer(theta_.size());
        for (std::size_t j = lags_recent_first.size(); j-- > 0;) buffer_.push(lags_recent_first[j]);
    }

private:
    NlmsConfig cfg_;
    std::vector<double> theta_;
    LagBuffer buffer_;
};

/// Always predicts 0.
class ZeroPredictor {
public:
    [[nodiscard]] double predict() const { return 0.0; }
    void update(double) {}
};

/// Linear predictor with fixed coefficients.
class FrozenPredictor {
public:
    explicit FrozenPredictor(std::vector<double> theta) : theta_(std::move(theta)), buffer_(theta_.size()) {}

    [[nodiscard]] double predict() const { return dot(theta_, buffer_.values()); }
    void update(double x) { buffer_.push(x); }

private:
    std::vector<double> theta_;
    LagBuffer buffer_;
};

static_assert(Predictor<NlmsPredictor>);
static_assert(Predictor<ZeroPredictor>);
static_assert(Predictor<FrozenPredictor>);

/// Step sizes and smoothness grid of an NLMS bank.
struct PredictorBankSpec {
    std::size_t T = 0;
    std::size_t N = 0;
    double beta_0 = 0.5;
    std::vector<double> beta_grid;
    std::vector<double> mu_values;
    double c_mu = 0.5;
    std::size_t order = 3;
    double eps = 1.0;
    double clip = 8.0;

    [[nodiscard]] bool infinite_smoothness() const { return std::isinf(beta_0); }
};

/// N = ceil(log T) for finite beta_0, ceil((log T)^2) otherwise (natural log).
[[nodiscard]] inline std::size_t bank_size(std::size_t T, double beta_0) {
    if (T < 3) throw std::domain_error("bank_size: T must be >= 3");
    if (!(beta_0 > 0.0)) throw std::domain_error("bank_size: beta_0 must be positive");
    const double lt = std::log(static_cast<double>(T));
    return static_cast<std::size_t>(std::ceil(std::isinf(beta_0) ? lt * lt : lt));
}

/**
 * Smoothness grid beta_i = (i-1) beta_0 / N (finite beta_0) or (i-1)/sqrt(N),
 * and step sizes mu_i = c_mu * T^(-2 beta_i / (2 beta_i + 1)), for a given N.
 */
[[nodiscard]] inline PredictorBankSpec make_bank_spec_with_size(std::size_t T, std::size_t N, double beta_0,
                                                                double c_mu, std::size_t order, double eps,
                                                                double clip) {
    if (!(beta_0 > 0.0)) throw std::domain_error("make_bank_spec: beta_0 must be positive");
    if (!(c_mu > 0.0)) throw std::domain_error("make_bank_spec: c_mu must be positive");
    if (N == 0) throw std::domain_error("make_bank_spec: N must be >= 1");
    PredictorBankSpec spec;
    spec.T = T;
    spec.N = N;
    spec.beta_0 = beta_0;
    spec.c_mu = c_mu;
    spec.order = order;
    spec.eps = eps;
    spec.clip = clip;
    const double Td = static_cast<double>(T);
    const double Nd = static_cast<double>(N);
    for (std::size_t i = 1; i <= N; ++i) {
        const double k = static_cast<double>(i - 1);
        const double beta = spec.infinite_smoothness() ? k / std::sqrt(Nd) : k * beta_0 / Nd;
        spec.beta_grid.push_back(beta);
        spec.mu_values.push_back(c_mu * std::pow(Td, -2.0 * beta / (2.0 * beta + 1.0)));
    }
    return spec;
}

/// Bank with N = bank_size(T, beta_0).
[[nodiscard]] inline PredictorBankSpec make_bank_spec(std::size_t T, double beta_0, double c_mu, std::size_t order,
                                                      double eps, double clip) {
    return make_bank_spec_with_size(T, bank_size(T, beta_0), beta_0, c_mu, order, eps, clip);
}

[[nodiscard]] inline std::vector<NlmsPredictor> instantiate(const PredictorBankSpec& spec) {
    std::vector<NlmsPredictor> bank;
    bank.reserve(spec.N);
    for (double mu : spec.mu_values) bank.emplace_back(NlmsConfig{spec.order, mu, spec.eps, spec.clip});
    return bank;
}

struct NlmsBank {
    PredictorBankSpec spec;
    std::vector<NlmsPredictor> predictors;
};

inline NlmsBank build_nlms_bank(std::size_t T, double beta_0, double c_mu, std::size_t order, double eps,
                                double clip) {
    NlmsBank bank;
    bank.spec = make_bank_spec(T, beta_0, c_mu, order, eps, clip);
    bank.predictors = instantiate(bank.spec);
    return bank;
}

}  // namespace aggfc::predictors
