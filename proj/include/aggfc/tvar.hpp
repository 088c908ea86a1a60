#pragma once

/**
 * @file tvar.hpp
 * @brief Time-varying autoregressive (TVAR) processes.
 *
 * A TVAR(d) process on rescaled time u = t/T follows
 *
 *     X_t = sum_{j=1..d} theta_j((t-1)/T) X_{t-j} + sigma(t/T) xi_t,   1 <= t <= T,
 *
 * with i.i.d. zero-mean unit-variance innovations xi_t. Parameter paths are
 * stored as equispaced grids on [0,1] and linearly interpolated; for u <= 0
 * the path is continued by its value at 0.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aggfc::tvar {

/// Relative tolerance applied to eigenvalue moduli in check_stability.
inline constexpr double kStabilityRelTol = 1e-10;

/// Target for the initialization error left by the burn-in.
inline constexpr double kBurnInTolerance = 1e-12;

/**
 * @brief Step-up Levinson-Durbin recursion: partial autocorrelations to AR
 * coefficients theta, with the AR polynomial 1 - sum_j theta_j z^j.
 *
 * Throws std::domain_error if any |pacf_k| >= 1.
 */
inline std::vector<double> levinson_durbin(std::span<const double> pacf) {
    const std::size_t d = pacf.size();
    std::vector<double> a(d, 0.0);
    std::vector<double> prev(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        const double phi = pacf[k];
        if (!(std::abs(phi) < 1.0)) {
            throw std::domain_error("levinson_durbin: partial autocorrelation " + std::to_string(k + 1) +
                                    " has modulus >= 1");
        }
        prev.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k));
        for (std::size_t j = 0; j < k; ++j) {
            a[j] = prev[j] - phi * prev[k - 1 - j];
        }
        a[k] = phi;
    }
    return a;
}

/**
 * @brief Step-down recursion, inverse of levinson_durbin.
 *
 * Throws std::domain_error if an intermediate reflection coefficient reaches
 * modulus 1 (theta not strictly stable).
 */
inline std::vector<double> step_down(std::span<const double> theta) {
    const std::size_t d = theta.size();
    std::vector<double> a(theta.begin(), theta.end());
    std::vector<double> pacf(d, 0.0);
    for (std::size_t k = d; k-- > 0;) {
        const double phi = a[k];
        if (!(std::abs(phi) < 1.0)) {
            throw std::domain_error("step_down: reflection coefficient has modulus >= 1");
        }
        pacf[k] = phi;
        const double denom = 1.0 - phi * phi;
        std::vector<double> next(k);
        for (std::size_t j = 0; j < k; ++j) {
            next[j] = (a[j] + phi * a[k - 1 - j]) / denom;
        }
        std::copy(next.begin(), next.end(), a.begin());
    }
    return pacf;
}

/// Moduli of the eigenvalues of the companion matrix of theta.
inline std::vector<double> companion_eigen_moduli(std::span<const double> theta) {
    const auto d = static_cast<Eigen::Index>(theta.size());
    if (d == 0) return {};
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) c(0, j) = theta[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < d; ++i) c(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(c, /*computeEigenvectors=*/false);
    std::vector<double> moduli;
    moduli.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) moduli.push_back(std::abs(solver.eigenvalues()(i)));
    return moduli;
}

inline double spectral_radius(std::span<const double> theta) {
    const auto m = companion_eigen_moduli(theta);
    return m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
}

/**
 * @brief Membership in s_d(delta): 1 - sum theta_j z^j has no zero with
 * |z| < 1/delta, i.e. every companion eigenvalue has modulus <= delta.
 * Roots exactly on |z| = 1/delta are accepted.
 */
inline bool check_stability(std::span<const double> theta, double delta) {
    for (double v : theta) {
        if (!std::isfinite(v)) return false;
    }
    return spectral_radius(theta) <= delta * (1.0 + kStabilityRelTol);
}

/// Equispaced samples on [0,1] of the d partial autocorrelation paths.
struct PacfPath {
    std::size_t d = 0;
    double gamma = 0.0;
    std::vector<std::vector<double>> grid;  // grid[g][k], g over u_g = g/(G-1)

    [[nodiscard]] std::size_t grid_size() const { return grid.size(); }
};

/**
 * @brief Random smooth PACF paths: each lag is gamma*tanh(p(u)) for a random
 * trigonometric polynomial p of degree n_harmonics.
 */
inline PacfPath sample_pacf_paths(std::size_t d, std::size_t grid_size, double gamma, std::size_t n_harmonics,
                                  std::uint64_t seed) {
    if (d == 0) throw std::invalid_argument("sample_pacf_paths: d must be >= 1");
    if (grid_size < 2) throw std::invalid_argument("sample_pacf_paths: grid size must be >= 2");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("sample_pacf_paths: gamma must lie in [0,1)");
    if (n_harmonics < 1) throw std::invalid_argument("sample_pacf_paths: n_harmonics must be >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    // p_k(u) = c_k + sum_h a_{k,h} cos(2 pi h u + phi_{k,h}), amplitudes shrinking like 1/h
    std::vector<double> offset(d);
    std::vector<std::vector<std::pair<double, double>>> harmonics(d);
    for (std::size_t k = 0; k < d; ++k) {
        offset[k] = 0.5 * normal(rng);
        for (std::size_t h = 1; h <= n_harmonics; ++h) {
            const double amp = normal(rng) / static_cast<double>(h);
            harmonics[k].emplace_back(amp, phase(rng));
        }
    }

    PacfPath path;
    path.d = d;
    path.gamma = gamma;
    path.grid.assign(grid_size, std::vector<double>(d, 0.0));
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double u = static_cast<double>(g) / static_cast<double>(grid_size - 1);
        for (std::size_t k = 0; k < d; ++k) {
            double p = offset[k];
            for (std::size_t h = 0; h < n_harmonics; ++h) {
                const auto [amp, ph] = harmonics[k][h];
                p += amp * std::cos(2.0 * std::numbers::pi * static_cast<double>(h + 1) * u + ph);
            }
            // tanh(15) < 1 - 1e-13 keeps the value strictly inside (-gamma, gamma)
            path.grid[g][k] = gamma * std::tanh(std::clamp(p, -15.0, 15.0));
        }
    }
    return path;
}

/**
 * @brief Sampled parameters (theta, sigma) of a TVAR process together with
 * the class constants delta, rho and sigma_plus.
 *
 * Construct through make(), which enforces the stability and volatility
 * invariants on every grid point.
 */
class TvarParams {
public:
    TvarParams() = default;

    /// theta_grid[g] is theta(u_g), sigma_grid[g] is sigma(u_g), u_g = g/(G-1).
    static TvarParams make(std::vector<std::vector<double>> theta_grid, std::vector<double> sigma_grid, double delta,
                           double rho, double sigma_plus) {
        if (theta_grid.size() < 2) throw std::invalid_argument("TvarParams: grid must hold at least 2 points");
        if (sigma_grid.size() != theta_grid.size())
            throw std::invalid_argument("TvarParams: theta and sigma grids differ in length");
        const std::size_t d = theta_grid.front().size();
        if (d == 0) throw std::invalid_argument("TvarParams: AR order must be >= 1");
        if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("TvarParams: delta must lie in (0,1)");
        if (!(rho >= 0.0 && rho <= 1.0)) throw std::domain_error("TvarParams: rho must lie in [0,1]");
        if (!(sigma_plus >= 0.0) || !std::isfinite(sigma_plus))
            throw std::domain_error("TvarParams: sigma_plus must be finite and nonnegative");

        const double sigma_tol = 1e-12 * std::max(1.0, sigma_plus);
        for (std::size_t g = 0; g < theta_grid.size(); ++g) {
            if (theta_grid[g].size() != d) throw std::invalid_argument("TvarParams: ragged theta grid");
            if (!check_stability(theta_grid[g], delta)) {
                throw std::domain_error("TvarParams: theta at grid point " + std::to_string(g) +
                                        " has a companion eigenvalue of modulus > delta = " + std::to_string(delta) +
                                        " (spectral radius " + std::to_string(spectral_radius(theta_grid[g])) + ")");
            }
            const double s = sigma_grid[g];
            if (!(s >= rho * sigma_plus - sigma_tol && s <= sigma_plus + sigma_tol)) {
                throw std::domain_error("TvarParams: sigma at grid point " + std::to_string(g) +
                                        " lies outside [rho*sigma_plus, sigma_plus]");
            }
        }
        TvarParams p;
        p.theta_grid_ = std::move(theta_grid);
        p.sigma_grid_ = std::move(sigma_grid);
        p.delta_ = delta;
        p.rho_ = rho;
        p.sigma_plus_ = sigma_plus;
        return p;
    }

    /// Constant parameters theta(u) = theta, sigma(u) = sigma.
    static TvarParams constant(std::vector<double> theta, double sigma, double delta) {
        std::vector<std::vector<double>> tg(2, theta);
        return make(std::move(tg), std::vector<double>(2, sigma), delta, 1.0, sigma);
    }

    /**
     * @brief theta(u) = levinson_durbin(pacf(u)) with constant sigma.
     *
     * If delta is not given, the tightest margin (largest spectral radius over
     * the grid) is used.
     */
    static TvarParams from_pacf(const PacfPath& pacf, double sigma, std::optional<double> delta = std::nullopt) {
        std::vector<std::vector<double>> tg;
        tg.reserve(pacf.grid.size());
        double radius = 0.0;
        for (const auto& p : pacf.grid) {
            tg.push_back(levinson_durbin(p));
            radius = std::max(radius, spectral_radius(tg.back()));
        }
        const double margin = delta.value_or(std::max(radius, std::numeric_limits<double>::min()));
        return make(std::move(tg), std::vector<double>(pacf.grid.size(), sigma), margin, 1.0, sigma);
    }

    [[nodiscard]] std::size_t order() const { return theta_grid_.empty() ? 0 : theta_grid_.front().size(); }
    [[nodiscard]] std::size_t grid_size() const { return theta_grid_.size(); }
    [[nodiscard]] double delta() const { return delta_; }
    [[nodiscard]] double rho() const { return rho_; }
    [[nodiscard]] double sigma_plus() const { return sigma_plus_; }
    [[nodiscard]] const std::vector<std::vector<double>>& theta_grid() const { return theta_grid_; }
    [[nodiscard]] const std::vector<double>& sigma_grid() const { return sigma_grid_; }

    /// Grid abscissa u_g.
    [[nodiscard]] double grid_point(std::size_t g) const {
        return static_cast<double>(g) / static_cast<double>(grid_size() - 1);
    }

    /// Writes theta(u) into out (size d).
    void theta_at(double u, std::span<double> out) const {
        const auto [lo, w] = locate(u);
        const auto& a = theta_grid_[lo];
        if (w == 0.0) {
            std::copy(a.begin(), a.end(), out.begin());
            return;
        }
        const auto& b = theta_grid_[lo + 1];
        for (std::size_t j = 0; j < a.size(); ++j) out[j] = (1.0 - w) * a[j] + w * b[j];
    }

    [[nodiscard]] std::vector<double> theta_at(double u) const {
        std::vector<double> out(order());
        theta_at(u, out);
        return out;
    }

    [[nodiscard]] double sigma_at(double u) const {
        const auto [lo, w] = locate(u);
        if (w == 0.0) return sigma_grid_[lo];
        return (1.0 - w) * sigma_grid_[lo] + w * sigma_grid_[lo + 1];
    }

private:
    // Constant continuation outside [0,1].
    [[nodiscard]] std::pair<std::size_t, double> locate(double u) const {
        const std::size_t last = grid_size() - 1;
        if (!(u > 0.0)) return {0, 0.0};
        if (u >= 1.0) return {last, 0.0};
        const double pos = u * static_cast<double>(last);
        auto lo = static_cast<std::size_t>(pos);
        if (lo >= last) return {last, 0.0};
        return {lo, pos - static_cast<double>(lo)};
    }

    std::vector<std::vector<double>> theta_grid_;
    std::vector<double> sigma_grid_;
    double delta_ = 0.5;
    double rho_ = 1.0;
    double sigma_plus_ = 1.0;
};

enum class InnovationFamily { gaussian, student_t, uniform };

/// Zero-mean, unit-variance innovation law.
struct InnovationSpec {
    InnovationFamily family = InnovationFamily::gaussian;
    double nu = 5.0;  // Student-t degrees of freedom, must exceed 2

    static InnovationSpec gaussian() { return {}; }
    static InnovationSpec student_t(double nu) {
        if (!(nu > 2.0)) throw std::domain_error("InnovationSpec: Student-t requires nu > 2");
        return {InnovationFamily::student_t, nu};
    }
    static InnovationSpec uniform() { return {InnovationFamily::uniform, 5.0}; }

    /// E exp(zeta |xi|), infinite when it does not exist.
    [[nodiscard]] double exp_moment(double zeta) const {
        switch (family) {
            case InnovationFamily::gaussian:
                return std::exp(0.5 * zeta * zeta) * std::erfc(-zeta / std::numbers::sqrt2);
            case InnovationFamily::uniform: {
                const double b = std::sqrt(3.0);
                return zeta == 0.0 ? 1.0 : std::expm1(zeta * b) / (zeta * b);
            }
            case InnovationFamily::student_t: return zeta == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    /// E|xi|^p, infinite when it does not exist.
    [[nodiscard]] double absolute_moment(double p) const {
        switch (family) {
            case InnovationFamily::gaussian:
                return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
            case InnovationFamily::uniform: {
                const double b = std::sqrt(3.0);
                return std::pow(b, p) / (p + 1.0);
            }
            case InnovationFamily::student_t: {
                if (p >= nu) return std::numeric_limits<double>::infinity();
                const double scale = std::pow((nu - 2.0) / nu, p / 2.0);
                const double raw = std::pow(nu, p / 2.0) * std::tgamma((p + 1.0) / 2.0) *
                                   std::tgamma((nu - p) / 2.0) /
                                   (std::sqrt(std::numbers::pi) * std::tgamma(nu / 2.0));
                return scale * raw;
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
};

[[nodiscard]] inline std::string to_string(InnovationFamily f) {
    switch (f) {
        case InnovationFamily::gaussian: return "gaussian";
        case InnovationFamily::student_t: return "student-t";
        case InnovationFamily::uniform: return "uniform";
    }
    return "unknown";
}

/// Draws i.i.d. innovations of the requested family.
class InnovationSampler {
public:
    InnovationSampler(InnovationSpec spec, std::uint64_t seed)
        : spec_(spec), rng_(seed), normal_(0.0, 1.0), student_(spec.nu),
          uniform_(-std::sqrt(3.0), std::sqrt(3.0)), t_scale_(std::sqrt((spec.nu - 2.0) / spec.nu)) {
        if (spec.family == InnovationFamily::student_t && !(spec.nu > 2.0))
            throw std::domain_error("InnovationSampler: Student-t requires nu > 2");
    }

    double operator()() {
        switch (spec_.family) {
            case InnovationFamily::gaussian: return normal_(rng_);
            case InnovationFamily::student_t: return t_scale_ * student_(rng_);
            case InnovationFamily::uniform: return uniform_(rng_);
        }
        return 0.0;
    }

private:
    InnovationSpec spec_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    std::student_t_distribution<double> student_;
    std::uniform_real_distribution<double> uniform_;
    double t_scale_;
};

/// Number of frozen-parameter steps B with ((1+delta)/2)^B < kBurnInTolerance.
[[nodiscard]] inline std::size_t burn_in_length(double delta) {
    const double delta1 = 0.5 * (1.0 + delta);
    return static_cast<std::size_t>(std::ceil(std::log(kBurnInTolerance) / std::log(delta1))) + 1;
}

/**
 * @brief Streaming TVAR generator: O(d) state, one observation per call.
 *
 * The first observation returned is X_1. Before it, B = burn_in_length(delta)
 * steps are run from zero initial values with parameters frozen at u = 0.
 */
class TvarStream {
public:
    TvarStream(const TvarParams& params, std::size_t horizon, InnovationSpec innovations, std::uint64_t seed)
        : params_(&params), horizon_(horizon), sampler_(innovations, seed), history_(params.order(), 0.0),
          theta_(params.order(), 0.0) {
        if (horizon == 0) throw std::invalid_argument("TvarStream: horizon must be >= 1");
        burn_in_ = burn_in_length(params.delta());
        params.theta_at(0.0, theta_);
        const double s0 = params.sigma_at(0.0);
        for (std::size_t b = 0; b < burn_in_; ++b) advance(s0);
    }

    [[nodiscard]] std::size_t horizon() const { return horizon_; }
    [[nodiscard]] std::size_t burn_in() const { return burn_in_; }
    [[nodiscard]] std::size_t time() const { return t_; }
    [[nodiscard]] bool done() const { return t_ >= horizon_; }

    /// sigma(t/T) of the most recently produced observation.
    [[nodiscard]] double last_sigma() const { return last_sigma_; }

    double next() {
        if (done()) throw std::out_of_range("TvarStream: horizon exhausted");
        ++t_;
        const double T = static_cast<double>(horizon_);
        params_->theta_at(static_cast<double>(t_ - 1) / T, theta_);
        last_sigma_ = params_->sigma_at(static_cast<double>(t_) / T);
        return advance(last_sigma_);
    }

private:
    double advance(double sigma) {
        double x = 0.0;
        for (std::size_t j = 0; j < theta_.size(); ++j) x += theta_[j] * history_[j];
        x += sigma * sampler_();
        // history_[0] is X_{t-1}
        for (std::size_t j = history_.size(); j-- > 1;) history_[j] = history_[j - 1];
        if (!history_.empty()) history_[0] = x;
        return x;
    }

    const TvarParams* params_;
    std::size_t horizon_;
    InnovationSampler sampler_;
    std::vector<double> history_;
    std::vector<double> theta_;
    std::size_t burn_in_ = 0;
    std::size_t t_ = 0;
    double last_sigma_ = 0.0;
};

struct TvarRealization {
    std::size_t T = 0;
    std::vector<double> x;
    std::vector<double> sigma_trace;
    std::uint64_t seed = 0;
    std::size_t burn_in = 0;
};

/// Pure function of (params, T, innovations, seed).
inline TvarRealization simulate_tvar(const TvarParams& params, std::size_t T, InnovationSpec innovations,
                                     std::uint64_t seed) {
    TvarStream stream(params, T, innovations, seed);
    TvarRealization r;
    r.T = T;
    r.seed = seed;
    r.burn_in = stream.burn_in();
    r.x.reserve(T);
    r.sigma_trace.reserve(T);
    while (!stream.done()) {
        r.x.push_back(stream.next());
        r.sigma_trace.push_back(stream.last_sigma());
    }
    return r;
}

/**
 * @brief Coefficients a_{t,T}(0..j_max) of the linear representation
 * X_t = sum_j a_{t,T}(j) sigma((t-j)/T) xi_{t-j}.
 *
 * a(j) is the response at time t to a unit impulse at time t-j. It is
 * accumulated backwards: a(j) = sum_{k=1..min(j,d)} theta_k((t-j+k-1)/T) a(j-k).
 */
inline std::vector<double> impulse_coefficients(const TvarParams& params, std::size_t T, std::ptrdiff_t t,
                                                std::size_t j_max) {
    if (T == 0) throw std::invalid_argument("impulse_coefficients: T must be >= 1");
    if (t > static_cast<std::ptrdiff_t>(T)) throw std::invalid_argument("impulse_coefficients: t must be <= T");
    const std::size_t d = params.order();
    const double Td = static_cast<double>(T);
    std::vector<double> a(j_max + 1, 0.0);
    std::vector<double> theta(d);
    a[0] = 1.0;
    for (std::size_t j = 1; j <= j_max; ++j) {
        double acc = 0.0;
        for (std::size_t k = 1; k <= std::min(j, d); ++k) {
            const auto r = static_cast<double>(t - static_cast<std::ptrdiff_t>(j) + static_cast<std::ptrdiff_t>(k));
            params.theta_at((r - 1.0) / Td, theta);
            acc += theta[k - 1] * a[j - k];
        }
        a[j] = acc;
    }
    return a;
}

}  // namespace aggfc::tvar
