#pragma once

// Seeded property suites over the aggregation and TVAR machinery. Each suite
// returns counts plus the first offending instance, serialized for replay.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggfc/aggregation.hpp"
#include "aggfc/evaluation.hpp"
#include "aggfc/tvar.hpp"

namespace aggfc::checks {

using nlohmann::json;

struct SuiteResult {
    std::string name;
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst = 0.0;  // suite-specific: largest error or smallest margin
    std::optional<json> first_violation;

    [[nodiscard]] bool passed() const { return violations == 0 && checked > 0; }
};

inline constexpr double kEquivalenceTol = 1e-10;
inline constexpr double kRegretSlack = 1e-9;
inline constexpr double kDecayRelChange = 0.10;

/// Standard-normal predictions and observations.
[[nodiscard]] inline evaluation::RegretInstance random_instance(std::size_t T, std::size_t N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    evaluation::RegretInstance inst;
    inst.predictions.assign(T, std::vector<double>(N));
    inst.x.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        for (auto& p : inst.predictions[t]) p = normal(rng);
        inst.x[t] = normal(rng);
    }
    return inst;
}

[[nodiscard]] inline json instance_to_json(const evaluation::RegretInstance& inst) {
    return json{{"predictions", inst.predictions}, {"x", inst.x}};
}

/// Max-abs gap between recursive weights and the closed forms, over all t.
[[nodiscard]] inline double recursive_batch_gap(aggregation::Strategy s, double eta,
                                                const evaluation::RegretInstance& inst) {
    const std::size_t n = inst.experts();
    aggregation::Aggregator agg(n, s, eta);
    std::vector<std::vector<double>> hist_p;
    std::vector<double> hist_x;
    double gap = 0.0;
    for (std::size_t t = 0; t <= inst.horizon(); ++t) {
        const auto batch = aggregation::batch_weights(s, eta, hist_p, hist_x, n);
        const auto rec = agg.weights();
        for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(batch[i] - rec[i]));
        if (t == inst.horizon()) break;
        agg.predict(inst.predictions[t]);
        agg.update(inst.x[t]);
        hist_p.push_back(inst.predictions[t]);
        hist_x.push_back(inst.x[t]);
    }
    return gap;
}

inline const std::vector<double>& suite_etas() {
    static const std::vector<double> etas{0.01, 0.1, 1.0};
    return etas;
}

/// Recursive weights vs. closed forms: instances x {0.01, 0.1, 1} x both strategies.
inline SuiteResult equivalence_suite(std::size_t instances = 50, std::size_t T = 200, std::size_t N = 5,
                                     std::uint64_t seed = 2024) {
    SuiteResult r;
    r.name = "equivalence";
    for (std::size_t k = 0; k < instances; ++k) {
        const auto inst = random_instance(T, N, seed + k);
        for (double eta : suite_etas()) {
            for (auto s : {aggregation::Strategy::gradient, aggregation::Strategy::loss}) {
                const double gap = recursive_batch_gap(s, eta, inst);
                ++r.checked;
                r.worst = std::max(r.worst, gap);
                if (!(gap <= kEquivalenceTol)) {
                    ++r.violations;
                    if (!r.first_violation)
                        r.first_violation = json{{"strategy", aggregation::to_string(s)}, {"eta", eta},
                                                 {"gap", gap}, {"seed", seed + k}, {"instance", instance_to_json(inst)}};
                }
            }
        }
    }
    return r;
}

/// Deterministic regret bounds on random instances, both strategies.
inline SuiteResult regret_suite(std::size_t instances = 100, std::size_t T = 100, std::size_t N = 5,
                                std::uint64_t seed = 4101) {
    SuiteResult r;
    r.name = "regret";
    r.worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < instances; ++k) {
        const auto inst = random_instance(T, N, seed + k);
        for (double eta : suite_etas()) {
            for (auto s : {aggregation::Strategy::gradient, aggregation::Strategy::loss}) {
                const double margin = evaluation::check_regret_lemma41(s, eta, inst, 100, seed + 7919 * k);
                ++r.checked;
                r.worst = std::min(r.worst, margin);
                if (!(margin >= -kRegretSlack)) {
                    ++r.violations;
                    if (!r.first_violation)
                        r.first_violation = json{{"strategy", aggregation::to_string(s)}, {"eta", eta},
                                                 {"margin", margin}, {"seed", seed + k},
                                                 {"instance", instance_to_json(inst)}};
                }
            }
        }
    }
    return r;
}

/**
 * Random discrete laws on [-a, a]. Every fourth law has a <= 2^(-1/2), where
 * the bound has no (a^2 - 1/2)_+ slack; some laws put atoms on +-a.
 */
inline SuiteResult lemma_a2_suite(std::size_t distributions = 1000, std::uint64_t seed = 1702) {
    SuiteResult r;
    r.name = "lemma-a2";
    r.worst = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_int_distribution<int> support_size(1, 12);
    const double a_crit = 1.0 / std::sqrt(2.0);
    for (std::size_t k = 0; k < distributions; ++k) {
        // a in (0, 3], never exactly 0
        const double a = (k % 4 == 0) ? a_crit * (1.0 - unit(rng)) : 3.0 * (1.0 - unit(rng));
        const int m = support_size(rng);
        std::vector<double> xs(static_cast<std::size_t>(m));
        std::vector<double> ps(static_cast<std::size_t>(m));
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            const double u = unit(rng);
            double x = a * (2.0 * u - 1.0);
            if (k % 5 == 0 && i < 2) x = (i == 0) ? a : -a;
            xs[static_cast<std::size_t>(i)] = x;
            total += (ps[static_cast<std::size_t>(i)] = expo(rng));
        }
        for (double& p : ps) p /= total;
        const double margin = evaluation::lemma_a2_margin(xs, ps, a);
        ++r.checked;
        r.worst = std::min(r.worst, margin);
        if (!(margin >= -evaluation::kGaussianMomentSlack)) {
            ++r.violations;
            if (!r.first_violation) r.first_violation = json{{"support", xs}, {"probabilities", ps}, {"a", a}};
        }
    }
    return r;
}

/**
 * K_bar at delta1 = 0.95 with j_max = 100 and 200 over synthesized d = 3
 * paths with delta < 0.95; the fit must change by less than 10%.
 */
inline SuiteResult decay_suite(std::size_t paths = 8, std::size_t T = 1024, double gamma = 0.6,
                               std::uint64_t seed = 1) {
    SuiteResult r;
    r.name = "decay";
    const double delta1 = 0.95;
    for (std::uint64_t s = seed; r.checked < paths && s < seed + 20 * paths; ++s) {
        const auto pacf = tvar::sample_pacf_paths(3, 1024, gamma, 3, s);
        const auto params = tvar::TvarParams::from_pacf(pacf, 1.0);
        if (!(params.delta() < delta1)) continue;
        const double k100 = evaluation::check_coefficient_decay(params, T, delta1, 100);
        const double k200 = evaluation::check_coefficient_decay(params, T, delta1, 200);
        const double change = std::abs(k200 - k100) / k100;
        ++r.checked;
        r.worst = std::max(r.worst, change);
        if (!std::isfinite(k200) || !(change < kDecayRelChange)) {
            ++r.violations;
            if (!r.first_violation)
                r.first_violation = json{{"path_seed", s}, {"gamma", gamma}, {"K_100", k100}, {"K_200", k200}};
        }
    }
    return r;
}

}  // namespace aggfc::checks
