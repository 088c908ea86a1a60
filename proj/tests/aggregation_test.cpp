#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "aggfc/aggregation.hpp"

namespace {

using namespace aggfc::aggregation;

double sum(std::span<const double> s) { return std::accumulate(s.begin(), s.end(), 0.0); }

// Naive product of exponentials; only sensible for small exponents.
std::vector<double> naive_weights(Strategy s, double eta, const std::vector<std::vector<double>>& p,
                                  const std::vector<double>& x, std::size_t n) {
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    for (std::size_t t = 0; t < x.size(); ++t) {
        double agg = 0.0;
        for (std::size_t i = 0; i < n; ++i) agg += w[i] * p[t][i];
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = s == Strategy::gradient ? 2.0 * (agg - x[t]) * p[t][i]
                                                     : (p[t][i] - x[t]) * (p[t][i] - x[t]);
            w[i] *= std::exp(-eta * g);
            z += w[i];
        }
        for (double& v : w) v /= z;
    }
    return w;
}

TEST(AggInit, UniformWeights) {
    for (std::size_t n : {1u, 4u, 7u}) {
        const auto a = agg_init(n, Strategy::loss, 0.1);
        ASSERT_EQ(a.size(), n);
        for (double w : a.weights()) EXPECT_DOUBLE_EQ(w, 1.0 / static_cast<double>(n));
    }
    EXPECT_THROW(Aggregator(0, Strategy::loss, 0.1), std::domain_error);
    EXPECT_THROW(Aggregator(2, Strategy::loss, 0.0), std::domain_error);
    EXPECT_THROW(Aggregator(2, Strategy::loss, std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST(AggPredict, ConvexCombination) {
    Aggregator a(3, Strategy::gradient, 0.1);
    EXPECT_DOUBLE_EQ(a.predict(std::vector<double>{3.0, 3.0, 3.0}), 3.0);
    Aggregator b(2, Strategy::gradient, 0.1);
    EXPECT_DOUBLE_EQ(b.predict(std::vector<double>{1.0, -1.0}), 0.0);
    EXPECT_THROW(b.predict(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(AggUpdate, TwoExpertStep) {
    const double expect = 1.0 / (1.0 + std::exp(-2.0));
    for (auto s : {Strategy::gradient, Strategy::loss}) {
        Aggregator a(2, s, 2.0);
        a.predict(std::vector<double>{1.0, 0.0});
        a.update(1.0);
        EXPECT_NEAR(a.weights()[0], expect, 1e-15);
        EXPECT_NEAR(a.weights()[1], 1.0 - expect, 1e-15);
        EXPECT_NEAR(a.predict(std::vector<double>{1.0, -1.0}), std::tanh(1.0), 1e-15);
        EXPECT_EQ(a.step(), 1u);
    }
}

TEST(AggUpdate, IdenticalExpertsKeepWeights) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (auto s : {Strategy::gradient, Strategy::loss}) {
        Aggregator a(4, s, 0.7);
        for (int t = 0; t < 200; ++t) {
            const double v = n01(rng);
            a.predict(std::vector<double>(4, v));
            a.update(n01(rng));
            for (double w : a.weights()) ASSERT_NEAR(w, 0.25, 1e-15);
        }
    }
}

TEST(AggUpdate, RequiresPredictFirst) {
    Aggregator a(2, Strategy::loss, 0.1);
    EXPECT_THROW(a.update(0.0), std::logic_error);
    a.predict(std::vector<double>{0.0, 1.0});
    a.update(0.0);
    EXPECT_THROW(a.update(0.0), std::logic_error);
}

TEST(BatchWeights, EmptyHistoryIsUniform) {
    const auto w = batch_weights(Strategy::gradient, 0.5, {}, std::vector<double>{}, 5);
    for (double v : w) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(BatchWeights, MatchesRecursionAndNaiveProduct) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    for (auto s : {Strategy::gradient, Strategy::loss}) {
        for (double eta : {0.01, 0.1, 1.0}) {
            const std::size_t n = 5;
            std::vector<std::vector<double>> p;
            std::vector<double> x;
            Aggregator a(n, s, eta);
            for (int t = 0; t < 60; ++t) {
                std::vector<double> row(n);
                for (double& v : row) v = n01(rng);
                const double obs = n01(rng);
                a.predict(row);
                a.update(obs);
                p.push_back(row);
                x.push_back(obs);
                const auto batch = batch_weights(s, eta, p, x, n);
                const auto naive = naive_weights(s, eta, p, x, n);
                for (std::size_t i = 0; i < n; ++i) {
                    ASSERT_NEAR(batch[i], a.weights()[i], 1e-10);
                    ASSERT_NEAR(naive[i], a.weights()[i], 1e-10);
                }
            }
        }
    }
}

TEST(AggUpdate, SimplexUnderExtremeInputs) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    for (auto s : {Strategy::gradient, Strategy::loss}) {
        Aggregator a(6, s, 1.0);
        for (int t = 0; t < 500; ++t) {
            std::vector<double> row(6);
            for (double& v : row) v = 1e150 * n01(rng);
            a.predict(row);
            a.update(1e150 * n01(rng));
            for (double w : a.weights()) {
                ASSERT_TRUE(std::isfinite(w));
                ASSERT_GE(w, 0.0);
            }
            ASSERT_NEAR(sum(a.weights()), 1.0, 1e-12);
        }
    }
}

TEST(AggUpdate, VanishingRateStaysUniform) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    Aggregator a(3, Strategy::loss, 1e-300);
    for (int t = 0; t < 1000; ++t) {
        a.predict(std::vector<double>{n01(rng), n01(rng), n01(rng)});
        a.update(n01(rng));
    }
    for (double w : a.weights()) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
}

TEST(AggUpdate, PermutationEquivariance) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    for (auto s : {Strategy::gradient, Strategy::loss}) {
        Aggregator a(5, s, 0.3), b(5, s, 0.3);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> row(5), prow(5);
            for (double& v : row) v = n01(rng);
            for (std::size_t i = 0; i < 5; ++i) prow[i] = row[perm[i]];
            const double pa = a.predict(row);
            const double pb = b.predict(prow);
            ASSERT_NEAR(pa, pb, 1e-12);
            const double x = n01(rng);
            a.update(x);
            b.update(x);
            for (std::size_t i = 0; i < 5; ++i) ASSERT_NEAR(b.weights()[i], a.weights()[perm[i]], 1e-12);
        }
    }
}

TEST(NormalizeLogWeights, DegenerateInputs) {
    std::vector<double> lw{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    EXPECT_FALSE(normalize_log_weights(lw));
    std::vector<double> big{1e308, 1e308, 0.0};
    EXPECT_TRUE(normalize_log_weights(big));
    EXPECT_NEAR(std::exp(big[0]) + std::exp(big[1]) + std::exp(big[2]), 1.0, 1e-12);
}

TEST(LogSumExp, AgreesWithDirectSum) {
    const std::vector<double> v{0.1, -2.0, 3.5};
    double direct = 0.0;
    for (double x : v) direct += std::exp(x);
    EXPECT_NEAR(log_sum_exp(v), std::log(direct), 1e-14);
}

ModelConstants unit_constants() {
    ModelConstants k;
    k.m_p = 1.0;
    return k;
}

TEST(EtaCorollary, ReferenceValues) {
    const auto k = unit_constants();
    const double l7 = std::log(7.0);
    EXPECT_NEAR(eta_corollary(EtaCase::i, k, 1024, 7), std::sqrt(l7 / 1024.0) / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(eta_corollary(EtaCase::i, k, 1024, 7), 0.030825, 5e-7);
    EXPECT_NEAR(eta_corollary(EtaCase::ii, k, 1024, 7), 0.021796, 5e-7);
    const double l = std::log(1024.0 / l7);
    EXPECT_NEAR(eta_corollary(EtaCase::iii, k, 1024, 7), 1.0 / (2.0 * l * l), 1e-15);
    EXPECT_NEAR(eta_corollary(EtaCase::iii, k, 1024, 7), 0.012736, 5e-7);
}

TEST(EtaCorollary, ScalesWithConstants) {
    auto k = unit_constants();
    const double base = eta_corollary(EtaCase::ii, k, 4096, 9);
    k.L_star = 1.0;
    k.A_star = 2.0;
    EXPECT_NEAR(eta_corollary(EtaCase::ii, k, 4096, 9), base / 16.0, 1e-15);
}

TEST(EtaCorollary, RejectsBadInputs) {
    auto k = unit_constants();
    EXPECT_THROW((void)eta_corollary(EtaCase::i, k, 1024, 1), std::domain_error);
    k.p = 6.0;
    EXPECT_THROW((void)eta_corollary(EtaCase::i, k, 1024, 7), std::domain_error);
    EXPECT_NO_THROW((void)eta_corollary(EtaCase::ii, k, 1024, 7));
    k.A_star = -1.0;
    EXPECT_THROW((void)eta_corollary(EtaCase::ii, k, 1024, 7), std::domain_error);
}

TEST(EtaAdaptive, ReferenceValues) {
    const double lt = std::log(1024.0);
    EXPECT_NEAR(eta_adaptive(EtaCase::i, 1.0, 1024), 0.043592, 5e-7);
    EXPECT_NEAR(eta_adaptive(EtaCase::iii, 1.0, 1024), 1.0 / (lt * lt * lt), 1e-15);
    EXPECT_NEAR(eta_adaptive(EtaCase::iii, 1.0, 1024), 0.003003, 5e-7);
    EXPECT_NEAR(eta_adaptive(EtaCase::i, 2.0, 1024), 0.010898, 5e-7);
    EXPECT_NEAR(eta_adaptive(EtaCase::ii, 1.0, 1024, 4.0), eta_adaptive(EtaCase::i, 1.0, 1024), 1e-15);
    EXPECT_THROW((void)eta_adaptive(EtaCase::i, 0.0, 1024), std::domain_error);
    EXPECT_THROW((void)eta_adaptive(EtaCase::ii, 1.0, 1024, 2.0), std::domain_error);
}

}  // namespace
