#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "aggfc/predictors.hpp"
#include "aggfc/tvar.hpp"

namespace {

using namespace aggfc::predictors;

TEST(NlmsPredict, ZeroBuffer) {
    NlmsPredictor p({3, 0.1, 1.0, 8.0});
    EXPECT_EQ(p.predict(), 0.0);
}

TEST(NlmsPredict, InnerProduct) {
    NlmsPredictor p({1, 0.1, 1.0, 8.0});
    p.reset(std::vector<double>{0.5}, std::vector<double>{2.0});
    EXPECT_DOUBLE_EQ(p.predict(), 1.0);

    NlmsPredictor q({2, 0.1, 1.0, 8.0});
    q.reset(std::vector<double>{0.4, 0.2}, std::vector<double>{1.0, -1.0});
    EXPECT_NEAR(q.predict(), 0.2, 1e-15);
}

TEST(NlmsUpdate, NoExcitationLeavesEstimate) {
    NlmsPredictor p({2, 0.7, 1.0, 8.0});
    p.reset(std::vector<double>{0.3, -0.1}, std::vector<double>{0.0, 0.0});
    p.update(5.0);
    EXPECT_EQ(p.coefficients()[0], 0.3);
    EXPECT_EQ(p.coefficients()[1], -0.1);
    EXPECT_EQ(p.buffer()[0], 5.0);
}

TEST(NlmsUpdate, SingleStepArithmetic) {
    NlmsPredictor p({1, 0.5, 1.0, 8.0});
    p.reset(std::vector<double>{0.0}, std::vector<double>{1.0});
    p.update(1.0);
    EXPECT_DOUBLE_EQ(p.coefficients()[0], 0.25);
}

TEST(NlmsUpdate, ClipRescalesL1Norm) {
    NlmsPredictor p({2, 1.0, 1e-6, 0.5});
    p.reset(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0});
    p.update(100.0);
    EXPECT_NEAR(std::abs(p.coefficients()[0]) + std::abs(p.coefficients()[1]), 0.5, 1e-15);
}

TEST(NlmsUpdate, FrozenWhenStepIsZero) {
    NlmsPredictor p({2, 0.0, 1.0, 8.0});
    p.reset(std::vector<double>{0.3, 0.2}, std::vector<double>{0.0, 0.0});
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 1000; ++t) {
        p.update(n01(rng));
        ASSERT_EQ(p.coefficients()[0], 0.3);
        ASSERT_EQ(p.coefficients()[1], 0.2);
    }
}

TEST(NlmsUpdate, TracksConstantAr1) {
    using namespace aggfc::tvar;
    const auto params = TvarParams::constant({0.5}, 1.0, 0.5);
    double avg = 0.0;
    const int runs = 20;
    for (int r = 0; r < runs; ++r) {
        const auto real = simulate_tvar(params, 10000, InnovationSpec::gaussian(), 500 + r);
        NlmsPredictor p({1, 0.05, 1.0, 8.0});
        double tail = 0.0;
        for (std::size_t t = 0; t < real.x.size(); ++t) {
            p.update(real.x[t]);
            if (t >= real.x.size() - 1000) tail += p.coefficients()[0];
        }
        avg += tail / 1000.0;
    }
    avg /= runs;
    EXPECT_NEAR(avg, 0.5, 0.1);
}

TEST(NlmsUpdate, LipschitzCertificate) {
    // |prediction| <= clip * max |buffer entry| at every step, even on wild data
    std::mt19937_64 rng(17);
    std::cauchy_distribution<double> heavy(0.0, 5.0);
    for (double clip : {0.5, 2.0, 8.0}) {
        NlmsPredictor p({3, 0.9, 0.1, clip});
        for (int t = 0; t < 5000; ++t) {
            const double pred = p.predict();
            double m = 0.0;
            for (double v : p.buffer()) m = std::max(m, std::abs(v));
            ASSERT_LE(std::abs(pred), clip * m * (1.0 + 1e-12) + 1e-300);
            p.update(heavy(rng));
            double l1 = 0.0;
            for (double c : p.coefficients()) l1 += std::abs(c);
            ASSERT_LE(l1, clip * (1.0 + 1e-12));
        }
    }
}

TEST(NlmsPredictorCtor, RejectsBadConfig) {
    EXPECT_THROW(NlmsPredictor({0, 0.1, 1.0, 8.0}), std::invalid_argument);
    EXPECT_THROW(NlmsPredictor({1, -0.1, 1.0, 8.0}), std::domain_error);
    EXPECT_THROW(NlmsPredictor({1, 0.1, 0.0, 8.0}), std::domain_error);
    EXPECT_THROW(NlmsPredictor({1, 0.1, 1.0, 0.0}), std::domain_error);
}

TEST(Baselines, ZeroAndFrozen) {
    ZeroPredictor z;
    z.update(3.0);
    EXPECT_EQ(z.predict(), 0.0);
    FrozenPredictor f({0.5, 0.25});
    f.update(2.0);
    f.update(4.0);
    EXPECT_DOUBLE_EQ(f.predict(), 0.5 * 4.0 + 0.25 * 2.0);
}

TEST(BankSize, PaperCalibration) {
    EXPECT_EQ(bank_size(1024, 0.5), 7u);
    EXPECT_EQ(bank_size(1024, std::numeric_limits<double>::infinity()), 49u);
    EXPECT_THROW((void)bank_size(2, 0.5), std::domain_error);
    EXPECT_THROW((void)bank_size(100, 0.0), std::domain_error);
    EXPECT_THROW((void)bank_size(100, -1.0), std::domain_error);
}

TEST(BankSpec, BetaGridAndStepSizes) {
    const auto b = build_nlms_bank(1024, 0.5, 0.5, 3, 1.0, 8.0);
    ASSERT_EQ(b.spec.N, 7u);
    ASSERT_EQ(b.predictors.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_NEAR(b.spec.beta_grid[i], static_cast<double>(i) / 14.0, 1e-15);
        const double beta = static_cast<double>(i) / 14.0;
        EXPECT_NEAR(b.spec.mu_values[i], 0.5 * std::pow(1024.0, -2.0 * beta / (2.0 * beta + 1.0)), 1e-15);
        if (i > 0) {
            EXPECT_LT(b.spec.mu_values[i], b.spec.mu_values[i - 1]);
        }
    }
    EXPECT_DOUBLE_EQ(b.spec.mu_values[0], 0.5);
}

TEST(BankSpec, InfiniteSmoothnessGrid) {
    const auto s = make_bank_spec(1024, std::numeric_limits<double>::infinity(), 0.5, 3, 1.0, 8.0);
    ASSERT_EQ(s.N, 49u);
    for (std::size_t i = 0; i < s.N; ++i) EXPECT_NEAR(s.beta_grid[i], static_cast<double>(i) / 7.0, 1e-15);
    for (std::size_t i = 1; i < s.N; ++i) EXPECT_LT(s.mu_values[i], s.mu_values[i - 1]);
}

TEST(BankSpec, StrictlyDecreasingOverHorizons) {
    for (std::size_t T : {3u, 10u, 100u, 5000u, 100000u}) {
        for (double b0 : {0.1, 0.5, 1.0, 3.0}) {
            const auto s = make_bank_spec(T, b0, 0.5, 2, 1.0, 8.0);
            for (std::size_t i = 1; i < s.N; ++i) ASSERT_LT(s.mu_values[i], s.mu_values[i - 1]) << T << " " << b0;
        }
    }
}

TEST(BankSpec, Deterministic) {
    const auto a = make_bank_spec(4096, 0.5, 0.3, 3, 1.0, 8.0);
    const auto b = make_bank_spec(4096, 0.5, 0.3, 3, 1.0, 8.0);
    EXPECT_EQ(a.mu_values, b.mu_values);
    EXPECT_EQ(a.beta_grid, b.beta_grid);
}

}  // namespace
