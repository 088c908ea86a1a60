// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "aggfc/aggfc.hpp"
#include "aggfc/commands.hpp"

namespace {

std::atomic<std::size_t> g_alloc_bytes{0};
std::atomic<std::size_t> g_alloc_count{0};

}  // namespace

void* operator new(std::size_t n) {
    g_alloc_bytes.fetch_add(n, std::memory_order_relaxed);
    g_alloc_count.fetch_add(1, std::memory_order_relaxed);
    if (void* p = std::malloc(n ? n : 1)) return p;
    throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace {

using namespace aggfc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failed = 0;

void criterion(int id, const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (time_limit_s > 0.0 && secs >= time_limit_s) {
        o.pass = false;
        o.detail += " (over time limit " + csv::format_double(time_limit_s) + " s)";
    }
    if (!o.pass) ++g_failed;
    std::printf("[%s] %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) { return csv::format_double(v); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome suite_outcome(const checks::SuiteResult& r, const std::string& worst_label) {
    return {r.passed(), std::to_string(r.checked) + " checks, " + std::to_string(r.violations) + " violations, " +
                            worst_label + " " + fmt(r.worst)};
}

}  // namespace

int main() {
    criterion(1, "weight-oracle equivalence", 5.0,
              [] { return suite_outcome(checks::equivalence_suite(50, 200, 5, 2024), "max gap"); });

    criterion(2, "regret certification", 10.0,
              [] { return suite_outcome(checks::regret_suite(100, 100, 5, 4101), "min margin"); });

    criterion(3, "Gaussian-moment inequality", 2.0,
              [] { return suite_outcome(checks::lemma_a2_suite(1000, 1702), "min margin"); });

    criterion(4, "TVAR stationary variance", 2.0, [] {
        const auto params = tvar::TvarParams::constant({0.5}, 1.0, 0.5);
        const auto r = tvar::simulate_tvar(params, 100000, tvar::InnovationSpec::gaussian(), 20240601);
        double mean = 0.0;
        for (double x : r.x) mean += x;
        mean /= static_cast<double>(r.x.size());
        double var = 0.0;
        for (double x : r.x) var += (x - mean) * (x - mean);
        var /= static_cast<double>(r.x.size() - 1);
        const double rel = std::abs(var / (4.0 / 3.0) - 1.0);
        return Outcome{rel < 0.05, "variance " + fmt(var) + " vs 4/3, rel err " + fmt(rel)};
    });

    criterion(5, "bank calibration", 0.0, [] {
        const auto s = predictors::make_bank_spec(1024, 0.5, 0.5, 3, 1.0, 8.0);
        const auto si = predictors::make_bank_spec(1024, std::numeric_limits<double>::infinity(), 0.5, 3, 1.0, 8.0);
        bool decreasing = true;
        for (const auto* b : {&s, &si})
            for (std::size_t i = 1; i < b->N; ++i) decreasing = decreasing && b->mu_values[i] < b->mu_values[i - 1];
        return Outcome{s.N == 7 && si.N == 49 && decreasing,
                       "N=" + std::to_string(s.N) + ", N(inf)=" + std::to_string(si.N) +
                           (decreasing ? ", mu decreasing" : ", mu NOT decreasing")};
    });

    criterion(6, "impulse-coefficient decay", 5.0,
              [] { return suite_outcome(checks::decay_suite(8, 1024, 0.6, 1), "max rel change"); });

    criterion(7, "bank vs aggregates (d=3, T=1024, 100 replications)", 60.0, [] {
        auto cfg = config::parse("{}");
        cfg.experiment.jobs = 1;
        const auto rep = evaluation::run_experiment(cfg.experiment);
        if (rep.failures() > 0) return Outcome{false, std::to_string(rep.failures()) + " failed replications"};
        const auto sums = rep.summaries();
        std::size_t best = 0;
        for (std::size_t i = 1; i < rep.bank.N; ++i)
            if (sums[i].median < sums[best].median) best = i;
        const double m1 = sums[rep.index_of("agg_strategy1")].median;
        const double m2 = sums[rep.index_of("agg_strategy2")].median;
        const double mb = sums[best].median;
        const double bound2 = mb + 0.5 * sums[best].iqr();
        const bool ok = rep.bank.N == 7 && m1 <= mb && m2 <= bound2;
        return Outcome{ok, "median S1 " + fmt(m1) + ", S2 " + fmt(m2) + ", best " + rep.predictor_ids[best] + " " +
                               fmt(mb) + " (S2 bound " + fmt(bound2) + ")"};
    });

    criterion(8, "linear cost in T and N, T-independent memory", 0.0, [] {
        auto cfg = config::parse("{}");
        const auto b = commands::run_bench(cfg);
        std::string ratios;
        for (std::size_t k = 0; k + 1 < b.seconds.size(); ++k) ratios += (k ? "," : "") + fmt(std::round(b.t_ratio(k) * 100) / 100);

        const auto& ex = cfg.experiment;
        const auto spec = predictors::make_bank_spec(ex.T, ex.beta_0, ex.c_mu, ex.order(), ex.eps, ex.clip);
        std::vector<double> etas;
        for (auto s : ex.strategies) etas.push_back(evaluation::resolve_eta(ex, s, spec.N));
        auto alloc_for = [&](std::size_t T) {
            auto c = ex;
            c.T = T;
            const std::size_t before = g_alloc_bytes.load();
            (void)evaluation::run_replication(c, spec, etas, 0);
            return g_alloc_bytes.load() - before;
        };
        const std::size_t small = alloc_for(1u << 10);
        const std::size_t large = alloc_for(1u << 14);
        const bool ok = b.linear_in_T() && b.linear_in_N() && small == large;
        return Outcome{ok, "T-doubling ratios " + ratios + ", N-doubling " + fmt(std::round(b.n_ratio() * 100) / 100) +
                               ", heap bytes T=2^10 " + std::to_string(small) + " / T=2^14 " + std::to_string(large)};
    });

    criterion(9, "byte-identical reruns", 0.0, [] {
        const auto base = fs::temp_directory_path() / "aggfc_acceptance_determinism";
        fs::remove_all(base);
        auto cfg = config::parse(R"({"T": 512, "replications": 20, "base_seed": 99, "record_weights": true})");
        std::ostringstream log;
        commands::cmd_run(cfg, base / "a", log);
        commands::cmd_run(cfg, base / "b", log);
        std::size_t compared = 0;
        for (const auto& e : fs::directory_iterator(base / "a")) {
            const auto name = e.path().filename();
            if (slurp(e.path()) != slurp(base / "b" / name)) return Outcome{false, name.string() + " differs"};
            ++compared;
        }
        fs::remove_all(base);
        return Outcome{compared >= 5, std::to_string(compared) + " files identical"};
    });

    std::printf("%s: %d of 9 criteria failed\n", g_failed ? "FAIL" : "PASS", g_failed);
    return g_failed ? 1 : 0;
}
