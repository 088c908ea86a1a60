#pragma once

/**
 * @file commands.hpp
 * @brief Implementations of the aggfc subcommands (simulate, run, check,
 * bench). The executable in tools/ only parses flags and dispatches here.
 */

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggfc/checks.hpp"
#include "aggfc/config.hpp"
#include "aggfc/csv.hpp"
#include "aggfc/evaluation.hpp"

namespace aggfc::commands {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 1, kPropertyViolation = 2, kRuntimeFailure = 3 };

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> T;
    std::optional<std::size_t> replications;
    std::optional<std::size_t> jobs;
    std::optional<std::vector<aggregation::Strategy>> strategies;
    std::optional<evaluation::EtaMode> eta_mode;
    std::optional<double> eta;
};

/// Applies command-line overrides; throws config::ConfigError if the result is invalid.
inline void apply(config::Config& cfg, const Overrides& o) {
    auto& ex = cfg.experiment;
    if (o.seed) ex.base_seed = *o.seed;
    if (o.T) ex.T = *o.T;
    if (o.replications) ex.replications = *o.replications;
    if (o.jobs) ex.jobs = *o.jobs;
    if (o.strategies) ex.strategies = *o.strategies;
    if (o.eta) {
        ex.eta_manual = *o.eta;
        if (!o.eta_mode) ex.eta_mode = evaluation::EtaMode::manual;
    }
    if (o.eta_mode) ex.eta_mode = *o.eta_mode;
    try {
        ex.validate();
    } catch (const std::exception& e) {
        throw config::ConfigError(std::string("override: ") + e.what());
    }
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".aggfc_write_probe";
    {
        std::ofstream p(probe);
        if (!p) throw std::runtime_error("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------

struct SimulateSummary {
    std::size_t T = 0;
    std::size_t d = 0;
    double max_abs = 0.0;
    double variance = 0.0;
};

/// Writes params.csv and realization.csv for seed = base_seed.
inline SimulateSummary cmd_simulate(const config::Config& cfg, const fs::path& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const auto& ex = cfg.experiment;
    const auto real = tvar::simulate_tvar(ex.params, ex.T, ex.innovations, ex.base_seed);
    {
        auto f = csv::open_for_write(out_dir / "params.csv");
        csv::write_params(f, ex.params);
    }
    {
        auto f = csv::open_for_write(out_dir / "realization.csv");
        csv::write_realization(f, real);
    }
    SimulateSummary s;
    s.T = real.T;
    s.d = ex.params.order();
    double mean = 0.0;
    for (double x : real.x) {
        s.max_abs = std::max(s.max_abs, std::abs(x));
        mean += x;
    }
    mean /= static_cast<double>(real.x.size());
    for (double x : real.x) s.variance += (x - mean) * (x - mean);
    s.variance /= static_cast<double>(real.x.size() > 1 ? real.x.size() - 1 : 1);
    log << "simulate: T=" << s.T << " d=" << s.d << " seed=" << ex.base_seed << " burn_in=" << real.burn_in
        << " max|X|=" << csv::format_double(s.max_abs) << " sample_variance=" << csv::format_double(s.variance)
        << '\n';
    return s;
}

// ---------------------------------------------------------------------------

/// Static SVG boxplot, one box per predictor, bank first, then the aggregates.
inline std::string boxplot_svg(const evaluation::LossReport& report) {
    const auto sums = report.summaries();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : sums) {
        if (std::isfinite(s.min)) lo = std::min(lo, s.min);
        if (std::isfinite(s.max)) hi = std::max(hi, s.max);
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double width = 60.0 * static_cast<double>(sums.size()) + 80.0;
    const double height = 360.0;
    const double top = 20.0;
    const double bottom = 300.0;
    auto ypos = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };
    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<line x1=\"50\" y1=\"" << top << "\" x2=\"50\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"4\" y=\"" << ypos(hi) + 4 << "\" font-size=\"10\">" << csv::format_double(hi) << "</text>\n";
    svg << "<text x=\"4\" y=\"" << ypos(lo) + 4 << "\" font-size=\"10\">" << csv::format_double(lo) << "</text>\n";
    const std::size_t n_bank = report.bank.N;
    for (std::size_t k = 0; k < sums.size(); ++k) {
        const auto& s = sums[k];
        const double cx = 80.0 + 60.0 * static_cast<double>(k);
        if (k == n_bank) {
            svg << "<line x1=\"" << cx - 30 << "\" y1=\"" << top << "\" x2=\"" << cx - 30 << "\" y2=\"" << bottom
                << "\" stroke=\"red\"/>\n";
        }
        if (!std::isfinite(s.median)) continue;
        svg << "<line x1=\"" << cx << "\" y1=\"" << ypos(s.min) << "\" x2=\"" << cx << "\" y2=\"" << ypos(s.max)
            << "\" stroke=\"black\"/>\n";
        svg << "<rect x=\"" << cx - 15 << "\" y=\"" << ypos(s.q75) << "\" width=\"30\" height=\""
            << std::max(ypos(s.q25) - ypos(s.q75), 0.5) << "\" fill=\"white\" stroke=\"blue\"/>\n";
        svg << "<line x1=\"" << cx - 15 << "\" y1=\"" << ypos(s.median) << "\" x2=\"" << cx + 15 << "\" y2=\""
            << ypos(s.median) << "\" stroke=\"red\"/>\n";
        svg << "<text x=\"" << cx - 25 << "\" y=\"" << bottom + 20 << "\" font-size=\"9\">"
            << report.predictor_ids[k] << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

[[nodiscard]] inline json plot_data(const evaluation::LossReport& report) {
    json boxes = json::array();
    const auto sums = report.summaries();
    for (std::size_t k = 0; k < sums.size(); ++k) {
        const auto& s = sums[k];
        boxes.push_back({{"predictor_id", report.predictor_ids[k]},
                         {"min", s.min},
                         {"q25", s.q25},
                         {"median", s.median},
                         {"q75", s.q75},
                         {"max", s.max}});
    }
    return json{{"boxes", boxes}, {"separator_after", report.bank.N}};
}

struct RunOutcome {
    evaluation::LossReport report;
    int exit_code = kOk;
};

/**
 * @brief Runs the experiment and writes replications.csv, summary.csv,
 * boxplot.json, boxplot.svg, and MANIFEST.json (plus weights_strategy*.csv
 * when record_weights is set).
 */
inline RunOutcome cmd_run(const config::Config& cfg, const fs::path& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    RunOutcome out;
    out.report = evaluation::run_experiment(cfg.experiment);
    const auto& rep = out.report;

    std::vector<std::string> files{"replications.csv", "summary.csv", "boxplot.json", "boxplot.svg"};
    {
        auto f = csv::open_for_write(out_dir / "replications.csv");
        csv::write_replications(f, rep);
    }
    {
        auto f = csv::open_for_write(out_dir / "summary.csv");
        csv::write_summary(f, rep);
    }
    {
        auto f = csv::open_for_write(out_dir / "boxplot.json");
        f << plot_data(rep).dump(2) << '\n';
    }
    {
        auto f = csv::open_for_write(out_dir / "boxplot.svg");
        f << boxplot_svg(rep);
    }
    for (const auto& traj : rep.trajectories) {
        const std::string name = "weights_strategy" + aggregation::to_string(traj.strategy) + ".csv";
        auto f = csv::open_for_write(out_dir / name);
        csv::write_weights(f, traj);
        files.push_back(name);
    }

    json manifest;
    manifest["files"] = files;
    manifest["replications"] = cfg.experiment.replications;
    manifest["base_seed"] = cfg.experiment.base_seed;
    manifest["T"] = cfg.experiment.T;
    manifest["bank"] = config::bank_to_json(rep.bank);
    json etas = json::object();
    for (std::size_t k = 0; k < rep.strategies.size(); ++k)
        etas[evaluation::aggregate_id(rep.strategies[k])] = rep.etas[k];
    manifest["eta"] = etas;
    manifest["eta_mode"] = evaluation::to_string(cfg.experiment.eta_mode);
    json failures = json::array();
    for (const auto& r : rep.records) {
        if (!r.ok()) failures.push_back({{"replication", r.index}, {"seed", r.seed}, {"error", *r.error}});
    }
    manifest["failures"] = failures;
    if (cfg.experiment.certify) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& r : rep.records)
            for (double m : r.regret_margins) worst = std::min(worst, m);
        manifest["min_regret_margin"] = worst;
    }
    {
        auto f = csv::open_for_write(out_dir / "MANIFEST.json");
        f << manifest.dump(2) << '\n';
    }

    const auto sums = rep.summaries();
    log << "run: N=" << rep.bank.N << " replications=" << cfg.experiment.replications
        << " failures=" << rep.failures() << '\n';
    for (std::size_t k = 0; k < sums.size(); ++k) {
        log << "  " << std::left << std::setw(16) << rep.predictor_ids[k]
            << " median L_T=" << csv::format_double(sums[k].median) << '\n';
    }
    out.exit_code = rep.failures() > 0 ? kRuntimeFailure : kOk;
    return out;
}

// ---------------------------------------------------------------------------

/// Runs the named suite(s) ("regret", "lemma-a2", "decay", "equivalence", "all").
inline int cmd_check(const std::string& suite, const fs::path& out_dir, std::ostream& log,
                     std::vector<checks::SuiteResult>* results = nullptr) {
    std::vector<checks::SuiteResult> rs;
    const bool all = suite == "all";
    if (!all && suite != "regret" && suite != "lemma-a2" && suite != "decay" && suite != "equivalence")
        throw config::ConfigError("unknown check suite '" + suite + "'");
    if (all || suite == "equivalence") rs.push_back(checks::equivalence_suite());
    if (all || suite == "regret") rs.push_back(checks::regret_suite());
    if (all || suite == "lemma-a2") rs.push_back(checks::lemma_a2_suite());
    if (all || suite == "decay") rs.push_back(checks::decay_suite());

    bool ok = true;
    for (const auto& r : rs) {
        log << "check " << r.name << ": " << (r.checked - r.violations) << "/" << r.checked << " passed, "
            << r.violations << " violations (worst " << csv::format_double(r.worst) << ")\n";
        if (!r.passed()) {
            ok = false;
            if (r.first_violation) {
                ensure_dir(out_dir);
                const auto path = out_dir / ("violation_" + r.name + ".json");
                auto f = csv::open_for_write(path);
                f << r.first_violation->dump(2) << '\n';
                log << "  offending instance written to " << path.string() << '\n';
            }
        }
    }
    if (results) *results = rs;
    return ok ? kOk : kPropertyViolation;
}

// ---------------------------------------------------------------------------

struct BenchReport {
    std::size_t N = 0;
    std::vector<std::size_t> T_values;
    std::vector<double> seconds;  // per T, N fixed
    double seconds_N = 0.0;       // at T_values.back(), N
    double seconds_2N = 0.0;      // at T_values.back(), 2N
    std::size_t state_bytes = 0;

    [[nodiscard]] double t_ratio(std::size_t k) const { return seconds[k + 1] / seconds[k]; }
    [[nodiscard]] double total_ratio() const { return seconds.back() / seconds.front(); }
    [[nodiscard]] double n_ratio() const { return seconds_2N / seconds_N; }

    [[nodiscard]] bool linear_in_T() const {
        for (std::size_t k = 0; k + 1 < seconds.size(); ++k)
            if (t_ratio(k) > 2.5) return false;
        return total_ratio() <= 24.0;
    }
    [[nodiscard]] bool linear_in_N() const { return n_ratio() <= 2.5; }
};

/// Best-of-repeats wall time for streaming `streams` replications.
inline double time_streaming(const evaluation::ExperimentConfig& base, std::size_t T,
                             const predictors::PredictorBankSpec& spec, std::size_t repeats, std::size_t streams) {
    evaluation::ExperimentConfig cfg = base;
    cfg.T = T;
    cfg.certify = false;
    cfg.record_weights = false;
    std::vector<double> etas;
    for (auto s : cfg.strategies) etas.push_back(evaluation::resolve_eta(cfg, s, spec.N));
    double best = std::numeric_limits<double>::infinity();
    volatile double sink = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t k = 0; k < streams; ++k) {
            const auto rec = evaluation::run_replication(cfg, spec, etas, k);
            sink = sink + rec.losses.back();
        }
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

inline BenchReport run_bench(const config::Config& cfg, std::vector<std::size_t> T_values = {1u << 10, 1u << 11,
                                                                                            1u << 12, 1u << 13,
                                                                                            1u << 14}) {
    const auto& ex = cfg.experiment;
    BenchReport b;
    b.T_values = T_values;
    const auto spec = predictors::make_bank_spec(ex.T, ex.beta_0, ex.c_mu, ex.order(), ex.eps, ex.clip);
    b.N = spec.N;
    const auto spec2 = predictors::make_bank_spec_with_size(ex.T, 2 * spec.N, ex.beta_0, ex.c_mu, ex.order(), ex.eps,
                                                            ex.clip);
    // Round-robin over sizes so that clock drift hits every size alike; keep the best pass.
    const double inf = std::numeric_limits<double>::infinity();
    b.seconds.assign(T_values.size(), inf);
    b.seconds_2N = inf;
    // Smaller T runs proportionally more streams so every sample covers the same number of steps;
    // times are reported per cfg.bench.streams streams.
    const std::size_t t_max = *std::max_element(T_values.begin(), T_values.end());
    for (std::size_t r = 0; r < cfg.bench.repeats; ++r) {
        for (std::size_t k = 0; k < T_values.size(); ++k) {
            const std::size_t scale = std::max<std::size_t>(1, t_max / T_values[k]);
            const double t = time_streaming(ex, T_values[k], spec, 1, cfg.bench.streams * scale);
            b.seconds[k] = std::min(b.seconds[k], t / static_cast<double>(scale));
        }
        b.seconds_2N = std::min(b.seconds_2N, time_streaming(ex, T_values.back(), spec2, 1, cfg.bench.streams));
    }
    b.seconds_N = b.seconds.back();
    // per-predictor: theta, lag buffer; per-aggregator: log-weights, weights, cached predictions, scratch
    b.state_bytes = sizeof(double) * (2 * ex.order() * spec.N + 4 * spec.N * ex.strategies.size() + 2 * ex.order());
    return b;
}

inline int cmd_bench(const config::Config& cfg, std::ostream& log, BenchReport* out = nullptr) {
    const auto b = run_bench(cfg);
    log << "bench: d=" << cfg.experiment.order() << " N=" << b.N << " streams=" << cfg.bench.streams
        << " repeats=" << cfg.bench.repeats << '\n';
    for (std::size_t k = 0; k < b.T_values.size(); ++k) {
        const double per_step = b.seconds[k] / static_cast<double>(b.T_values[k] * cfg.bench.streams);
        log << "  T=" << b.T_values[k] << " time=" << std::fixed << std::setprecision(6) << b.seconds[k]
            << "s per_step=" << std::setprecision(1) << per_step * 1e9 << "ns";
        if (k > 0) log << " ratio=" << std::setprecision(3) << b.t_ratio(k - 1);
        log << '\n';
    }
    log << std::setprecision(3);
    log << "  T=" << b.T_values.back() << "/T=" << b.T_values.front() << " ratio=" << b.total_ratio()
        << " (limit 24)\n";
    log << "  N=" << b.N << " -> " << 2 * b.N << " ratio=" << b.n_ratio() << " (limit 2.5)\n";
    log << "  streaming state: " << b.state_bytes << " bytes, independent of T\n";
    log.unsetf(std::ios::fixed);
    if (out) *out = b;
    const bool ok = b.linear_in_T() && b.linear_in_N();
    log << "bench: " << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kOk : kPropertyViolation;
}

}  // namespace aggfc::commands
