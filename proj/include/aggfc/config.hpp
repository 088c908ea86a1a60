#pragma once

/**
 * @file config.hpp
 * @brief JSON experiment configuration.
 *
 * One file determines an experiment. Every key is optional; defaults give the
 * d = 3, T = 2^10, beta_0 = 1/2 setting with Gaussian innovations.
 *
 * {
 *   "d": 3, "T": 1024, "replications": 100, "base_seed": 1, "jobs": 1,
 *   "innovations": {"family": "gaussian" | "student-t" | "uniform", "nu": 5},
 *   "bank": {"beta_0": 0.5 | "inf", "c_mu": 0.5, "eps": 1.0, "clip": 8.0},
 *   "strategies": [1, 2],
 *   "eta": {"mode": "adaptive" | "corollary" | "manual", "value": 0.01,
 *           "strategy2_case": "iii" | "ii", "constants": {"A_star": .., "a_star": .., "L_star": ..,
 *           "m_p": .., "p": .., "zeta": .., "phi_zeta": .., "sigma_plus": ..}},
 *   "params": {"source": "synthesized", "gamma": 0.6, "n_harmonics": 3, "grid": 1024,
 *              "seed": 4, "sigma": 1.0, "delta": 0.95}
 *          or {"source": "file", "path": "paths.csv", "delta": .., "rho": .., "sigma_plus": ..},
 *   "certify": false, "record_weights": false,
 *   "bench": {"repeats": 9, "streams": 4}
 * }
 */

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggfc/csv.hpp"
#include "aggfc/evaluation.hpp"
#include "aggfc/tvar.hpp"

namespace aggfc::config {

using nlohmann::json;

/// Invalid or unreadable configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PathSynthesis {
    std::size_t grid = 1024;
    double gamma = 0.6;
    std::size_t n_harmonics = 3;
    std::uint64_t seed = 4;
    double sigma = 1.0;
    std::optional<double> delta;
};

struct BenchOptions {
    std::size_t repeats = 9;
    std::size_t streams = 4;
};

struct Config {
    evaluation::ExperimentConfig experiment;
    std::string params_source = "synthesized";
    std::optional<std::filesystem::path> params_file;
    PathSynthesis synthesis;
    BenchOptions bench;
};

namespace detail {

// 1-based line of the first occurrence of "key" in the source text, 0 if absent.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto line = line_of_key(text_, key);
        std::string where = line ? "line " + std::to_string(line) + ": " : "";
        throw ConfigError("config " + where + "'" + key + "': " + msg);
    }

    template <typename T>
    T get(const json& obj, const std::string& key, T fallback) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
        try {
            return obj.at(key).get<T>();
        } catch (const json::exception&) {
            fail(key, "has the wrong type (found " + std::string(obj.at(key).type_name()) + ")");
        }
    }

    std::size_t get_count(const json& obj, const std::string& key, std::size_t fallback) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
        const auto& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "must be a nonnegative integer");
        return v.get<std::size_t>();
    }

    std::optional<double> get_optional(const json& obj, const std::string& key) const {
        if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
        if (!obj.at(key).is_number()) fail(key, "must be a number");
        return obj.at(key).get<double>();
    }

    const json& section(const json& obj, const std::string& key) const {
        static const json empty = json::object();
        if (!obj.contains(key) || obj.at(key).is_null()) return empty;
        if (!obj.at(key).is_object()) fail(key, "must be an object");
        return obj.at(key);
    }

private:
    const std::string& text_;
};

}  // namespace detail

/// Synthesized PACF-based parameter paths.
[[nodiscard]] inline tvar::TvarParams synthesize_params(std::size_t d, const PathSynthesis& s) {
    const auto pacf = tvar::sample_pacf_paths(d, s.grid, s.gamma, s.n_harmonics, s.seed);
    return tvar::TvarParams::from_pacf(pacf, s.sigma, s.delta);
}

/**
 * @brief Parses and validates a configuration. Relative file paths resolve
 * against base_dir. Parameter paths are built (and their stability checked)
 * here, so an accepted Config is ready to run.
 */
inline Config parse(const std::string& text, const std::filesystem::path& base_dir = ".") {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    detail::Reader rd(text);
    Config cfg;
    auto& ex = cfg.experiment;

    const std::size_t d = rd.get_count(root, "d", 3);
    ex.T = rd.get_count(root, "T", 1024);
    ex.replications = rd.get_count(root, "replications", 100);
    ex.base_seed = rd.get<std::uint64_t>(root, "base_seed", 1);
    ex.jobs = rd.get_count(root, "jobs", 1);
    ex.certify = rd.get<bool>(root, "certify", false);
    ex.record_weights = rd.get<bool>(root, "record_weights", false);
    if (ex.replications < 1) rd.fail("replications", "must be >= 1");
    if (ex.T < 3) rd.fail("T", "must be >= 3");

    const auto& innov = rd.section(root, "innovations");
    const auto family = rd.get<std::string>(innov, "family", "gaussian");
    const double nu = rd.get<double>(innov, "nu", 5.0);
    if (family == "gaussian") {
        ex.innovations = tvar::InnovationSpec::gaussian();
    } else if (family == "student-t") {
        if (!(nu > 2.0)) rd.fail("nu", "Student-t degrees of freedom must exceed 2");
        ex.innovations = tvar::InnovationSpec::student_t(nu);
    } else if (family == "uniform") {
        ex.innovations = tvar::InnovationSpec::uniform();
    } else {
        rd.fail("family", "unknown innovation family '" + family + "' (gaussian, student-t, uniform)");
    }

    const auto& bank = rd.section(root, "bank");
    if (bank.contains("beta_0") && bank.at("beta_0").is_string()) {
        const auto s = bank.at("beta_0").get<std::string>();
        if (s != "inf" && s != "infinity") rd.fail("beta_0", "must be a positive number or \"inf\"");
        ex.beta_0 = std::numeric_limits<double>::infinity();
    } else {
        ex.beta_0 = rd.get<double>(bank, "beta_0", 0.5);
    }
    if (!(ex.beta_0 > 0.0)) rd.fail("beta_0", "must be positive");
    ex.c_mu = rd.get<double>(bank, "c_mu", 0.5);
    ex.eps = rd.get<double>(bank, "eps", 1.0);
    ex.clip = rd.get<double>(bank, "clip", 8.0);
    if (!(ex.c_mu > 0.0)) rd.fail("c_mu", "must be positive");
    if (!(ex.eps > 0.0)) rd.fail("eps", "must be positive");
    if (!(ex.clip > 0.0)) rd.fail("clip", "must be positive");

    if (root.contains("strategies")) {
        const auto& arr = root.at("strategies");
        if (!arr.is_array() || arr.empty()) rd.fail("strategies", "must be a nonempty array of 1 and/or 2");
        ex.strategies.clear();
        for (const auto& v : arr) {
            if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != 2))
                rd.fail("strategies", "entries must be 1 or 2");
            const auto s = v.get<int>() == 1 ? aggregation::Strategy::gradient : aggregation::Strategy::loss;
            if (std::find(ex.strategies.begin(), ex.strategies.end(), s) == ex.strategies.end())
                ex.strategies.push_back(s);
        }
    }

    const auto& eta = rd.section(root, "eta");
    const auto mode = rd.get<std::string>(eta, "mode", "adaptive");
    if (mode == "adaptive") {
        ex.eta_mode = evaluation::EtaMode::adaptive;
    } else if (mode == "corollary") {
        ex.eta_mode = evaluation::EtaMode::corollary;
    } else if (mode == "manual") {
        ex.eta_mode = evaluation::EtaMode::manual;
    } else {
        rd.fail("mode", "unknown eta mode '" + mode + "' (adaptive, corollary, manual)");
    }
    ex.eta_manual = rd.get<double>(eta, "value", 0.0);
    if (ex.eta_mode == evaluation::EtaMode::manual && !(ex.eta_manual > 0.0))
        rd.fail("value", "manual eta mode needs a positive value");
    const auto s2 = rd.get<std::string>(eta, "strategy2_case", "iii");
    if (s2 == "ii") {
        ex.strategy2_case = aggregation::EtaCase::ii;
    } else if (s2 == "iii") {
        ex.strategy2_case = aggregation::EtaCase::iii;
    } else {
        rd.fail("strategy2_case", "must be \"ii\" or \"iii\"");
    }
    if (eta.contains("constants")) {
        const auto& c = rd.section(eta, "constants");
        aggregation::ModelConstants k;
        k.A_star = rd.get<double>(c, "A_star", k.A_star);
        k.a_star = rd.get<double>(c, "a_star", std::min(k.a_star, k.A_star));
        k.L_star = rd.get<double>(c, "L_star", k.L_star);
        k.m_p = rd.get<double>(c, "m_p", k.m_p);
        k.p = rd.get<double>(c, "p", k.p);
        k.zeta = rd.get<double>(c, "zeta", k.zeta);
        k.phi_zeta = rd.get<double>(c, "phi_zeta", k.phi_zeta);
        k.sigma_plus = rd.get<double>(c, "sigma_plus", k.sigma_plus);
        try {
            k.validate();
        } catch (const std::exception& e) {
            rd.fail("constants", e.what());
        }
        ex.constants = k;
    }

    const auto& params = rd.section(root, "params");
    cfg.params_source = rd.get<std::string>(params, "source", "synthesized");
    try {
        if (cfg.params_source == "synthesized") {
            auto& s = cfg.synthesis;
            s.grid = rd.get_count(params, "grid", s.grid);
            s.gamma = rd.get<double>(params, "gamma", s.gamma);
            s.n_harmonics = rd.get_count(params, "n_harmonics", s.n_harmonics);
            s.seed = rd.get<std::uint64_t>(params, "seed", s.seed);
            s.sigma = rd.get<double>(params, "sigma", s.sigma);
            s.delta = rd.get_optional(params, "delta");
            if (!(s.gamma >= 0.0 && s.gamma < 1.0)) rd.fail("gamma", "must lie in [0,1)");
            if (s.grid < 2) rd.fail("grid", "must be >= 2");
            if (s.n_harmonics < 1) rd.fail("n_harmonics", "must be >= 1");
            if (!(s.sigma >= 0.0)) rd.fail("sigma", "must be nonnegative");
            if (d < 1) rd.fail("d", "must be >= 1");
            ex.params = synthesize_params(d, s);
        } else if (cfg.params_source == "file") {
            const auto rel = rd.get<std::string>(params, "path", "");
            if (rel.empty()) rd.fail("path", "file source needs a path");
            std::filesystem::path p(rel);
            if (p.is_relative()) p = base_dir / p;
            cfg.params_file = p;
            std::ifstream in(p);
            if (!in) rd.fail("path", "cannot open " + p.string());
            csv::ParamsFileOptions opts{rd.get_optional(params, "delta"), rd.get_optional(params, "rho"),
                                        rd.get_optional(params, "sigma_plus")};
            ex.params = csv::read_params(in, opts);
            if (root.contains("d") && ex.params.order() != d)
                rd.fail("d", "does not match the parameter file order " + std::to_string(ex.params.order()));
        } else {
            rd.fail("source", "unknown parameter source '" + cfg.params_source + "' (synthesized, file)");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        rd.fail("params", std::string("rejected: ") + e.what());
    }

    const auto& bench = rd.section(root, "bench");
    cfg.bench.repeats = std::max<std::size_t>(1, rd.get_count(bench, "repeats", cfg.bench.repeats));
    cfg.bench.streams = std::max<std::size_t>(1, rd.get_count(bench, "streams", cfg.bench.streams));

    try {
        ex.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Bank specification in the config vocabulary.
[[nodiscard]] inline json bank_to_json(const predictors::PredictorBankSpec& b) {
    json j;
    j["N"] = b.N;
    j["beta_0"] = b.infinite_smoothness() ? json("inf") : json(b.beta_0);
    j["beta_grid"] = b.beta_grid;
    j["mu_values"] = b.mu_values;
    j["c_mu"] = b.c_mu;
    j["eps"] = b.eps;
    j["clip"] = b.clip;
    j["d"] = b.order;
    return j;
}

}  // namespace aggfc::config
