#pragma once

// CSV import/export. Numbers are written in shortest round-trip form so that
// re-running a configuration reproduces files byte for byte.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "aggfc/aggregation.hpp"
#include "aggfc/evaluation.hpp"
#include "aggfc/tvar.hpp"

namespace aggfc::csv {

[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

[[nodiscard]] inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            std::string cell(line.substr(start, i - start));
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
            out.push_back(std::move(cell));
            start = i + 1;
        }
    }
    return out;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

/// Columns u, theta_1..theta_d, sigma at the grid points.
inline void write_params(std::ostream& out, const tvar::TvarParams& params) {
    out << "u";
    for (std::size_t j = 1; j <= params.order(); ++j) out << ",theta_" << j;
    out << ",sigma\n";
    for (std::size_t g = 0; g < params.grid_size(); ++g) {
        out << format_double(params.grid_point(g));
        for (double v : params.theta_grid()[g]) out << ',' << format_double(v);
        out << ',' << format_double(params.sigma_grid()[g]) << '\n';
    }
}

struct ParamsFileOptions {
    std::optional<double> delta;
    std::optional<double> rho;
    std::optional<double> sigma_plus;
};

/**
 * @brief Reads a parameter-path CSV (u, theta_1..theta_d, sigma) sampled on
 * an equispaced grid from 0 to 1.
 *
 * Missing class constants default to the tightest values compatible with
 * the data: delta = max spectral radius, sigma_plus = max sigma,
 * rho = min sigma / sigma_plus.
 */
inline tvar::TvarParams read_params(std::istream& in, const ParamsFileOptions& opts = {}) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("parameter file: empty");
    const auto header = split(line);
    if (header.size() < 3 || header.front() != "u" || header.back() != "sigma")
        throw std::invalid_argument("parameter file: header must be u,theta_1,...,theta_d,sigma");
    const std::size_t d = header.size() - 2;
    for (std::size_t j = 1; j <= d; ++j) {
        if (header[j] != "theta_" + std::to_string(j))
            throw std::invalid_argument("parameter file: column " + std::to_string(j + 1) + " must be theta_" +
                                        std::to_string(j));
    }
    std::vector<double> us;
    std::vector<std::vector<double>> theta;
    std::vector<double> sigma;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != d + 2)
            throw std::invalid_argument("parameter file line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(d + 2) + " columns");
        try {
            us.push_back(parse_double(cells[0]));
            std::vector<double> row;
            for (std::size_t j = 1; j <= d; ++j) row.push_back(parse_double(cells[j]));
            theta.push_back(std::move(row));
            sigma.push_back(parse_double(cells[d + 1]));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("parameter file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (us.size() < 2) throw std::invalid_argument("parameter file: at least two grid rows are required");
    const double step = 1.0 / static_cast<double>(us.size() - 1);
    for (std::size_t g = 0; g < us.size(); ++g) {
        if (std::abs(us[g] - static_cast<double>(g) * step) > 1e-9)
            throw std::invalid_argument("parameter file: u must be an equispaced grid from 0 to 1 (row " +
                                        std::to_string(g + 2) + ")");
    }
    double radius = 0.0;
    for (const auto& row : theta) radius = std::max(radius, tvar::spectral_radius(row));
    double smax = 0.0;
    double smin = std::numeric_limits<double>::infinity();
    for (double s : sigma) {
        smax = std::max(smax, s);
        smin = std::min(smin, s);
    }
    const double delta = opts.delta.value_or(std::max(radius, std::numeric_limits<double>::min()));
    const double sp = opts.sigma_plus.value_or(smax);
    const double rho = opts.rho.value_or(sp > 0.0 ? std::clamp(smin / sp, 0.0, 1.0) : 0.0);
    return tvar::TvarParams::make(std::move(theta), std::move(sigma), delta, rho, sp);
}

/// Columns t, x, sigma_t.
inline void write_realization(std::ostream& out, const tvar::TvarRealization& r) {
    out << "t,x,sigma_t\n";
    for (std::size_t t = 0; t < r.x.size(); ++t) {
        out << (t + 1) << ',' << format_double(r.x[t]) << ',' << format_double(r.sigma_trace[t]) << '\n';
    }
}

/// Columns t, alpha_1..alpha_N; row t holds the weights used at time t.
inline void write_weights(std::ostream& out, const evaluation::WeightTrajectory& traj) {
    const std::size_t n = traj.weights.empty() ? 0 : traj.weights.front().size();
    out << "t";
    for (std::size_t i = 1; i <= n; ++i) out << ",alpha_" << i;
    out << '\n';
    for (std::size_t t = 0; t < traj.weights.size(); ++t) {
        out << (t + 1);
        for (double w : traj.weights[t]) out << ',' << format_double(w);
        out << '\n';
    }
}

/// Columns replication, predictor_id, L_T; failed replications are skipped.
inline void write_replications(std::ostream& out, const evaluation::LossReport& report) {
    out << "replication,predictor_id,L_T\n";
    for (const auto& r : report.records) {
        if (!r.ok()) continue;
        for (std::size_t k = 0; k < report.predictor_ids.size(); ++k) {
            out << r.index << ',' << report.predictor_ids[k] << ',' << format_double(r.losses[k]) << '\n';
        }
    }
}

/// Columns predictor_id, min, q25, median, q75, max.
inline void write_summary(std::ostream& out, const evaluation::LossReport& report) {
    out << "predictor_id,min,q25,median,q75,max\n";
    const auto sums = report.summaries();
    for (std::size_t k = 0; k < report.predictor_ids.size(); ++k) {
        const auto& s = sums[k];
        out << report.predictor_ids[k] << ',' << format_double(s.min) << ',' << format_double(s.q25) << ','
            << format_double(s.median) << ',' << format_double(s.q75) << ',' << format_double(s.max) << '\n';
    }
}

}  // namespace aggfc::csv
