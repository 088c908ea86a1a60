// aggfc: simulate TVAR data, run aggregation experiments, certify the regret
// inequalities and benchmark streaming cost.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aggfc/commands.hpp"

namespace {

using namespace aggfc;

std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("AGGFC_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto s = std::stoull(v, &pos);
        if (pos != std::string(v).size()) throw std::invalid_argument("trailing characters");
        return s;
    } catch (const std::exception&) {
        throw config::ConfigError(std::string("AGGFC_SEED is not an unsigned integer: ") + v);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online aggregation of NLMS forecasters on time-varying autoregressive processes"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> T;
    std::optional<std::size_t> replications;
    std::optional<std::size_t> jobs;
    std::optional<std::string> strategy;
    std::optional<std::string> eta_mode;
    std::optional<double> eta;
    std::string suite = "all";

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "experiment configuration (JSON)");
        if (needs_config) opt->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "base seed (falls back to $AGGFC_SEED, then the config)");
        sub->add_option("-T,--horizon", T, "number of observations T");
        sub->add_option("--replications", replications, "Monte Carlo replications");
        sub->add_option("--jobs", jobs, "worker threads for replications");
        sub->add_option("--strategy", strategy, "aggregation strategy")->check(CLI::IsMember({"1", "2", "both"}));
        sub->add_option("--eta-mode", eta_mode, "learning-rate rule")
            ->check(CLI::IsMember({"corollary", "adaptive", "manual"}));
        sub->add_option("--eta", eta, "learning rate for --eta-mode manual");
    };

    auto* sim = app.add_subcommand("simulate", "write parameter paths and one TVAR realization");
    add_common(sim, true);
    auto* run = app.add_subcommand("run", "Monte Carlo comparison of the NLMS bank and its aggregates");
    add_common(run, true);
    auto* check = app.add_subcommand("check", "run the property certification suites");
    check->add_option("suite", suite, "regret | lemma-a2 | decay | equivalence | all")
        ->check(CLI::IsMember({"regret", "lemma-a2", "decay", "equivalence", "all"}))
        ->capture_default_str();
    check->add_option("--out", out_dir, "directory for offending instances")->capture_default_str();
    auto* bench = app.add_subcommand("bench", "time streaming cost in T and N");
    add_common(bench, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : commands::kConfigError;
    }

    try {
        if (check->parsed()) return commands::cmd_check(suite, out_dir, std::cout);

        config::Config cfg = config_path.empty() ? config::parse("{}") : config::load(config_path);
        commands::Overrides o;
        o.seed = seed ? seed : seed_from_env();
        o.T = T;
        o.replications = replications;
        o.jobs = jobs;
        o.eta = eta;
        if (strategy) {
            using aggregation::Strategy;
            if (*strategy == "1") o.strategies = std::vector{Strategy::gradient};
            else if (*strategy == "2") o.strategies = std::vector{Strategy::loss};
            else o.strategies = std::vector{Strategy::gradient, Strategy::loss};
        }
        if (eta_mode) {
            o.eta_mode = *eta_mode == "corollary" ? evaluation::EtaMode::corollary
                         : *eta_mode == "manual"  ? evaluation::EtaMode::manual
                                                  : evaluation::EtaMode::adaptive;
        }
        commands::apply(cfg, o);

        if (sim->parsed()) {
            commands::cmd_simulate(cfg, out_dir, std::cout);
            return commands::kOk;
        }
        if (run->parsed()) return commands::cmd_run(cfg, out_dir, std::cout).exit_code;
        if (bench->parsed()) return commands::cmd_bench(cfg, std::cout);
    } catch (const config::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return commands::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return commands::kRuntimeFailure;
    }
    return commands::kOk;
}
