#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "curemc3/commands.hpp"
#include "curemc3/config.hpp"
#include "curemc3/simulate.hpp"
#include "curemc3/version.hpp"

namespace {

using namespace curemc3;

struct Flags
{
    std::string config;
    std::optional<std::size_t> cycles;
    std::optional<std::size_t> chains;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> burn;
    std::optional<double> fdr;
    std::optional<double> alpha;
    std::optional<std::string> output;
    bool verbose = false;
};

void add_run_flags(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--cycles", f.cycles, "MCMC cycles")->check(CLI::PositiveNumber);
    cmd.add_option("--chains", f.chains, "number of tempered chains")->check(CLI::PositiveNumber);
    cmd.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", f.seed, "random seed");
    cmd.add_option("--burn", f.burn, "burn-in cycles discarded by summaries");
    cmd.add_option("--fdr", f.fdr, "FDR level for declaring subjects cured")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--alpha", f.alpha, "HPD intervals have level 1 - alpha")->check(CLI::Range(0.0, 1.0));
    cmd.add_flag("--verbose,-v", f.verbose, "print sampler progress");
}

CliOverrides overrides_of(const Flags& f)
{
    CliOverrides o;
    o.cycles = f.cycles;
    o.chains = f.chains;
    o.threads = f.threads;
    o.seed = f.seed;
    o.burn = f.burn;
    o.fdr = f.fdr;
    o.alpha = f.alpha;
    o.output_dir = f.output;
    o.verbose = f.verbose;
    return o;
}

template <class Fn>
int guarded(Fn&& fn)
{
    try {
        return fn();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bayesian promotion time cure rate models fitted by Metropolis-coupled MCMC"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());

    Flags fit_flags;
    auto* fit = app.add_subcommand("fit", "fit a model described by a JSON config");
    fit->add_option("--config", fit_flags.config, "fit configuration (JSON)")->required();
    fit->add_option("--output,-o", fit_flags.output, "output directory");
    add_run_flags(*fit, fit_flags);

    std::vector<std::string> summary_dirs;
    Flags summary_flags;
    std::vector<double> summary_quantiles{0.05, 0.5, 0.95};
    auto* summary = app.add_subcommand("summary", "summarize one or more fit directories");
    summary->add_option("fits", summary_dirs, "fit output directories")->required();
    summary->add_option("--burn", summary_flags.burn, "burn-in cycles (default: cycles / 3)");
    summary->add_option("--fdr", summary_flags.fdr, "FDR level")->check(CLI::Range(0.0, 1.0));
    summary->add_option("--alpha", summary_flags.alpha, "HPD alpha")->check(CLI::Range(0.0, 1.0));
    summary->add_option("--quantiles", summary_quantiles, "posterior quantile levels");

    std::string predict_dir, predict_newdata, predict_output;
    std::vector<double> predict_times;
    Flags predict_flags;
    auto* predict = app.add_subcommand("predict", "survival, hazard and cure probability for new subjects");
    predict->add_option("fit", predict_dir, "fit output directory")->required();
    predict->add_option("--newdata", predict_newdata, "CSV with covariate columns")->required();
    predict->add_option("--times", predict_times, "evaluation times")->required();
    predict->add_option("--alpha", predict_flags.alpha, "band alpha")->check(CLI::Range(0.0, 1.0));
    predict->add_option("--burn", predict_flags.burn, "burn-in cycles");
    predict->add_option("--output,-o", predict_output, "output CSV (default: <fit>/predictions.csv)");

    std::string residuals_dir, residuals_data, residuals_output;
    auto* residuals = app.add_subcommand("residuals", "Cox-Snell residuals at the MAP draw");
    residuals->add_option("fit", residuals_dir, "fit output directory")->required();
    residuals->add_option("--data", residuals_data, "data CSV (default: the fitted data)");
    residuals->add_option("--output,-o", residuals_output, "output CSV (default: <fit>/residuals.csv)");

    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::string> sim_output;
    auto* sim = app.add_subcommand("simulate", "simulate a dataset from a known model");
    sim->add_option("--config", sim_config, "simulation configuration (JSON)")->required();
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--output,-o", sim_output, "output CSV");

    Flags bench_flags;
    auto* bench = app.add_subcommand("bench", "time likelihood evaluations and a short sampler run");
    bench->add_option("--config", bench_flags.config, "fit configuration (JSON)")->required();
    add_run_flags(*bench, bench_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitSuccess : kExitConfigError;
    }

    if (*fit) {
        return guarded([&] {
            FitConfig cfg = load_fit_config(fit_flags.config);
            apply_overrides(cfg, overrides_of(fit_flags));
            return run_fit_command(cfg, std::cout, std::cerr);
        });
    }
    if (*summary) {
        return run_summary_command(summary_dirs, summary_flags.burn, summary_flags.fdr.value_or(0.1),
                                   summary_flags.alpha.value_or(0.1), summary_quantiles, std::cout,
                                   std::cerr);
    }
    if (*predict) {
        return run_predict_command(predict_dir, predict_newdata, predict_times,
                                   predict_flags.alpha.value_or(0.1), predict_flags.burn, predict_output,
                                   std::cout, std::cerr);
    }
    if (*residuals)
        return run_residuals_command(residuals_dir, residuals_data, residuals_output, std::cout, std::cerr);
    if (*sim) {
        return guarded([&] {
            SimulationConfig cfg = load_simulation_config(sim_config);
            if (sim_seed)
                cfg.seed = *sim_seed;
            if (sim_output)
                cfg.output_path = *sim_output;
            return run_simulate_command(cfg, std::cout, std::cerr);
        });
    }
    return guarded([&] {
        FitConfig cfg = load_fit_config(bench_flags.config);
        apply_overrides(cfg, overrides_of(bench_flags));
        return run_bench_command(cfg, bench_flags.cycles.value_or(200), std::cout, std::cerr);
    });
}
