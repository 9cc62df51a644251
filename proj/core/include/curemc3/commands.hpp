#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "curemc3/analysis.hpp"
#include "curemc3/config.hpp"
#include "curemc3/design.hpp"
#include "curemc3/sampler.hpp"
#include "curemc3/simulate.hpp"

namespace curemc3 {

enum ExitCode : int
{
    kExitSuccess = 0,
    kExitFailure = 1,
    kExitConfigError = 2,
    kExitDataError = 3,
    kExitNumericFailure = 4,
};

/// Maps a caught exception to the documented exit codes.
int exit_code_for(const std::exception& error) noexcept;

/// A fit reloaded from its output directory.
struct StoredFit
{
    FitResult fit;
    DesignSchema schema;
    std::string data_path;
    DesignConfig design;
    std::size_t default_burn = 0;
};

/// Writes samples.csv, latent_draws.csv, diagnostics.csv, swap_rates.csv and
/// model.json into `dir`.
void save_fit(const std::string& dir, const FitResult& fit, const DesignSchema& schema,
              const FitConfig& cfg);
StoredFit load_fit(const std::string& dir);

struct ModelScore
{
    std::string label;
    double bic = 0.0;
    double aic = 0.0;
};
/// Ascending BIC.
std::vector<ModelScore> rank_by_bic(std::vector<ModelScore> scores);

/// Run synopsis: model, BIC/AIC, cycles, chains, swap-rate min/median/max and MAP table.
std::string format_synopsis(const FitResult& fit);
std::string format_summary(const FitResult& fit, const SummaryReport& report);

int run_fit_command(const FitConfig& cfg, std::ostream& out, std::ostream& err);
int run_summary_command(const std::vector<std::string>& fit_dirs, std::optional<std::size_t> burn,
                        double fdr, double alpha, const std::vector<double>& quantiles,
                        std::ostream& out, std::ostream& err);
int run_predict_command(const std::string& fit_dir, const std::string& newdata_path,
                        const std::vector<double>& times, double alpha,
                        std::optional<std::size_t> burn, const std::string& output_path,
                        std::ostream& out, std::ostream& err);
int run_residuals_command(const std::string& fit_dir, const std::string& data_path,
                          const std::string& output_path, std::ostream& out, std::ostream& err);
int run_simulate_command(const SimulationConfig& cfg, std::ostream& out, std::ostream& err);
/// Times likelihood evaluations and a short sampler run.
int run_bench_command(const FitConfig& cfg, std::size_t cycles, std::ostream& out,
                      std::ostream& err);

/// Writes residuals.csv rows (residual, censoring, KM cumulative hazard).
void write_residuals_csv(const std::string& path, const ResidualDiagnostic& diag);
void write_predictions_csv(const std::string& path, const PredictionTable& table,
                           bool posterior_mean);

}  // namespace curemc3
