#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "curemc3/model.hpp"
#include "curemc3/sampler.hpp"

namespace curemc3 {

struct Interval
{
    double low = 0.0;
    double high = 0.0;
};

/// Shortest window of ceil((1 - alpha) m) sorted draws; earliest on ties.
/// Throws InsufficientSamples below 10 draws.
Interval hpd_interval(std::span<const double> samples, double alpha);

/// Type-7 sample quantile (linear interpolation of order statistics).
double sample_quantile(std::span<const double> samples, double p);

/// Indices of subjects declared cured: the longest prefix of the
/// probabilities sorted in decreasing order whose mean (1 - p) stays <= q.
std::vector<std::size_t> fdr_discoveries(std::span<const double> cured_probs, double q);

struct FdrTpr
{
    double level = 0.0;
    std::size_t declared = 0;
    double achieved_fdr = 0.0;
    double tpr = 0.0;
};

/// `true_cured[i]` is 1 for truly cured subjects.
std::vector<FdrTpr> evaluate_discoveries(std::span<const std::uint8_t> true_cured,
                                         std::span<const double> cured_probs,
                                         std::span<const double> levels);

/// r_i = -log S_P(y_i) at theta. Throws DegenerateSurvival if S_P(y_i) = 0.
std::vector<double> cox_snell_residuals(const SurvivalDataset& data, const Theta& theta,
                                        const PromotionSpec& spec);

/// Product-limit estimate evaluated at the distinct sorted times.
struct KaplanMeier
{
    std::vector<double> times;
    std::vector<double> survival;

    /// Right-continuous step function value at t.
    double at(double t) const;
    double cumulative_hazard(double t) const;
};
KaplanMeier kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> status);

/// Residual-versus-KM-cumulative-hazard pairs for the diagnostic plot.
struct ResidualDiagnostic
{
    std::vector<double> residual;
    std::vector<std::uint8_t> status;
    std::vector<double> km_cumulative_hazard;
};
ResidualDiagnostic residual_diagnostic(std::span<const double> residuals,
                                       std::span<const std::uint8_t> status);

struct ParameterSummary
{
    std::string name;
    double map = 0.0;
    double mean = 0.0;
    Interval hpd;
    std::vector<double> quantiles;
};

struct SummaryReport
{
    std::size_t burn = 0;
    std::size_t retained = 0;
    double alpha = 0.1;
    double fdr_level = 0.1;
    std::vector<double> quantile_levels;
    std::vector<ParameterSummary> parameters;
    std::vector<std::size_t> censored_indices;
    std::vector<double> cured_posterior_prob;  // per censored subject
    std::vector<std::size_t> discoveries;      // subject indices (into the data)
};

/// Default burn-in: floor(cycles / 3).
std::size_t default_burn(std::size_t cycles) noexcept;

/// P(I_i = 0 | data) per censored subject from the retained latent draws.
std::vector<double> cured_posterior_probabilities(const FitResult& fit, std::size_t burn);

SummaryReport summarize(const FitResult& fit, std::size_t burn, double alpha, double fdr_level,
                        std::vector<double> quantile_levels);

/// One predicted quantity: point value at the MAP draw plus an HPD band and
/// the posterior mean.
struct PredictedValue
{
    double map = 0.0;
    double mean = 0.0;
    Interval band;
};

struct PredictionRow
{
    std::size_t row = 0;
    double t = 0.0;
    PredictedValue survival;
    PredictedValue cumulative_hazard;
    PredictedValue hazard;
    PredictedValue cured_probability;  // P(I = 0 | T >= t)
};

struct PredictionTable
{
    double alpha = 0.1;
    std::vector<PredictionRow> rows;  // row-major over (newdata row, t)
};

/// Evaluates S_P, H_P, h_P and P(I = 0 | T >= t) on every retained draw.
/// `newdata` must have the fit's design width (SchemaMismatch otherwise).
PredictionTable predict(const FitResult& fit, const Eigen::MatrixXd& newdata,
                        std::span<const double> tau_values, double alpha, std::size_t burn);

/// All four quantities for one draw; survival at F(t) = 0 is exactly 1.
struct PointPrediction
{
    double survival = 1.0;
    double cumulative_hazard = 0.0;
    double hazard = 0.0;
    double cured_probability = 0.0;
};
PointPrediction predict_point(double t, const Theta& theta, std::span<const double> x,
                              const PromotionSpec& spec);

}  // namespace curemc3
