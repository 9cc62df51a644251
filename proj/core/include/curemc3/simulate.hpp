#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "curemc3/model.hpp"
#include "curemc3/promotion.hpp"
#include "curemc3/rng.hpp"

namespace curemc3 {

struct NumericCovariateGen
{
    std::string name;
    enum class Kind
    {
        normal,
        uniform,
    } kind = Kind::normal;
    double a = 0.0;  // mean or lower bound
    double b = 1.0;  // sd or upper bound
};

struct FactorCovariateGen
{
    std::string name;
    std::vector<std::string> levels;  // levels[0] is the reference
    std::vector<double> probabilities;
};

/// Synthetic data generator: covariates, true theta and an exponential
/// censoring scheme. The design is intercept (optional), numeric columns in
/// order, then treatment-coded factor indicators.
struct SimulationConfig
{
    std::size_t n = 500;
    PromotionSpec spec = make_promotion_spec(Family::weibull);
    Theta theta;
    bool intercept = true;
    std::vector<NumericCovariateGen> numeric;
    std::vector<FactorCovariateGen> factors;
    double censoring_rate = 0.1;  // 0: no censoring of susceptibles
    std::uint64_t seed = 1;
    std::string output_path;

    std::size_t design_width() const noexcept;
};

struct SimulatedData
{
    SurvivalDataset data;
    std::vector<std::uint8_t> cured;  // true status: 1 = cured
    std::vector<std::vector<std::string>> covariate_cells;  // raw values per subject
    std::vector<std::string> covariate_names;
};

/// Draws the dataset. Throws GeneratorError on an invalid theta.
SimulatedData simulate(const SimulationConfig& cfg);

/// Susceptible event time T with S_U(T) = u, by bracketing and bisection.
double draw_susceptible_time(const Theta& theta, std::span<const double> x,
                             const PromotionSpec& spec, double u);

/// CSV with columns time, censoring, covariates..., true_status.
void write_simulated_csv(const SimulatedData& sim, const std::string& path);

SimulationConfig parse_simulation_config(const std::string& json_text);
SimulationConfig load_simulation_config(const std::string& path);

}  // namespace curemc3
