#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "curemc3/design.hpp"
#include "curemc3/priors.hpp"
#include "curemc3/promotion.hpp"
#include "curemc3/sampler.hpp"

namespace curemc3 {

struct PredictRequest
{
    std::string newdata_path;
    std::vector<double> times;
    double alpha = 0.1;
};

/// Full configuration of a `fit` run, read from a JSON document.
struct FitConfig
{
    std::string input_path;
    DesignConfig design;
    PromotionSpec promotion = make_promotion_spec(Family::weibull);
    PriorConfig prior;                        // empty mu/Sigma: defaults at fit time
    std::optional<double> prior_sigma_scale;  // Sigma = scale * I when set
    Mc3Config mcmc;
    std::string output_dir = "curemc3_out";
    std::optional<std::size_t> burn;
    double fdr = 0.1;
    double hpd_alpha = 0.1;
    std::vector<double> quantiles{0.05, 0.5, 0.95};
    bool posterior_mean_predictions = false;
    std::optional<PredictRequest> predict;
    std::string source_text;  // the JSON as read, echoed into the manifest
};

/// Flag overrides applied on top of the file.
struct CliOverrides
{
    std::optional<std::size_t> cycles;
    std::optional<std::size_t> chains;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> burn;
    std::optional<double> fdr;
    std::optional<double> alpha;
    std::optional<std::string> output_dir;
    bool verbose = false;
};

/// Relative paths inside the document resolve against `base_dir`.
/// Throws ConfigError on malformed or inconsistent settings.
FitConfig parse_fit_config(const std::string& json_text, const std::string& base_dir = ".");
FitConfig load_fit_config(const std::string& path);
void apply_overrides(FitConfig& cfg, const CliOverrides& overrides);

/// Reads the "promotion_time" block (shared by fit and simulate configs).
PromotionSpec parse_promotion_block(const std::string& json_text);

}  // namespace curemc3
