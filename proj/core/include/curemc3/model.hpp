#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curemc3/promotion.hpp"

namespace curemc3 {

/// log c where c = e^{1/e} is the family constant of the generalized model.
inline constexpr double kLogC = 0.36787944117144233;

/// |gamma| at or below this value is evaluated through the gamma -> 0 limit.
inline constexpr double kGammaLimitTol = 1e-10;

/// Model parameter vector (alpha, beta, gamma, lambda).
struct Theta
{
    std::vector<double> alpha;
    std::vector<double> beta;
    double gamma = 0.0;
    double lambda = 1.0;

    friend bool operator==(const Theta&, const Theta&) = default;
};

/// Throws DomainError when theta violates its invariants for `spec` and `k`.
void validate_theta(const Theta& theta, const PromotionSpec& spec, std::size_t k);

/// Right-censored observations with their design matrix.
struct SurvivalDataset
{
    std::vector<double> y;
    std::vector<std::uint8_t> delta;  // 1 = event, 0 = censored
    Eigen::MatrixXd X;                // n x k
    std::vector<std::string> column_names;

    std::size_t n() const noexcept { return y.size(); }
    std::size_t k() const noexcept { return static_cast<std::size_t>(X.cols()); }
    std::size_t n_events() const noexcept;
    std::vector<std::size_t> censored_indices() const;

    /// Throws DataError on violated invariants. `allow_empty` admits n = 0
    /// (prior-only runs).
    void validate(bool allow_empty = false) const;
};

/// Latent susceptibility indicators for the censored subjects: entry j
/// refers to `indices[j]`. Uncensored subjects are implicitly susceptible.
struct LatentStatus
{
    std::vector<std::size_t> indices;
    std::vector<std::uint8_t> susceptible;  // 1 = susceptible, 0 = cured

    static LatentStatus all_susceptible(const SurvivalDataset& data);
    /// Indicator of observation i (1 for events).
    int at(std::size_t i) const;
};

/// Log-scale model quantities of one subject at one time.
struct PointLogTerms
{
    double log_surv = 0.0;  // log S_P(t)
    double log_cure = 0.0;  // log p0(x)
    double log_dens = 0.0;  // log f_P(t)
    bool valid = true;      // false: base outside the support
};

/// Evaluates the model from the linear predictor x*beta and the promotion
/// (log f, log F). Never throws; `valid == false` flags an invalid base.
PointLogTerms point_log_terms(double eta, double log_F, double log_f, double gamma,
                              double lambda) noexcept;

double linear_predictor(const Theta& theta, std::span<const double> x);

/// Population survival S_P(t | x). Throws InvalidBase outside the support.
double pop_survival(double t, const Theta& theta, std::span<const double> x,
                    const PromotionSpec& spec);
/// Cure rate p0(x) = lim S_P(t).
double cure_rate(const Theta& theta, std::span<const double> x, const PromotionSpec& spec);
double pop_density(double t, const Theta& theta, std::span<const double> x,
                   const PromotionSpec& spec);

/// Susceptible survival/density; throw DegenerateSusceptibles if 1 - p0 < 1e-12.
double susceptible_survival(double t, const Theta& theta, std::span<const double> x,
                            const PromotionSpec& spec);
double susceptible_density(double t, const Theta& theta, std::span<const double> x,
                           const PromotionSpec& spec);

/// h_P = f_P / S_P, H_P = -log S_P and P(I = 0 | T >= t) = p0 / S_P.
/// All throw DegenerateSurvival when S_P(t) < 1e-300.
double hazard(double t, const Theta& theta, std::span<const double> x, const PromotionSpec& spec);
double cumulative_hazard(double t, const Theta& theta, std::span<const double> x,
                         const PromotionSpec& spec);
double conditional_cured_prob(double t, const Theta& theta, std::span<const double> x,
                              const PromotionSpec& spec);

/// Sum of log f_P over events and log S_P over censored subjects;
/// kNegInf in rejection regions.
double observed_log_likelihood(const SurvivalDataset& data, const Theta& theta,
                               const PromotionSpec& spec);

/// Complete-data log-likelihood given the latent indicators.
double complete_log_likelihood(const SurvivalDataset& data, const Theta& theta,
                               const LatentStatus& latent, const PromotionSpec& spec);

/// Per-observation contribution of a censored subject with indicator I.
double censored_contribution(const PointLogTerms& terms, int indicator) noexcept;

/// True when X has at least one non-constant column (identifiability note).
bool has_varying_covariate(const SurvivalDataset& data);

}  // namespace curemc3
