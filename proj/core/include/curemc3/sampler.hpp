#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curemc3/model.hpp"
#include "curemc3/priors.hpp"
#include "curemc3/promotion.hpp"
#include "curemc3/rng.hpp"

namespace curemc3 {

namespace detail {
class LikelihoodCache;
struct CacheContext;
}

/// Metropolis-coupled sampler settings.
struct Mc3Config
{
    std::size_t n_chains = 4;
    std::size_t mcmc_cycles = 15000;
    std::size_t sweeps_per_cycle = 10;
    std::vector<double> temperatures;  // empty: default_temperatures()
    double epsilon0 = 0.001;
    /// Random-walk scales in free-coordinate order (gamma, lambda, alpha
    /// free params, beta). Empty: 0.1 for gamma/lambda/beta and the
    /// promotion spec's prop_scale for alpha.
    std::vector<double> prop_scale_theta;
    double mala_tau = 1.5e-5;
    double mala_probability = 0.2;
    double fd_step = 1e-6;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool verbose = false;
    std::ostream* progress = nullptr;  // defaults to std::clog when verbose
    /// Recompute the cached likelihood from scratch after every cycle and
    /// throw if it drifted by more than 1e-9 (slow; tests only).
    bool check_caches = false;
};

/// Default heats h_c = (1 + eps0)^-(c^d0 - 1), d0 = 5 / 3.5 / 3 by C.
std::vector<double> default_temperatures(std::size_t n_chains, double epsilon0 = 0.001);

/// Maps Theta to the unconstrained coordinates the sampler moves in:
/// (gamma, log lambda, log alpha_free..., beta...). Mixture proportions are
/// carried as log weights w_2..w_K with w_1 = 1.
class ThetaTransform
{
public:
    enum class Kind
    {
        gamma,
        lambda,
        alpha,
        beta,
    };

    ThetaTransform(PromotionSpec spec, std::size_t k);

    std::size_t size() const noexcept { return 2 + spec_.free_size() + k_; }
    std::size_t k() const noexcept { return k_; }
    Kind kind(std::size_t j) const noexcept;
    /// Index inside beta for Kind::beta coordinates.
    std::size_t beta_index(std::size_t j) const noexcept { return j - 2 - spec_.free_size(); }

    std::vector<double> to_free(const Theta& theta) const;
    Theta from_free(std::span<const double> z) const;
    /// Stored alpha vector for the free promotion coordinates.
    std::vector<double> alpha_from_free(std::span<const double> z_alpha) const;
    /// log |d theta / d z| (log-normal and simplex Jacobians).
    double log_jacobian(std::span<const double> z) const;

    const PromotionSpec& spec() const noexcept { return spec_; }

private:
    PromotionSpec spec_;
    std::size_t k_;
};

/// Column names of the sample matrix: g_mcmc, lambda_mcmc, a1_mcmc..., b0_mcmc...
std::vector<std::string> sample_column_names(const PromotionSpec& spec, std::size_t k);
/// Flattens theta in sample-column order.
std::vector<double> theta_to_row(const Theta& theta);
Theta theta_from_row(std::span<const double> row, const PromotionSpec& spec, std::size_t k);

/// State of one tempered chain.
struct ChainState
{
    Theta theta;
    LatentStatus latent;
    double heat = 1.0;
    double log_complete_likelihood = 0.0;
    double log_prior = 0.0;
    double log_posterior_observed = 0.0;  // observed log-likelihood + log prior

    /// Un-tempered complete-data log posterior (used by swaps).
    double log_complete_posterior() const noexcept { return log_complete_likelihood + log_prior; }
};

struct ChainCounters
{
    std::size_t mwg_proposals = 0;
    std::size_t mwg_accepts = 0;
    std::size_t mala_attempts = 0;
    std::size_t mala_accepts = 0;
    std::size_t mala_fallbacks = 0;  // gradient unavailable
};

class Mc3Model;

/// A chain together with its likelihood workspace.
class Chain
{
public:
    Chain(const Mc3Model& model, Theta theta, LatentStatus latent, double heat);
    ~Chain();
    Chain(Chain&&) noexcept;
    Chain& operator=(Chain&&) noexcept;

    const ChainState& state() const noexcept { return state_; }
    double heat() const noexcept { return state_.heat; }
    ChainCounters& counters() noexcept { return counters_; }
    const ChainCounters& counters() const noexcept { return counters_; }

    /// Exchanges theta, latent status and caches with `other`; heats stay.
    void exchange_states(Chain& other) noexcept;

    /// Refreshes log_posterior_observed from the cache.
    void refresh_observed(const Mc3Model& model);
    /// Recomputes the complete log-likelihood from scratch.
    double recompute_complete_log_likelihood(const Mc3Model& model) const;

private:
    friend class ChainAccess;
    ChainState state_;
    ChainCounters counters_;
    LogPriorTerms prior_terms_;
    std::unique_ptr<detail::LikelihoodCache> cache_;
};

/// Data, priors and settings shared by all chains of one fit.
class Mc3Model
{
public:
    Mc3Model(const SurvivalDataset& data, PromotionSpec spec, PriorConfig prior_cfg,
             Mc3Config cfg);

    const SurvivalDataset& data() const noexcept { return *data_; }
    const PromotionSpec& spec() const noexcept { return prior_.spec(); }
    const Prior& prior() const noexcept { return prior_; }
    const Mc3Config& config() const noexcept { return cfg_; }
    const ThetaTransform& transform() const noexcept { return transform_; }
    const std::vector<double>& temperatures() const noexcept { return temperatures_; }
    const std::vector<double>& prop_scales() const noexcept { return prop_scales_; }

    /// Neutral start: beta = 0, gamma = +-0.1, lambda = 1, alpha at prior
    /// medians (equal proportions), every censored subject susceptible.
    Chain initial_chain(std::size_t chain_index, Rng& rng) const;

    /// Tempered log target of the free coordinates z at a given heat with the
    /// latent status held fixed; kNegInf outside the support.
    double tempered_target(const Chain& chain, std::span<const double> z) const;

    const detail::CacheContext& context() const noexcept { return *context_; }

private:
    const SurvivalDataset* data_;
    std::shared_ptr<const detail::CacheContext> context_;
    Prior prior_;
    Mc3Config cfg_;
    ThetaTransform transform_;
    std::vector<double> temperatures_;
    std::vector<double> prop_scales_;
};

/// P(I_i = 1 | theta) under heat h, from log p0 and log(S_P - p0).
double latent_susceptible_probability(double log_cure, double log_susceptible_mass,
                                      double heat) noexcept;

/// Redraws every censored indicator from its tempered full conditional.
void gibbs_update_latent(Chain& chain, const Mc3Model& model, Rng& rng);

/// One Metropolis-within-Gibbs pass over all free coordinates.
void mwg_sweep(Chain& chain, const Mc3Model& model, Rng& rng);

/// log q(z | z~) - log q(z~ | z) of the log-normal proposal on a positive
/// coordinate, i.e. log(new / old).
double lognormal_hastings_log_ratio(double old_value, double new_value) noexcept;

using LogTargetFn = std::function<double(std::span<const double>)>;

/// Central differences with step fd_step * max(1, |x_j|). Throws
/// GradientUnavailable when the target is -inf (or NaN) at a stencil point.
std::vector<double> numeric_gradient(const LogTargetFn& target, std::span<const double> x,
                                     double fd_step);

/// Outcome of one MALA step on a generic log target.
struct MalaOutcome
{
    bool accepted = false;
    double log_acceptance = 0.0;
};

/// Generic MALA step: proposes x + tau * grad + sqrt(2 tau) eps and accepts
/// with the full Metropolis-Hastings ratio. `x` and `log_target_x` are
/// updated on acceptance. Throws GradientUnavailable at the current point.
MalaOutcome mala_step(const LogTargetFn& target, std::vector<double>& x, double& log_target_x,
                      double tau, double fd_step, Rng& rng);

/// Joint MALA move on all free coordinates of a chain. Returns false (and
/// bumps mala_fallbacks) when no gradient is available; the chain is then
/// left untouched.
bool mala_sweep(Chain& chain, const Mc3Model& model, Rng& rng);

/// log acceptance probability of exchanging the states of chains with heats
/// (h_a, h_b) and un-tempered complete log posteriors (l_a, l_b).
double swap_log_acceptance(double h_a, double h_b, double l_a, double l_b) noexcept;

struct SwapStats
{
    std::vector<std::size_t> attempts;  // per adjacent pair (c, c + 1)
    std::vector<std::size_t> accepts;

    explicit SwapStats(std::size_t n_chains = 1)
        : attempts(n_chains > 1 ? n_chains - 1 : 0, 0), accepts(n_chains > 1 ? n_chains - 1 : 0, 0)
    {
    }
    std::vector<double> rates() const;
};

/// Proposes one exchange between a uniformly chosen adjacent pair. Returns the
/// pair index when accepted. No-op for a single chain.
std::optional<std::size_t> swap_move(std::span<Chain> chains, Rng& rng, SwapStats& stats);

/// Output of a Metropolis-coupled run (target chain only, except the
/// per-chain complete log-likelihood traces).
struct FitResult
{
    PromotionSpec spec;
    std::vector<std::string> design_columns;
    std::vector<std::string> column_names;  // sample-matrix column names
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;
    std::vector<std::size_t> censored_indices;
    std::vector<std::uint8_t> latent_draws;  // cycles x |censored|, row-major
    std::vector<double> log_posterior_trace;              // observed, target chain
    std::vector<std::vector<double>> complete_ll_trace;  // [chain][cycle]
    std::vector<double> temperatures;
    SwapStats swap_stats;
    std::vector<double> swap_accept_rates;
    std::vector<ChainCounters> chain_counters;
    Theta map_estimate;
    std::size_t map_index = 0;
    double map_log_likelihood = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_parameters = 0;
    double bic = 0.0;
    double aic = 0.0;
    std::vector<double> residuals;  // Cox-Snell at the MAP draw
    double wall_seconds = 0.0;

    std::size_t cycles() const noexcept { return static_cast<std::size_t>(samples.rows()); }
    std::size_t n_censored() const noexcept { return censored_indices.size(); }
    std::uint8_t latent(std::size_t cycle, std::size_t j) const
    {
        return latent_draws[cycle * censored_indices.size() + j];
    }
    Theta draw(std::size_t cycle) const;
};

/// Free parameter count d_free + k + 2.
std::size_t parameter_count(const PromotionSpec& spec, std::size_t k) noexcept;

/// Information criteria from the maximized log-likelihood.
double bayesian_information_criterion(double log_likelihood, std::size_t n_parameters,
                                      std::size_t n_obs) noexcept;
double akaike_information_criterion(double log_likelihood, std::size_t n_parameters) noexcept;

/// Runs the full sampler. Throws ConfigError on inconsistent dimensions.
FitResult run_mc3(const SurvivalDataset& data, const PromotionSpec& spec,
                  const PriorConfig& prior_cfg, const Mc3Config& cfg);

}  // namespace curemc3
