#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <random>

#include "curemc3/model.hpp"
#include "curemc3/promotion.hpp"

namespace curemc3 {

/// Hyper-parameters of the factorized prior. Empty mu/Sigma mean the
/// defaults 0 and 100 I_k.
struct PriorConfig
{
    Eigen::VectorXd mu;
    Eigen::MatrixXd Sigma;
    double a_gamma = 1.0;
    double b_gamma = 1.0;
    double a_lambda = 2.1;
    double b_lambda = 1.1;

    static PriorConfig defaults(std::size_t k);
};

/// The individual log-prior terms; `total()` is their sum.
struct LogPriorTerms
{
    double beta = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;      // inverse-gamma terms of positive promotion parameters
    double dirichlet = 0.0;  // mixtures only

    double total() const noexcept { return beta + gamma + lambda + alpha + dirichlet; }
};

/// Prior bound to a promotion spec, with the Cholesky factor of Sigma
/// computed once.
class Prior
{
public:
    Prior(PriorConfig cfg, PromotionSpec spec);

    const PriorConfig& config() const noexcept { return cfg_; }
    const PromotionSpec& spec() const noexcept { return spec_; }
    std::size_t k() const noexcept { return static_cast<std::size_t>(cfg_.mu.size()); }

    LogPriorTerms terms(const Theta& theta) const;
    double log_prior(const Theta& theta) const { return terms(theta).total(); }

    double log_beta(std::span<const double> beta) const;
    double log_gamma(double gamma) const noexcept;
    double log_lambda(double lambda) const noexcept;
    /// Inverse-gamma + Dirichlet part of the promotion parameters.
    double log_alpha(std::span<const double> alpha) const;
    /// Dirichlet term of mixture proportions (0 for single families).
    double log_dirichlet(std::span<const double> alpha) const noexcept;

    Theta sample(std::mt19937_64& rng) const;

    /// Median of the inverse-gamma prior of stored alpha entry j (j indexes
    /// the component parameters, proportions excluded).
    double alpha_prior_median(std::size_t j) const;

private:
    PriorConfig cfg_;
    PromotionSpec spec_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    double log_det_half_ = 0.0;
};

/// Stateless convenience wrapper.
double log_prior(const Theta& theta, const PriorConfig& cfg, const PromotionSpec& spec);
Theta sample_prior(const PriorConfig& cfg, const PromotionSpec& spec, std::mt19937_64& rng);

/// log density of IG(shape, scale) at x (kNegInf for x <= 0).
double inverse_gamma_log_density(double x, double shape, double scale) noexcept;
/// log density of the symmetric gamma prior of gamma.
double symmetric_gamma_log_density(double g, double a, double b) noexcept;

}  // namespace curemc3
