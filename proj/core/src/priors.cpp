#include "curemc3/priors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"

namespace curemc3 {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("prior: ") + name + " must be finite and > 0");
}

}  // namespace

PriorConfig PriorConfig::defaults(std::size_t k)
{
    PriorConfig cfg;
    const auto kk = static_cast<Eigen::Index>(k);
    cfg.mu = Eigen::VectorXd::Zero(kk);
    cfg.Sigma = 100.0 * Eigen::MatrixXd::Identity(kk, kk);
    return cfg;
}

double inverse_gamma_log_density(double x, double shape, double scale) noexcept
{
    if (!(x > 0.0) || !std::isfinite(x))
        return kNegInf;
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double symmetric_gamma_log_density(double g, double a, double b) noexcept
{
    if (!std::isfinite(g))
        return kNegInf;
    const double ag = std::abs(g);
    double v = a * std::log(b) - std::numbers::ln2 - std::lgamma(a) - b * ag;
    if (a != 1.0)
        v += (a - 1.0) * std::log(ag);
    return v;
}

Prior::Prior(PriorConfig cfg, PromotionSpec spec) : cfg_(std::move(cfg)), spec_(std::move(spec))
{
    const Eigen::Index k = cfg_.mu.size();
    if (cfg_.Sigma.size() == 0)
        cfg_.Sigma = 100.0 * Eigen::MatrixXd::Identity(k, k);
    if (cfg_.Sigma.rows() != k || cfg_.Sigma.cols() != k)
        throw ConfigError("prior: Sigma must be " + std::to_string(k) + " x " + std::to_string(k));
    if (!cfg_.mu.allFinite() || !cfg_.Sigma.allFinite())
        throw ConfigError("prior: mu and Sigma must be finite");
    if (!cfg_.Sigma.isApprox(cfg_.Sigma.transpose(), 1e-12))
        throw ConfigError("prior: Sigma must be symmetric");
    require_positive(cfg_.a_gamma, "a_gamma");
    require_positive(cfg_.b_gamma, "b_gamma");
    require_positive(cfg_.a_lambda, "a_lambda");
    require_positive(cfg_.b_lambda, "b_lambda");
    spec_.validate();
    chol_.compute(cfg_.Sigma);
    if (chol_.info() != Eigen::Success)
        throw ConfigError("prior: Sigma is not positive definite");
    log_det_half_ = chol_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double Prior::log_beta(std::span<const double> beta) const
{
    const Eigen::Index k = cfg_.mu.size();
    if (static_cast<Eigen::Index>(beta.size()) != k)
        throw DomainError("prior: beta has the wrong length");
    const Eigen::Map<const Eigen::VectorXd> b(beta.data(), k);
    const Eigen::VectorXd z = chol_.matrixL().solve(b - cfg_.mu);
    return -0.5 * static_cast<double>(k) * kLog2Pi - log_det_half_ - 0.5 * z.squaredNorm();
}

double Prior::log_gamma(double gamma) const noexcept
{
    return symmetric_gamma_log_density(gamma, cfg_.a_gamma, cfg_.b_gamma);
}

double Prior::log_lambda(double lambda) const noexcept
{
    return inverse_gamma_log_density(lambda, cfg_.a_lambda, cfg_.b_lambda);
}

double Prior::log_alpha(std::span<const double> alpha) const
{
    if (alpha.size() != spec_.alpha_size())
        throw DomainError("prior: alpha has the wrong length");
    const std::size_t offset = spec_.is_mixture() ? spec_.K : 0;
    double total = 0.0;
    for (std::size_t j = 0; j < spec_.prior_parameters.size(); ++j) {
        const auto& p = spec_.prior_parameters[j];
        total += inverse_gamma_log_density(alpha[offset + j], p.shape, p.scale);
    }
    return total + log_dirichlet(alpha);
}

double Prior::log_dirichlet(std::span<const double> alpha) const noexcept
{
    if (!spec_.is_mixture())
        return 0.0;
    const double a0 = spec_.dirichlet_concentration;
    const double K = static_cast<double>(spec_.K);
    double sum = 0.0;
    double log_sum = 0.0;
    for (std::size_t j = 0; j < spec_.K; ++j) {
        if (!(alpha[j] > 0.0) || !(alpha[j] < 1.0))
            return kNegInf;
        sum += alpha[j];
        log_sum += std::log(alpha[j]);
    }
    if (std::abs(sum - 1.0) > 1e-12)
        return kNegInf;
    double v = std::lgamma(K * a0) - K * std::lgamma(a0);
    if (a0 != 1.0)
        v += (a0 - 1.0) * log_sum;
    return v;
}

LogPriorTerms Prior::terms(const Theta& theta) const
{
    LogPriorTerms t;
    t.beta = log_beta(theta.beta);
    t.gamma = log_gamma(theta.gamma);
    t.lambda = log_lambda(theta.lambda);
    t.dirichlet = log_dirichlet(theta.alpha);
    t.alpha = log_alpha(theta.alpha) - t.dirichlet;
    if (std::isnan(t.alpha))
        t.alpha = kNegInf;
    return t;
}

Theta Prior::sample(std::mt19937_64& rng) const
{
    Theta theta;
    const Eigen::Index k = cfg_.mu.size();
    Eigen::VectorXd z(k);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < k; ++j)
        z(j) = normal(rng);
    const Eigen::VectorXd beta = cfg_.mu + chol_.matrixL() * z;
    theta.beta.assign(beta.data(), beta.data() + k);

    const double magnitude = std::gamma_distribution<double>(cfg_.a_gamma, 1.0 / cfg_.b_gamma)(rng);
    theta.gamma = std::bernoulli_distribution(0.5)(rng) ? magnitude : -magnitude;
    theta.lambda = 1.0 / std::gamma_distribution<double>(cfg_.a_lambda, 1.0 / cfg_.b_lambda)(rng);

    theta.alpha.assign(spec_.alpha_size(), 0.0);
    const std::size_t offset = spec_.is_mixture() ? spec_.K : 0;
    if (spec_.is_mixture()) {
        std::gamma_distribution<double> g(spec_.dirichlet_concentration, 1.0);
        double total = 0.0;
        for (std::size_t j = 0; j < spec_.K; ++j) {
            theta.alpha[j] = g(rng);
            total += theta.alpha[j];
        }
        for (std::size_t j = 0; j < spec_.K; ++j)
            theta.alpha[j] /= total;
    }
    for (std::size_t j = 0; j < spec_.prior_parameters.size(); ++j) {
        const auto& p = spec_.prior_parameters[j];
        theta.alpha[offset + j] = 1.0 / std::gamma_distribution<double>(p.shape, 1.0 / p.scale)(rng);
    }
    return theta;
}

double Prior::alpha_prior_median(std::size_t j) const
{
    const auto& p = spec_.prior_parameters.at(j);
    return p.scale / boost::math::gamma_p_inv(p.shape, 0.5);
}

double log_prior(const Theta& theta, const PriorConfig& cfg, const PromotionSpec& spec)
{
    PriorConfig c = cfg;
    if (c.mu.size() == 0)
        c = PriorConfig::defaults(theta.beta.size());
    return Prior(std::move(c), spec).log_prior(theta);
}

Theta sample_prior(const PriorConfig& cfg, const PromotionSpec& spec, std::mt19937_64& rng)
{
    return Prior(cfg, spec).sample(rng);
}

}  // namespace curemc3
