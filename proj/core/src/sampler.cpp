#include "curemc3/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"
#include "likelihood_cache.hpp"

namespace curemc3 {

std::vector<double> default_temperatures(std::size_t n_chains, double epsilon0)
{
    if (n_chains < 1)
        throw ConfigError("default_temperatures: need at least one chain");
    if (!(epsilon0 > 0.0))
        throw ConfigError("default_temperatures: epsilon0 must be > 0");
    const double d0 = n_chains <= 4 ? 5.0 : (n_chains <= 8 ? 3.5 : 3.0);
    const double log_base = std::log1p(epsilon0);
    std::vector<double> h(n_chains);
    for (std::size_t c = 0; c < n_chains; ++c)
        h[c] = std::exp(-(std::pow(static_cast<double>(c + 1), d0) - 1.0) * log_base);
    return h;
}

// ---------------------------------------------------------------------------
// Free-coordinate transform

ThetaTransform::ThetaTransform(PromotionSpec spec, std::size_t k) : spec_(std::move(spec)), k_(k)
{
    spec_.validate();
}

ThetaTransform::Kind ThetaTransform::kind(std::size_t j) const noexcept
{
    if (j == 0)
        return Kind::gamma;
    if (j == 1)
        return Kind::lambda;
    if (j < 2 + spec_.free_size())
        return Kind::alpha;
    return Kind::beta;
}

std::vector<double> ThetaTransform::to_free(const Theta& theta) const
{
    std::vector<double> z;
    z.reserve(size());
    z.push_back(theta.gamma);
    z.push_back(std::log(theta.lambda));
    std::size_t offset = 0;
    if (spec_.is_mixture()) {
        const double log_first = std::log(theta.alpha[0]);
        for (std::size_t j = 1; j < spec_.K; ++j)
            z.push_back(std::log(theta.alpha[j]) - log_first);
        offset = spec_.K;
    }
    for (std::size_t j = offset; j < theta.alpha.size(); ++j)
        z.push_back(std::log(theta.alpha[j]));
    z.insert(z.end(), theta.beta.begin(), theta.beta.end());
    return z;
}

std::vector<double> ThetaTransform::alpha_from_free(std::span<const double> z_alpha) const
{
    std::vector<double> alpha(spec_.alpha_size());
    std::size_t pos = 0;
    std::size_t out = 0;
    if (spec_.is_mixture()) {
        const std::size_t K = spec_.K;
        double lse = 0.0;  // log of w_1 = 1
        for (std::size_t j = 1; j < K; ++j)
            lse = log_add_exp(lse, z_alpha[j - 1]);
        alpha[0] = std::exp(-lse);
        for (std::size_t j = 1; j < K; ++j)
            alpha[j] = std::exp(z_alpha[j - 1] - lse);
        pos = K - 1;
        out = K;
    }
    for (; out < alpha.size(); ++out, ++pos)
        alpha[out] = std::exp(z_alpha[pos]);
    return alpha;
}

Theta ThetaTransform::from_free(std::span<const double> z) const
{
    if (z.size() != size())
        throw DomainError("free coordinate vector has the wrong length");
    Theta theta;
    theta.gamma = z[0];
    theta.lambda = std::exp(z[1]);
    theta.alpha = alpha_from_free(z.subspan(2, spec_.free_size()));
    theta.beta.assign(z.begin() + static_cast<std::ptrdiff_t>(2 + spec_.free_size()), z.end());
    return theta;
}

double ThetaTransform::log_jacobian(std::span<const double> z) const
{
    double lj = z[1];
    const auto za = z.subspan(2, spec_.free_size());
    std::size_t pos = 0;
    if (spec_.is_mixture()) {
        // p = w / sum(w) with w_1 = 1 has |dp/dw| = S^-K; w = e^z adds sum z.
        double lse = 0.0;
        for (std::size_t j = 0; j + 1 < spec_.K; ++j) {
            lj += za[j];
            lse = log_add_exp(lse, za[j]);
        }
        lj -= static_cast<double>(spec_.K) * lse;
        pos = spec_.K - 1;
    }
    for (; pos < za.size(); ++pos)
        lj += za[pos];
    return lj;
}

std::vector<std::string> sample_column_names(const PromotionSpec& spec, std::size_t k)
{
    std::vector<std::string> names{"g_mcmc", "lambda_mcmc"};
    for (std::size_t j = 0; j < spec.alpha_size(); ++j)
        names.push_back("a" + std::to_string(j + 1) + "_mcmc");
    for (std::size_t j = 0; j < k; ++j)
        names.push_back("b" + std::to_string(j) + "_mcmc");
    return names;
}

std::vector<double> theta_to_row(const Theta& theta)
{
    std::vector<double> row{theta.gamma, theta.lambda};
    row.insert(row.end(), theta.alpha.begin(), theta.alpha.end());
    row.insert(row.end(), theta.beta.begin(), theta.beta.end());
    return row;
}

Theta theta_from_row(std::span<const double> row, const PromotionSpec& spec, std::size_t k)
{
    const std::size_t d = spec.alpha_size();
    if (row.size() != 2 + d + k)
        throw DomainError("sample row has the wrong length");
    Theta theta;
    theta.gamma = row[0];
    theta.lambda = row[1];
    theta.alpha.assign(row.begin() + 2, row.begin() + 2 + static_cast<std::ptrdiff_t>(d));
    theta.beta.assign(row.begin() + 2 + static_cast<std::ptrdiff_t>(d), row.end());
    return theta;
}

// ---------------------------------------------------------------------------
// Chains

class ChainAccess
{
public:
    static ChainState& state(Chain& c) noexcept { return c.state_; }
    static LogPriorTerms& prior_terms(Chain& c) noexcept { return c.prior_terms_; }
    static detail::LikelihoodCache& cache(Chain& c) noexcept { return *c.cache_; }
    static const detail::LikelihoodCache& cache(const Chain& c) noexcept { return *c.cache_; }
};

Chain::Chain(const Mc3Model& model, Theta theta, LatentStatus latent, double heat)
    : cache_(std::make_unique<detail::LikelihoodCache>(model.context()))
{
    validate_theta(theta, model.spec(), model.data().k());
    if (latent.indices != model.context().censored)
        throw ConfigError("latent status must cover exactly the censored subjects");
    state_.theta = std::move(theta);
    state_.latent = std::move(latent);
    state_.heat = heat;
    cache_->reset(state_.theta, state_.latent);
    prior_terms_ = model.prior().terms(state_.theta);
    state_.log_prior = prior_terms_.total();
    state_.log_complete_likelihood = cache_->total();
    refresh_observed(model);
}

Chain::~Chain() = default;
Chain::Chain(Chain&&) noexcept = default;
Chain& Chain::operator=(Chain&&) noexcept = default;

void Chain::exchange_states(Chain& other) noexcept
{
    using std::swap;
    swap(state_.theta, other.state_.theta);
    swap(state_.latent, other.state_.latent);
    swap(state_.log_complete_likelihood, other.state_.log_complete_likelihood);
    swap(state_.log_prior, other.state_.log_prior);
    swap(state_.log_posterior_observed, other.state_.log_posterior_observed);
    swap(prior_terms_, other.prior_terms_);
    swap(cache_, other.cache_);
}

void Chain::refresh_observed(const Mc3Model&)
{
    state_.log_posterior_observed = cache_->observed() + state_.log_prior;
}

double Chain::recompute_complete_log_likelihood(const Mc3Model& model) const
{
    return complete_log_likelihood(model.data(), state_.theta, state_.latent, model.spec());
}

// ---------------------------------------------------------------------------
// Model

namespace {

const SurvivalDataset& validated(const SurvivalDataset& data)
{
    data.validate(true);
    return data;
}

PriorConfig with_default_mean(PriorConfig cfg, std::size_t k)
{
    if (cfg.mu.size() == 0)
        cfg.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    return cfg;
}

}  // namespace

Mc3Model::Mc3Model(const SurvivalDataset& data, PromotionSpec spec, PriorConfig prior_cfg,
                   Mc3Config cfg)
    : data_(&data),
      context_(std::make_shared<detail::CacheContext>(validated(data), spec)),
      prior_(with_default_mean(std::move(prior_cfg), data.k()), spec),
      cfg_(std::move(cfg)),
      transform_(spec, data.k())
{
    if (prior_.k() != data.k())
        throw ConfigError("prior mean has " + std::to_string(prior_.k()) +
                          " entries but the design has " + std::to_string(data.k()) + " columns");
    if (cfg_.n_chains < 1)
        throw ConfigError("n_chains must be >= 1");
    if (cfg_.mcmc_cycles < 1)
        throw ConfigError("mcmc_cycles must be >= 1");
    if (cfg_.sweeps_per_cycle < 1)
        throw ConfigError("sweeps_per_cycle must be >= 1");
    if (!(cfg_.mala_tau > 0.0))
        throw ConfigError("mala_tau must be > 0");
    if (!(cfg_.mala_probability >= 0.0 && cfg_.mala_probability <= 1.0))
        throw ConfigError("mala_probability must lie in [0, 1]");
    if (!(cfg_.fd_step > 0.0))
        throw ConfigError("fd_step must be > 0");
    temperatures_ = cfg_.temperatures.empty() ? default_temperatures(cfg_.n_chains, cfg_.epsilon0)
                                              : cfg_.temperatures;
    if (temperatures_.size() != cfg_.n_chains)
        throw ConfigError("expected " + std::to_string(cfg_.n_chains) + " temperatures, got " +
                          std::to_string(temperatures_.size()));
    if (temperatures_[0] != 1.0)
        throw ConfigError("the first temperature must be 1");
    for (std::size_t c = 0; c < temperatures_.size(); ++c) {
        if (!(temperatures_[c] >= 0.0 && temperatures_[c] <= 1.0))
            throw ConfigError("temperatures must lie in [0, 1]");
        if (c > 0 && temperatures_[c] > temperatures_[c - 1])
            throw ConfigError("temperatures must be non-increasing");
    }
    if (cfg_.prop_scale_theta.empty()) {
        prop_scales_.assign(transform_.size(), 0.1);
        std::copy(spec.prop_scale.begin(), spec.prop_scale.end(), prop_scales_.begin() + 2);
    } else {
        prop_scales_ = cfg_.prop_scale_theta;
    }
    if (prop_scales_.size() != transform_.size())
        throw ConfigError("prop_scale_theta must have " + std::to_string(transform_.size()) +
                          " entries, got " + std::to_string(prop_scales_.size()));
    for (double s : prop_scales_) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw ConfigError("proposal scales must be finite and > 0");
    }
    if (cfg_.threads < 1)
        cfg_.threads = 1;
}

Chain Mc3Model::initial_chain(std::size_t chain_index, Rng& rng) const
{
    if (chain_index >= temperatures_.size())
        throw ConfigError("initial_chain: chain index out of range");
    const PromotionSpec& s = spec();
    Theta theta;
    theta.beta.assign(data_->k(), 0.0);
    theta.gamma = uniform01(rng) < 0.5 ? 0.1 : -0.1;
    theta.lambda = 1.0;
    theta.alpha.assign(s.alpha_size(), 0.0);
    std::size_t offset = 0;
    if (s.is_mixture()) {
        for (std::size_t j = 0; j < s.K; ++j)
            theta.alpha[j] = 1.0 / static_cast<double>(s.K);
        offset = s.K;
    }
    for (std::size_t j = 0; j < s.prior_parameters.size(); ++j)
        theta.alpha[offset + j] = prior_.alpha_prior_median(j);
    return Chain(*this, std::move(theta), LatentStatus::all_susceptible(*data_),
                 temperatures_[chain_index]);
}

double Mc3Model::tempered_target(const Chain& chain, std::span<const double> z) const
{
    const Theta theta = transform_.from_free(z);
    const double ll = ChainAccess::cache(chain).evaluate(theta);
    const double lp = prior_.log_prior(theta);
    if (ll == kNegInf || lp == kNegInf || std::isnan(ll) || std::isnan(lp))
        return kNegInf;
    return chain.heat() * (ll + lp) + transform_.log_jacobian(z);
}

// ---------------------------------------------------------------------------
// Latent Gibbs step

double latent_susceptible_probability(double log_cure, double log_susceptible_mass,
                                      double heat) noexcept
{
    if (log_susceptible_mass == kNegInf)
        return 0.0;
    if (log_cure == kNegInf)
        return 1.0;
    if (heat == 0.0)
        return 0.5;
    const double x = heat * (log_cure - log_susceptible_mass);
    const double p = 1.0 / (1.0 + std::exp(x));
    return std::clamp(p, 0.0, 1.0);
}

void gibbs_update_latent(Chain& chain, const Mc3Model&, Rng& rng)
{
    ChainState& st = ChainAccess::state(chain);
    detail::LikelihoodCache& cache = ChainAccess::cache(chain);
    cache.discard();
    const std::size_t m = cache.n_censored();
    for (std::size_t j = 0; j < m; ++j) {
        const double p = latent_susceptible_probability(cache.censored_log_cure(j),
                                                        cache.censored_log_sus(j), st.heat);
        const std::uint8_t draw = uniform01(rng) < p ? 1 : 0;
        st.latent.susceptible[j] = draw;
        cache.set_indicator(j, draw);
    }
    cache.refresh_total();
    st.log_complete_likelihood = cache.total();
}

// ---------------------------------------------------------------------------
// Metropolis-within-Gibbs

double lognormal_hastings_log_ratio(double old_value, double new_value) noexcept
{
    return std::log(new_value) - std::log(old_value);
}

namespace {

bool finite_or_neg_inf_reject(double v) noexcept
{
    return v == kNegInf || std::isnan(v);
}

/// Shared accept/reject rule for tempered coordinate moves.
bool metropolis_accept(double heat, double d_loglik, double d_prior, double d_jacobian, Rng& rng)
{
    const double log_u = std::log(uniform01(rng));
    const double log_ratio = heat * (d_loglik + d_prior) + d_jacobian;
    return log_u < log_ratio;
}

}  // namespace

void mwg_sweep(Chain& chain, const Mc3Model& model, Rng& rng)
{
    ChainState& st = ChainAccess::state(chain);
    LogPriorTerms& terms = ChainAccess::prior_terms(chain);
    detail::LikelihoodCache& cache = ChainAccess::cache(chain);
    ChainCounters& counters = chain.counters();
    const ThetaTransform& tr = model.transform();
    const Prior& prior = model.prior();
    const std::vector<double>& scales = model.prop_scales();
    const std::size_t n_alpha_free = tr.spec().free_size();

    std::vector<double> z = tr.to_free(st.theta);
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double eps = scales[j] * standard_normal(rng);
        const double z_new = z[j] + eps;
        ++counters.mwg_proposals;
        double ll_new = kNegInf;
        double d_prior = 0.0;
        double d_jac = 0.0;
        double term_new = 0.0;
        std::vector<double> alpha_new;
        switch (tr.kind(j)) {
        case ThetaTransform::Kind::gamma:
            term_new = prior.log_gamma(z_new);
            d_prior = term_new - terms.gamma;
            if (!finite_or_neg_inf_reject(term_new))
                ll_new = cache.trial_gamma(z_new);
            break;
        case ThetaTransform::Kind::lambda: {
            const double lambda_new = std::exp(z_new);
            term_new = prior.log_lambda(lambda_new);
            d_prior = term_new - terms.lambda;
            d_jac = z_new - z[j];
            if (!finite_or_neg_inf_reject(term_new))
                ll_new = cache.trial_lambda(lambda_new);
            break;
        }
        case ThetaTransform::Kind::alpha: {
            std::vector<double> z_trial = z;
            z_trial[j] = z_new;
            d_jac = tr.log_jacobian(z_trial) - tr.log_jacobian(z);
            alpha_new = tr.alpha_from_free(std::span<const double>(z_trial).subspan(2, n_alpha_free));
            term_new = prior.log_alpha(alpha_new);
            d_prior = term_new - (terms.alpha + terms.dirichlet);
            bool ok = !finite_or_neg_inf_reject(term_new);
            for (double a : alpha_new)
                ok = ok && a > 0.0 && std::isfinite(a);
            if (ok)
                ll_new = cache.trial_alpha(alpha_new);
            break;
        }
        case ThetaTransform::Kind::beta: {
            const std::size_t b = tr.beta_index(j);
            std::vector<double> beta_new = st.theta.beta;
            beta_new[b] = z_new;
            term_new = prior.log_beta(beta_new);
            d_prior = term_new - terms.beta;
            ll_new = cache.trial_beta(b, z_new);
            break;
        }
        }
        if (finite_or_neg_inf_reject(ll_new) || finite_or_neg_inf_reject(term_new)) {
            uniform01(rng);  // keep the stream position independent of the outcome
            cache.discard();
            continue;
        }
        const double d_ll = ll_new - st.log_complete_likelihood;
        if (!metropolis_accept(st.heat, d_ll, d_prior, d_jac, rng)) {
            cache.discard();
            continue;
        }
        cache.accept();
        ++counters.mwg_accepts;
        z[j] = z_new;
        st.log_complete_likelihood = ll_new;
        switch (tr.kind(j)) {
        case ThetaTransform::Kind::gamma:
            st.theta.gamma = z_new;
            terms.gamma = term_new;
            break;
        case ThetaTransform::Kind::lambda:
            st.theta.lambda = std::exp(z_new);
            terms.lambda = term_new;
            break;
        case ThetaTransform::Kind::alpha:
            st.theta.alpha = std::move(alpha_new);
            terms.dirichlet = prior.log_dirichlet(st.theta.alpha);
            terms.alpha = term_new - terms.dirichlet;
            break;
        case ThetaTransform::Kind::beta:
            st.theta.beta[tr.beta_index(j)] = z_new;
            terms.beta = term_new;
            break;
        }
        st.log_prior = terms.total();
    }
}

// ---------------------------------------------------------------------------
// MALA

std::vector<double> numeric_gradient(const LogTargetFn& target, std::span<const double> x,
                                     double fd_step)
{
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = fd_step * std::max(1.0, std::abs(x[j]));
        const double xp = x[j] + h;
        const double xm = x[j] - h;
        point[j] = xp;
        const double fp = target(point);
        point[j] = xm;
        const double fm = target(point);
        point[j] = x[j];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw GradientUnavailable("target is not finite at a finite-difference stencil point");
        grad[j] = (fp - fm) / (xp - xm);
    }
    return grad;
}

namespace {

/// MALA step with pluggable target and gradient evaluations. `value` is called
/// once, at the proposal, before `gradient` is asked for the proposal.
template <class Value, class Gradient>
MalaOutcome mala_core(Value&& value, Gradient&& gradient, std::vector<double>& x,
                      double& log_target_x, double tau, Rng& rng)
{
    const std::size_t d = x.size();
    const std::vector<double> g = gradient(std::span<const double>(x));
    const double sd = std::sqrt(2.0 * tau);
    std::vector<double> prop(d);
    for (std::size_t j = 0; j < d; ++j)
        prop[j] = x[j] + tau * g[j] + sd * standard_normal(rng);
    const double log_u = std::log(uniform01(rng));

    MalaOutcome out;
    const double t_prop = value(std::span<const double>(prop));
    if (!std::isfinite(t_prop)) {
        out.log_acceptance = kNegInf;
        return out;
    }
    std::vector<double> g_prop;
    try {
        g_prop = gradient(std::span<const double>(prop));
    } catch (const GradientUnavailable&) {
        out.log_acceptance = kNegInf;
        return out;
    }
    double fwd = 0.0;  // log q(prop | x), up to the shared constant
    double rev = 0.0;  // log q(x | prop)
    for (std::size_t j = 0; j < d; ++j) {
        const double a = prop[j] - x[j] - tau * g[j];
        const double b = x[j] - prop[j] - tau * g_prop[j];
        fwd -= a * a;
        rev -= b * b;
    }
    out.log_acceptance = t_prop - log_target_x + (rev - fwd) / (4.0 * tau);
    if (log_u < out.log_acceptance) {
        out.accepted = true;
        x = std::move(prop);
        log_target_x = t_prop;
    }
    return out;
}

}  // namespace

MalaOutcome mala_step(const LogTargetFn& target, std::vector<double>& x, double& log_target_x,
                      double tau, double fd_step, Rng& rng)
{
    return mala_core(target,
                     [&](std::span<const double> at) { return numeric_gradient(target, at, fd_step); },
                     x, log_target_x, tau, rng);
}

namespace {

bool valid_theta_values(const Theta& theta) noexcept
{
    for (double a : theta.alpha) {
        if (!(a > 0.0) || !std::isfinite(a))
            return false;
    }
    return theta.lambda > 0.0 && std::isfinite(theta.lambda);
}

/// Central-difference gradient of the tempered target at the committed cache
/// state, evaluating each stencil point with the single-coordinate trial.
std::vector<double> cached_gradient(detail::LikelihoodCache& cache, const Mc3Model& model,
                                    double heat, std::span<const double> z)
{
    const ThetaTransform& tr = model.transform();
    const double fd_step = model.config().fd_step;
    std::vector<double> point(z.begin(), z.end());
    std::vector<double> grad(z.size());
    auto eval = [&](std::size_t j) {
        const Theta theta = tr.from_free(point);
        if (!valid_theta_values(theta))
            return kNegInf;
        const double lp = model.prior().log_prior(theta);
        if (finite_or_neg_inf_reject(lp))
            return kNegInf;
        double ll = kNegInf;
        switch (tr.kind(j)) {
        case ThetaTransform::Kind::gamma:
            ll = cache.trial_gamma(theta.gamma);
            break;
        case ThetaTransform::Kind::lambda:
            ll = cache.trial_lambda(theta.lambda);
            break;
        case ThetaTransform::Kind::alpha:
            ll = cache.trial_alpha(theta.alpha);
            break;
        case ThetaTransform::Kind::beta: {
            const std::size_t b = tr.beta_index(j);
            ll = cache.trial_beta(b, theta.beta[b]);
            break;
        }
        }
        cache.discard();
        if (finite_or_neg_inf_reject(ll))
            return kNegInf;
        return heat * (ll + lp) + tr.log_jacobian(point);
    };
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double h = fd_step * std::max(1.0, std::abs(z[j]));
        const double xp = z[j] + h;
        const double xm = z[j] - h;
        point[j] = xp;
        const double fp = eval(j);
        point[j] = xm;
        const double fm = eval(j);
        point[j] = z[j];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw GradientUnavailable("target is not finite at a finite-difference stencil point");
        grad[j] = (fp - fm) / (xp - xm);
    }
    return grad;
}

}  // namespace

bool mala_sweep(Chain& chain, const Mc3Model& model, Rng& rng)
{
    ChainState& st = ChainAccess::state(chain);
    detail::LikelihoodCache& cache = ChainAccess::cache(chain);
    ChainCounters& counters = chain.counters();
    const ThetaTransform& tr = model.transform();
    const Prior& prior = model.prior();
    const double heat = st.heat;

    std::vector<double> z = tr.to_free(st.theta);
    double t_cur = heat * (st.log_complete_likelihood + st.log_prior) + tr.log_jacobian(z);
    cache.discard();
    if (!std::isfinite(t_cur)) {
        ++counters.mala_fallbacks;
        return false;
    }
    cache.checkpoint();
    bool moved = false;
    Theta prop_theta;
    double prop_ll = kNegInf;
    // Commits the proposal so that its gradient can use single-coordinate trials.
    auto value = [&](std::span<const double> p) {
        Theta theta = tr.from_free(p);
        if (!valid_theta_values(theta))
            return kNegInf;
        const double lp = prior.log_prior(theta);
        if (finite_or_neg_inf_reject(lp))
            return kNegInf;
        const double ll = cache.trial_full(theta);
        if (finite_or_neg_inf_reject(ll)) {
            cache.discard();
            return kNegInf;
        }
        cache.accept();
        moved = true;
        prop_theta = std::move(theta);
        prop_ll = ll;
        return heat * (ll + lp) + tr.log_jacobian(p);
    };
    auto gradient = [&](std::span<const double> p) { return cached_gradient(cache, model, heat, p); };

    ++counters.mala_attempts;
    MalaOutcome out;
    try {
        out = mala_core(value, gradient, z, t_cur, model.config().mala_tau, rng);
    } catch (const GradientUnavailable&) {
        --counters.mala_attempts;
        ++counters.mala_fallbacks;
        return false;
    }
    if (!out.accepted) {
        if (moved)
            cache.rollback();
        return true;
    }
    ++counters.mala_accepts;
    st.theta = std::move(prop_theta);
    st.log_complete_likelihood = prop_ll;
    ChainAccess::prior_terms(chain) = prior.terms(st.theta);
    st.log_prior = ChainAccess::prior_terms(chain).total();
    return true;
}

// ---------------------------------------------------------------------------
// Swaps

double swap_log_acceptance(double h_a, double h_b, double l_a, double l_b) noexcept
{
    if (h_a == h_b)
        return 0.0;
    return (h_a - h_b) * (l_b - l_a);
}

std::vector<double> SwapStats::rates() const
{
    std::vector<double> r(attempts.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t p = 0; p < attempts.size(); ++p) {
        if (attempts[p] > 0)
            r[p] = static_cast<double>(accepts[p]) / static_cast<double>(attempts[p]);
    }
    return r;
}

std::optional<std::size_t> swap_move(std::span<Chain> chains, Rng& rng, SwapStats& stats)
{
    if (chains.size() < 2)
        return std::nullopt;
    const std::size_t pair =
        std::uniform_int_distribution<std::size_t>(0, chains.size() - 2)(rng);
    const double log_u = std::log(uniform01(rng));
    Chain& a = chains[pair];
    Chain& b = chains[pair + 1];
    const double log_acc = swap_log_acceptance(a.heat(), b.heat(), a.state().log_complete_posterior(),
                                               b.state().log_complete_posterior());
    ++stats.attempts[pair];
    if (!(log_u < log_acc))
        return std::nullopt;
    a.exchange_states(b);
    ++stats.accepts[pair];
    return pair;
}

// ---------------------------------------------------------------------------
// Driver

std::size_t parameter_count(const PromotionSpec& spec, std::size_t k) noexcept
{
    return spec.free_size() + k + 2;
}

double bayesian_information_criterion(double log_likelihood, std::size_t n_parameters,
                                      std::size_t n_obs) noexcept
{
    if (n_obs == 0)
        return std::numeric_limits<double>::quiet_NaN();
    return -2.0 * log_likelihood + static_cast<double>(n_parameters) * std::log(static_cast<double>(n_obs));
}

double akaike_information_criterion(double log_likelihood, std::size_t n_parameters) noexcept
{
    return -2.0 * log_likelihood + 2.0 * static_cast<double>(n_parameters);
}

Theta FitResult::draw(std::size_t cycle) const
{
    const auto cols = static_cast<std::size_t>(samples.cols());
    const std::size_t k = cols - 2 - spec.alpha_size();
    return theta_from_row(std::span<const double>(samples.row(static_cast<Eigen::Index>(cycle)).data(), cols),
                          spec, k);
}

namespace {

void run_chain_cycle(Chain& chain, const Mc3Model& model, Rng& rng)
{
    const Mc3Config& cfg = model.config();
    for (std::size_t s = 0; s < cfg.sweeps_per_cycle; ++s) {
        gibbs_update_latent(chain, model, rng);
        const bool try_mala = uniform01(rng) < cfg.mala_probability;
        if (!try_mala || !mala_sweep(chain, model, rng))
            mwg_sweep(chain, model, rng);
    }
    chain.refresh_observed(model);
}

}  // namespace

FitResult run_mc3(const SurvivalDataset& data, const PromotionSpec& spec,
                  const PriorConfig& prior_cfg, const Mc3Config& cfg)
{
    const auto started = std::chrono::steady_clock::now();
    const Mc3Model model(data, spec, prior_cfg, cfg);
    const Mc3Config& c = model.config();
    const std::size_t C = c.n_chains;
    const std::size_t cycles = c.mcmc_cycles;
    const std::size_t k = data.k();

    Rng swap_rng = make_stream(c.seed, 0);
    std::vector<Rng> rngs;
    std::vector<Chain> chains;
    rngs.reserve(C);
    chains.reserve(C);
    for (std::size_t ch = 0; ch < C; ++ch) {
        rngs.push_back(make_stream(c.seed, ch + 1));
        chains.push_back(model.initial_chain(ch, rngs.back()));
    }

    FitResult res;
    res.spec = spec;
    res.design_columns = data.column_names;
    res.column_names = sample_column_names(spec, k);
    res.samples.resize(static_cast<Eigen::Index>(cycles), static_cast<Eigen::Index>(2 + spec.alpha_size() + k));
    res.censored_indices = data.censored_indices();
    res.latent_draws.resize(cycles * res.censored_indices.size());
    res.log_posterior_trace.resize(cycles);
    res.complete_ll_trace.assign(C, std::vector<double>(cycles));
    res.temperatures = model.temperatures();
    res.swap_stats = SwapStats(C);
    res.n_obs = data.n();

    std::ostream* progress = c.progress ? c.progress : (c.verbose ? &std::clog : nullptr);
    const std::size_t report_every = std::max<std::size_t>(1, cycles / 20);

    std::size_t cycle = 0;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<bool> stop{false};

    auto record = [&]() {
        swap_move(chains, swap_rng, res.swap_stats);
        const ChainState& target = chains[0].state();
        const std::vector<double> row = theta_to_row(target.theta);
        std::copy(row.begin(), row.end(), res.samples.row(static_cast<Eigen::Index>(cycle)).data());
        std::copy(target.latent.susceptible.begin(), target.latent.susceptible.end(),
                  res.latent_draws.begin() + static_cast<std::ptrdiff_t>(cycle * res.censored_indices.size()));
        res.log_posterior_trace[cycle] = target.log_posterior_observed;
        for (std::size_t ch = 0; ch < C; ++ch) {
            res.complete_ll_trace[ch][cycle] = chains[ch].state().log_complete_likelihood;
            if (c.check_caches) {
                const double fresh = chains[ch].recompute_complete_log_likelihood(model);
                const double cached = chains[ch].state().log_complete_likelihood;
                if (!(std::abs(fresh - cached) <= 1e-9 * std::max(1.0, std::abs(fresh))))
                    throw NumericError("chain " + std::to_string(ch + 1) + ": cached complete log-likelihood " +
                                       std::to_string(cached) + " drifted from " + std::to_string(fresh));
            }
        }
        if (progress && ((cycle + 1) % report_every == 0 || cycle + 1 == cycles)) {
            const auto rates = res.swap_stats.rates();
            double min_rate = 1.0;
            for (double r : rates)
                min_rate = std::isnan(r) ? min_rate : std::min(min_rate, r);
            *progress << "cycle " << cycle + 1 << "/" << cycles << "  log posterior "
                      << target.log_posterior_observed;
            if (!rates.empty())
                *progress << "  min swap rate " << min_rate;
            *progress << '\n';
        }
        ++cycle;
    };

    const std::size_t workers = std::min(c.threads, C);
    if (workers <= 1) {
        while (cycle < cycles) {
            for (std::size_t ch = 0; ch < C; ++ch)
                run_chain_cycle(chains[ch], model, rngs[ch]);
            record();
        }
    } else {
        auto on_completion = [&]() noexcept {
            if (stop.load())
                return;
            try {
                record();
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
            if (failure || cycle >= cycles)
                stop.store(true);
        };
        std::barrier sync(static_cast<std::ptrdiff_t>(workers), on_completion);
        auto worker = [&](std::size_t w) {
            while (!stop.load()) {
                try {
                    for (std::size_t ch = w; ch < C; ch += workers)
                        run_chain_cycle(chains[ch], model, rngs[ch]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
                sync.arrive_and_wait();
            }
        };
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(worker, w);
        worker(0);
        pool.clear();
        if (failure)
            std::rethrow_exception(failure);
    }

    res.swap_accept_rates = res.swap_stats.rates();
    for (const Chain& ch : chains)
        res.chain_counters.push_back(ch.counters());

    // MAP: the recorded draw with the largest observed log posterior.
    std::size_t best = 0;
    for (std::size_t t = 1; t < cycles; ++t) {
        if (res.log_posterior_trace[t] > res.log_posterior_trace[best])
            best = t;
    }
    res.map_index = best;
    res.map_estimate = res.draw(best);
    res.map_log_likelihood = observed_log_likelihood(data, res.map_estimate, spec);
    res.n_parameters = parameter_count(spec, k);
    res.bic = bayesian_information_criterion(res.map_log_likelihood, res.n_parameters, res.n_obs);
    res.aic = akaike_information_criterion(res.map_log_likelihood, res.n_parameters);
    res.residuals.resize(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        std::vector<double> x(k);
        for (std::size_t j = 0; j < k; ++j)
            x[j] = data.X(row, static_cast<Eigen::Index>(j));
        const LogDensityCdf pt = evaluate(spec, data.y[i], res.map_estimate.alpha);
        const PointLogTerms terms = point_log_terms(linear_predictor(res.map_estimate, x), pt.log_F,
                                                    pt.log_f, res.map_estimate.gamma,
                                                    res.map_estimate.lambda);
        res.residuals[i] = -terms.log_surv;
    }
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

}  // namespace curemc3
