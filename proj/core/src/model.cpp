#include "curemc3/model.hpp"

#include <algorithm>
#include <cmath>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"

namespace curemc3 {

namespace {

struct Evaluated
{
    PointLogTerms terms;
    double log_F = 0.0;
};

Evaluated evaluate_at(double t, const Theta& theta, std::span<const double> x,
                      const PromotionSpec& spec)
{
    if (!(t >= 0.0) || std::isnan(t))
        throw DomainError("time must be >= 0");
    if (x.size() != theta.beta.size())
        throw DomainError("covariate row has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(theta.beta.size()));
    LogDensityCdf pt{kNegInf, kNegInf};
    if (std::isinf(t))
        pt = {kNegInf, 0.0};
    else if (t > 0.0)
        pt = evaluate(spec, t, theta.alpha);
    const double eta = linear_predictor(theta, x);
    const PointLogTerms terms = point_log_terms(eta, pt.log_F, pt.log_f, theta.gamma, theta.lambda);
    if (!terms.valid)
        throw InvalidBase("1 + gamma * vartheta * c^(gamma * vartheta) * F^lambda is negative");
    return {terms, pt.log_F};
}

double nan_to_neg_inf(double v) noexcept
{
    return std::isnan(v) ? kNegInf : v;
}

}  // namespace

void validate_theta(const Theta& theta, const PromotionSpec& spec, std::size_t k)
{
    if (theta.beta.size() != k)
        throw DomainError("theta: beta has " + std::to_string(theta.beta.size()) +
                          " entries, expected " + std::to_string(k));
    if (theta.alpha.size() != spec.alpha_size())
        throw DomainError("theta: alpha has " + std::to_string(theta.alpha.size()) +
                          " entries, expected " + std::to_string(spec.alpha_size()));
    if (!(theta.lambda > 0.0) || !std::isfinite(theta.lambda))
        throw DomainError("theta: lambda must be finite and > 0");
    if (!std::isfinite(theta.gamma))
        throw DomainError("theta: gamma must be finite");
    for (double b : theta.beta) {
        if (!std::isfinite(b))
            throw DomainError("theta: beta must be finite");
    }
    for (double a : theta.alpha) {
        if (!(a > 0.0) || !std::isfinite(a))
            throw DomainError("theta: promotion parameters must be finite and > 0");
    }
    if (spec.is_mixture()) {
        double total = 0.0;
        for (std::size_t j = 0; j < spec.K; ++j) {
            if (!(theta.alpha[j] < 1.0))
                throw DomainError("theta: mixture proportions must lie in (0, 1)");
            total += theta.alpha[j];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw DomainError("theta: mixture proportions must sum to one");
    }
}

std::size_t SurvivalDataset::n_events() const noexcept
{
    return static_cast<std::size_t>(std::count(delta.begin(), delta.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SurvivalDataset::censored_indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (delta[i] == 0)
            out.push_back(i);
    }
    return out;
}

void SurvivalDataset::validate(bool allow_empty) const
{
    const std::size_t n = y.size();
    if (n == 0 && !allow_empty)
        throw EmptyDataset("dataset has no observations");
    if (delta.size() != n || static_cast<std::size_t>(X.rows()) != n)
        throw DataError("dataset: y, delta and X disagree on the number of rows");
    if (X.cols() < 1)
        throw DataError("dataset: design matrix needs at least one column");
    if (!column_names.empty() && column_names.size() != k())
        throw DataError("dataset: column_names does not match the design width");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(y[i] > 0.0) || !std::isfinite(y[i]))
            throw DataError("dataset: observed time at row " + std::to_string(i + 1) +
                            " must be finite and > 0");
        if (delta[i] > 1)
            throw DataError("dataset: censoring indicator at row " + std::to_string(i + 1) +
                            " must be 0 or 1");
    }
    if (!X.allFinite())
        throw DataError("dataset: design matrix has missing or non-finite entries");
}

LatentStatus LatentStatus::all_susceptible(const SurvivalDataset& data)
{
    LatentStatus s;
    s.indices = data.censored_indices();
    s.susceptible.assign(s.indices.size(), 1);
    return s;
}

int LatentStatus::at(std::size_t i) const
{
    const auto it = std::lower_bound(indices.begin(), indices.end(), i);
    if (it == indices.end() || *it != i)
        return 1;
    return susceptible[static_cast<std::size_t>(it - indices.begin())];
}

PointLogTerms point_log_terms(double eta, double log_F, double log_f, double gamma,
                              double lambda) noexcept
{
    PointLogTerms r;
    const double log_lambda = std::log(lambda);
    const double lam_log_F = log_F == kNegInf ? kNegInf : lambda * log_F;
    const double density_core = log_lambda + log_f + (lambda == 1.0 ? 0.0 : (lambda - 1.0) * log_F);
    if (std::abs(gamma) <= kGammaLimitTol) {
        const double vartheta = std::exp(eta);
        const double cum = std::exp(eta + lam_log_F);  // vartheta * F^lambda
        r.log_surv = -cum;
        r.log_cure = -vartheta;
        r.log_dens = nan_to_neg_inf(eta + density_core - cum);
        return r;
    }
    const double vartheta = std::exp(eta);
    const double u = gamma * vartheta * kLogC;  // log c^(gamma vartheta)
    const double log_abs_A = std::log(std::abs(gamma)) + eta + u;
    const double s = log_abs_A + lam_log_F;  // log |z|
    double l_cure;
    double l_surv;
    if (gamma > 0.0) {
        l_cure = log1pexp(log_abs_A);
        l_surv = log1pexp(s);
    } else {
        if (log_abs_A > 0.0) {
            r.valid = false;
            r.log_surv = r.log_cure = r.log_dens = kNegInf;
            return r;
        }
        l_cure = log1mexp(log_abs_A);
        l_surv = log1mexp(s);
    }
    r.log_cure = -l_cure / gamma;
    r.log_surv = -l_surv / gamma;
    const double power = -1.0 / gamma - 1.0;
    const double tail = power == 0.0 ? 0.0 : power * l_surv;
    r.log_dens = nan_to_neg_inf(eta + u + density_core + tail);
    if (std::isnan(r.log_surv))
        r.log_surv = kNegInf;
    if (std::isnan(r.log_cure))
        r.log_cure = kNegInf;
    return r;
}

double censored_contribution(const PointLogTerms& terms, int indicator) noexcept
{
    if (!terms.valid)
        return kNegInf;
    if (indicator == 0)
        return terms.log_cure;
    if (terms.log_cure == kNegInf)
        return terms.log_surv;
    if (terms.log_cure >= terms.log_surv)
        return kNegInf;
    return terms.log_surv + log1mexp(terms.log_cure - terms.log_surv);
}

double linear_predictor(const Theta& theta, std::span<const double> x)
{
    if (x.size() != theta.beta.size())
        throw DomainError("covariate row length does not match beta");
    double eta = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        eta += x[j] * theta.beta[j];
    return eta;
}

double pop_survival(double t, const Theta& theta, std::span<const double> x,
                    const PromotionSpec& spec)
{
    return std::exp(evaluate_at(t, theta, x, spec).terms.log_surv);
}

double cure_rate(const Theta& theta, std::span<const double> x, const PromotionSpec& spec)
{
    const PointLogTerms terms =
        point_log_terms(linear_predictor(theta, x), 0.0, 0.0, theta.gamma, theta.lambda);
    if (!terms.valid)
        throw InvalidBase("1 + gamma * vartheta * c^(gamma * vartheta) is negative");
    (void)spec;
    return std::exp(terms.log_cure);
}

double pop_density(double t, const Theta& theta, std::span<const double> x,
                   const PromotionSpec& spec)
{
    if (!(t > 0.0))
        throw DomainError("pop_density: t must be > 0");
    return std::exp(evaluate_at(t, theta, x, spec).terms.log_dens);
}

double susceptible_survival(double t, const Theta& theta, std::span<const double> x,
                            const PromotionSpec& spec)
{
    const PointLogTerms terms = evaluate_at(t, theta, x, spec).terms;
    const double p0 = std::exp(terms.log_cure);
    if (1.0 - p0 < 1e-12)
        throw DegenerateSusceptibles("cure rate is numerically one");
    // S_U = (S_P - p0) / (1 - p0), computed from the stable log-difference.
    const double log_num = censored_contribution(terms, 1);
    return std::clamp(std::exp(log_num - log1mexp(terms.log_cure)), 0.0, 1.0);
}

double susceptible_density(double t, const Theta& theta, std::span<const double> x,
                           const PromotionSpec& spec)
{
    if (!(t > 0.0))
        throw DomainError("susceptible_density: t must be > 0");
    const PointLogTerms terms = evaluate_at(t, theta, x, spec).terms;
    if (1.0 - std::exp(terms.log_cure) < 1e-12)
        throw DegenerateSusceptibles("cure rate is numerically one");
    return std::exp(terms.log_dens - log1mexp(terms.log_cure));
}

double hazard(double t, const Theta& theta, std::span<const double> x, const PromotionSpec& spec)
{
    if (!(t > 0.0))
        throw DomainError("hazard: t must be > 0");
    const PointLogTerms terms = evaluate_at(t, theta, x, spec).terms;
    if (terms.log_surv < std::log(1e-300))
        throw DegenerateSurvival("population survival is numerically zero");
    return std::exp(terms.log_dens - terms.log_surv);
}

double cumulative_hazard(double t, const Theta& theta, std::span<const double> x,
                         const PromotionSpec& spec)
{
    const PointLogTerms terms = evaluate_at(t, theta, x, spec).terms;
    if (terms.log_surv < std::log(1e-300))
        throw DegenerateSurvival("population survival is numerically zero");
    return -terms.log_surv;
}

double conditional_cured_prob(double t, const Theta& theta, std::span<const double> x,
                              const PromotionSpec& spec)
{
    const PointLogTerms terms = evaluate_at(t, theta, x, spec).terms;
    if (terms.log_surv < std::log(1e-300))
        throw DegenerateSurvival("population survival is numerically zero");
    return std::min(1.0, std::exp(terms.log_cure - terms.log_surv));
}

namespace {

template <class PerCensored>
double accumulate_log_likelihood(const SurvivalDataset& data, const Theta& theta,
                                 const PromotionSpec& spec, PerCensored&& censored_term)
{
    const std::size_t n = data.n();
    if (n == 0)
        return 0.0;
    std::vector<double> log_y(n);
    for (std::size_t i = 0; i < n; ++i)
        log_y[i] = std::log(data.y[i]);
    std::vector<double> log_f(n);
    std::vector<double> log_F(n);
    evaluate_batch(spec, data.y, log_y, theta.alpha, log_f, log_F);
    const Eigen::Map<const Eigen::VectorXd> beta(theta.beta.data(),
                                                 static_cast<Eigen::Index>(theta.beta.size()));
    const Eigen::VectorXd eta = data.X * beta;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const PointLogTerms terms = point_log_terms(eta(static_cast<Eigen::Index>(i)), log_F[i],
                                                    log_f[i], theta.gamma, theta.lambda);
        if (!terms.valid)
            return kNegInf;
        const double term = data.delta[i] == 1 ? terms.log_dens : censored_term(i, terms);
        if (term == kNegInf || std::isnan(term))
            return kNegInf;
        total += term;
    }
    return total;
}

}  // namespace

double observed_log_likelihood(const SurvivalDataset& data, const Theta& theta,
                               const PromotionSpec& spec)
{
    return accumulate_log_likelihood(
        data, theta, spec, [](std::size_t, const PointLogTerms& t) { return t.log_surv; });
}

double complete_log_likelihood(const SurvivalDataset& data, const Theta& theta,
                               const LatentStatus& latent, const PromotionSpec& spec)
{
    if (latent.indices.size() != latent.susceptible.size())
        throw DomainError("latent status: index and indicator lengths differ");
    return accumulate_log_likelihood(data, theta, spec,
                                     [&latent](std::size_t i, const PointLogTerms& t) {
                                         return censored_contribution(t, latent.at(i));
                                     });
}

bool has_varying_covariate(const SurvivalDataset& data)
{
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
        if (data.X.rows() > 0 && data.X.col(j).maxCoeff() > data.X.col(j).minCoeff())
            return true;
    }
    return false;
}

}  // namespace curemc3
