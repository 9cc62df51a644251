#include "curemc3/promotion.hpp"

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "curemc3/errors.hpp"
#include "curemc3/numeric.hpp"
#include "vmath.hpp"

namespace curemc3 {

namespace {

using QuietPolicy = boost::math::policies::policy<
    boost::math::policies::domain_error<boost::math::policies::errno_on_error>,
    boost::math::policies::overflow_error<boost::math::policies::errno_on_error>,
    boost::math::policies::evaluation_error<boost::math::policies::errno_on_error>,
    boost::math::policies::promote_double<false>>;

struct Registered
{
    std::size_t d = 0;
    std::shared_ptr<const UserEvalFn> eval;
};

std::mutex& registry_mutex()
{
    static std::mutex m;
    return m;
}

LogDensityCdf lognormal_adapter(double y, std::span<const double> a)
{
    return lognormal_positive(y, a);
}

std::map<std::string, Registered, std::less<>>& registry()
{
    // "lognormal" is always available so configs can name it without code.
    static std::map<std::string, Registered, std::less<>> r{
        {"lognormal", Registered{2, std::make_shared<const UserEvalFn>(lognormal_adapter)}}};
    return r;
}

std::size_t default_component_dim(Family family)
{
    switch (family) {
    case Family::exponential:
        return 1;
    case Family::weibull:
    case Family::gamma:
    case Family::log_logistic:
    case Family::gompertz:
    case Family::lomax:
    case Family::gamma_mixture:
        return 2;
    case Family::dagum:
        return 3;
    case Family::user:
    case Family::user_mixture:
        return 0;
    }
    return 0;
}

/// log of the regularized lower incomplete gamma P(a, x).
double log_gamma_p(double a, double x)
{
    const double p = boost::math::gamma_p(a, x, QuietPolicy());
    if (p >= 0.5)
        return std::log1p(-boost::math::gamma_q(a, x, QuietPolicy()));
    if (p > 1e-280)
        return std::log(p);
    // Underflow: P(a, x) = x^a e^-x / Gamma(a + 1) * sum_k x^k / ((a+1)...(a+k)).
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
        term *= x / (a + k);
        sum += term;
        if (term < sum * 1e-17)
            break;
    }
    return a * std::log(x) - x - std::lgamma(a + 1.0) + std::log(sum);
}

double sanitize(double v) noexcept
{
    return std::isnan(v) ? kNegInf : v;
}

LogDensityCdf call_user(const UserEvalFn& fn, double y, std::span<const double> a)
{
    LogDensityCdf r = fn(y, a);
    r.log_f = sanitize(r.log_f);
    r.log_F = std::min(0.0, sanitize(r.log_F));
    return r;
}

Family component_family(const PromotionSpec& spec) noexcept
{
    if (spec.family == Family::gamma_mixture)
        return Family::gamma;
    if (spec.family == Family::user_mixture)
        return Family::user;
    return spec.family;
}

// Per-family kernels with the parameter-only work hoisted out of the y loop.
struct ExponentialKernel
{
    double rate, log_rate;
    explicit ExponentialKernel(std::span<const double> a) : rate(a[0]), log_rate(std::log(a[0])) {}
    LogDensityCdf operator()(double y, double) const noexcept
    {
        return {log_rate - rate * y, log1mexp(-rate * y)};
    }
};

struct WeibullKernel
{
    double rate, shape, log_rate, log_shape;
    explicit WeibullKernel(std::span<const double> a)
        : rate(a[0]), shape(a[1]), log_rate(std::log(a[0])), log_shape(std::log(a[1]))
    {
    }
    LogDensityCdf operator()(double, double log_y) const noexcept
    {
        const double log_h = shape * (log_rate + log_y);
        const double h = std::exp(log_h);
        // f = shape * rate^shape * y^(shape - 1) * exp(-(rate y)^shape)
        return {log_shape + log_h - log_y - h, log1mexp(-h)};
    }
};

struct GammaKernel
{
    double shape, rate, log_norm;
    explicit GammaKernel(std::span<const double> a)
        : shape(a[0]), rate(a[1]), log_norm(a[0] * std::log(a[1]) - std::lgamma(a[0]))
    {
    }
    LogDensityCdf operator()(double y, double log_y) const
    {
        return {log_norm + (shape - 1.0) * log_y - rate * y, log_gamma_p(shape, rate * y)};
    }
};

struct LogLogisticKernel
{
    double shape, log_scale, log_shape;
    explicit LogLogisticKernel(std::span<const double> a)
        : shape(a[0]), log_scale(std::log(a[1])), log_shape(std::log(a[0]))
    {
    }
    LogDensityCdf operator()(double, double log_y) const noexcept
    {
        const double s = shape * (log_y - log_scale);  // log (y / scale)^shape
        const double log_f = log_shape - log_scale + (shape - 1.0) * (log_y - log_scale) -
                             2.0 * log1pexp(s);
        return {log_f, -log1pexp(-s)};
    }
};

struct GompertzKernel
{
    double shape, rate, log_rate;
    explicit GompertzKernel(std::span<const double> a)
        : shape(a[0]), rate(a[1]), log_rate(std::log(a[1]))
    {
    }
    LogDensityCdf operator()(double y, double) const noexcept
    {
        const double cum = rate / shape * std::expm1(shape * y);
        return {log_rate + shape * y - cum, log1mexp(-cum)};
    }
};

struct LomaxKernel
{
    double shape, scale, log_shape, log_scale;
    explicit LomaxKernel(std::span<const double> a)
        : shape(a[0]), scale(a[1]), log_shape(std::log(a[0])), log_scale(std::log(a[1]))
    {
    }
    LogDensityCdf operator()(double y, double) const noexcept
    {
        const double l = std::log1p(y / scale);
        return {log_shape - log_scale - (1.0 + shape) * l, log1mexp(-shape * l)};
    }
};

struct DagumKernel
{
    double log_scale, p, q, log_pq;
    explicit DagumKernel(std::span<const double> a)
        : log_scale(std::log(a[0])), p(a[1]), q(a[2]), log_pq(std::log(a[1] * a[2]))
    {
    }
    LogDensityCdf operator()(double, double log_y) const noexcept
    {
        const double r = log_y - log_scale;  // log (y / scale)
        const double log_f = log_pq - log_scale + (p * q - 1.0) * r - (q + 1.0) * log1pexp(p * r);
        return {log_f, -q * log1pexp(-p * r)};
    }
};

template <class Kernel>
void batch_loop(const Kernel& kernel, std::span<const double> y, std::span<const double> log_y,
                std::span<double> log_f, std::span<double> log_F)
{
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        const LogDensityCdf r = kernel(y[i], log_y[i]);
        log_f[i] = r.log_f;
        log_F[i] = r.log_F;
    }
}

// Array forms of the two closed-form kernels on the vector math path.
void exponential_batch(std::span<const double> a, std::span<const double> y, std::span<double> log_f,
                       std::span<double> log_F)
{
    const double rate = a[0];
    const double log_rate = std::log(rate);
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        log_f[i] = log_rate - rate * y[i];
        log_F[i] = -rate * y[i];
    }
    detail::vlog1mexp(log_F, log_F);
}

void weibull_batch(std::span<const double> a, std::span<const double> log_y, std::span<double> log_f,
                   std::span<double> log_F)
{
    const WeibullKernel k(a);
    const std::size_t n = log_y.size();
    for (std::size_t i = 0; i < n; ++i)
        log_f[i] = k.shape * (k.log_rate + log_y[i]);
    detail::vexp(log_f, log_F);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = log_F[i];
        log_f[i] = k.log_shape + log_f[i] - log_y[i] - h;
        log_F[i] = -h;
    }
    detail::vlog1mexp(log_F, log_F);
}

void component_batch(const PromotionSpec& spec, Family family, std::span<const double> y,
                     std::span<const double> log_y, std::span<const double> a,
                     std::span<double> log_f, std::span<double> log_F)
{
    switch (family) {
    case Family::exponential:
        return exponential_batch(a, y, log_f, log_F);
    case Family::weibull:
        return weibull_batch(a, log_y, log_f, log_F);
    case Family::gamma:
        return batch_loop(GammaKernel(a), y, log_y, log_f, log_F);
    case Family::log_logistic:
        return batch_loop(LogLogisticKernel(a), y, log_y, log_f, log_F);
    case Family::gompertz:
        return batch_loop(GompertzKernel(a), y, log_y, log_f, log_F);
    case Family::lomax:
        return batch_loop(LomaxKernel(a), y, log_y, log_f, log_F);
    case Family::dagum:
        return batch_loop(DagumKernel(a), y, log_y, log_f, log_F);
    case Family::user:
        for (std::size_t i = 0; i < y.size(); ++i) {
            const LogDensityCdf r = call_user(*spec.user_eval, y[i], a);
            log_f[i] = r.log_f;
            log_F[i] = r.log_F;
        }
        return;
    case Family::gamma_mixture:
    case Family::user_mixture:
        break;
    }
    throw ConfigError("component_batch: mixture family has no single component");
}

void check_positive(std::span<const double> a, const char* what)
{
    for (double v : a) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw DomainError(std::string(what) + ": parameters must be finite and > 0");
    }
}

}  // namespace

std::string_view family_name(Family family) noexcept
{
    switch (family) {
    case Family::exponential:
        return "exponential";
    case Family::weibull:
        return "weibull";
    case Family::gamma:
        return "gamma";
    case Family::log_logistic:
        return "logLogistic";
    case Family::gompertz:
        return "gompertz";
    case Family::lomax:
        return "lomax";
    case Family::dagum:
        return "dagum";
    case Family::gamma_mixture:
        return "gamma_mixture";
    case Family::user:
        return "user";
    case Family::user_mixture:
        return "user_mixture";
    }
    return "unknown";
}

Family parse_family(std::string_view name)
{
    for (Family f : {Family::exponential, Family::weibull, Family::gamma, Family::log_logistic,
                     Family::gompertz, Family::lomax, Family::dagum, Family::gamma_mixture,
                     Family::user, Family::user_mixture}) {
        if (family_name(f) == name)
            return f;
    }
    throw ConfigError("unknown promotion time distribution '" + std::string(name) + "'");
}

void PromotionSpec::validate() const
{
    if (component_dim < 1)
        throw ConfigError("promotion spec: component dimension must be >= 1");
    if (is_mixture() && K < 2)
        throw ConfigError("promotion spec: mixtures need K >= 2 components");
    if (!is_mixture() && K != 1)
        throw ConfigError("promotion spec: K must be 1 for non-mixture families");
    if ((family == Family::user || family == Family::user_mixture) && !user_eval)
        throw ConfigError("promotion spec: user family '" + user_name + "' has no evaluator");
    if (family != Family::user && family != Family::user_mixture &&
        component_dim != default_component_dim(family))
        throw ConfigError("promotion spec: wrong parameter count for " +
                          std::string(family_name(family)));
    if (prior_parameters.size() != K * component_dim)
        throw ConfigError("promotion spec: expected " + std::to_string(K * component_dim) +
                          " prior (shape, scale) pairs, got " +
                          std::to_string(prior_parameters.size()));
    for (const auto& p : prior_parameters) {
        if (!(p.shape > 0.0) || !(p.scale > 0.0))
            throw ConfigError("promotion spec: inverse-gamma hyper-parameters must be > 0");
    }
    if (prop_scale.size() != free_size())
        throw ConfigError("promotion spec: prop_scale must have " + std::to_string(free_size()) +
                          " entries, got " + std::to_string(prop_scale.size()));
    for (double s : prop_scale) {
        if (!(s > 0.0))
            throw ConfigError("promotion spec: proposal scales must be > 0");
    }
    if (is_mixture() && !(dirichlet_concentration > 0.0))
        throw ConfigError("promotion spec: Dirichlet concentration must be > 0");
}

PromotionSpec make_promotion_spec(Family family, std::size_t K)
{
    if (family == Family::user || family == Family::user_mixture)
        throw ConfigError("user families are created with register_user_family()");
    PromotionSpec spec;
    spec.family = family;
    spec.component_dim = default_component_dim(family);
    spec.K = family == Family::gamma_mixture ? std::max<std::size_t>(K, 2) : 1;
    spec.prior_parameters.assign(spec.K * spec.component_dim, InverseGammaPrior{});
    spec.prop_scale.assign(spec.free_size(), 0.1);
    return spec;
}

PromotionSpec register_user_family(std::string name, std::size_t d, UserEvalFn eval_fn)
{
    if (d < 1)
        throw RegistrationError("register_user_family: '" + name + "' needs d >= 1 parameters");
    if (!eval_fn)
        throw RegistrationError("register_user_family: '" + name + "' has an empty evaluator");
    auto shared = std::make_shared<const UserEvalFn>(std::move(eval_fn));
    {
        std::lock_guard lock(registry_mutex());
        registry()[name] = Registered{d, shared};
    }
    PromotionSpec spec;
    spec.family = Family::user;
    spec.component_dim = d;
    spec.K = 1;
    spec.user_name = std::move(name);
    spec.user_eval = std::move(shared);
    spec.prior_parameters.assign(d, InverseGammaPrior{});
    spec.prop_scale.assign(d, 0.1);
    return spec;
}

PromotionSpec find_user_family(std::string_view name)
{
    std::lock_guard lock(registry_mutex());
    const auto it = registry().find(name);
    if (it == registry().end())
        throw ConfigError("no user promotion family registered as '" + std::string(name) + "'");
    PromotionSpec spec;
    spec.family = Family::user;
    spec.component_dim = it->second.d;
    spec.user_name = std::string(name);
    spec.user_eval = it->second.eval;
    spec.prior_parameters.assign(spec.component_dim, InverseGammaPrior{});
    spec.prop_scale.assign(spec.component_dim, 0.1);
    return spec;
}

PromotionSpec make_user_mixture(const PromotionSpec& user_family, std::size_t K)
{
    if (user_family.family != Family::user)
        throw ConfigError("make_user_mixture: expected a user family");
    if (K < 2)
        throw ConfigError("make_user_mixture: K must be >= 2");
    PromotionSpec spec = user_family;
    spec.family = Family::user_mixture;
    spec.K = K;
    spec.prior_parameters.assign(K * spec.component_dim, InverseGammaPrior{});
    spec.prop_scale.assign(spec.free_size(), 0.1);
    return spec;
}

LogDensityCdf evaluate_component(const PromotionSpec& spec, double y, double log_y,
                                 std::span<const double> a)
{
    switch (component_family(spec)) {
    case Family::exponential:
        return ExponentialKernel(a)(y, log_y);
    case Family::weibull:
        return WeibullKernel(a)(y, log_y);
    case Family::gamma:
        return GammaKernel(a)(y, log_y);
    case Family::log_logistic:
        return LogLogisticKernel(a)(y, log_y);
    case Family::gompertz:
        return GompertzKernel(a)(y, log_y);
    case Family::lomax:
        return LomaxKernel(a)(y, log_y);
    case Family::dagum:
        return DagumKernel(a)(y, log_y);
    case Family::user:
        return call_user(*spec.user_eval, y, a);
    default:
        break;
    }
    throw ConfigError("evaluate_component: unsupported family");
}

LogDensityCdf evaluate_mixture(const PromotionSpec& spec, double y,
                               std::span<const double> proportions,
                               std::span<const double> component_params)
{
    if (!(y > 0.0))
        throw DomainError("promotion time: y must be > 0");
    if (proportions.size() != spec.K || component_params.size() != spec.K * spec.component_dim)
        throw DomainError("evaluate_mixture: parameter vector has the wrong length");
    double total = 0.0;
    for (double w : proportions) {
        if (!(w > 0.0) || !(w < 1.0))
            throw DomainError("evaluate_mixture: proportions must lie in (0, 1)");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DomainError("evaluate_mixture: proportions must sum to one");
    check_positive(component_params, "evaluate_mixture");

    const double log_y = std::log(y);
    double acc_f = kNegInf;
    double acc_F = kNegInf;
    for (std::size_t k = 0; k < spec.K; ++k) {
        const auto a = component_params.subspan(k * spec.component_dim, spec.component_dim);
        const LogDensityCdf r = evaluate_component(spec, y, log_y, a);
        const double lw = std::log(proportions[k]);
        acc_f = log_add_exp(acc_f, lw + r.log_f);
        acc_F = log_add_exp(acc_F, lw + r.log_F);
    }
    return {acc_f, std::min(0.0, acc_F)};
}

LogDensityCdf evaluate(const PromotionSpec& spec, double y, std::span<const double> alpha)
{
    if (!(y > 0.0) || !std::isfinite(y))
        throw DomainError("promotion time: y must be finite and > 0");
    if (alpha.size() != spec.alpha_size())
        throw DomainError("promotion time: expected " + std::to_string(spec.alpha_size()) +
                          " parameters, got " + std::to_string(alpha.size()));
    if (spec.is_mixture())
        return evaluate_mixture(spec, y, alpha.first(spec.K), alpha.subspan(spec.K));
    check_positive(alpha, "promotion time");
    return evaluate_component(spec, y, std::log(y), alpha);
}

void evaluate_batch(const PromotionSpec& spec, std::span<const double> y,
                    std::span<const double> log_y, std::span<const double> alpha,
                    std::span<double> log_f, std::span<double> log_F)
{
    if (!spec.is_mixture()) {
        component_batch(spec, component_family(spec), y, log_y, alpha, log_f, log_F);
        return;
    }
    const std::size_t n = y.size();
    thread_local std::vector<double> tf;
    thread_local std::vector<double> tF;
    tf.resize(n);
    tF.resize(n);
    std::fill(log_f.begin(), log_f.end(), kNegInf);
    std::fill(log_F.begin(), log_F.end(), kNegInf);
    const Family family = component_family(spec);
    for (std::size_t k = 0; k < spec.K; ++k) {
        const double lw = std::log(alpha[k]);
        const auto a = alpha.subspan(spec.K + k * spec.component_dim, spec.component_dim);
        component_batch(spec, family, y, log_y, a, tf, tF);
        for (std::size_t i = 0; i < n; ++i) {
            log_f[i] = log_add_exp(log_f[i], lw + tf[i]);
            log_F[i] = log_add_exp(log_F[i], lw + tF[i]);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        log_F[i] = std::min(0.0, log_F[i]);
}

LogDensityCdf lognormal_positive(double y, std::span<const double> a)
{
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    const double log_y = std::log(y);
    const double z = (log_y - std::log(a[0])) / a[1];
    return {-kHalfLog2Pi - log_y - std::log(a[1]) - 0.5 * z * z, log_std_normal_cdf(z)};
}

}  // namespace curemc3
