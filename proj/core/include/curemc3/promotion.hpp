#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace curemc3 {

/// Promotion-time distribution families. Config strings are the camel/snake
/// names returned by family_name().
enum class Family
{
    exponential,
    weibull,
    gamma,
    log_logistic,
    gompertz,
    lomax,
    dagum,
    gamma_mixture,
    user,
    user_mixture,
};

std::string_view family_name(Family family) noexcept;
/// Throws ConfigError for unknown names.
Family parse_family(std::string_view name);

struct LogDensityCdf
{
    double log_f = 0.0;
    double log_F = 0.0;
};

/// User evaluation contract: (y, a) -> (log f, log F) with every a_j > 0.
/// Must be reentrant: chains call it concurrently.
using UserEvalFn = std::function<LogDensityCdf(double y, std::span<const double> a)>;

/// Inverse-gamma (shape, scale) hyper-parameters of one positive parameter.
struct InverseGammaPrior
{
    double shape = 2.1;
    double scale = 1.1;
};

/// Description of the promotion-time family together with its priors and
/// proposal scales.
///
/// Stored parameter layout (`alpha`):
///   - single families: the d component parameters;
///   - mixtures: K normalized proportions followed by K blocks of
///     `component_dim` component parameters.
///
/// Free (sampled) parameter layout, used by proposal scales and information
/// criteria: mixtures replace the K proportions by K - 1 free weights
/// (the first weight is pinned to one).
struct PromotionSpec
{
    Family family = Family::weibull;
    std::size_t component_dim = 2;
    std::size_t K = 1;
    std::vector<InverseGammaPrior> prior_parameters;  // K * component_dim entries
    std::vector<double> prop_scale;                   // free_size() entries
    double dirichlet_concentration = 1.0;
    std::string user_name;
    std::shared_ptr<const UserEvalFn> user_eval;

    bool is_mixture() const noexcept
    {
        return family == Family::gamma_mixture || family == Family::user_mixture;
    }
    /// Length of Theta::alpha.
    std::size_t alpha_size() const noexcept
    {
        return is_mixture() ? K + K * component_dim : component_dim;
    }
    /// Number of free promotion parameters.
    std::size_t free_size() const noexcept
    {
        return is_mixture() ? (K - 1) + K * component_dim : component_dim;
    }

    /// Throws ConfigError when the table sizes or values are inconsistent.
    void validate() const;
};

/// Built-in family with default priors IG(2.1, 1.1) and proposal scale 0.1.
/// `K` is only meaningful for gamma_mixture (K >= 2).
PromotionSpec make_promotion_spec(Family family, std::size_t K = 1);

/// Registers (or replaces) a named user family in the process-wide registry
/// and returns a ready-to-use spec. Throws RegistrationError if d < 1.
PromotionSpec register_user_family(std::string name, std::size_t d, UserEvalFn eval_fn);

/// Looks a registered family up by name. Throws ConfigError if absent.
PromotionSpec find_user_family(std::string_view name);

/// Wraps a user family as a K-component mixture.
PromotionSpec make_user_mixture(const PromotionSpec& user_family, std::size_t K);

/// (log f, log F) at y for the stored parameter vector.
/// Throws DomainError for y <= 0 or non-positive parameters.
LogDensityCdf evaluate(const PromotionSpec& spec, double y, std::span<const double> alpha);

/// Mixture evaluation with explicit proportions and stacked component params.
LogDensityCdf evaluate_mixture(const PromotionSpec& spec, double y,
                               std::span<const double> proportions,
                               std::span<const double> component_params);

/// Single-component evaluation (no validation), used by the hot loops.
LogDensityCdf evaluate_component(const PromotionSpec& spec, double y, double log_y,
                                 std::span<const double> a);

/// Batched evaluation over `y` (with precomputed log y). Never throws for
/// valid positive parameters; non-finite user output becomes -inf.
void evaluate_batch(const PromotionSpec& spec, std::span<const double> y,
                    std::span<const double> log_y, std::span<const double> alpha,
                    std::span<double> log_f, std::span<double> log_F);

/// Log-normal family reparameterized with strictly positive (a1 = e^mu, a2 = sigma).
LogDensityCdf lognormal_positive(double y, std::span<const double> a);

}  // namespace curemc3
