#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace curemc3 {

/// The single rejection signal shared by every likelihood and prior routine.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(1 - exp(x)) for x <= 0, accurate on both sides of -log 2.
inline double log1mexp(double x) noexcept
{
    if (x > -0.6931471805599453)
        return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) noexcept
{
    if (x <= -37.0)
        return std::exp(x);
    if (x <= 18.0)
        return std::log1p(std::exp(x));
    if (x <= 33.3)
        return x + std::exp(-x);
    return x;
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) noexcept
{
    if (a == kNegInf)
        return b;
    if (b == kNegInf)
        return a;
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

double log_sum_exp(std::span<const double> values) noexcept;

/// log Phi(z) for the standard normal CDF, stable far into the lower tail.
double log_std_normal_cdf(double z) noexcept;

/// Sample mean and variance (n - 1 denominator).
struct Moments
{
    double mean = 0.0;
    double variance = 0.0;
};
Moments sample_moments(std::span<const double> values) noexcept;

}  // namespace curemc3
