#include "curemc3/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace curemc3 {

double log_sum_exp(std::span<const double> values) noexcept
{
    if (values.empty())
        return kNegInf;
    const double hi = *std::max_element(values.begin(), values.end());
    if (hi == kNegInf)
        return kNegInf;
    if (!std::isfinite(hi))
        return hi;
    double acc = 0.0;
    for (double v : values)
        acc += std::exp(v - hi);
    return hi + std::log(acc);
}

double log_std_normal_cdf(double z) noexcept
{
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    if (z > 0.0)
        return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    if (z > -37.0)
        return std::log(0.5 * std::erfc(-z * kInvSqrt2));
    // Mills-ratio asymptotic series.
    const double z2 = z * z;
    const double inv = 1.0 / z2;
    const double series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv)));
    return -0.5 * z2 - std::log(-z) - kHalfLog2Pi + std::log(series);
}

Moments sample_moments(std::span<const double> values) noexcept
{
    Moments m;
    if (values.empty())
        return m;
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;
    for (double v : values) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
    }
    m.mean = mean;
    m.variance = count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
    return m;
}

}  // namespace curemc3
