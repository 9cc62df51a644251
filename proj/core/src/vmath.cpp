#include "vmath.hpp"

#include <algorithm>
#include <cmath>

namespace curemc3::detail {

#ifdef CUREMC3_HAVE_MVEC
namespace avx512 {
void exp(const double* x, double* y, std::size_t n) noexcept;
void expm1(const double* x, double* y, std::size_t n) noexcept;
void log(const double* x, double* y, std::size_t n) noexcept;
void log1p(const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx512
#endif

namespace {

bool detect() noexcept
{
#if defined(CUREMC3_HAVE_MVEC) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx512f");
#else
    return false;
#endif
}

const bool kAccelerated = detect();

template <class F>
void scalar(std::span<const double> x, std::span<double> y, F f) noexcept
{
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = f(x[i]);
}

}  // namespace

bool vector_math_accelerated() noexcept
{
    return kAccelerated;
}

#ifdef CUREMC3_HAVE_MVEC
#define CUREMC3_DISPATCH(name, fallback)                 \
    if (kAccelerated) {                                  \
        avx512::name(x.data(), y.data(), x.size());      \
        return;                                          \
    }                                                    \
    scalar(x, y, [](double v) { return fallback(v); })
#else
#define CUREMC3_DISPATCH(name, fallback) scalar(x, y, [](double v) { return fallback(v); })
#endif

void vexp(std::span<const double> x, std::span<double> y) noexcept
{
    CUREMC3_DISPATCH(exp, std::exp);
}

void vexpm1(std::span<const double> x, std::span<double> y) noexcept
{
    CUREMC3_DISPATCH(expm1, std::expm1);
}

void vlog(std::span<const double> x, std::span<double> y) noexcept
{
    CUREMC3_DISPATCH(log, std::log);
}

void vlog1p(std::span<const double> x, std::span<double> y) noexcept
{
    CUREMC3_DISPATCH(log1p, std::log1p);
}

#undef CUREMC3_DISPATCH

void vlog1pexp(std::span<const double> x, std::span<double> y) noexcept
{
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = -std::abs(x[i]);
    vexp(y, y);
    vlog1p(y, y);
    for (std::size_t i = 0; i < n; ++i)
        y[i] += std::max(x[i], 0.0);
}

void vlog1mexp(std::span<const double> x, std::span<double> y) noexcept
{
    vexpm1(x, y);
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = -y[i];
    vlog(y, y);
}

}  // namespace curemc3::detail
