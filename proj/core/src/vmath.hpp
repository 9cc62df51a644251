#pragma once

#include <cstddef>
#include <span>

namespace curemc3::detail {

/// Elementwise transcendental kernels over arrays. Every element goes through
/// the same code path (tails are padded), so a value never depends on its
/// position or on which rows were evaluated together. In-place use is fine.
void vexp(std::span<const double> x, std::span<double> y) noexcept;
void vexpm1(std::span<const double> x, std::span<double> y) noexcept;
void vlog(std::span<const double> x, std::span<double> y) noexcept;
void vlog1p(std::span<const double> x, std::span<double> y) noexcept;

/// log(1 + exp(x)); `x` and `y` must not alias.
void vlog1pexp(std::span<const double> x, std::span<double> y) noexcept;
/// log(1 - exp(x)) for x <= 0, as log(-expm1(x)); absolute error ~1e-16.
void vlog1mexp(std::span<const double> x, std::span<double> y) noexcept;

/// True when a SIMD math library backs the kernels on this machine.
bool vector_math_accelerated() noexcept;

}  // namespace curemc3::detail
