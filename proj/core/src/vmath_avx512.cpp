// Compiled with -mavx512f; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cstddef>

extern "C" {
__m512d _ZGVeN8v_exp(__m512d);
__m512d _ZGVeN8v_expm1(__m512d);
__m512d _ZGVeN8v_log(__m512d);
__m512d _ZGVeN8v_log1p(__m512d);
}

namespace curemc3::detail::avx512 {

namespace {

template <__m512d (*F)(__m512d)>
void apply(const double* x, double* y, std::size_t n) noexcept
{
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(y + i, F(_mm512_loadu_pd(x + i)));
    if (i < n) {
        alignas(64) double buf[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
        std::copy(x + i, x + n, buf);
        _mm512_store_pd(buf, F(_mm512_load_pd(buf)));
        std::copy(buf, buf + (n - i), y + i);
    }
}

}  // namespace

void exp(const double* x, double* y, std::size_t n) noexcept { apply<_ZGVeN8v_exp>(x, y, n); }
void expm1(const double* x, double* y, std::size_t n) noexcept { apply<_ZGVeN8v_expm1>(x, y, n); }
void log(const double* x, double* y, std::size_t n) noexcept { apply<_ZGVeN8v_log>(x, y, n); }
void log1p(const double* x, double* y, std::size_t n) noexcept { apply<_ZGVeN8v_log1p>(x, y, n); }

}  // namespace curemc3::detail::avx512
