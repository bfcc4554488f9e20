#include "refinerl/kernels.hpp"

#if defined(REFINERL_HAVE_AVX2)

#include <immintrin.h>

namespace rfl::kern::avx2_impl {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void affine(const double* w, const double* bias, const double* x, double* y,
            size_t m, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        y[i] = bias[i] + dot(w + i * n, x, n);
    }
}

void affine_t_acc(const double* w, const double* dy, double* dx, size_t m, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        axpy(dy[i], w + i * n, dx, n);
    }
}

void ger_acc(double* w, double alpha, const double* y, const double* x,
             size_t m, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        axpy(alpha * y[i], x, w + i * n, n);
    }
}

}  // namespace rfl::kern::avx2_impl

#endif  // REFINERL_HAVE_AVX2
