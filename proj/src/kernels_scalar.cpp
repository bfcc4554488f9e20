#include "refinerl/kernels.hpp"

namespace rfl::kern::scalar_impl {

double dot(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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

}  // namespace rfl::kern::scalar_impl
