#pragma once

#include <cstddef>

namespace rfl::kern {

// Dense double-precision primitives behind the policy's forward and backward
// passes. Scalar versions are the reference; the AVX2 versions are selected
// at runtime when the CPU supports them and are equivalence-tested against
// scalar. Matrices are row-major with leading dimension n (no padding).

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
// Throws std::runtime_error if the backend is not available on this machine.
// Intended for tests and the REFINERL_KERNELS=scalar|avx2 env override.
void set_backend(Backend b);

double dot(const double* a, const double* b, size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, size_t n);
// y = W x + bias, W is m x n
void affine(const double* w, const double* bias, const double* x, double* y,
            size_t m, size_t n);
// dx += W^T dy, W is m x n
void affine_t_acc(const double* w, const double* dy, double* dx, size_t m, size_t n);
// W += alpha * y x^T, W is m x n (rank-1 gradient accumulation)
void ger_acc(double* w, double alpha, const double* y, const double* x,
             size_t m, size_t n);

namespace scalar_impl {
double dot(const double* a, const double* b, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void affine(const double* w, const double* bias, const double* x, double* y,
            size_t m, size_t n);
void affine_t_acc(const double* w, const double* dy, double* dx, size_t m, size_t n);
void ger_acc(double* w, double alpha, const double* y, const double* x,
             size_t m, size_t n);
}  // namespace scalar_impl

#if defined(REFINERL_HAVE_AVX2)
namespace avx2_impl {
double dot(const double* a, const double* b, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);
void affine(const double* w, const double* bias, const double* x, double* y,
            size_t m, size_t n);
void affine_t_acc(const double* w, const double* dy, double* dx, size_t m, size_t n);
void ger_acc(double* w, double alpha, const double* y, const double* x,
             size_t m, size_t n);
}  // namespace avx2_impl
#endif

}  // namespace rfl::kern
