#include "refinerl/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace rfl::kern {

namespace {

struct Table {
    double (*dot)(const double*, const double*, size_t);
    void (*axpy)(double, const double*, double*, size_t);
    void (*affine)(const double*, const double*, const double*, double*, size_t, size_t);
    void (*affine_t_acc)(const double*, const double*, double*, size_t, size_t);
    void (*ger_acc)(double*, double, const double*, const double*, size_t, size_t);
};

constexpr Table kScalar = {scalar_impl::dot, scalar_impl::axpy, scalar_impl::affine,
                           scalar_impl::affine_t_acc, scalar_impl::ger_acc};

#if defined(REFINERL_HAVE_AVX2)
constexpr Table kAvx2 = {avx2_impl::dot, avx2_impl::axpy, avx2_impl::affine,
                         avx2_impl::affine_t_acc, avx2_impl::ger_acc};
#endif

bool cpu_has_avx2() {
#if defined(REFINERL_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend pick_default() {
    if (const char* env = std::getenv("REFINERL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::avx2))
            return Backend::avx2;
        return Backend::scalar;
    }
    return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = pick_default();

const Table& table() {
#if defined(REFINERL_HAVE_AVX2)
    if (g_backend == Backend::avx2) return kAvx2;
#endif
    return kScalar;
}

}  // namespace

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
    return cpu_has_avx2();
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw std::runtime_error(std::string("kernel backend unavailable: ") + backend_name(b));
    g_backend = b;
}

double dot(const double* a, const double* b, size_t n) { return table().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, size_t n) {
    table().axpy(alpha, x, y, n);
}

void affine(const double* w, const double* bias, const double* x, double* y,
            size_t m, size_t n) {
    table().affine(w, bias, x, y, m, n);
}

void affine_t_acc(const double* w, const double* dy, double* dx, size_t m, size_t n) {
    table().affine_t_acc(w, dy, dx, m, n);
}

void ger_acc(double* w, double alpha, const double* y, const double* x,
             size_t m, size_t n) {
    table().ger_acc(w, alpha, y, x, m, n);
}

}  // namespace rfl::kern
