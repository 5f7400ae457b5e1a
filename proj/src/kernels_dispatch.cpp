#include "rumi/kernels.hpp"

namespace rumi::kern {

bool avx2_supported() {
#if defined(RUMI_KERNELS_HAVE_AVX2)
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
#else
    return false;
#endif
}

namespace {

struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    std::pair<double, double> (*minmax)(const double*, std::size_t);
    void (*axpy)(double*, double, const double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    void (*affine_clamp01)(double*, const double*, double, double, std::size_t);
    void (*relu)(double*, const double*, std::size_t);
    void (*relu_backward)(double*, const double*, const double*, std::size_t);
    void (*adam_update)(double*, double*, double*, const double*, std::size_t,
                        double, double, double, double, double, double);
    const char* name;
};

Table resolve() {
#if defined(RUMI_KERNELS_HAVE_AVX2)
    if (avx2_supported()) {
        return {avx2::dot,  avx2::sum,  avx2::minmax,         avx2::axpy,
                avx2::scale, avx2::affine_clamp01, avx2::relu, avx2::relu_backward,
                avx2::adam_update, "avx2"};
    }
#endif
    return {scalar::dot,  scalar::sum,  scalar::minmax,         scalar::axpy,
            scalar::scale, scalar::affine_clamp01, scalar::relu, scalar::relu_backward,
            scalar::adam_update, "scalar"};
}

const Table& table() {
    static const Table t = resolve();
    return t;
}

}  // namespace

const char* active_isa() { return table().name; }

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

double sum(const double* a, std::size_t n) { return table().sum(a, n); }

std::pair<double, double> minmax(const double* a, std::size_t n) { return table().minmax(a, n); }

void axpy(double* y, double alpha, const double* x, std::size_t n) {
    table().axpy(y, alpha, x, n);
}

void scale(double* x, double alpha, std::size_t n) { table().scale(x, alpha, n); }

void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n) {
    table().affine_clamp01(dst, src, mul, add, n);
}

void relu(double* dst, const double* src, std::size_t n) { table().relu(dst, src, n); }

void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n) {
    table().relu_backward(dst, pre, grad, n);
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2) {
    table().adam_update(p, m, v, g, n, beta1, beta2, eps, lr, bc1, bc2);
}

}  // namespace rumi::kern
