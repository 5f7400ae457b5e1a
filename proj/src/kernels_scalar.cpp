#include "rumi/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace rumi::kern::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

std::pair<double, double> minmax(const double* a, std::size_t n) {
    double mn = a[0], mx = a[0];
    for (std::size_t i = 1; i < n; ++i) {
        mn = std::min(mn, a[i]);
        mx = std::max(mx, a[i]);
    }
    return {mn, mx};
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * alpha;
}

void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = src[i] * mul + add;
        dst[i] = std::min(1.0, std::max(0.0, v));
    }
}

void relu(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2) {
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + c1 * gi;
        v[i] = beta2 * v[i] + c2 * (gi * gi);
        const double mhat = m[i] * bc1;
        const double vhat = v[i] * bc2;
        p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace rumi::kern::scalar
