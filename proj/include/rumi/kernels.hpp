#pragma once

#include <cstddef>
#include <utility>

// Data-parallel inner loops used by the image transforms, the rank-pooling
// solver and the CNN. Every kernel exists as a scalar reference and, on x86
// with AVX2+FMA, as a vector variant; the unqualified entry points dispatch
// once at startup to the widest ISA the CPU supports.
//
// Elementwise kernels (axpy, scale, affine_clamp01, relu, relu_backward,
// adam_update) perform the same rounding sequence per element in every ISA
// and must agree bit-for-bit with the scalar reference. Reductions (dot,
// sum) reassociate and agree only to rounding error; minmax is exact.

namespace rumi::kern {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
std::pair<double, double> minmax(const double* a, std::size_t n);  // n >= 1
void axpy(double* y, double alpha, const double* x, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
// dst[i] = clamp(src[i] * mul + add, 0, 1)
void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n);
void relu(double* dst, const double* src, std::size_t n);
// dst[i] = pre[i] > 0 ? grad[i] : 0
void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n);
// Fused Adam update. bc1/bc2 are the precomputed bias corrections
// 1/(1-beta1^t) and 1/(1-beta2^t).
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2);

}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
#define RUMI_KERNELS_HAVE_AVX2 1
namespace avx2 {

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
std::pair<double, double> minmax(const double* a, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n);
void relu(double* dst, const double* src, std::size_t n);
void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2);

}  // namespace avx2
#endif

// True when the CPU reports AVX2 and FMA.
bool avx2_supported();

// ISA the dispatcher resolved to: "avx2" or "scalar".
const char* active_isa();

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
std::pair<double, double> minmax(const double* a, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n);
void relu(double* dst, const double* src, std::size_t n);
void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2);

inline double nrm2(const double* a, std::size_t n) {
    double s = dot(a, a, n);
    return s > 0.0 ? __builtin_sqrt(s) : 0.0;
}

}  // namespace rumi::kern
