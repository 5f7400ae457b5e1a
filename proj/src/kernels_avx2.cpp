// AVX2 kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers must check avx2_supported() before dispatching here.
//
// Elementwise kernels keep the exact per-element rounding sequence of the
// scalar reference (no FMA contraction), so they are bit-identical to it.
// dot/sum use multiple FMA accumulators and agree with the reference only
// up to reassociation error.

#include "rumi/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace rumi::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    if (i + 4 <= n) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        i += 4;
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i];
    return s;
}

std::pair<double, double> minmax(const double* a, std::size_t n) {
    std::size_t i = 0;
    double mn = a[0], mx = a[0];
    if (n >= 4) {
        __m256d vmn = _mm256_loadu_pd(a);
        __m256d vmx = vmn;
        for (i = 4; i + 4 <= n; i += 4) {
            const __m256d v = _mm256_loadu_pd(a + i);
            vmn = _mm256_min_pd(vmn, v);
            vmx = _mm256_max_pd(vmx, v);
        }
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, vmn);
        mn = std::min(std::min(tmp[0], tmp[1]), std::min(tmp[2], tmp[3]));
        _mm256_store_pd(tmp, vmx);
        mx = std::max(std::max(tmp[0], tmp[1]), std::max(tmp[2], tmp[3]));
    }
    for (; i < n; ++i) {
        mn = std::min(mn, a[i]);
        mx = std::max(mx, a[i]);
    }
    return {mn, mx};
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] = x[i] * alpha;
}

void affine_clamp01(double* dst, const double* src, double mul, double add, std::size_t n) {
    const __m256d vmul = _mm256_set1_pd(mul);
    const __m256d vadd = _mm256_set1_pd(add);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(src + i), vmul), vadd);
        v = _mm256_max_pd(v, zero);  // (v > 0) ? v : 0, as in the reference
        v = _mm256_min_pd(v, one);   // (v < 1) ? v : 1
        _mm256_storeu_pd(dst + i, v);
    }
    for (; i < n; ++i) {
        const double v = src[i] * mul + add;
        dst[i] = std::min(1.0, std::max(0.0, v));
    }
}

void relu(double* dst, const double* src, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(src + i), zero));
    }
    for (; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
}

void relu_backward(double* dst, const double* pre, const double* grad, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dst + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), mask));
    }
    for (; i < n; ++i) dst[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double eps, double lr, double bc1, double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_add_pd(_mm256_mul_pd(vb1, mi), _mm256_mul_pd(vc1, gi));
        vi = _mm256_add_pd(_mm256_mul_pd(vb2, vi), _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_mul_pd(mi, vbc1);
        const __m256d vhat = _mm256_mul_pd(vi, vbc2);
        const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(mhat, den));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + c1 * gi;
        v[i] = beta2 * v[i] + c2 * (gi * gi);
        const double mhat = m[i] * bc1;
        const double vhat = v[i] * bc2;
        p[i] = p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace rumi::kern::avx2

#endif  // x86
