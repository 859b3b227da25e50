// AVX2 + FMA variants. Built with -mavx2 -mfma; only reached through the
// dispatcher after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "frames/kernels.hpp"
#include "kernels_internal.hpp"

namespace frames::kernels {

namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline float dot_avx2(const float* x, const float* y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    }
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 a = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(a, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    const auto kk = static_cast<std::size_t>(k);
    for (int i = 0; i < m; ++i) {
        const float* ar = a + static_cast<std::ptrdiff_t>(i) * lda;
        float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
        int j = 0;
        // Four output columns per pass so each A row load is reused.
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + static_cast<std::ptrdiff_t>(j) * ldb;
            const float* b1 = b0 + ldb;
            const float* b2 = b1 + ldb;
            const float* b3 = b2 + ldb;
            __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
            std::size_t p = 0;
            for (; p + 8 <= kk; p += 8) {
                const __m256 av = _mm256_loadu_ps(ar + p);
                s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
                s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
                s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), s2);
                s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), s3);
            }
            float r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
            for (; p < kk; ++p) {
                r0 += ar[p] * b0[p];
                r1 += ar[p] * b1[p];
                r2 += ar[p] * b2[p];
                r3 += ar[p] * b3[p];
            }
            if (accumulate) {
                cr[j] += r0;
                cr[j + 1] += r1;
                cr[j + 2] += r2;
                cr[j + 3] += r3;
            } else {
                cr[j] = r0;
                cr[j + 1] = r1;
                cr[j + 2] = r2;
                cr[j + 3] = r3;
            }
        }
        for (; j < n; ++j) {
            const float s = dot_avx2(ar, b + static_cast<std::ptrdiff_t>(j) * ldb, kk);
            cr[j] = accumulate ? cr[j] + s : s;
        }
    }
}

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    const auto nn = static_cast<std::size_t>(n);
    for (int i = 0; i < m; ++i) {
        float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (!accumulate) {
            for (std::size_t j = 0; j < nn; ++j) cr[j] = 0.0f;
        }
        const float* ar = a + static_cast<std::ptrdiff_t>(i) * lda;
        for (int p = 0; p < k; ++p) {
            axpy_avx2(ar[p], b + static_cast<std::ptrdiff_t>(p) * ldb, cr, nn);
        }
    }
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    const auto nn = static_cast<std::size_t>(n);
    if (!accumulate) {
        for (int i = 0; i < m; ++i) {
            float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (std::size_t j = 0; j < nn; ++j) cr[j] = 0.0f;
        }
    }
    for (int p = 0; p < k; ++p) {
        const float* ar = a + static_cast<std::ptrdiff_t>(p) * lda;
        const float* br = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int i = 0; i < m; ++i) {
            const float s = ar[i];
            if (s == 0.0f) continue;
            axpy_avx2(s, br, c + static_cast<std::ptrdiff_t>(i) * ldc, nn);
        }
    }
}

void scale(float alpha, float* x, std::size_t n) {
    const __m256 a = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(a, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void adamw(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamWStep& s) {
    const float decay = 1.0f - s.lr * s.weight_decay;
    const float step_size = s.lr / s.bias_correction1;
    const float inv_sqrt_bc2 = 1.0f / std::sqrt(s.bias_correction2);
    const __m256 b1 = _mm256_set1_ps(s.beta1), nb1 = _mm256_set1_ps(1.0f - s.beta1);
    const __m256 b2 = _mm256_set1_ps(s.beta2), nb2 = _mm256_set1_ps(1.0f - s.beta2);
    const __m256 dec = _mm256_set1_ps(decay), step = _mm256_set1_ps(step_size);
    const __m256 ibc2 = _mm256_set1_ps(inv_sqrt_bc2), eps = _mm256_set1_ps(s.eps);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grad + i);
        __m256 mv = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(nb1, g));
        __m256 vv = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                  _mm256_mul_ps(_mm256_mul_ps(nb2, g), g));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 denom = _mm256_add_ps(_mm256_mul_ps(_mm256_sqrt_ps(vv), ibc2), eps);
        const __m256 p = _mm256_mul_ps(_mm256_loadu_ps(param + i), dec);
        _mm256_storeu_ps(param + i, _mm256_sub_ps(p, _mm256_div_ps(_mm256_mul_ps(step, mv), denom)));
    }
    for (; i < n; ++i) {
        const float g = grad[i];
        m[i] = s.beta1 * m[i] + (1.0f - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0f - s.beta2) * g * g;
        const float denom = std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps;
        param[i] = param[i] * decay - step_size * m[i] / denom;
    }
}

float dot(const float* x, const float* y, std::size_t n) { return dot_avx2(x, y, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_avx2(alpha, x, y, n); }

}  // namespace

namespace detail {

const KernelSet& avx2_set() noexcept {
    static const KernelSet set{"avx2", gemm_nt, gemm_nn, gemm_tn, dot, axpy, scale, adamw};
    return set;
}

}  // namespace detail

}  // namespace frames::kernels
