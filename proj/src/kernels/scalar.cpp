#include <cmath>

#include "frames/kernels.hpp"
#include "kernels_internal.hpp"

namespace frames::kernels {

namespace {

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* ar = a + static_cast<std::ptrdiff_t>(i) * lda;
        float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int j = 0; j < n; ++j) {
            const float* br = b + static_cast<std::ptrdiff_t>(j) * ldb;
            float s = 0.0f;
            for (int p = 0; p < k; ++p) s += ar[p] * br[p];
            cr[j] = accumulate ? cr[j] + s : s;
        }
    }
}

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (!accumulate) {
            for (int j = 0; j < n; ++j) cr[j] = 0.0f;
        }
        const float* ar = a + static_cast<std::ptrdiff_t>(i) * lda;
        for (int p = 0; p < k; ++p) {
            const float s = ar[p];
            const float* br = b + static_cast<std::ptrdiff_t>(p) * ldb;
            for (int j = 0; j < n; ++j) cr[j] += s * br[j];
        }
    }
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
             int ldc, bool accumulate) {
    if (!accumulate) {
        for (int i = 0; i < m; ++i) {
            float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int j = 0; j < n; ++j) cr[j] = 0.0f;
        }
    }
    for (int p = 0; p < k; ++p) {
        const float* ar = a + static_cast<std::ptrdiff_t>(p) * lda;
        const float* br = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int i = 0; i < m; ++i) {
            const float s = ar[i];
            if (s == 0.0f) continue;
            float* cr = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int j = 0; j < n; ++j) cr[j] += s * br[j];
        }
    }
}

float dot(const float* x, const float* y, std::size_t n) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(float alpha, float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adamw(float* param, const float* grad, float* m, float* v, std::size_t n, const AdamWStep& s) {
    const float decay = 1.0f - s.lr * s.weight_decay;
    const float step_size = s.lr / s.bias_correction1;
    const float inv_sqrt_bc2 = 1.0f / std::sqrt(s.bias_correction2);
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grad[i];
        m[i] = s.beta1 * m[i] + (1.0f - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0f - s.beta2) * g * g;
        const float denom = std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps;
        param[i] = param[i] * decay - step_size * m[i] / denom;
    }
}

}  // namespace

const KernelSet& scalar_kernels() noexcept {
    static const KernelSet set{"scalar", gemm_nt, gemm_nn, gemm_tn, dot, axpy, scale, adamw};
    return set;
}

}  // namespace frames::kernels
