#pragma once

// Dense float kernels behind the encoder. Every routine has a portable scalar
// reference; SIMD variants are selected once at runtime and must agree with
// the reference to floating-point tolerance (see tests/unit/kernels_test.cpp).
//
// Matrices are row-major with explicit leading dimensions so attention heads
// can be addressed as strided column blocks of a wider matrix.

#include <cstddef>
#include <string_view>
#include <vector>

namespace frames::kernels {

// `accumulate` adds into C instead of overwriting it.
using GemmFn = void (*)(int m, int n, int k, const float* a, int lda, const float* b, int ldb,
                        float* c, int ldc, bool accumulate);

struct AdamWStep {
    float lr = 0.0f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
    float bias_correction1 = 1.0f;  // 1 - beta1^t
    float bias_correction2 = 1.0f;  // 1 - beta2^t
};

struct KernelSet {
    std::string_view name;
    GemmFn gemm_nt;  // C[m,n] = A[m,k] * B[n,k]^T
    GemmFn gemm_nn;  // C[m,n] = A[m,k] * B[k,n]
    GemmFn gemm_tn;  // C[m,n] = A[k,m]^T * B[k,n]
    float (*dot)(const float* x, const float* y, std::size_t n);
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    void (*scale)(float alpha, float* x, std::size_t n);
    // Decoupled-weight-decay Adam update of one parameter buffer.
    void (*adamw)(float* param, const float* grad, float* m, float* v, std::size_t n,
                  const AdamWStep& step);
};

const KernelSet& scalar_kernels() noexcept;

// nullptr unless built for x86-64 and the CPU reports AVX2 and FMA.
const KernelSet* avx2_kernels() noexcept;

// Names of the kernel sets usable on this machine, reference first.
std::vector<std::string_view> available();

// The process-wide kernel set. Chosen on first use: FRAMES_KERNELS
// (scalar|avx2|auto) if set, otherwise the widest supported set.
const KernelSet& active();

// Overrides the active set. Throws EnvironmentError for an unavailable name.
void select(std::string_view name);

}  // namespace frames::kernels
