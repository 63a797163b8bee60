#pragma once

#include <cstdint>

namespace mdlm::kern {

// Runtime-selected kernel level. Every float kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant; the two are
// equivalence-tested against a double-precision oracle. Double kernels are
// scalar only (used by gradient checks and loss internals, never hot).
//
// Selection: auto-detect at first use; MDLM_KERNEL=scalar|avx2 overrides.
enum class Level {
    scalar,
    avx2,
};

Level active_level();
void force_level(Level level); // tests only
const char* level_name(Level level);
bool avx2_supported();

// C[M,N] = A[M,K] * B[K,N]   (+= C when acc)
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool acc);
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

// C[M,N] = A[M,K] * B[N,K]^T
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool acc);
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

// C[M,N] = A[K,M]^T * B[K,N]
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool acc);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc);

// dst += src
void add_inplace(float* dst, const float* src, int n);
void add_inplace(double* dst, const double* src, int n);

// dst += alpha * src
void axpy(float* dst, const float* src, float alpha, int n);
void axpy(double* dst, const double* src, double alpha, int n);

// y = x * sigmoid(x)
void silu(const float* x, float* y, int n);
void silu(const double* x, double* y, int n);

// dx += dy * d silu(x)/dx
void silu_backward(const float* x, const float* dy, float* dx, int n);
void silu_backward(const double* x, const double* dy, double* dx, int n);

// Adam with bias correction; step is the 1-based update count.
void adam_update(float* p, const float* g, float* m, float* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step);
void adam_update(double* p, const double* g, double* m, double* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step);

// Row-wise numerics. Accumulation is in double for both scalar types so the
// float and double paths agree to float precision.
double row_max(const float* x, int n);
double row_max(const double* x, int n);

// p = softmax(x * inv_temp), numerically stable via max subtraction.
void softmax_row(const float* x, float* p, int n, double inv_temp);
void softmax_row(const double* x, double* p, int n, double inv_temp);

// out = log softmax(x * inv_temp)
void log_softmax_row(const float* x, double* out, int n, double inv_temp);
void log_softmax_row(const double* x, double* out, int n, double inv_temp);

// Entropy in nats of softmax(x * inv_temp).
double entropy_row(const float* x, int n, double inv_temp);
double entropy_row(const double* x, int n, double inv_temp);

} // namespace mdlm::kern
