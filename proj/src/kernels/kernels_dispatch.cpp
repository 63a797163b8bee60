// Runtime kernel selection. Detection happens once; MDLM_KERNEL=scalar|avx2
// forces a level (requesting avx2 on unsupported hardware falls back to
// scalar).

#include <atomic>
#include <cstdlib>
#include <cstring>

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#define MDLM_HAVE_MALLOPT 1
#else
#define MDLM_HAVE_MALLOPT 0
#endif

#include "mdlm/kernels.hpp"

namespace mdlm::kern {

namespace scalar {
void gemm_nn(const float*, const float*, float*, int, int, int, bool);
void gemm_nn(const double*, const double*, double*, int, int, int, bool);
void gemm_nt(const float*, const float*, float*, int, int, int, bool);
void gemm_nt(const double*, const double*, double*, int, int, int, bool);
void gemm_tn(const float*, const float*, float*, int, int, int, bool);
void gemm_tn(const double*, const double*, double*, int, int, int, bool);
void add_inplace(float*, const float*, int);
void add_inplace(double*, const double*, int);
void axpy(float*, const float*, float, int);
void axpy(double*, const double*, double, int);
void silu(const float*, float*, int);
void silu(const double*, double*, int);
void silu_backward(const float*, const float*, float*, int);
void silu_backward(const double*, const double*, double*, int);
void adam_update(float*, const float*, float*, float*, int, double, double, double, double, int64_t);
void adam_update(double*, const double*, double*, double*, int, double, double, double, double, int64_t);
double row_max(const float*, int);
double row_max(const double*, int);
void softmax_row(const float*, float*, int, double);
void softmax_row(const double*, double*, int, double);
void log_softmax_row(const float*, double*, int, double);
void log_softmax_row(const double*, double*, int, double);
double entropy_row(const float*, int, double);
double entropy_row(const double*, int, double);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MDLM_HAVE_AVX2_TU 1
namespace avx2 {
void gemm_nn(const float*, const float*, float*, int, int, int, bool);
void gemm_nt(const float*, const float*, float*, int, int, int, bool);
void gemm_tn(const float*, const float*, float*, int, int, int, bool);
void add_inplace(float*, const float*, int);
void axpy(float*, const float*, float, int);
void adam_update(float*, const float*, float*, float*, int, double, double, double, double, int64_t);
double row_max(const float*, int);
void silu(const float*, float*, int);
void silu_backward(const float*, const float*, float*, int);
void softmax_row(const float*, float*, int, double);
} // namespace avx2
#else
#define MDLM_HAVE_AVX2_TU 0
#endif

namespace {

bool detect_avx2() {
#if MDLM_HAVE_AVX2_TU
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Level detect_level() {
#if MDLM_HAVE_MALLOPT
    // Recorded graphs allocate multi-megabyte activation buffers every step;
    // keeping them on the heap instead of mmap avoids refaulting the pages.
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    const char* env = std::getenv("MDLM_KERNEL");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) {
            return Level::scalar;
        }
        if (std::strcmp(env, "avx2") == 0) {
            return detect_avx2() ? Level::avx2 : Level::scalar;
        }
    }
    return detect_avx2() ? Level::avx2 : Level::scalar;
}

std::atomic<Level> g_level{detect_level()};

inline bool use_avx2() { return g_level.load(std::memory_order_relaxed) == Level::avx2; }

} // namespace

bool avx2_supported() { return detect_avx2(); }

Level active_level() { return g_level.load(std::memory_order_relaxed); }

void force_level(Level level) {
    if (level == Level::avx2 && !detect_avx2()) {
        level = Level::scalar;
    }
    g_level.store(level, std::memory_order_relaxed);
}

const char* level_name(Level level) {
    switch (level) {
        case Level::scalar: return "scalar";
        case Level::avx2: return "avx2";
    }
    return "unknown";
}

void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::gemm_nn(a, b, c, m, k, n, acc);
        return;
    }
#endif
    scalar::gemm_nn(a, b, c, m, k, n, acc);
}

void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::gemm_nt(a, b, c, m, k, n, acc);
        return;
    }
#endif
    scalar::gemm_nt(a, b, c, m, k, n, acc);
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::gemm_tn(a, b, c, m, k, n, acc);
        return;
    }
#endif
    scalar::gemm_tn(a, b, c, m, k, n, acc);
}

void add_inplace(float* dst, const float* src, int n) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::add_inplace(dst, src, n);
        return;
    }
#endif
    scalar::add_inplace(dst, src, n);
}

void axpy(float* dst, const float* src, float alpha, int n) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::axpy(dst, src, alpha, n);
        return;
    }
#endif
    scalar::axpy(dst, src, alpha, n);
}

void adam_update(float* p, const float* g, float* m, float* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, step);
        return;
    }
#endif
    scalar::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, step);
}

double row_max(const float* x, int n) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        return avx2::row_max(x, n);
    }
#endif
    return scalar::row_max(x, n);
}

void silu(const float* x, float* y, int n) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::silu(x, y, n);
        return;
    }
#endif
    scalar::silu(x, y, n);
}

void silu_backward(const float* x, const float* dy, float* dx, int n) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::silu_backward(x, dy, dx, n);
        return;
    }
#endif
    scalar::silu_backward(x, dy, dx, n);
}

void softmax_row(const float* x, float* p, int n, double inv_temp) {
#if MDLM_HAVE_AVX2_TU
    if (use_avx2()) {
        avx2::softmax_row(x, p, n, inv_temp);
        return;
    }
#endif
    scalar::softmax_row(x, p, n, inv_temp);
}

// Double variants and the remaining rowwise numerics stay scalar; they are
// either gradient-check paths or off the training profile.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { scalar::gemm_nn(a, b, c, m, k, n, acc); }
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { scalar::gemm_nt(a, b, c, m, k, n, acc); }
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { scalar::gemm_tn(a, b, c, m, k, n, acc); }
void add_inplace(double* dst, const double* src, int n) { scalar::add_inplace(dst, src, n); }
void axpy(double* dst, const double* src, double alpha, int n) { scalar::axpy(dst, src, alpha, n); }
void silu(const double* x, double* y, int n) { scalar::silu(x, y, n); }
void silu_backward(const double* x, const double* dy, double* dx, int n) { scalar::silu_backward(x, dy, dx, n); }
void adam_update(double* p, const double* g, double* m, double* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step) {
    scalar::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, step);
}
double row_max(const double* x, int n) { return scalar::row_max(x, n); }
void softmax_row(const double* x, double* p, int n, double inv_temp) { scalar::softmax_row(x, p, n, inv_temp); }
void log_softmax_row(const float* x, double* out, int n, double inv_temp) { scalar::log_softmax_row(x, out, n, inv_temp); }
void log_softmax_row(const double* x, double* out, int n, double inv_temp) { scalar::log_softmax_row(x, out, n, inv_temp); }
double entropy_row(const float* x, int n, double inv_temp) { return scalar::entropy_row(x, n, inv_temp); }
double entropy_row(const double* x, int n, double inv_temp) { return scalar::entropy_row(x, n, inv_temp); }

} // namespace mdlm::kern
