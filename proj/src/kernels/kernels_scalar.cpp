// Scalar reference kernels. These are the semantic ground truth the SIMD
// variants are tested against.

#include <algorithm>
#include <cmath>

#include "mdlm/kernels.hpp"

namespace mdlm::kern::scalar {

template <class S>
void gemm_nn_impl(const S* a, const S* b, S* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        S* crow = c + static_cast<size_t>(i) * n;
        if (!acc) {
            std::fill(crow, crow + n, S(0));
        }
        const S* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const S av = arow[p];
            if (av == S(0)) {
                continue;
            }
            const S* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

template <class S>
void gemm_nt_impl(const S* a, const S* b, S* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<size_t>(i) * k;
        S* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const S* brow = b + static_cast<size_t>(j) * k;
            S sum = S(0);
            for (int p = 0; p < k; ++p) {
                sum += arow[p] * brow[p];
            }
            crow[j] = acc ? crow[j] + sum : sum;
        }
    }
}

template <class S>
void gemm_tn_impl(const S* a, const S* b, S* c, int m, int k, int n, bool acc) {
    if (!acc) {
        std::fill(c, c + static_cast<size_t>(m) * n, S(0));
    }
    for (int p = 0; p < k; ++p) {
        const S* arow = a + static_cast<size_t>(p) * m;
        const S* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const S av = arow[i];
            if (av == S(0)) {
                continue;
            }
            S* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

template <class S>
void add_inplace_impl(S* dst, const S* src, int n) {
    for (int i = 0; i < n; ++i) {
        dst[i] += src[i];
    }
}

template <class S>
void axpy_impl(S* dst, const S* src, S alpha, int n) {
    for (int i = 0; i < n; ++i) {
        dst[i] += alpha * src[i];
    }
}

template <class S>
void silu_impl(const S* x, S* y, int n) {
    for (int i = 0; i < n; ++i) {
        const S s = S(1) / (S(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <class S>
void silu_backward_impl(const S* x, const S* dy, S* dx, int n) {
    for (int i = 0; i < n; ++i) {
        const S s = S(1) / (S(1) + std::exp(-x[i]));
        dx[i] += dy[i] * s * (S(1) + x[i] * (S(1) - s));
    }
}

template <class S>
void adam_update_impl(S* p, const S* g, S* m, S* v, int n,
                      double lr, double beta1, double beta2, double eps, int64_t step) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (int i = 0; i < n; ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p[i] = static_cast<S>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

template <class S>
double row_max_impl(const S* x, int n) {
    double mx = static_cast<double>(x[0]);
    for (int i = 1; i < n; ++i) {
        mx = std::max(mx, static_cast<double>(x[i]));
    }
    return mx;
}

template <class S>
void softmax_row_impl(const S* x, S* p, int n, double inv_temp) {
    const double mx = row_max_impl(x, n) * inv_temp;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = std::exp(static_cast<double>(x[i]) * inv_temp - mx);
        p[i] = static_cast<S>(e);
        sum += e;
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) {
        p[i] = static_cast<S>(static_cast<double>(p[i]) * inv);
    }
}

template <class S>
void log_softmax_row_impl(const S* x, double* out, int n, double inv_temp) {
    const double mx = row_max_impl(x, n) * inv_temp;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = static_cast<double>(x[i]) * inv_temp - mx;
        sum += std::exp(out[i]);
    }
    const double lse = std::log(sum);
    for (int i = 0; i < n; ++i) {
        out[i] -= lse;
    }
}

template <class S>
double entropy_row_impl(const S* x, int n, double inv_temp) {
    const double mx = row_max_impl(x, n) * inv_temp;
    double sum = 0.0;
    double dot = 0.0; // sum of e_i * s_i with s_i = x_i*inv_temp - mx
    for (int i = 0; i < n; ++i) {
        const double s = static_cast<double>(x[i]) * inv_temp - mx;
        const double e = std::exp(s);
        sum += e;
        dot += e * s;
    }
    // H = log(sum) - dot/sum; exact zero for a delta distribution.
    const double h = std::log(sum) - dot / sum;
    return h > 0.0 ? h : 0.0;
}

void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) { gemm_nn_impl(a, b, c, m, k, n, acc); }
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { gemm_nn_impl(a, b, c, m, k, n, acc); }
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool acc) { gemm_nt_impl(a, b, c, m, k, n, acc); }
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { gemm_nt_impl(a, b, c, m, k, n, acc); }
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) { gemm_tn_impl(a, b, c, m, k, n, acc); }
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) { gemm_tn_impl(a, b, c, m, k, n, acc); }
void add_inplace(float* dst, const float* src, int n) { add_inplace_impl(dst, src, n); }
void add_inplace(double* dst, const double* src, int n) { add_inplace_impl(dst, src, n); }
void axpy(float* dst, const float* src, float alpha, int n) { axpy_impl(dst, src, alpha, n); }
void axpy(double* dst, const double* src, double alpha, int n) { axpy_impl(dst, src, alpha, n); }
void silu(const float* x, float* y, int n) { silu_impl(x, y, n); }
void silu(const double* x, double* y, int n) { silu_impl(x, y, n); }
void silu_backward(const float* x, const float* dy, float* dx, int n) { silu_backward_impl(x, dy, dx, n); }
void silu_backward(const double* x, const double* dy, double* dx, int n) { silu_backward_impl(x, dy, dx, n); }
void adam_update(float* p, const float* g, float* m, float* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step) {
    adam_update_impl(p, g, m, v, n, lr, beta1, beta2, eps, step);
}
void adam_update(double* p, const double* g, double* m, double* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step) {
    adam_update_impl(p, g, m, v, n, lr, beta1, beta2, eps, step);
}
double row_max(const float* x, int n) { return row_max_impl(x, n); }
double row_max(const double* x, int n) { return row_max_impl(x, n); }
void softmax_row(const float* x, float* p, int n, double inv_temp) { softmax_row_impl(x, p, n, inv_temp); }
void softmax_row(const double* x, double* p, int n, double inv_temp) { softmax_row_impl(x, p, n, inv_temp); }
void log_softmax_row(const float* x, double* out, int n, double inv_temp) { log_softmax_row_impl(x, out, n, inv_temp); }
void log_softmax_row(const double* x, double* out, int n, double inv_temp) { log_softmax_row_impl(x, out, n, inv_temp); }
double entropy_row(const float* x, int n, double inv_temp) { return entropy_row_impl(x, n, inv_temp); }
double entropy_row(const double* x, int n, double inv_temp) { return entropy_row_impl(x, n, inv_temp); }

} // namespace mdlm::kern::scalar
