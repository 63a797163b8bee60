// AVX2+FMA float kernels. Compiled with -mavx2 -mfma (see CMakeLists); only
// reached after the runtime CPU check in kernels_dispatch.cpp.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace mdlm::kern::avx2 {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

inline float hmax8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_max_ps(lo, hi);
    lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// Vectorized expf, Cephes-style degree-5 polynomial with 2^n scaling.
// Relative error is a few ulps over the clamped range.
inline __m256 exp256(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 c1 = _mm256_set1_ps(0.693359375f);
    const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);

    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
    __m256 fx = _mm256_fmadd_ps(x, log2e, half);
    fx = _mm256_floor_ps(fx);
    // r = x - fx*ln2, split for precision
    __m256 r = _mm256_fnmadd_ps(fx, c1, x);
    r = _mm256_fnmadd_ps(fx, c2, r);

    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, r, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, r, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, r, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, r, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, r, _mm256_set1_ps(5.0000001201e-1f));
    y = _mm256_fmadd_ps(y, _mm256_mul_ps(r, r), _mm256_add_ps(r, one));

    const __m256i n = _mm256_cvtps_epi32(fx);
    const __m256i pow2n =
        _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(0x7f)), 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(pow2n));
}

inline __m256 sigmoid256(__m256 x) {
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), x));
    return _mm256_div_ps(one, _mm256_add_ps(one, e));
}

// c_row[0..n) += av * b_row[0..n)
inline void fma_row(float av, const float* brow, float* crow, int n) {
    const __m256 a = _mm256_set1_ps(av);
    int j = 0;
    for (; j + 16 <= n; j += 16) {
        __m256 c0 = _mm256_loadu_ps(crow + j);
        __m256 c1 = _mm256_loadu_ps(crow + j + 8);
        c0 = _mm256_fmadd_ps(a, _mm256_loadu_ps(brow + j), c0);
        c1 = _mm256_fmadd_ps(a, _mm256_loadu_ps(brow + j + 8), c1);
        _mm256_storeu_ps(crow + j, c0);
        _mm256_storeu_ps(crow + j + 8, c1);
    }
    for (; j + 8 <= n; j += 8) {
        __m256 c0 = _mm256_loadu_ps(crow + j);
        c0 = _mm256_fmadd_ps(a, _mm256_loadu_ps(brow + j), c0);
        _mm256_storeu_ps(crow + j, c0);
    }
    for (; j < n; ++j) {
        crow[j] += av * brow[j];
    }
}

} // namespace

void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    constexpr int MR = 4; // row block; 8 ymm accumulators + loads stay in registers
    int i = 0;
    for (; i + MR <= m; i += MR) {
        float* c0 = c + static_cast<size_t>(i) * n;
        float* c1 = c0 + n;
        float* c2 = c1 + n;
        float* c3 = c2 + n;
        if (!acc) {
            std::fill(c0, c0 + n, 0.0f);
            std::fill(c1, c1 + n, 0.0f);
            std::fill(c2, c2 + n, 0.0f);
            std::fill(c3, c3 + n, 0.0f);
        }
        const float* a0 = a + static_cast<size_t>(i) * k;
        const float* a1 = a0 + k;
        const float* a2 = a1 + k;
        const float* a3 = a2 + k;
        int j = 0;
        for (; j + 16 <= n; j += 16) {
            __m256 acc00 = _mm256_loadu_ps(c0 + j);
            __m256 acc01 = _mm256_loadu_ps(c0 + j + 8);
            __m256 acc10 = _mm256_loadu_ps(c1 + j);
            __m256 acc11 = _mm256_loadu_ps(c1 + j + 8);
            __m256 acc20 = _mm256_loadu_ps(c2 + j);
            __m256 acc21 = _mm256_loadu_ps(c2 + j + 8);
            __m256 acc30 = _mm256_loadu_ps(c3 + j);
            __m256 acc31 = _mm256_loadu_ps(c3 + j + 8);
            const float* brow = b + j;
            for (int p = 0; p < k; ++p, brow += n) {
                const __m256 b0 = _mm256_loadu_ps(brow);
                const __m256 b1 = _mm256_loadu_ps(brow + 8);
                __m256 av;
                av = _mm256_set1_ps(a0[p]);
                acc00 = _mm256_fmadd_ps(av, b0, acc00);
                acc01 = _mm256_fmadd_ps(av, b1, acc01);
                av = _mm256_set1_ps(a1[p]);
                acc10 = _mm256_fmadd_ps(av, b0, acc10);
                acc11 = _mm256_fmadd_ps(av, b1, acc11);
                av = _mm256_set1_ps(a2[p]);
                acc20 = _mm256_fmadd_ps(av, b0, acc20);
                acc21 = _mm256_fmadd_ps(av, b1, acc21);
                av = _mm256_set1_ps(a3[p]);
                acc30 = _mm256_fmadd_ps(av, b0, acc30);
                acc31 = _mm256_fmadd_ps(av, b1, acc31);
            }
            _mm256_storeu_ps(c0 + j, acc00);
            _mm256_storeu_ps(c0 + j + 8, acc01);
            _mm256_storeu_ps(c1 + j, acc10);
            _mm256_storeu_ps(c1 + j + 8, acc11);
            _mm256_storeu_ps(c2 + j, acc20);
            _mm256_storeu_ps(c2 + j + 8, acc21);
            _mm256_storeu_ps(c3 + j, acc30);
            _mm256_storeu_ps(c3 + j + 8, acc31);
        }
        // column tail, one row at a time
        if (j < n) {
            for (int r = 0; r < MR; ++r) {
                const float* arow = a + static_cast<size_t>(i + r) * k;
                float* crow = c + static_cast<size_t>(i + r) * n;
                for (int jj = j; jj < n; ++jj) {
                    float sum = crow[jj];
                    for (int p = 0; p < k; ++p) {
                        sum += arow[p] * b[static_cast<size_t>(p) * n + jj];
                    }
                    crow[jj] = sum;
                }
            }
        }
    }
    // row tail
    for (; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!acc) {
            std::fill(crow, crow + n, 0.0f);
        }
        const float* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            fma_row(arow[p], b + static_cast<size_t>(p) * n, crow, n);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    // four output columns per sweep, each with its own accumulator chain
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + static_cast<size_t>(j) * k;
            const float* b1 = b0 + k;
            const float* b2 = b1 + k;
            const float* b3 = b2 + k;
            __m256 s0 = _mm256_setzero_ps();
            __m256 s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps();
            __m256 s3 = _mm256_setzero_ps();
            int p = 0;
            for (; p + 8 <= k; p += 8) {
                const __m256 av = _mm256_loadu_ps(arow + p);
                s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
                s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
                s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), s2);
                s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), s3);
            }
            float r0 = hsum8(s0);
            float r1 = hsum8(s1);
            float r2 = hsum8(s2);
            float r3 = hsum8(s3);
            for (; p < k; ++p) {
                const float av = arow[p];
                r0 += av * b0[p];
                r1 += av * b1[p];
                r2 += av * b2[p];
                r3 += av * b3[p];
            }
            if (acc) {
                crow[j] += r0;
                crow[j + 1] += r1;
                crow[j + 2] += r2;
                crow[j + 3] += r3;
            } else {
                crow[j] = r0;
                crow[j + 1] = r1;
                crow[j + 2] = r2;
                crow[j + 3] = r3;
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            __m256 v0 = _mm256_setzero_ps();
            __m256 v1 = _mm256_setzero_ps();
            int p = 0;
            for (; p + 16 <= k; p += 16) {
                v0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), v0);
                v1 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p + 8),
                                     _mm256_loadu_ps(brow + p + 8), v1);
            }
            for (; p + 8 <= k; p += 8) {
                v0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), v0);
            }
            float sum = hsum8(_mm256_add_ps(v0, v1));
            for (; p < k; ++p) {
                sum += arow[p] * brow[p];
            }
            crow[j] = acc ? crow[j] + sum : sum;
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool acc) {
    // Streaming k over the whole of C thrashes the cache for large k, so
    // transpose A once into scratch and take the register-blocked nn path.
    thread_local std::vector<float> scratch;
    scratch.resize(static_cast<size_t>(m) * k);
    float* at = scratch.data();
    constexpr int T = 16;
    for (int p0 = 0; p0 < k; p0 += T) {
        const int p1 = std::min(p0 + T, k);
        for (int i0 = 0; i0 < m; i0 += T) {
            const int i1 = std::min(i0 + T, m);
            for (int p = p0; p < p1; ++p) {
                const float* arow = a + static_cast<size_t>(p) * m;
                for (int i = i0; i < i1; ++i) {
                    at[static_cast<size_t>(i) * k + p] = arow[i];
                }
            }
        }
    }
    gemm_nn(at, b, c, m, k, n, acc);
}

void add_inplace(float* dst, const float* src, int n) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_loadu_ps(dst + i), _mm256_loadu_ps(src + i)));
    }
    for (; i < n; ++i) {
        dst[i] += src[i];
    }
}

void axpy(float* dst, const float* src, float alpha, int n) {
    const __m256 a = _mm256_set1_ps(alpha);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(dst + i, _mm256_fmadd_ps(a, _mm256_loadu_ps(src + i), _mm256_loadu_ps(dst + i)));
    }
    for (; i < n; ++i) {
        dst[i] += alpha * src[i];
    }
}

void adam_update(float* p, const float* g, float* m, float* v, int n,
                 double lr, double beta1, double beta2, double eps, int64_t step) {
    const float bc1 = static_cast<float>(1.0 - std::pow(beta1, static_cast<double>(step)));
    const float bc2 = static_cast<float>(1.0 - std::pow(beta2, static_cast<double>(step)));
    const __m256 vb1 = _mm256_set1_ps(static_cast<float>(beta1));
    const __m256 vb2 = _mm256_set1_ps(static_cast<float>(beta2));
    const __m256 vib1 = _mm256_set1_ps(1.0f - static_cast<float>(beta1));
    const __m256 vib2 = _mm256_set1_ps(1.0f - static_cast<float>(beta2));
    const __m256 vlr = _mm256_set1_ps(static_cast<float>(lr));
    const __m256 veps = _mm256_set1_ps(static_cast<float>(eps));
    const __m256 vibc1 = _mm256_set1_ps(1.0f / bc1);
    const __m256 vibc2 = _mm256_set1_ps(1.0f / bc2);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        __m256 mi = _mm256_loadu_ps(m + i);
        __m256 vi = _mm256_loadu_ps(v + i);
        mi = _mm256_add_ps(_mm256_mul_ps(vb1, mi), _mm256_mul_ps(vib1, gi));
        vi = _mm256_add_ps(_mm256_mul_ps(vb2, vi), _mm256_mul_ps(vib2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_mul_ps(mi, vibc1);
        const __m256 vhat = _mm256_mul_ps(vi, vibc2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
    }
    for (; i < n; ++i) {
        const float gi = g[i];
        const float mi = static_cast<float>(beta1) * m[i] + (1.0f - static_cast<float>(beta1)) * gi;
        const float vi = static_cast<float>(beta2) * v[i] + (1.0f - static_cast<float>(beta2)) * gi * gi;
        m[i] = mi;
        v[i] = vi;
        p[i] -= static_cast<float>(lr) * (mi / bc1) / (std::sqrt(vi / bc2) + static_cast<float>(eps));
    }
}

double row_max(const float* x, int n) {
    if (n < 8) {
        float mx = x[0];
        for (int i = 1; i < n; ++i) {
            mx = std::max(mx, x[i]);
        }
        return static_cast<double>(mx);
    }
    __m256 vmx = _mm256_loadu_ps(x);
    int i = 8;
    for (; i + 8 <= n; i += 8) {
        vmx = _mm256_max_ps(vmx, _mm256_loadu_ps(x + i));
    }
    float mx = hmax8(vmx);
    for (; i < n; ++i) {
        mx = std::max(mx, x[i]);
    }
    return static_cast<double>(mx);
}

void silu(const float* x, float* y, int n) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(xv, sigmoid256(xv)));
    }
    for (; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

void silu_backward(const float* x, const float* dy, float* dx, int n) {
    const __m256 one = _mm256_set1_ps(1.0f);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 s = sigmoid256(xv);
        // d silu = s * (1 + x * (1 - s))
        const __m256 d = _mm256_mul_ps(s, _mm256_fmadd_ps(xv, _mm256_sub_ps(one, s), one));
        _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), d,
                                                 _mm256_loadu_ps(dx + i)));
    }
    for (; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-x[i]));
        dx[i] += dy[i] * s * (1.0f + x[i] * (1.0f - s));
    }
}

void softmax_row(const float* x, float* p, int n, double inv_temp) {
    const float mx = static_cast<float>(row_max(x, n));
    const __m256 vit = _mm256_set1_ps(static_cast<float>(inv_temp));
    const __m256 vmx = _mm256_set1_ps(mx);
    __m256 vsum = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 e = exp256(_mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), vmx), vit));
        _mm256_storeu_ps(p + i, e);
        vsum = _mm256_add_ps(vsum, e);
    }
    float sum = hsum8(vsum);
    for (; i < n; ++i) {
        const float e = std::exp((x[i] - mx) * static_cast<float>(inv_temp));
        p[i] = e;
        sum += e;
    }
    const __m256 vinv = _mm256_set1_ps(1.0f / sum);
    i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(p + i, _mm256_mul_ps(_mm256_loadu_ps(p + i), vinv));
    }
    for (; i < n; ++i) {
        p[i] /= sum;
    }
}

} // namespace mdlm::kern::avx2

#endif // x86_64
