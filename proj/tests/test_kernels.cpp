#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mdlm/kernels.hpp"
#include "mdlm/mat.hpp"
#include "mdlm/rng.hpp"

using namespace mdlm;

namespace {

MatF random_matf(int rows, int cols, RngStream& rng, float scale = 1.0f) {
    MatF m(rows, cols);
    for (auto& v : m.data) {
        v = static_cast<float>(rng.gauss()) * scale;
    }
    return m;
}

MatD to_double(const MatF& m) { return m.cast<double>(); }

// double-precision reference for all three gemm forms
MatD ref_gemm(const MatD& a, const MatD& b, int m, int k, int n, char form) {
    MatD c(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int p = 0; p < k; ++p) {
                double av = 0.0;
                double bv = 0.0;
                if (form == 'n') { // A[M,K] * B[K,N]
                    av = a.at(i, p);
                    bv = b.at(p, j);
                } else if (form == 't') { // A[K,M]^T * B[K,N]
                    av = a.at(p, i);
                    bv = b.at(p, j);
                } else { // A[M,K] * B[N,K]^T
                    av = a.at(i, p);
                    bv = b.at(j, p);
                }
                sum += av * bv;
            }
            c.at(i, j) = sum;
        }
    }
    return c;
}

void check_close(const MatF& got, const MatD& want, double tol) {
    REQUIRE(got.rows == want.rows);
    REQUIRE(got.cols == want.cols);
    for (size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max(1.0, std::abs(want.data[i]));
        CHECK(std::abs(static_cast<double>(got.data[i]) - want.data[i]) <= tol * scale);
    }
}

struct LevelGuard {
    kern::Level saved;
    explicit LevelGuard(kern::Level level) : saved(kern::active_level()) {
        kern::force_level(level);
    }
    ~LevelGuard() { kern::force_level(saved); }
};

} // namespace

TEST_CASE("gemm variants match the double oracle at both kernel levels") {
    RngStream rng(42);
    const std::vector<std::array<int, 3>> shapes = {
        {1, 1, 1}, {3, 5, 7}, {4, 16, 16}, {8, 128, 48}, {13, 33, 17}, {80, 128, 384},
    };
    for (const auto& [m, k, n] : shapes) {
        for (const char form : {'n', 't', 'x'}) {
            const MatF a = form == 't' ? random_matf(k, m, rng) : random_matf(m, k, rng);
            const MatF b = form == 'x' ? random_matf(n, k, rng) : random_matf(k, n, rng);
            const MatD want = ref_gemm(to_double(a), to_double(b), m, k, n, form);
            for (const auto level : {kern::Level::scalar, kern::Level::avx2}) {
                if (level == kern::Level::avx2 && !kern::avx2_supported()) {
                    continue;
                }
                LevelGuard guard(level);
                MatF c(m, n);
                if (form == 'n') {
                    kern::gemm_nn(a.data.data(), b.data.data(), c.data.data(), m, k, n, false);
                } else if (form == 't') {
                    kern::gemm_tn(a.data.data(), b.data.data(), c.data.data(), m, k, n, false);
                } else {
                    kern::gemm_nt(a.data.data(), b.data.data(), c.data.data(), m, k, n, false);
                }
                check_close(c, want, 5e-4);
            }
        }
    }
}

TEST_CASE("gemm accumulate adds onto the destination") {
    RngStream rng(7);
    const int m = 9, k = 21, n = 30;
    const MatF a = random_matf(m, k, rng);
    const MatF b = random_matf(k, n, rng);
    MatF base = random_matf(m, n, rng);
    MatD want = ref_gemm(to_double(a), to_double(b), m, k, n, 'n');
    for (size_t i = 0; i < want.size(); ++i) {
        want.data[i] += static_cast<double>(base.data[i]);
    }
    for (const auto level : {kern::Level::scalar, kern::Level::avx2}) {
        if (level == kern::Level::avx2 && !kern::avx2_supported()) {
            continue;
        }
        LevelGuard guard(level);
        MatF c = base;
        kern::gemm_nn(a.data.data(), b.data.data(), c.data.data(), m, k, n, true);
        check_close(c, want, 5e-4);
    }
}

TEST_CASE("scalar and avx2 levels agree on elementwise kernels") {
    if (!kern::avx2_supported()) {
        return;
    }
    RngStream rng(3);
    const int n = 1003; // deliberately not a multiple of 8
    const MatF x = random_matf(1, n, rng);
    const MatF y = random_matf(1, n, rng);

    MatF a1 = x, a2 = x;
    {
        LevelGuard g(kern::Level::scalar);
        kern::add_inplace(a1.data.data(), y.data.data(), n);
        kern::axpy(a1.data.data(), y.data.data(), 0.37f, n);
    }
    {
        LevelGuard g(kern::Level::avx2);
        kern::add_inplace(a2.data.data(), y.data.data(), n);
        kern::axpy(a2.data.data(), y.data.data(), 0.37f, n);
    }
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(a1.data[i] - a2.data[i]) <= 1e-5f * std::max(1.0f, std::abs(a1.data[i])));
    }

    const double mx_scalar = [&] {
        LevelGuard g(kern::Level::scalar);
        return kern::row_max(x.data.data(), n);
    }();
    const double mx_avx2 = [&] {
        LevelGuard g(kern::Level::avx2);
        return kern::row_max(x.data.data(), n);
    }();
    CHECK(mx_scalar == mx_avx2); // max is order-independent, so exact
}

TEST_CASE("adam kernels match between levels") {
    RngStream rng(11);
    const int n = 517;
    const MatF p0 = random_matf(1, n, rng);
    const MatF g = random_matf(1, n, rng);

    auto run = [&](kern::Level level) {
        LevelGuard guard(level);
        MatF p = p0;
        MatF m(1, n), v(1, n);
        for (int step = 1; step <= 3; ++step) {
            kern::adam_update(p.data.data(), g.data.data(), m.data.data(), v.data.data(), n,
                              1e-3, 0.9, 0.999, 1e-8, step);
        }
        return p;
    };

    const MatF ps = run(kern::Level::scalar);
    if (kern::avx2_supported()) {
        const MatF pa = run(kern::Level::avx2);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(ps.data[i] - pa.data[i]) <=
                  1e-5f * std::max(1.0f, std::abs(ps.data[i])));
        }
    }
    // lr = 0 leaves parameters bitwise unchanged
    MatF p = p0;
    MatF m(1, n), v(1, n);
    kern::adam_update(p.data.data(), g.data.data(), m.data.data(), v.data.data(), n, 0.0, 0.9,
                      0.999, 1e-8, 1);
    CHECK(p.data == p0.data);
}

TEST_CASE("softmax row is a stable distribution") {
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_below(40));
        MatF x = random_matf(1, n, rng, 3.0f);
        x.data[0] += 500.0f; // large-logit stability
        std::vector<float> p(static_cast<size_t>(n));
        kern::softmax_row(x.data.data(), p.data(), n, 1.0);
        double sum = 0.0;
        for (float v : p) {
            CHECK(v >= 0.0f);
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("entropy row: uniform and concentrated limits") {
    const int n = 4;
    std::vector<float> uniform(n, 0.25f);
    CHECK(kern::entropy_row(uniform.data(), n, 1.0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    std::vector<float> peaked = {50.0f, 0.0f, 0.0f, 0.0f};
    CHECK(kern::entropy_row(peaked.data(), n, 1.0) <= 1e-6);

    // temperature scaling: dividing logits by T < 1 sharpens
    std::vector<float> logits = {2.0f, 0.0f, -1.0f, 0.5f};
    const double h_sharp = kern::entropy_row(logits.data(), n, 2.0); // T = 0.5
    const double h_base = kern::entropy_row(logits.data(), n, 1.0);
    CHECK(h_sharp < h_base);
}

TEST_CASE("log softmax row sums to one in probability space") {
    RngStream rng(9);
    const MatF x = random_matf(1, 11, rng, 2.0f);
    std::vector<double> ls(11);
    kern::log_softmax_row(x.data.data(), ls.data(), 11, 2.0);
    double sum = 0.0;
    for (double v : ls) {
        sum += std::exp(v);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("avx2 silu and softmax agree with the scalar reference") {
    if (!kern::avx2_supported()) {
        return;
    }
    RngStream rng(27);
    const int n = 517;
    MatF x = random_matf(1, n, rng, 4.0f);
    x.data[3] = -30.0f; // range edges
    x.data[7] = 30.0f;

    MatF y_s(1, n), y_a(1, n);
    MatF dy = random_matf(1, n, rng);
    MatF dx_s(1, n), dx_a(1, n);
    {
        LevelGuard g(kern::Level::scalar);
        kern::silu(x.data.data(), y_s.data.data(), n);
        kern::silu_backward(x.data.data(), dy.data.data(), dx_s.data.data(), n);
    }
    {
        LevelGuard g(kern::Level::avx2);
        kern::silu(x.data.data(), y_a.data.data(), n);
        kern::silu_backward(x.data.data(), dy.data.data(), dx_a.data.data(), n);
    }
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(y_s.data[i] - y_a.data[i]) <= 2e-6f * std::max(1.0f, std::abs(y_s.data[i])));
        CHECK(std::abs(dx_s.data[i] - dx_a.data[i]) <=
              5e-6f * std::max(1.0f, std::abs(dx_s.data[i])));
    }

    for (const double inv_temp : {1.0, 2.0, 0.5}) {
        std::vector<float> p_s(static_cast<size_t>(n)), p_a(static_cast<size_t>(n));
        {
            LevelGuard g(kern::Level::scalar);
            kern::softmax_row(x.data.data(), p_s.data(), n, inv_temp);
        }
        {
            LevelGuard g(kern::Level::avx2);
            kern::softmax_row(x.data.data(), p_a.data(), n, inv_temp);
        }
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(p_s[static_cast<size_t>(i)] - p_a[static_cast<size_t>(i)]) <= 2e-6f);
            sum += p_a[static_cast<size_t>(i)];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("silu backward matches finite differences") {
    RngStream rng(13);
    const int n = 64;
    const MatF x = random_matf(1, n, rng, 2.0f);
    MatF dy(1, n);
    for (auto& v : dy.data) {
        v = static_cast<float>(rng.gauss());
    }
    MatF dx(1, n);
    kern::silu_backward(x.data.data(), dy.data.data(), dx.data.data(), n);

    const double h = 1e-4;
    for (int i = 0; i < n; i += 7) {
        std::vector<double> xp(x.data.begin(), x.data.end());
        std::vector<double> xm = xp;
        xp[static_cast<size_t>(i)] += h;
        xm[static_cast<size_t>(i)] -= h;
        std::vector<double> yp(static_cast<size_t>(n)), ym(static_cast<size_t>(n));
        kern::silu(xp.data(), yp.data(), n);
        kern::silu(xm.data(), ym.data(), n);
        const double fd = (yp[static_cast<size_t>(i)] - ym[static_cast<size_t>(i)]) / (2 * h) *
                          static_cast<double>(dy.data[static_cast<size_t>(i)]);
        CHECK(std::abs(fd - static_cast<double>(dx.data[static_cast<size_t>(i)])) <=
              1e-3 * std::max(1.0, std::abs(fd)));
    }
}
