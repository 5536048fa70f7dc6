// AVX2 variants of the float kernels. Compiled with -mavx2; only reached
// through the dispatch in kernels.cpp after a cpuid check.
//
// Each kernel mirrors the scalar reference exactly: same index order, same
// double-precision accumulators, convert/multiply/add (no FMA). The two
// backends therefore agree bit for bit, which the equivalence tests assert.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <vector>

namespace owsm::kernels::avx2 {

void mm(const float* a, const float* b, float* c, int m, int k, int n) {
    thread_local std::vector<double> accbuf;
    accbuf.assign(static_cast<size_t>(n), 0.0);
    double* acc = accbuf.data();
    for (int i = 0; i < m; ++i) {
        std::fill(accbuf.begin(), accbuf.end(), 0.0);
        const float* arow = a + static_cast<size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const double av = static_cast<double>(arow[t]);
            const __m256d avv = _mm256_set1_pd(av);
            const float* brow = b + static_cast<size_t>(t) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d bd = _mm256_cvtps_pd(_mm_loadu_ps(brow + j));
                const __m256d accv = _mm256_loadu_pd(acc + j);
                _mm256_storeu_pd(acc + j, _mm256_add_pd(accv, _mm256_mul_pd(avv, bd)));
            }
            for (; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        float* crow = c + static_cast<size_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) _mm_storeu_ps(crow + j, _mm256_cvtpd_ps(_mm256_loadu_pd(acc + j)));
        for (; j < n; ++j) crow[j] = static_cast<float>(acc[j]);
    }
}

void add(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void scale(const float* x, float alpha, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] = alpha * x[i];
}

void axpy(float alpha, const float* x, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void dwconv(const float* x, const float* w, float* y, int T, int C, int K) {
    const int off = K / 2;
    for (int t = 0; t < T; ++t) {
        float* yrow = y + static_cast<size_t>(t) * C;
        int c = 0;
        for (; c + 4 <= C; c += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (int j = 0; j < K; ++j) {
                const int tt = t + j - off;
                if (tt < 0 || tt >= T) continue;
                const __m256d xv = _mm256_cvtps_pd(_mm_loadu_ps(x + static_cast<size_t>(tt) * C + c));
                const __m256d wv = _mm256_cvtps_pd(_mm_loadu_ps(w + static_cast<size_t>(j) * C + c));
                acc = _mm256_add_pd(acc, _mm256_mul_pd(xv, wv));
            }
            _mm_storeu_ps(yrow + c, _mm256_cvtpd_ps(acc));
        }
        for (; c < C; ++c) {
            double acc = 0.0;
            for (int j = 0; j < K; ++j) {
                const int tt = t + j - off;
                if (tt < 0 || tt >= T) continue;
                acc += static_cast<double>(x[static_cast<size_t>(tt) * C + c]) *
                       static_cast<double>(w[static_cast<size_t>(j) * C + c]);
            }
            yrow[c] = static_cast<float>(acc);
        }
    }
}

} // namespace owsm::kernels::avx2
