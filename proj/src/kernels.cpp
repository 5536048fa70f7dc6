#include "owsm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <vector>

namespace owsm::kernels {

#if defined(__x86_64__) || defined(__i386__)
bool avx2_supported() {
    return __builtin_cpu_supports("avx2") != 0;
}
#else
bool avx2_supported() {
    return false;
}
#endif

namespace {

Backend detect() {
    if (const char* env = std::getenv("OWSM_KERNELS")) {
        std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2" && avx2_supported()) return Backend::avx2;
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<int> g_override{-1};

} // namespace

Backend active_backend() {
    int o = g_override.load(std::memory_order_relaxed);
    if (o >= 0) return static_cast<Backend>(o);
    static const Backend detected = detect();
    return detected;
}

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported()) b = Backend::scalar;
    g_override.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() {
    g_override.store(-1, std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

// AVX2 float variants live in kernels_avx2.cpp (compiled with -mavx2 and
// only ever called after a cpuid check).
#ifdef OWSM_WITH_AVX2
namespace avx2 {
void mm(const float* a, const float* b, float* c, int m, int k, int n);
void add(const float* a, const float* b, float* y, size_t n);
void mul(const float* a, const float* b, float* y, size_t n);
void scale(const float* x, float alpha, float* y, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);
void dwconv(const float* x, const float* w, float* y, int T, int C, int K);
} // namespace avx2
#endif

namespace scalar {

template <class Real>
void mm(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    thread_local std::vector<double> acc;
    acc.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const Real* arow = a + static_cast<size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const double av = static_cast<double>(arow[t]);
            const Real* brow = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * static_cast<double>(brow[j]);
        }
        Real* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = static_cast<Real>(acc[static_cast<size_t>(j)]);
    }
}

template <class Real>
void add(const Real* a, const Real* b, Real* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <class Real>
void mul(const Real* a, const Real* b, Real* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <class Real>
void scale(const Real* x, Real alpha, Real* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <class Real>
void axpy(Real alpha, const Real* x, Real* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

template <class Real>
void dwconv(const Real* x, const Real* w, Real* y, int T, int C, int K) {
    const int off = K / 2;
    for (int t = 0; t < T; ++t) {
        Real* yrow = y + static_cast<size_t>(t) * C;
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int j = 0; j < K; ++j) {
                const int tt = t + j - off;
                if (tt < 0 || tt >= T) continue;
                acc += static_cast<double>(x[static_cast<size_t>(tt) * C + c]) *
                       static_cast<double>(w[static_cast<size_t>(j) * C + c]);
            }
            yrow[c] = static_cast<Real>(acc);
        }
    }
}

template <class Real>
void dwconv_grad_w(const Real* x, const Real* g, Real* dw, int T, int C, int K) {
    const int off = K / 2;
    for (int j = 0; j < K; ++j) {
        Real* dwrow = dw + static_cast<size_t>(j) * C;
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t) {
                const int tt = t + j - off;
                if (tt < 0 || tt >= T) continue;
                acc += static_cast<double>(g[static_cast<size_t>(t) * C + c]) *
                       static_cast<double>(x[static_cast<size_t>(tt) * C + c]);
            }
            dwrow[c] = static_cast<Real>(acc);
        }
    }
}

} // namespace scalar

namespace {
inline bool use_avx2() {
#ifdef OWSM_WITH_AVX2
    return active_backend() == Backend::avx2;
#else
    return false;
#endif
}
} // namespace

template <class Real>
void mm(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    scalar::mm(a, b, c, m, k, n);
}

template <>
void mm<float>(const float* a, const float* b, float* c, int m, int k, int n) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::mm(a, b, c, m, k, n);
        return;
    }
#endif
    scalar::mm(a, b, c, m, k, n);
}

template <class Real>
void transpose(const Real* a, Real* at, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            at[static_cast<size_t>(j) * rows + i] = a[static_cast<size_t>(i) * cols + j];
}

template <class Real>
void add(const Real* a, const Real* b, Real* y, size_t n) {
    scalar::add(a, b, y, n);
}

template <>
void add<float>(const float* a, const float* b, float* y, size_t n) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::add(a, b, y, n);
        return;
    }
#endif
    scalar::add(a, b, y, n);
}

template <class Real>
void mul(const Real* a, const Real* b, Real* y, size_t n) {
    scalar::mul(a, b, y, n);
}

template <>
void mul<float>(const float* a, const float* b, float* y, size_t n) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::mul(a, b, y, n);
        return;
    }
#endif
    scalar::mul(a, b, y, n);
}

template <class Real>
void scale(const Real* x, Real alpha, Real* y, size_t n) {
    scalar::scale(x, alpha, y, n);
}

template <>
void scale<float>(const float* x, float alpha, float* y, size_t n) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::scale(x, alpha, y, n);
        return;
    }
#endif
    scalar::scale(x, alpha, y, n);
}

template <class Real>
void axpy(Real alpha, const Real* x, Real* y, size_t n) {
    scalar::axpy(alpha, x, y, n);
}

template <>
void axpy<float>(float alpha, const float* x, float* y, size_t n) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::axpy(alpha, x, y, n);
        return;
    }
#endif
    scalar::axpy(alpha, x, y, n);
}

template <class Real>
void dwconv(const Real* x, const Real* w, Real* y, int T, int C, int K) {
    scalar::dwconv(x, w, y, T, C, K);
}

template <>
void dwconv<float>(const float* x, const float* w, float* y, int T, int C, int K) {
#ifdef OWSM_WITH_AVX2
    if (use_avx2()) {
        avx2::dwconv(x, w, y, T, C, K);
        return;
    }
#endif
    scalar::dwconv(x, w, y, T, C, K);
}

template <class Real>
void dwconv_grad_w(const Real* x, const Real* g, Real* dw, int T, int C, int K) {
    scalar::dwconv_grad_w(x, g, dw, T, C, K);
}

template void mm<double>(const double*, const double*, double*, int, int, int);
template void transpose<float>(const float*, float*, int, int);
template void transpose<double>(const double*, double*, int, int);
template void add<double>(const double*, const double*, double*, size_t);
template void mul<double>(const double*, const double*, double*, size_t);
template void scale<double>(const double*, double, double*, size_t);
template void axpy<double>(double, const double*, double*, size_t);
template void dwconv<double>(const double*, const double*, double*, int, int, int);
template void dwconv_grad_w<float>(const float*, const float*, float*, int, int, int);
template void dwconv_grad_w<double>(const double*, const double*, double*, int, int, int);

} // namespace owsm::kernels
