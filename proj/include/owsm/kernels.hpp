#pragma once

#include <cstddef>
#include <string>

namespace owsm::kernels {

// Compute backends. "auto" resolves to the widest instruction set the CPU
// supports at process start; tests pin a backend explicitly. The scalar and
// AVX2 variants of every kernel produce bit-identical results: both walk the
// same index order and accumulate in double, so selection never changes
// numbers, only speed.
enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);
void reset_backend(); // back to auto-detect (honors OWSM_KERNELS env var)
std::string backend_name(Backend b);

// c[m,n] = a[m,k] * b[k,n], all row-major. Accumulates in double.
template <class Real>
void mm(const Real* a, const Real* b, Real* c, int m, int k, int n);

template <class Real>
void transpose(const Real* a, Real* at, int rows, int cols);

template <class Real>
void add(const Real* a, const Real* b, Real* y, size_t n);

template <class Real>
void mul(const Real* a, const Real* b, Real* y, size_t n);

template <class Real>
void scale(const Real* x, Real alpha, Real* y, size_t n);

// y += alpha * x
template <class Real>
void axpy(Real alpha, const Real* x, Real* y, size_t n);

// Depthwise same-padded 1-D convolution over time.
// y[t,c] = sum_j x[t+j-K/2, c] * w[j, c], x zero-padded. K odd.
template <class Real>
void dwconv(const Real* x, const Real* w, Real* y, int T, int C, int K);

// Kernel gradient of dwconv: dw[j,c] = sum_t g[t,c] * x[t+j-K/2, c].
template <class Real>
void dwconv_grad_w(const Real* x, const Real* g, Real* dw, int T, int C, int K);

// float goes through the backend dispatch; double always runs the scalar
// reference (it is the verification path, not the hot path).
template <> void mm<float>(const float* a, const float* b, float* c, int m, int k, int n);
template <> void add<float>(const float* a, const float* b, float* y, size_t n);
template <> void mul<float>(const float* a, const float* b, float* y, size_t n);
template <> void scale<float>(const float* x, float alpha, float* y, size_t n);
template <> void axpy<float>(float alpha, const float* x, float* y, size_t n);
template <> void dwconv<float>(const float* x, const float* w, float* y, int T, int C, int K);

} // namespace owsm::kernels
