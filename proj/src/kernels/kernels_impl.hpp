#pragma once
// Internal backend entry points. gemm kernels take an output row range
// [r0, r1) so the dispatcher can partition rows across threads.
#include <cstddef>

namespace plugdef::kern::scalar {

template <typename T> void gemm_nn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void gemm_nt(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void gemm_tn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void add(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void sub(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void mul(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void scale(std::size_t n, T s, const T* x, T* out);
template <typename T> void axpy(std::size_t n, T s, const T* x, T* y);
template <typename T> void sign(std::size_t n, const T* x, T* out);
template <typename T> void clamp(std::size_t n, const T* x, T lo, T hi, T* out);
template <typename T> void clamp_box(std::size_t n, const T* x, const T* lo, const T* hi, T* out);
template <typename T> void relu(std::size_t n, const T* x, T* out);
template <typename T> T sum(std::size_t n, const T* x);
template <typename T> T dot(std::size_t n, const T* a, const T* b);
template <typename T> T sumsq(std::size_t n, const T* x);
template <typename T> T maxval(std::size_t n, const T* x);
template <typename T> T maxabs(std::size_t n, const T* x);

} // namespace plugdef::kern::scalar

#if defined(__x86_64__) || defined(__i386__)
#define PLUGDEF_HAVE_AVX2_TU 1
namespace plugdef::kern::avx2 {

template <typename T> void gemm_nn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void gemm_nt(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void gemm_tn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1);
template <typename T> void add(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void sub(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void mul(std::size_t n, const T* a, const T* b, T* out);
template <typename T> void scale(std::size_t n, T s, const T* x, T* out);
template <typename T> void axpy(std::size_t n, T s, const T* x, T* y);
template <typename T> void sign(std::size_t n, const T* x, T* out);
template <typename T> void clamp(std::size_t n, const T* x, T lo, T hi, T* out);
template <typename T> void clamp_box(std::size_t n, const T* x, const T* lo, const T* hi, T* out);
template <typename T> void relu(std::size_t n, const T* x, T* out);
template <typename T> T sum(std::size_t n, const T* x);
template <typename T> T dot(std::size_t n, const T* a, const T* b);
template <typename T> T sumsq(std::size_t n, const T* x);
template <typename T> T maxval(std::size_t n, const T* x);
template <typename T> T maxabs(std::size_t n, const T* x);

} // namespace plugdef::kern::avx2
#endif
