// Reference kernels. Plain loops, no FMA contraction, so the AVX2 variants
// are checked against these within a small tolerance where accumulation
// order differs and bitwise where it does not.
#include "kernels_impl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace plugdef::kern::scalar {

template <typename T>
void gemm_nn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1) {
  (void)m;
  for (int i = r0; i < r1; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!acc) std::fill(crow, crow + n, T(0));
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const T av = alpha * arow[l];
      const T* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1) {
  (void)m;
  for (int i = r0; i < r1; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * k;
      T s = 0;
      for (int l = 0; l < k; ++l) s += arow[l] * brow[l];
      s *= alpha;
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1) {
  for (int i = r0; i < r1; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!acc) std::fill(crow, crow + n, T(0));
    for (int l = 0; l < k; ++l) {
      const T av = alpha * a[static_cast<std::size_t>(l) * m + i];
      const T* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void add(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale(std::size_t n, T s, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * x[i];
}

template <typename T>
void axpy(std::size_t n, T s, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

template <typename T>
void sign(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = T((x[i] > T(0)) - (x[i] < T(0)));
}

template <typename T>
void clamp(std::size_t n, const T* x, T lo, T hi, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

template <typename T>
void clamp_box(std::size_t n, const T* x, const T* lo, const T* hi, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

template <typename T>
void relu(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
T sum(std::size_t n, const T* x) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T dot(std::size_t n, const T* a, const T* b) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T sumsq(std::size_t n, const T* x) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
T maxval(std::size_t n, const T* x) {
  T m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

template <typename T>
T maxabs(std::size_t n, const T* x) {
  T m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

#define PLUGDEF_INST(T)                                                                        \
  template void gemm_nn<T>(int, int, int, T, const T*, const T*, T*, bool, int, int);          \
  template void gemm_nt<T>(int, int, int, T, const T*, const T*, T*, bool, int, int);          \
  template void gemm_tn<T>(int, int, int, T, const T*, const T*, T*, bool, int, int);          \
  template void add<T>(std::size_t, const T*, const T*, T*);                                   \
  template void sub<T>(std::size_t, const T*, const T*, T*);                                   \
  template void mul<T>(std::size_t, const T*, const T*, T*);                                   \
  template void scale<T>(std::size_t, T, const T*, T*);                                        \
  template void axpy<T>(std::size_t, T, const T*, T*);                                         \
  template void sign<T>(std::size_t, const T*, T*);                                            \
  template void clamp<T>(std::size_t, const T*, T, T, T*);                                     \
  template void clamp_box<T>(std::size_t, const T*, const T*, const T*, T*);                   \
  template void relu<T>(std::size_t, const T*, T*);                                            \
  template T sum<T>(std::size_t, const T*);                                                    \
  template T dot<T>(std::size_t, const T*, const T*);                                          \
  template T sumsq<T>(std::size_t, const T*);                                                  \
  template T maxval<T>(std::size_t, const T*);                                                 \
  template T maxabs<T>(std::size_t, const T*);

PLUGDEF_INST(float)
PLUGDEF_INST(double)
#undef PLUGDEF_INST

} // namespace plugdef::kern::scalar
