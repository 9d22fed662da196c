// AVX2 + FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; it must never be entered unless the dispatcher verified CPU
// support. The vec<T> wrapper maps one algorithm onto 8-lane float and
// 4-lane double registers.
#include "kernels_impl.hpp"

#ifdef PLUGDEF_HAVE_AVX2_TU

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace plugdef::kern::avx2 {

namespace {

template <typename T>
struct vec;

template <>
struct vec<float> {
  using reg = __m256;
  static constexpr int lanes = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg min(reg a, reg b) { return _mm256_min_ps(a, b); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg gt(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg lt(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_LT_OQ); }
  static reg band(reg a, reg b) { return _mm256_and_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(s);
    s = _mm_add_ps(s, shuf);
    return _mm_cvtss_f32(_mm_add_ss(s, _mm_movehl_ps(shuf, s)));
  }
  static float hmax(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_max_ps(lo, hi);
    s = _mm_max_ps(s, _mm_movehl_ps(s, s));
    s = _mm_max_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
};

template <>
struct vec<double> {
  using reg = __m256d;
  static constexpr int lanes = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg min(reg a, reg b) { return _mm256_min_pd(a, b); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg gt(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg lt(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_LT_OQ); }
  static reg band(reg a, reg b) { return _mm256_and_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  }
  static double hmax(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
  }
};

// fused row update: crow[j] += av * brow[j]
template <typename T>
inline void row_fma(int n, T av, const T* brow, T* crow) {
  using V = vec<T>;
  const auto avv = V::set1(av);
  int j = 0;
  for (; j + V::lanes <= n; j += V::lanes)
    V::store(crow + j, V::fmadd(avv, V::load(brow + j), V::load(crow + j)));
  for (; j < n; ++j) crow[j] += av * brow[j];
}

template <typename T>
inline T dot_1d(int n, const T* a, const T* b) {
  using V = vec<T>;
  auto s0 = V::zero();
  auto s1 = V::zero();
  int i = 0;
  for (; i + 2 * V::lanes <= n; i += 2 * V::lanes) {
    s0 = V::fmadd(V::load(a + i), V::load(b + i), s0);
    s1 = V::fmadd(V::load(a + i + V::lanes), V::load(b + i + V::lanes), s1);
  }
  for (; i + V::lanes <= n; i += V::lanes) s0 = V::fmadd(V::load(a + i), V::load(b + i), s0);
  T s = V::hsum(V::add(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

} // namespace

template <typename T>
void gemm_nn(int m, int n, int k, T alpha, const T* a, const T* b, T* c, bool acc, int r0, int r1) {
  (void)m;
  for (int i = r0; i < r1; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!acc) std::fill(crow, crow + n, T(0));
    const T* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      row_fma(n, alpha * arow[l], b + static_cast<std::size_t>(l) * n, crow);
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
      const T s = alpha * dot_1d(k, arow, b + static_cast<std::size_t>(j) * k);
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
      row_fma(n, alpha * a[static_cast<std::size_t>(l) * m + i], b + static_cast<std::size_t>(l) * n, crow);
    }
  }
}

template <typename T>
void add(std::size_t n, const T* a, const T* b, T* out) {
  using V = vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(std::size_t n, const T* a, const T* b, T* out) {
  using V = vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::sub(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
  using V = vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale(std::size_t n, T s, const T* x, T* out) {
  using V = vec<T>;
  const auto sv = V::set1(s);
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::mul(sv, V::load(x + i)));
  for (; i < n; ++i) out[i] = s * x[i];
}

template <typename T>
void axpy(std::size_t n, T s, const T* x, T* y) {
  using V = vec<T>;
  const auto sv = V::set1(s);
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(y + i, V::fmadd(sv, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += s * x[i];
}

template <typename T>
void sign(std::size_t n, const T* x, T* out) {
  using V = vec<T>;
  const auto one = V::set1(T(1));
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) {
    const auto v = V::load(x + i);
    const auto pos = V::band(V::gt(v, z), one);
    const auto neg = V::band(V::lt(v, z), one);
    V::store(out + i, V::sub(pos, neg));
  }
  for (; i < n; ++i) out[i] = T((x[i] > T(0)) - (x[i] < T(0)));
}

template <typename T>
void clamp(std::size_t n, const T* x, T lo, T hi, T* out) {
  using V = vec<T>;
  const auto lov = V::set1(lo);
  const auto hiv = V::set1(hi);
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes)
    V::store(out + i, V::min(V::max(V::load(x + i), lov), hiv));
  for (; i < n; ++i) out[i] = std::min(std::max(x[i], lo), hi);
}

template <typename T>
void clamp_box(std::size_t n, const T* x, const T* lo, const T* hi, T* out) {
  using V = vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes)
    V::store(out + i, V::min(V::max(V::load(x + i), V::load(lo + i)), V::load(hi + i)));
  for (; i < n; ++i) out[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

template <typename T>
void relu(std::size_t n, const T* x, T* out) {
  using V = vec<T>;
  const auto z = V::zero();
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(out + i, V::max(V::load(x + i), z));
  for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
T sum(std::size_t n, const T* x) {
  using V = vec<T>;
  auto s0 = V::zero();
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) s0 = V::add(s0, V::load(x + i));
  T s = V::hsum(s0);
  for (; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T dot(std::size_t n, const T* a, const T* b) {
  return dot_1d(static_cast<int>(n), a, b);
}

template <typename T>
T sumsq(std::size_t n, const T* x) {
  using V = vec<T>;
  auto s0 = V::zero();
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) {
    const auto v = V::load(x + i);
    s0 = V::fmadd(v, v, s0);
  }
  T s = V::hsum(s0);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

template <typename T>
T maxval(std::size_t n, const T* x) {
  using V = vec<T>;
  std::size_t i = 0;
  T m;
  if (n >= static_cast<std::size_t>(V::lanes)) {
    auto mv = V::load(x);
    for (i = V::lanes; i + V::lanes <= n; i += V::lanes) mv = V::max(mv, V::load(x + i));
    m = V::hmax(mv);
  } else {
    m = x[0];
    i = 1;
  }
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

template <typename T>
T maxabs(std::size_t n, const T* x) {
  T m = 0;
  std::size_t i = 0;
  using V = vec<T>;
  if (n >= static_cast<std::size_t>(V::lanes)) {
    auto mv = V::zero();
    for (; i + V::lanes <= n; i += V::lanes) {
      const auto v = V::load(x + i);
      mv = V::max(mv, V::max(v, V::sub(V::zero(), v)));
    }
    m = V::hmax(mv);
  }
  for (; i < n; ++i) m = std::max(m, std::abs(x[i]));
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

} // namespace plugdef::kern::avx2

#endif // PLUGDEF_HAVE_AVX2_TU
