#include "plugdef/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <thread>
#include <vector>

#include "kernels_impl.hpp"

namespace plugdef::kern {

namespace {

bool detect_avx2() {
#ifdef PLUGDEF_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend startup_backend() {
  const bool have = detect_avx2();
  if (const char* env = std::getenv("PLUGDEF_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!have) throw std::runtime_error("PLUGDEF_KERNELS=avx2 but CPU lacks AVX2/FMA");
      return Backend::Avx2;
    }
  }
  return have ? Backend::Avx2 : Backend::Scalar;
}

Backend& backend_ref() {
  static Backend b = startup_backend();
  return b;
}

int g_threads = 1;

// Partitions gemm output rows over worker threads. Each output row is
// produced by exactly one thread with a fixed accumulation order, so the
// result is bitwise identical for every thread count.
template <typename Fn>
void parallel_rows(int m, double flops, Fn&& fn) {
  const int t = g_threads;
  if (t <= 1 || m < 2 * t || flops < (1 << 16)) {
    fn(0, m);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(t);
  const int chunk = (m + t - 1) / t;
  for (int w = 0; w < t; ++w) {
    const int r0 = w * chunk;
    const int r1 = std::min(m, r0 + chunk);
    if (r0 >= r1) break;
    workers.emplace_back([&fn, r0, r1] { fn(r0, r1); });
  }
  for (auto& w : workers) w.join();
}

} // namespace

bool avx2_supported() { return detect_avx2(); }

Backend active_backend() { return backend_ref(); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !detect_avx2()) throw std::runtime_error("AVX2/FMA not supported on this CPU");
  backend_ref() = b;
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

int threads() { return g_threads; }

void set_threads(int n) {
  if (n < 1) throw std::invalid_argument("threads must be >= 1");
  g_threads = n;
}

#ifdef PLUGDEF_HAVE_AVX2_TU
#define PD_PICK(call) (backend_ref() == Backend::Avx2 ? avx2::call : scalar::call)
#else
#define PD_PICK(call) (scalar::call)
#endif

#define PD_GEMM(name)                                                                              \
  void name(int m, int n, int k, float alpha, const float* a, const float* b, float* c, bool acc) {  \
    parallel_rows(m, double(m) * n * k, [&](int r0, int r1) { PD_PICK(name(m, n, k, alpha, a, b, c, acc, r0, r1)); }); \
  }                                                                                                \
  void name(int m, int n, int k, double alpha, const double* a, const double* b, double* c, bool acc) { \
    parallel_rows(m, double(m) * n * k, [&](int r0, int r1) { PD_PICK(name(m, n, k, alpha, a, b, c, acc, r0, r1)); }); \
  }

PD_GEMM(gemm_nn)
PD_GEMM(gemm_nt)
PD_GEMM(gemm_tn)
#undef PD_GEMM

#define PD_EW2(name)                                                                     \
  void name(std::size_t n, const float* a, const float* b, float* out) { PD_PICK(name(n, a, b, out)); } \
  void name(std::size_t n, const double* a, const double* b, double* out) { PD_PICK(name(n, a, b, out)); }

PD_EW2(add)
PD_EW2(sub)
PD_EW2(mul)
#undef PD_EW2

void scale(std::size_t n, float s, const float* x, float* out) { PD_PICK(scale(n, s, x, out)); }
void scale(std::size_t n, double s, const double* x, double* out) { PD_PICK(scale(n, s, x, out)); }
void axpy(std::size_t n, float s, const float* x, float* y) { PD_PICK(axpy(n, s, x, y)); }
void axpy(std::size_t n, double s, const double* x, double* y) { PD_PICK(axpy(n, s, x, y)); }
void sign(std::size_t n, const float* x, float* out) { PD_PICK(sign(n, x, out)); }
void sign(std::size_t n, const double* x, double* out) { PD_PICK(sign(n, x, out)); }
void clamp(std::size_t n, const float* x, float lo, float hi, float* out) { PD_PICK(clamp(n, x, lo, hi, out)); }
void clamp(std::size_t n, const double* x, double lo, double hi, double* out) { PD_PICK(clamp(n, x, lo, hi, out)); }
void clamp_box(std::size_t n, const float* x, const float* lo, const float* hi, float* out) { PD_PICK(clamp_box(n, x, lo, hi, out)); }
void clamp_box(std::size_t n, const double* x, const double* lo, const double* hi, double* out) { PD_PICK(clamp_box(n, x, lo, hi, out)); }
void relu(std::size_t n, const float* x, float* out) { PD_PICK(relu(n, x, out)); }
void relu(std::size_t n, const double* x, double* out) { PD_PICK(relu(n, x, out)); }

float sum(std::size_t n, const float* x) { return PD_PICK(sum(n, x)); }
double sum(std::size_t n, const double* x) { return PD_PICK(sum(n, x)); }
float dot(std::size_t n, const float* a, const float* b) { return PD_PICK(dot(n, a, b)); }
double dot(std::size_t n, const double* a, const double* b) { return PD_PICK(dot(n, a, b)); }
float sumsq(std::size_t n, const float* x) { return PD_PICK(sumsq(n, x)); }
double sumsq(std::size_t n, const double* x) { return PD_PICK(sumsq(n, x)); }
float maxval(std::size_t n, const float* x) { return PD_PICK(maxval(n, x)); }
double maxval(std::size_t n, const double* x) { return PD_PICK(maxval(n, x)); }
float maxabs(std::size_t n, const float* x) { return PD_PICK(maxabs(n, x)); }
double maxabs(std::size_t n, const double* x) { return PD_PICK(maxabs(n, x)); }

#undef PD_PICK

} // namespace plugdef::kern
