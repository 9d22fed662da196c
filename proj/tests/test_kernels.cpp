#include <doctest.h>

#include <cmath>
#include <vector>

#include "plugdef/kernels.hpp"
#include "plugdef/rng.hpp"

using namespace plugdef;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, float lo = -1.f, float hi = 1.f) {
  std::vector<float> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniformf();
  return v;
}

std::vector<double> random_vecd(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// independent triple-loop oracle, untouched by backend or loop-order choices
template <typename T>
std::vector<T> naive_gemm(char mode, int m, int n, int k, T alpha, const std::vector<T>& a,
                          const std::vector<T>& b) {
  std::vector<T> c(std::size_t(m) * n, T(0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int l = 0; l < k; ++l) {
        T av = mode == 't' ? a[std::size_t(l) * m + i] : a[std::size_t(i) * k + l];
        T bv = mode == 'n' ? b[std::size_t(l) * n + j]
                           : (mode == 'x' ? b[std::size_t(j) * k + l] : b[std::size_t(l) * n + j]);
        s += double(av) * double(bv);
      }
      c[std::size_t(i) * n + j] = T(double(alpha) * s);
    }
  return c;
}

template <typename T>
double max_rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(double(a[i])), std::abs(double(b[i])), 1.0});
    m = std::max(m, std::abs(double(a[i]) - double(b[i])) / denom);
  }
  return m;
}

struct BackendGuard {
  kern::Backend saved;
  BackendGuard() : saved(kern::active_backend()) {}
  ~BackendGuard() { kern::set_backend(saved); }
};

} // namespace

TEST_CASE("gemm variants match the naive oracle") {
  Rng rng(123);
  const int sizes[4][3] = {{3, 5, 7}, {16, 16, 16}, {1, 9, 4}, {33, 17, 65}};
  for (const auto& mnk : sizes) {
    const int m = mnk[0], n = mnk[1], k = mnk[2];
    auto a = random_vec(std::size_t(std::max(m, k)) * std::max(m, k) + std::size_t(m) * k, rng);
    auto b = random_vec(std::size_t(std::max(n, k)) * std::max(n, k) + std::size_t(n) * k, rng);
    std::vector<float> c(std::size_t(m) * n);

    kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), c.data(), false);
    CHECK(max_rel_diff(c, naive_gemm('n', m, n, k, 1.f, a, b)) < 2e-6);

    kern::gemm_nt(m, n, k, 0.5f, a.data(), b.data(), c.data(), false);
    CHECK(max_rel_diff(c, naive_gemm('x', m, n, k, 0.5f, a, b)) < 2e-6);

    kern::gemm_tn(m, n, k, 1.f, a.data(), b.data(), c.data(), false);
    CHECK(max_rel_diff(c, naive_gemm('t', m, n, k, 1.f, a, b)) < 2e-6);
  }
}

TEST_CASE("gemm accumulate mode adds onto C") {
  Rng rng(7);
  const int m = 4, n = 6, k = 5;
  auto a = random_vec(std::size_t(m) * k, rng);
  auto b = random_vec(std::size_t(k) * n, rng);
  auto base = random_vec(std::size_t(m) * n, rng);
  auto c = base;
  kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), c.data(), true);
  auto prod = naive_gemm('n', m, n, k, 1.f, a, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(base[i] + prod[i]).epsilon(1e-5));
}

TEST_CASE("avx2 and scalar backends agree" * doctest::skip(!kern::avx2_supported())) {
  BackendGuard guard;
  Rng rng(99);
  const std::size_t n = 1003; // odd length exercises the tails
  auto x = random_vec(n, rng), y = random_vec(n, rng);
  x[17] = 0.f; // sign(0) lane

  auto run_all = [&](kern::Backend b) {
    kern::set_backend(b);
    struct Out {
      std::vector<float> add, sub, mul, scale, sign, clamp, relu, axpy;
      float sum, dot, sumsq, maxv, maxa;
    } o;
    o.add.resize(n); o.sub.resize(n); o.mul.resize(n); o.scale.resize(n);
    o.sign.resize(n); o.clamp.resize(n); o.relu.resize(n);
    o.axpy = y;
    kern::add(n, x.data(), y.data(), o.add.data());
    kern::sub(n, x.data(), y.data(), o.sub.data());
    kern::mul(n, x.data(), y.data(), o.mul.data());
    kern::scale(n, 1.5f, x.data(), o.scale.data());
    kern::sign(n, x.data(), o.sign.data());
    kern::clamp(n, x.data(), -0.25f, 0.25f, o.clamp.data());
    kern::relu(n, x.data(), o.relu.data());
    kern::axpy(n, -0.75f, x.data(), o.axpy.data());
    o.sum = kern::sum(n, x.data());
    o.dot = kern::dot(n, x.data(), y.data());
    o.sumsq = kern::sumsq(n, x.data());
    o.maxv = kern::maxval(n, x.data());
    o.maxa = kern::maxabs(n, x.data());
    return o;
  };

  auto s = run_all(kern::Backend::Scalar);
  auto v = run_all(kern::Backend::Avx2);

  // elementwise kernels keep identical per-element arithmetic: bitwise equal
  CHECK(s.add == v.add);
  CHECK(s.sub == v.sub);
  CHECK(s.mul == v.mul);
  CHECK(s.scale == v.scale);
  CHECK(s.sign == v.sign);
  CHECK(s.clamp == v.clamp);
  CHECK(s.relu == v.relu);
  CHECK(max_rel_diff(s.axpy, v.axpy) < 1e-6); // fma vs mul+add
  CHECK(s.maxv == v.maxv);
  CHECK(s.maxa == v.maxa);
  // reductions reassociate: tolerance
  CHECK(s.sum == doctest::Approx(v.sum).epsilon(1e-5));
  CHECK(s.dot == doctest::Approx(v.dot).epsilon(1e-5));
  CHECK(s.sumsq == doctest::Approx(v.sumsq).epsilon(1e-5));
}

TEST_CASE("avx2 gemm agrees with scalar gemm" * doctest::skip(!kern::avx2_supported())) {
  BackendGuard guard;
  Rng rng(5);
  const int m = 23, n = 31, k = 41;
  auto a = random_vec(std::size_t(m) * k + std::size_t(k) * std::max(m, n), rng);
  auto b = random_vec(std::size_t(k) * n + std::size_t(n) * k, rng);
  auto ad = random_vecd(a.size(), rng);
  auto bd = random_vecd(b.size(), rng);
  std::vector<float> cs(std::size_t(m) * n), cv(cs.size());
  std::vector<double> ds(cs.size()), dv(cs.size());

  kern::set_backend(kern::Backend::Scalar);
  kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), cs.data(), false);
  kern::gemm_nn(m, n, k, 1.0, ad.data(), bd.data(), ds.data(), false);
  kern::set_backend(kern::Backend::Avx2);
  kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), cv.data(), false);
  kern::gemm_nn(m, n, k, 1.0, ad.data(), bd.data(), dv.data(), false);

  CHECK(max_rel_diff(cs, cv) < 1e-5);
  CHECK(max_rel_diff(ds, dv) < 1e-12);
}

TEST_CASE("gemm results are bitwise identical across thread counts") {
  Rng rng(11);
  const int m = 37, n = 29, k = 53;
  auto a = random_vec(std::size_t(m) * k, rng);
  auto b = random_vec(std::size_t(k) * n, rng);
  std::vector<float> c1(std::size_t(m) * n), c3(c1.size());
  kern::set_threads(1);
  kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), c1.data(), false);
  kern::set_threads(3);
  kern::gemm_nn(m, n, k, 1.f, a.data(), b.data(), c3.data(), false);
  kern::set_threads(1);
  CHECK(c1 == c3);
}

TEST_CASE("sign of zero is zero") {
  const float x[3] = {-2.f, 0.f, 3.f};
  float out[3];
  kern::sign(std::size_t(3), x, out);
  CHECK(out[0] == -1.f);
  CHECK(out[1] == 0.f);
  CHECK(out[2] == 1.f);
}
