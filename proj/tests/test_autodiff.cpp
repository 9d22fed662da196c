#include <doctest.h>

#include <cmath>
#include <vector>

#include "plugdef/ops.hpp"
#include "plugdef/rng.hpp"
#include "plugdef/tensor.hpp"

using namespace plugdef;
using ad::Tensor;

namespace {

template <typename T>
Tensor<T> random_leaf(ad::Shape shape, Rng& rng, bool rg = true, double s = 1.0) {
  std::vector<T> d(static_cast<std::size_t>(ad::numel(shape)));
  for (auto& v : d) v = static_cast<T>(rng.uniform(-s, s));
  return Tensor<T>::leaf(std::move(shape), std::move(d), rg);
}

double run_grad_check(const std::function<Tensor<double>()>& f,
                      std::vector<ad::Parameter<double>*> params, double h = 1e-5) {
  return ad::grad_check(f, params, h).max_rel_err;
}

} // namespace

TEST_CASE("backward of sum is ones") {
  auto p = Tensor<double>::leaf({3}, {1.5, -2.0, 0.25}, true);
  auto loss = ad::sum(p);
  ad::backward(loss);
  CHECK(p.grad() == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("backward of sum(p*p) is 2p") {
  auto p = Tensor<double>::leaf({2}, {1.0, 2.0}, true);
  auto loss = ad::sum(ad::mul(p, p));
  ad::backward(loss);
  CHECK(p.grad()[0] == doctest::Approx(2.0));
  CHECK(p.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("cross-entropy gradient at uniform logits") {
  // hand-computed softmax-CE derivative: probs - onehot
  auto logits = Tensor<double>::leaf({1, 2}, {0.0, 0.0}, true);
  auto loss = ad::cross_entropy(logits, {0});
  ad::backward(loss);
  CHECK(logits.grad()[0] == doctest::Approx(-0.5));
  CHECK(logits.grad()[1] == doctest::Approx(0.5));
}

TEST_CASE("backward requires a scalar loss") {
  auto p = Tensor<double>::leaf({2}, {1.0, 2.0}, true);
  auto y = ad::mul(p, p);
  CHECK_THROWS_AS(ad::backward(y), std::invalid_argument);
}

TEST_CASE("parameter not in graph gets zero gradient") {
  ad::Parameter<double> used{"used", "g", Tensor<double>::leaf({2}, {1.0, 2.0}, true), true};
  ad::Parameter<double> unused{"unused", "g", Tensor<double>::leaf({3}, {1.0, 1.0, 1.0}, true), true};
  auto loss = ad::sum(used.tensor);
  auto grads = ad::backward(loss, {&used, &unused});
  CHECK(grads.at("used") == std::vector<double>{1.0, 1.0});
  CHECK(grads.at("unused") == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("double use equals the sum of single-use gradients") {
  Rng rng(21);
  auto p = random_leaf<double>({4}, rng);
  auto a = Tensor<double>::leaf({4}, {0.5, -1.0, 2.0, 0.0}, false);

  auto loss_twice = ad::add(ad::sum(ad::mul(p, a)), ad::sum(ad::mul(p, p)));
  ad::backward(loss_twice);
  const auto twice = p.grad();

  p.zero_grad();
  ad::backward(ad::sum(ad::mul(p, a)));
  auto g1 = p.grad();
  p.zero_grad();
  ad::backward(ad::sum(ad::mul(p, p)));
  auto g2 = p.grad();
  for (int i = 0; i < 4; ++i) CHECK(twice[i] == doctest::Approx(g1[i] + g2[i]));
}

TEST_CASE("softmax examples") {
  auto t = Tensor<float>::leaf({1, 2}, {0.f, 0.f}, false);
  auto s = ad::softmax_rows(t);
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));

  auto big = Tensor<float>::leaf({1, 2}, {1000.f, 0.f}, false);
  auto sb = ad::softmax_rows(big);
  CHECK(sb.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sb.data()[1] == doctest::Approx(0.0).epsilon(1e-12));

  auto ln2 = Tensor<double>::leaf({1, 2}, {std::log(2.0), 0.0}, false);
  auto sl = ad::softmax_rows(ln2);
  CHECK(sl.data()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(sl.data()[1] == doctest::Approx(1.0 / 3.0));

  auto nan_in = Tensor<float>::leaf({1, 2}, {std::nanf(""), 0.f}, false);
  CHECK_THROWS_AS(ad::softmax_rows(nan_in), std::invalid_argument);
}

TEST_CASE("softmax rows are a distribution on random inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int rows = 1 + int(rng.below(4)), d = 1 + int(rng.below(16));
    auto x = random_leaf<double>({rows, d}, rng, false, 5.0);
    auto s = ad::softmax_rows(x);
    for (int r = 0; r < rows; ++r) {
      double acc = 0;
      for (int j = 0; j < d; ++j) {
        CHECK(s.data()[std::size_t(r) * d + j] >= 0.0);
        acc += s.data()[std::size_t(r) * d + j];
      }
      CHECK(acc == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("layer norm examples") {
  auto g1 = Tensor<float>::full({3}, 1.f);
  auto b0 = Tensor<float>::zeros({3});
  auto x = Tensor<float>::leaf({1, 3}, {1.f, 1.f, 1.f}, false);
  auto out = ad::layer_norm_rows(x, g1, b0, 1e-5f);
  for (float v : out.data()) CHECK(v == doctest::Approx(0.f));

  auto x2 = Tensor<double>::leaf({1, 2}, {0.0, 2.0}, false);
  auto g2 = Tensor<double>::full({2}, 1.0);
  auto b3 = Tensor<double>::full({2}, 3.0);
  auto out2 = ad::layer_norm_rows(x2, g2, b3, 1e-12);
  CHECK(out2.data()[0] == doctest::Approx(2.0));
  CHECK(out2.data()[1] == doctest::Approx(4.0));

  // gamma = 0 broadcasts beta
  auto gz = Tensor<double>::zeros({2});
  auto out3 = ad::layer_norm_rows(x2, gz, b3, 1e-12);
  CHECK(out3.data()[0] == doctest::Approx(3.0));
  CHECK(out3.data()[1] == doctest::Approx(3.0));

  CHECK_THROWS_AS(ad::layer_norm_rows(x2, g2, b3, 0.0), std::invalid_argument);
}

TEST_CASE("layer norm output is standardized before the affine step") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    const int d = 8 + int(rng.below(24));
    auto x = random_leaf<double>({2, d}, rng, false, 3.0);
    auto g = Tensor<double>::full({d}, 1.0);
    auto b = Tensor<double>::zeros({d});
    auto out = ad::layer_norm_rows(x, g, b, 1e-10);
    for (int r = 0; r < 2; ++r) {
      const double* row = out.data().data() + std::size_t(r) * d;
      double mu = 0, var = 0;
      for (int j = 0; j < d; ++j) mu += row[j];
      mu /= d;
      for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= d;
      CHECK(std::abs(mu) < 1e-7);
      CHECK(std::abs(var - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("cross entropy closed forms") {
  auto uniform = Tensor<double>::zeros({1, 10});
  CHECK(ad::cross_entropy(uniform, {3}).item() == doctest::Approx(std::log(10.0)));

  auto margin = Tensor<double>::leaf({1, 2}, {50.0, 0.0}, false);
  CHECK(ad::cross_entropy(margin, {0}).item() == doctest::Approx(0.0).epsilon(1e-9));

  auto two = Tensor<double>::leaf({1, 2}, {1.0, 0.0}, false);
  CHECK(ad::cross_entropy(two, {1}).item() == doctest::Approx(std::log(1.0 + std::numbers::e)));

  CHECK_THROWS_AS(ad::cross_entropy(two, {2}), std::invalid_argument);
  CHECK_THROWS_AS(ad::cross_entropy(two, {-1}), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic form") {
  Rng rng(31);
  ad::Parameter<double> p{"p", "g", random_leaf<double>({6}, rng), true};
  auto a = random_leaf<double>({6}, rng, false);
  auto f = [&]() {
    auto q = ad::mul(p.tensor, p.tensor);
    return ad::add(ad::sum(q), ad::sum(ad::mul(p.tensor, a)));
  };
  CHECK(run_grad_check(f, {&p}) <= 1e-7);
}

TEST_CASE("grad_check: constant function has zero gradient") {
  ad::Parameter<double> p{"p", "g", Tensor<double>::leaf({3}, {1.0, 2.0, 3.0}, true), true};
  auto c = Tensor<double>::scalar(4.0, false);
  auto f = [&]() { return ad::scale(c, 1.0); };
  auto res = ad::grad_check(f, {&p}, 1e-5);
  CHECK(res.max_rel_err == 0.0);
}

TEST_CASE("grad_check across the op library") {
  // randomized small shapes, h = 1e-5, 64-bit: every op must stay <= 1e-4
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed * 7 + 1);
    const int r = 2 + int(rng.below(3)), d = 4 + int(rng.below(5));

    ad::Parameter<double> x{"x", "g", random_leaf<double>({r, d}, rng), true};
    ad::Parameter<double> w{"w", "g", random_leaf<double>({d, d}, rng), true};
    ad::Parameter<double> v{"v", "g", random_leaf<double>({d}, rng), true};
    std::vector<int> labels(static_cast<std::size_t>(r));
    for (auto& y : labels) y = int(rng.below(std::uint64_t(d)));

    CHECK(run_grad_check([&] { return ad::sum(ad::mul(x.tensor, x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::matmul(x.tensor, w.tensor)); }, {&x, &w}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::matmul(x.tensor, w.tensor, false, true)); }, {&x, &w}) <= 1e-4);
    ad::Parameter<double> at{"at", "g", random_leaf<double>({r, d}, rng), true};
    CHECK(run_grad_check([&] { return ad::sum(ad::matmul(at.tensor, x.tensor, true, false)); },
                         {&at, &x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::relu(x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::gelu(x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::mul(ad::softmax_rows(x.tensor), x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::layer_norm_rows(x.tensor, v.tensor, v.tensor, 1e-5)); },
                         {&x, &v}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::cross_entropy(x.tensor, labels); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::mse(x.tensor, ad::relu(x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::mean_rows(x.tensor)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::slice_cols(x.tensor, 1, d)); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::concat_cols<double>({x.tensor, x.tensor})); }, {&x}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::add_rowvec(x.tensor, v.tensor)); }, {&x, &v}) <= 1e-4);
    CHECK(run_grad_check([&] { return ad::sum(ad::mul_rowvec(x.tensor, v.tensor)); }, {&x, &v}) <= 1e-4);
  }
}

TEST_CASE("grad_check: patch extraction and pixel shuffle round trip") {
  Rng rng(77);
  ad::Parameter<double> img{"img", "g", random_leaf<double>({2, 8, 8}, rng), true};
  auto f = [&] {
    auto tok = ad::extract_patches(img.tensor, 4); // [4, 32]
    auto dec = ad::pixel_shuffle(tok, 2, 4, 2, 2); // uses 2*16 of 32 channels
    return ad::sum(ad::mul(dec, dec));
  };
  CHECK(run_grad_check(f, {&img}) <= 1e-4);
}

TEST_CASE("pixel shuffle fixed rearrangement") {
  // one token, C=1, r=2: [1,2,3,4] -> [[1,2],[3,4]]
  auto tok = Tensor<double>::leaf({1, 4}, {1.0, 2.0, 3.0, 4.0}, false);
  auto img = ad::pixel_shuffle(tok, 1, 2, 1, 1);
  CHECK(img.shape() == ad::Shape{1, 2, 2});
  CHECK(img.data() == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("pixel shuffle drops exactly the trailing channels") {
  auto tok = Tensor<double>::leaf({1, 6}, {1.0, 2.0, 3.0, 4.0, 9.0, 9.5}, false);
  auto img = ad::pixel_shuffle(tok, 1, 2, 1, 1);
  CHECK(img.data() == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK_THROWS_AS(ad::pixel_shuffle(tok, 2, 2, 1, 1), std::invalid_argument);
}
