#pragma once
// Differentiable op library. Each op writes its forward value through the
// kernel layer and, when a gradient will flow, installs a backprop closure
// that accumulates into its parents.
#include <cmath>
#include <numbers>

#include "plugdef/kernels.hpp"
#include "plugdef/tensor.hpp"

namespace plugdef::ad {

namespace detail {

template <typename T>
inline void accum(Tensor<T>& p, const T* g, std::size_t n) {
  if (!p.requires_grad()) return;
  p.node()->ensure_grad();
  kern::axpy(n, T(1), g, p.node()->grad.data());
}

template <typename T>
inline bool has_nan(const std::vector<T>& v) {
  for (const T x : v)
    if (std::isnan(static_cast<double>(x))) return true;
  return false;
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

} // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "add");
  auto out = Tensor<T>::make(a.shape(), a.requires_grad() || b.requires_grad(), "add", {a, b});
  kern::add(a.data().size(), a.data().data(), b.data().data(), out.data().data());
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      detail::accum(nd.parents[0], nd.grad.data(), nd.grad.size());
      detail::accum(nd.parents[1], nd.grad.data(), nd.grad.size());
    };
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "sub");
  auto out = Tensor<T>::make(a.shape(), a.requires_grad() || b.requires_grad(), "sub", {a, b});
  kern::sub(a.data().size(), a.data().data(), b.data().data(), out.data().data());
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      detail::accum(nd.parents[0], nd.grad.data(), nd.grad.size());
      auto& b_ = nd.parents[1];
      if (b_.requires_grad()) {
        b_.node()->ensure_grad();
        kern::axpy(nd.grad.size(), T(-1), nd.grad.data(), b_.node()->grad.data());
      }
    };
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "mul");
  auto out = Tensor<T>::make(a.shape(), a.requires_grad() || b.requires_grad(), "mul", {a, b});
  kern::mul(a.data().size(), a.data().data(), b.data().data(), out.data().data());
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      auto& a_ = nd.parents[0];
      auto& b_ = nd.parents[1];
      const std::size_t n = nd.grad.size();
      std::vector<T> tmp(n);
      if (a_.requires_grad()) {
        kern::mul(n, nd.grad.data(), b_.data().data(), tmp.data());
        detail::accum(a_, tmp.data(), n);
      }
      if (b_.requires_grad()) {
        kern::mul(n, nd.grad.data(), a_.data().data(), tmp.data());
        detail::accum(b_, tmp.data(), n);
      }
    };
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  auto out = Tensor<T>::make(x.shape(), x.requires_grad(), "scale", {x});
  kern::scale(x.data().size(), s, x.data().data(), out.data().data());
  if (out.requires_grad())
    out.node()->backprop = [s](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      kern::axpy(nd.grad.size(), s, nd.grad.data(), x_.node()->grad.data());
    };
  return out;
}

// x: [R, d], v: [d]; trailing-axis broadcast (the only broadcast supported).
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.shape().size() != 2 || v.shape().size() != 1 || x.dim(1) != v.dim(0))
    throw std::invalid_argument("add_rowvec: expected [R,d] + [d]");
  const int rows = x.dim(0), d = x.dim(1);
  auto out = Tensor<T>::make(x.shape(), x.requires_grad() || v.requires_grad(), "add_rowvec", {x, v});
  for (int r = 0; r < rows; ++r)
    kern::add(d, x.data().data() + std::size_t(r) * d, v.data().data(), out.data().data() + std::size_t(r) * d);
  if (out.requires_grad())
    out.node()->backprop = [rows, d](Node<T>& nd) {
      detail::accum(nd.parents[0], nd.grad.data(), nd.grad.size());
      auto& v_ = nd.parents[1];
      if (v_.requires_grad()) {
        v_.node()->ensure_grad();
        for (int r = 0; r < rows; ++r)
          kern::axpy(d, T(1), nd.grad.data() + std::size_t(r) * d, v_.node()->grad.data());
      }
    };
  return out;
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.shape().size() != 2 || v.shape().size() != 1 || x.dim(1) != v.dim(0))
    throw std::invalid_argument("mul_rowvec: expected [R,d] * [d]");
  const int rows = x.dim(0), d = x.dim(1);
  auto out = Tensor<T>::make(x.shape(), x.requires_grad() || v.requires_grad(), "mul_rowvec", {x, v});
  for (int r = 0; r < rows; ++r)
    kern::mul(d, x.data().data() + std::size_t(r) * d, v.data().data(), out.data().data() + std::size_t(r) * d);
  if (out.requires_grad())
    out.node()->backprop = [rows, d](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      auto& v_ = nd.parents[1];
      std::vector<T> tmp(static_cast<std::size_t>(d));
      if (x_.requires_grad()) {
        x_.node()->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          kern::mul(d, nd.grad.data() + std::size_t(r) * d, v_.data().data(), tmp.data());
          kern::axpy(d, T(1), tmp.data(), x_.node()->grad.data() + std::size_t(r) * d);
        }
      }
      if (v_.requires_grad()) {
        v_.node()->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          kern::mul(d, nd.grad.data() + std::size_t(r) * d, x_.data().data() + std::size_t(r) * d, tmp.data());
          kern::axpy(d, T(1), tmp.data(), v_.node()->grad.data());
        }
      }
    };
  return out;
}

// C = op(A) * op(B) with op in {identity, transpose}; TT is not needed.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false) {
  if (trans_a && trans_b) throw std::invalid_argument("matmul: TT variant unsupported");
  if (a.shape().size() != 2 || b.shape().size() != 2) throw std::invalid_argument("matmul: expected 2-d tensors");
  const int m = trans_a ? a.dim(1) : a.dim(0);
  const int k = trans_a ? a.dim(0) : a.dim(1);
  const int kb = trans_b ? b.dim(1) : b.dim(0);
  const int n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb)
    throw std::invalid_argument("matmul: inner dim mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  auto out = Tensor<T>::make({m, n}, a.requires_grad() || b.requires_grad(), "matmul", {a, b});
  const T* ap = a.data().data();
  const T* bp = b.data().data();
  T* cp = out.data().data();
  if (!trans_a && !trans_b)
    kern::gemm_nn(m, n, k, T(1), ap, bp, cp, false);
  else if (!trans_a && trans_b)
    kern::gemm_nt(m, n, k, T(1), ap, bp, cp, false);
  else
    kern::gemm_tn(m, n, k, T(1), ap, bp, cp, false);
  if (out.requires_grad())
    out.node()->backprop = [m, n, k, trans_a, trans_b](Node<T>& nd) {
      auto& a_ = nd.parents[0];
      auto& b_ = nd.parents[1];
      const T* g = nd.grad.data();
      if (a_.requires_grad()) {
        a_.node()->ensure_grad();
        T* da = a_.node()->grad.data();
        if (!trans_a && !trans_b)
          kern::gemm_nt(m, k, n, T(1), g, b_.data().data(), da, true); // dA = g B^T
        else if (!trans_a && trans_b)
          kern::gemm_nn(m, k, n, T(1), g, b_.data().data(), da, true); // dA = g B
        else
          kern::gemm_nt(k, m, n, T(1), b_.data().data(), g, da, true); // dA = B g^T
      }
      if (b_.requires_grad()) {
        b_.node()->ensure_grad();
        T* db = b_.node()->grad.data();
        if (!trans_a && !trans_b)
          kern::gemm_tn(k, n, m, T(1), a_.data().data(), g, db, true); // dB = A^T g
        else if (!trans_a && trans_b)
          kern::gemm_tn(n, k, m, T(1), g, a_.data().data(), db, true); // dB = g^T A
        else
          kern::gemm_nn(k, n, m, T(1), a_.data().data(), g, db, true); // dB = A g
      }
    };
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto out = Tensor<T>::make(x.shape(), x.requires_grad(), "relu", {x});
  kern::relu(x.data().size(), x.data().data(), out.data().data());
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      const auto& xv = x_.data();
      auto& xg = x_.node()->grad;
      for (std::size_t i = 0; i < xv.size(); ++i)
        if (xv[i] > T(0)) xg[i] += nd.grad[i];
    };
  return out;
}

// Exact erf form: 0.5 x (1 + erf(x / sqrt(2))).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  auto out = Tensor<T>::make(x.shape(), x.requires_grad(), "gelu", {x});
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = static_cast<double>(xv[i]);
    ov[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)));
  }
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      const auto& xv = x_.data();
      auto& xg = x_.node()->grad;
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = static_cast<double>(xv[i]);
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        xg[i] += nd.grad[i] * static_cast<T>(cdf + v * pdf);
      }
    };
  return out;
}

// Numerically stable softmax over the last axis of a [R, d] tensor.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.shape().size() != 2) throw std::invalid_argument("softmax_rows: expected [R,d]");
  if (detail::has_nan(x.data())) throw std::invalid_argument("softmax_rows: NaN input");
  const int rows = x.dim(0), d = x.dim(1);
  auto out = Tensor<T>::make(x.shape(), x.requires_grad(), "softmax", {x});
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + std::size_t(r) * d;
    T* orow = out.data().data() + std::size_t(r) * d;
    const T m = kern::maxval(d, xr);
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double e = std::exp(static_cast<double>(xr[j] - m));
      orow[j] = static_cast<T>(e);
      s += e;
    }
    kern::scale(d, static_cast<T>(1.0 / s), orow, orow);
  }
  if (out.requires_grad())
    out.node()->backprop = [rows, d](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      for (int r = 0; r < rows; ++r) {
        const T* s = nd.value.data() + std::size_t(r) * d;
        const T* g = nd.grad.data() + std::size_t(r) * d;
        T* xg = x_.node()->grad.data() + std::size_t(r) * d;
        const T gs = kern::dot(d, g, s);
        for (int j = 0; j < d; ++j) xg[j] += s[j] * (g[j] - gs);
      }
    };
  return out;
}

// Per-row normalization over the last axis, then affine by gamma/beta.
template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.shape().size() != 2) throw std::invalid_argument("layer_norm: expected [R,d]");
  const int rows = x.dim(0), d = x.dim(1);
  if (d == 0) throw std::invalid_argument("layer_norm: d must be >= 1");
  if (eps <= T(0)) throw std::invalid_argument("layer_norm: eps must be positive");
  if (gamma.size() != d || beta.size() != d) throw std::invalid_argument("layer_norm: gamma/beta must be [d]");
  const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  auto out = Tensor<T>::make(x.shape(), rg, "layer_norm", {x, gamma, beta});
  std::vector<T> xhat(std::size_t(rows) * d);
  std::vector<T> inv_std(rows);
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + std::size_t(r) * d;
    T* hr = xhat.data() + std::size_t(r) * d;
    const T mu = kern::sum(d, xr) / T(d);
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = static_cast<double>(xr[j] - mu);
      var += c * c;
    }
    var /= d;
    const T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[r] = inv;
    for (int j = 0; j < d; ++j) hr[j] = (xr[j] - mu) * inv;
    T* orow = out.data().data() + std::size_t(r) * d;
    kern::mul(d, hr, gamma.data().data(), orow);
    kern::add(d, orow, beta.data().data(), orow);
  }
  if (rg)
    out.node()->backprop = [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      auto& gamma_ = nd.parents[1];
      auto& beta_ = nd.parents[2];
      if (gamma_.requires_grad()) gamma_.node()->ensure_grad();
      if (beta_.requires_grad()) beta_.node()->ensure_grad();
      if (x_.requires_grad()) x_.node()->ensure_grad();
      std::vector<T> dxhat(static_cast<std::size_t>(d));
      for (int r = 0; r < rows; ++r) {
        const T* g = nd.grad.data() + std::size_t(r) * d;
        const T* hr = xhat.data() + std::size_t(r) * d;
        if (beta_.requires_grad()) kern::axpy(d, T(1), g, beta_.node()->grad.data());
        if (gamma_.requires_grad()) {
          T* gg = gamma_.node()->grad.data();
          for (int j = 0; j < d; ++j) gg[j] += g[j] * hr[j];
        }
        if (x_.requires_grad()) {
          kern::mul(d, g, gamma_.data().data(), dxhat.data());
          const T mean_dx = kern::sum(d, dxhat.data()) / T(d);
          const T mean_dxh = kern::dot(d, dxhat.data(), hr) / T(d);
          T* xg = x_.node()->grad.data() + std::size_t(r) * d;
          const T inv = inv_std[r];
          for (int j = 0; j < d; ++j) xg[j] += inv * (dxhat[j] - mean_dx - hr[j] * mean_dxh);
        }
      }
    };
  return out;
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2) throw std::invalid_argument("cross_entropy: logits must be [B,K]");
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch) throw std::invalid_argument("cross_entropy: batch/labels mismatch");
  for (int y : labels)
    if (y < 0 || y >= classes) throw std::invalid_argument("cross_entropy: label out of range");
  auto out = Tensor<T>::make({1}, logits.requires_grad(), "cross_entropy", {logits});
  std::vector<T> probs(std::size_t(batch) * classes);
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const T* lr = logits.data().data() + std::size_t(b) * classes;
    T* pr = probs.data() + std::size_t(b) * classes;
    const T m = kern::maxval(classes, lr);
    double s = 0.0;
    for (int j = 0; j < classes; ++j) {
      const double e = std::exp(static_cast<double>(lr[j] - m));
      pr[j] = static_cast<T>(e);
      s += e;
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < classes; ++j) pr[j] = static_cast<T>(pr[j] * inv);
    total += std::log(s) + static_cast<double>(m) - static_cast<double>(lr[labels[b]]);
  }
  out.data()[0] = static_cast<T>(total / batch);
  if (out.requires_grad())
    out.node()->backprop = [batch, classes, labels, probs = std::move(probs)](Node<T>& nd) {
      auto& l_ = nd.parents[0];
      if (!l_.requires_grad()) return;
      l_.node()->ensure_grad();
      const T g0 = nd.grad[0] / T(batch);
      T* lg = l_.node()->grad.data();
      for (int b = 0; b < batch; ++b) {
        const T* pr = probs.data() + std::size_t(b) * classes;
        T* gr = lg + std::size_t(b) * classes;
        for (int j = 0; j < classes; ++j) gr[j] += g0 * pr[j];
        gr[labels[b]] -= g0;
      }
    };
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto out = Tensor<T>::make({1}, x.requires_grad(), "sum", {x});
  out.data()[0] = kern::sum(x.data().size(), x.data().data());
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      const T g0 = nd.grad[0];
      auto& xg = x_.node()->grad;
      for (auto& v : xg) v += g0;
    };
  return out;
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.shape().size() != 2) throw std::invalid_argument("mean_rows: expected [R,d]");
  const int rows = x.dim(0), d = x.dim(1);
  auto out = Tensor<T>::make({1, d}, x.requires_grad(), "mean_rows", {x});
  auto& ov = out.data();
  std::fill(ov.begin(), ov.end(), T(0));
  for (int r = 0; r < rows; ++r) kern::axpy(d, T(1), x.data().data() + std::size_t(r) * d, ov.data());
  kern::scale(d, T(1) / T(rows), ov.data(), ov.data());
  if (out.requires_grad())
    out.node()->backprop = [rows, d](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      for (int r = 0; r < rows; ++r)
        kern::axpy(d, T(1) / T(rows), nd.grad.data(), x_.node()->grad.data() + std::size_t(r) * d);
    };
  return out;
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "mse");
  const std::size_t n = a.data().size();
  auto out = Tensor<T>::make({1}, a.requires_grad() || b.requires_grad(), "mse", {a, b});
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dlt = static_cast<double>(a.data()[i] - b.data()[i]);
    s += dlt * dlt;
  }
  out.data()[0] = static_cast<T>(s / double(n));
  if (out.requires_grad())
    out.node()->backprop = [n](Node<T>& nd) {
      auto& a_ = nd.parents[0];
      auto& b_ = nd.parents[1];
      const T c = nd.grad[0] * T(2) / T(n);
      std::vector<T> diff(n);
      kern::sub(n, a_.data().data(), b_.data().data(), diff.data());
      if (a_.requires_grad()) {
        a_.node()->ensure_grad();
        kern::axpy(n, c, diff.data(), a_.node()->grad.data());
      }
      if (b_.requires_grad()) {
        b_.node()->ensure_grad();
        kern::axpy(n, -c, diff.data(), b_.node()->grad.data());
      }
    };
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw std::invalid_argument("reshape: element count mismatch");
  auto out = Tensor<T>::make(std::move(shape), x.requires_grad(), "reshape", {x});
  out.data() = x.data();
  if (out.requires_grad())
    out.node()->backprop = [](Node<T>& nd) { detail::accum(nd.parents[0], nd.grad.data(), nd.grad.size()); };
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int c0, int c1) {
  if (x.shape().size() != 2) throw std::invalid_argument("slice_cols: expected [R,d]");
  const int rows = x.dim(0), d = x.dim(1);
  if (c0 < 0 || c1 > d || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  const int w = c1 - c0;
  auto out = Tensor<T>::make({rows, w}, x.requires_grad(), "slice_cols", {x});
  for (int r = 0; r < rows; ++r)
    std::copy_n(x.data().data() + std::size_t(r) * d + c0, w, out.data().data() + std::size_t(r) * w);
  if (out.requires_grad())
    out.node()->backprop = [rows, d, c0, w](Node<T>& nd) {
      auto& x_ = nd.parents[0];
      if (!x_.requires_grad()) return;
      x_.node()->ensure_grad();
      for (int r = 0; r < rows; ++r)
        kern::axpy(w, T(1), nd.grad.data() + std::size_t(r) * w,
                   x_.node()->grad.data() + std::size_t(r) * d + c0);
    };
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int rows = parts[0].dim(0);
  int total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(0) != rows) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.dim(1);
    rg = rg || p.requires_grad();
  }
  auto out = Tensor<T>::make({rows, total}, rg, "concat_cols", parts);
  int off = 0;
  for (const auto& p : parts) {
    const int w = p.dim(1);
    for (int r = 0; r < rows; ++r)
      std::copy_n(p.data().data() + std::size_t(r) * w, w, out.data().data() + std::size_t(r) * total + off);
    off += w;
  }
  if (rg)
    out.node()->backprop = [rows, total](Node<T>& nd) {
      int off2 = 0;
      for (auto& p : nd.parents) {
        const int w = p.dim(1);
        if (p.requires_grad()) {
          p.node()->ensure_grad();
          for (int r = 0; r < rows; ++r)
            kern::axpy(w, T(1), nd.grad.data() + std::size_t(r) * total + off2,
                       p.node()->grad.data() + std::size_t(r) * w);
        }
        off2 += w;
      }
    };
  return out;
}

// Image [C,H,W] -> patch rows [T, C*p*p], row-major patch order; within a
// patch the layout is channel-major (c*p*p + i*p + j).
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& img, int p) {
  if (img.shape().size() != 3) throw std::invalid_argument("extract_patches: expected [C,H,W]");
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (p <= 0 || H % p != 0 || W % p != 0)
    throw std::invalid_argument("extract_patches: image dims must be divisible by patch size");
  const int gh = H / p, gw = W / p;
  const int tok = gh * gw, width = C * p * p;
  auto out = Tensor<T>::make({tok, width}, img.requires_grad(), "extract_patches", {img});
  const T* src = img.data().data();
  T* dst = out.data().data();
  for (int ty = 0; ty < gh; ++ty)
    for (int tx = 0; tx < gw; ++tx) {
      T* row = dst + (std::size_t(ty) * gw + tx) * width;
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < p; ++i)
          for (int j = 0; j < p; ++j)
            row[c * p * p + i * p + j] = src[(std::size_t(c) * H + ty * p + i) * W + tx * p + j];
    }
  if (out.requires_grad())
    out.node()->backprop = [C, H, W, p, gh, gw, width](Node<T>& nd) {
      auto& img_ = nd.parents[0];
      if (!img_.requires_grad()) return;
      img_.node()->ensure_grad();
      T* ig = img_.node()->grad.data();
      const T* g = nd.grad.data();
      for (int ty = 0; ty < gh; ++ty)
        for (int tx = 0; tx < gw; ++tx) {
          const T* row = g + (std::size_t(ty) * gw + tx) * width;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < p; ++i)
              for (int j = 0; j < p; ++j)
                ig[(std::size_t(c) * H + ty * p + i) * W + tx * p + j] += row[c * p * p + i * p + j];
        }
    };
  return out;
}

// Tokens [T, d] -> image [C, gh*r, gw*r]. Token channel c*r*r + i*r + j maps
// to output channel c, intra-patch offset (i, j); channels past C*r*r are
// dropped. With d == C*r*r this is a value-preserving permutation.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& tokens, int C, int r, int gh, int gw) {
  if (tokens.shape().size() != 2) throw std::invalid_argument("pixel_shuffle: expected [T,d]");
  const int tok = tokens.dim(0), d = tokens.dim(1);
  if (tok != gh * gw) throw std::invalid_argument("pixel_shuffle: token count does not match grid");
  if (d < C * r * r) throw std::invalid_argument("pixel_shuffle: token dim < C*r^2");
  const int H = gh * r, W = gw * r;
  auto out = Tensor<T>::make({C, H, W}, tokens.requires_grad(), "pixel_shuffle", {tokens});
  const T* src = tokens.data().data();
  T* dst = out.data().data();
  for (int ty = 0; ty < gh; ++ty)
    for (int tx = 0; tx < gw; ++tx) {
      const T* row = src + (std::size_t(ty) * gw + tx) * d;
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < r; ++j)
            dst[(std::size_t(c) * H + ty * r + i) * W + tx * r + j] = row[c * r * r + i * r + j];
    }
  if (out.requires_grad())
    out.node()->backprop = [C, r, gh, gw, d, H, W](Node<T>& nd) {
      auto& t_ = nd.parents[0];
      if (!t_.requires_grad()) return;
      t_.node()->ensure_grad();
      T* tg = t_.node()->grad.data();
      const T* g = nd.grad.data();
      for (int ty = 0; ty < gh; ++ty)
        for (int tx = 0; tx < gw; ++tx) {
          T* row = tg + (std::size_t(ty) * gw + tx) * d;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < r; ++j)
                row[c * r * r + i * r + j] += g[(std::size_t(c) * H + ty * r + i) * W + tx * r + j];
        }
    };
  return out;
}

} // namespace plugdef::ad
