#pragma once
// Reverse-mode differentiation core. A forward pass builds a DAG of Node
// records; backward() walks it once in reverse topological order and is done.
// Graphs are per-pass and discarded afterwards; leaves (parameters, inputs)
// persist and their gradients accumulate until zero_grad().
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace plugdef::ad {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

template <typename T>
class Tensor;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad; // allocated on demand, same length as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Tensor<T>> parents;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (numel(shape) != static_cast<std::int64_t>(data.size()))
      throw std::invalid_argument("tensor: shape/data size mismatch");
    Tensor t;
    t.n_ = std::make_shared<Node<T>>();
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(data);
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> d(static_cast<std::size_t>(numel(shape)), T(0));
    return leaf(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    std::vector<T> d(static_cast<std::size_t>(numel(shape)), v);
    return leaf(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) { return leaf({1}, {v}, requires_grad); }

  // Fresh op output; parents are recorded only when a gradient will flow.
  static Tensor make(Shape shape, bool requires_grad, const char* op, std::vector<Tensor> parents) {
    Tensor t;
    t.n_ = std::make_shared<Node<T>>();
    t.n_->value.resize(static_cast<std::size_t>(numel(shape)));
    t.n_->shape = std::move(shape);
    t.n_->requires_grad = requires_grad;
    t.n_->op = op;
    if (requires_grad) t.n_->parents = std::move(parents);
    return t;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int dim(std::size_t i) const { return n_->shape[i]; }
  std::int64_t size() const { return static_cast<std::int64_t>(n_->value.size()); }
  std::vector<T>& data() { return n_->value; }
  const std::vector<T>& data() const { return n_->value; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }
  const char* op() const { return n_->op; }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item(): tensor is not scalar");
    return n_->value[0];
  }

  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  const std::vector<T>* grad_if() const { return n_->grad.empty() ? nullptr : &n_->grad; }
  void zero_grad() { n_->grad.assign(n_->value.size(), T(0)); }

  Node<T>* node() const { return n_.get(); }

 private:
  std::shared_ptr<Node<T>> n_;
};

// Named, grouped, trainable-flagged tensor; the unit of parameter partitions.
template <typename T>
struct Parameter {
  std::string name;
  std::string group;
  Tensor<T> tensor;
  bool trainable = true;

  void set_trainable(bool t) {
    trainable = t;
    tensor.set_requires_grad(t);
  }
};

// Reverse pass from a scalar loss. Gradients accumulate (sum over all uses
// and over repeated backward calls on leaves); intermediates are fresh per
// graph so a single backward per forward is assumed.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  struct Frame {
    Node<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  seen.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].node();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* nd = *it;
    if (nd->backprop) nd->backprop(*nd);
  }
}

// Spec-facing variant: zeroes the given parameters' gradients, runs the
// reverse pass and returns name -> gradient values. Trainable parameters
// that never entered the graph map to zeros.
template <typename T>
std::map<std::string, std::vector<T>> backward(const Tensor<T>& loss,
                                               const std::vector<Parameter<T>*>& params) {
  for (auto* p : params)
    if (p->trainable) p->tensor.zero_grad();
  backward(loss);
  std::map<std::string, std::vector<T>> grads;
  for (auto* p : params) {
    if (!p->trainable) continue;
    if (const auto* g = p->tensor.grad_if())
      grads[p->name] = *g;
    else
      grads[p->name] = std::vector<T>(static_cast<std::size_t>(p->tensor.size()), T(0));
  }
  return grads;
}

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->tensor.zero_grad();
}

// Central finite differences against the reverse pass, the verification
// oracle for every differentiable op. Double precision only: f32 rounding
// would drown the h^2 truncation term.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Parameter<double>*>& params, double h);

} // namespace plugdef::ad
