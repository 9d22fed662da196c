#include "plugdef/tensor.hpp"

#include <cmath>
#include <sstream>

namespace plugdef::ad {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Parameter<double>*>& params, double h) {
  if (h <= 0) throw std::invalid_argument("grad_check: h must be positive");
  for (auto* p : params) p->tensor.zero_grad();
  Tensor<double> loss = f();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    if (const auto* g = p->tensor.grad_if())
      analytic.push_back(*g);
    else
      analytic.emplace_back(static_cast<std::size_t>(p->tensor.size()), 0.0);
  }

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi]->tensor.data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double fp = f().item();
      vals[i] = saved - h;
      const double fm = f().item();
      vals[i] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = analytic[pi][i];
      const double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
      const double rel = std::abs(fd - g) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = params[pi]->name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

} // namespace plugdef::ad
