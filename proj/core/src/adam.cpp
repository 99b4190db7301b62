#include "ergae/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ergae {

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam::step: parameter list changed size");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    if (p.value.shape() != m_[i].shape()) throw ShapeError("Adam::step: shape changed for " + p.name);
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

}  // namespace ergae
