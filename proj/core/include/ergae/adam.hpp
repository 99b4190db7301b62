#pragma once

#include <cstdint>
#include <vector>

#include "ergae/autodiff.hpp"

namespace ergae {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are keyed by position in the parameter
/// list handed to step(), so the same list (same order) must be passed every time.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Parameter* const> params);

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::int64_t steps() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace ergae
