#pragma once

#include <cstdint>
#include <vector>

#include "fg/nets.hpp"
#include "fg/tensor.hpp"

namespace fg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a parameter registry. State tensors follow
// registry order so checkpoints can restore them by name.
class Adam {
public:
  Adam() = default;
  Adam(AdamConfig cfg, const Params& params);

  void step(const Params& params, const std::vector<Tensor>& grads);

  const AdamConfig& config() const { return cfg_; }
  int64_t timestep() const { return t_; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_timestep(int64_t t) { t_ = t; }

private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

} // namespace fg
