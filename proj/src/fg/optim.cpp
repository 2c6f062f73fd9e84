#include "fg/optim.hpp"

#include <cmath>

namespace fg {

Adam::Adam(AdamConfig cfg, const Params& params) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Tensor::zeros(p.tensor->shape()));
    v_.push_back(Tensor::zeros(p.tensor->shape()));
  }
}

void Adam::step(const Params& params, const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    raise(Err::Contract, "adam: parameter/gradient count mismatch");
  ++t_;
  double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) raise(Err::Contract, "adam: gradient shape mismatch for " + params[i].name);
    if (!g.all_finite()) raise(Err::Diverged, "adam: non-finite gradient for " + params[i].name);
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double mhat = m[j] / c1;
      double vhat = v[j] / c2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

} // namespace fg
