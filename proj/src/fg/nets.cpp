#include "fg/nets.hpp"

#include <cmath>

namespace fg {

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  raise(Err::Parse, "unknown activation '" + s + "'");
}

void DenseNet::build(std::vector<int> layer_widths, Activation activation, Rng& rng, bool zero_last) {
  if (layer_widths.size() < 2) raise(Err::Contract, "dense net needs at least input and output widths");
  for (int w : layer_widths)
    if (w <= 0) raise(Err::Contract, "dense net widths must be positive");
  widths = std::move(layer_widths);
  act = activation;
  weights.clear();
  biases.clear();
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    int fan_in = widths[l], fan_out = widths[l + 1];
    Tensor w({fan_in, fan_out});
    bool last = (l + 2 == widths.size());
    if (!(last && zero_last)) {
      double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (int i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
    }
    weights.push_back(std::move(w));
    biases.push_back(Tensor::zeros({fan_out}));
  }
}

int DenseNet::n_params() const {
  int n = 0;
  for (size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void DenseNet::collect(Params& out, const std::string& prefix) {
  for (size_t l = 0; l < weights.size(); ++l) {
    out.push_back({prefix + ".w" + std::to_string(l), &weights[l]});
    out.push_back({prefix + ".b" + std::to_string(l), &biases[l]});
  }
}

Var DenseNet::forward(Var x, std::span<const Var> leaves) const {
  if (leaves.size() != static_cast<size_t>(n_slots())) raise(Err::Contract, "dense net leaf count mismatch");
  if (x.val().ndim() != 2 || x.val().dim(1) != widths.front())
    raise(Err::Contract, strf("dense net input width mismatch: got %s, want [*,%d]",
                              x.val().shape_str().c_str(), widths.front()));
  Var h = x;
  for (int l = 0; l < n_layers(); ++l) {
    h = add(matmul(h, leaves[static_cast<size_t>(2 * l)]), leaves[static_cast<size_t>(2 * l + 1)]);
    if (l + 1 < n_layers()) {
      switch (act) {
        case Activation::Tanh: h = vtanh(h); break;
        case Activation::Relu: h = relu(h); break;
        case Activation::Sigmoid: h = sigmoid(h); break;
      }
    }
  }
  return h;
}

std::vector<Var> DenseNet::lift(Tape& tape, bool trainable) const {
  std::vector<Var> leaves;
  leaves.reserve(static_cast<size_t>(n_slots()));
  for (size_t l = 0; l < weights.size(); ++l) {
    leaves.push_back(tape.leaf(weights[l], trainable));
    leaves.push_back(tape.leaf(biases[l], trainable));
  }
  return leaves;
}

} // namespace fg
