#pragma once

#include <span>
#include <string>
#include <vector>

#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

// Named handle to a trainable tensor. Registry order is the canonical
// order for optimizer state, gradients and checkpoint blocks.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};
using Params = std::vector<ParamRef>;

enum class Activation { Tanh, Relu, Sigmoid };

Activation activation_from_string(const std::string& s);

// Fully connected network: linear layers with the activation between
// them and a linear output layer. Used for coupling conditioners, the
// critic and the surrogate classifier.
struct DenseNet {
  std::vector<int> widths; // [in, hidden..., out]
  Activation act = Activation::Tanh;
  std::vector<Tensor> weights; // per layer, [fan_in, fan_out]
  std::vector<Tensor> biases;  // per layer, [fan_out]

  void build(std::vector<int> layer_widths, Activation activation, Rng& rng, bool zero_last);
  int n_layers() const { return static_cast<int>(weights.size()); }
  int n_params() const;
  int n_slots() const { return 2 * n_layers(); } // leaves per net: w0,b0,w1,b1,...

  void collect(Params& out, const std::string& prefix);

  // Taped forward; `leaves` holds n_slots() vars in collect() order.
  Var forward(Var x, std::span<const Var> leaves) const;

  // Lift current parameter values onto a tape (collect() order).
  std::vector<Var> lift(Tape& tape, bool trainable) const;
};

} // namespace fg
