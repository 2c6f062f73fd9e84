#pragma once

#include <cstdint>
#include <vector>

#include "fg/nets.hpp"
#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

enum class Divergence { Wgan, Jsd };

struct DivergenceSpec {
  Divergence kind = Divergence::Wgan;
  double penalty_coeff = 10.0; // wgan only
  int n_critic = 5;
};

// Scalar-valued network D: R^d -> R. Raw output is unbounded; the JSD
// loss squashes it through a sigmoid itself.
struct Critic {
  DenseNet net; // [d, hidden..., 1]

  int input_dim() const { return net.widths.front(); }
  Params params();
  int n_params() { return net.n_params(); }
};

Critic build_critic(int dim, const std::vector<int>& hidden, Activation act, uint64_t seed,
                    bool zero_init = false);

class CriticGraph {
public:
  CriticGraph(Tape& tape, const Critic& critic, bool trainable);

  Var value(Var x); // [n], differentiable w.r.t. both the params and x

  const std::vector<Var>& leaves() const { return leaves_; }

private:
  Tape* tape_;
  const Critic* critic_;
  std::vector<Var> leaves_;
};

struct AdvLosses {
  Var critic_loss;    // minimized by the critic optimizer
  Var generator_loss; // minimized by the generator optimizer
  Var penalty;        // gradient penalty term (wgan), zero const for jsd
};

// Wasserstein losses with the input-gradient penalty on uniform
// interpolates between paired real and fake samples.
AdvLosses wgan_losses(Tape& tape, CriticGraph& critic, Var x_real, Var x_fake, double penalty_coeff,
                      Rng& eps_rng);

// Saturating minimax form: the critic maximizes
// mean log D(real) + mean log(1 - D(fake)); the generator minimizes
// mean log(1 - D(fake)). Probabilities are clamped to [1e-7, 1-1e-7].
AdvLosses jsd_losses(Tape& tape, CriticGraph& critic, Var x_real, Var x_fake);

// Just the generator side (critic held fixed); used on generator steps
// where the penalty/interpolates are not needed.
Var generator_adv_loss(Tape& tape, CriticGraph& critic, Var x_fake, Divergence kind);

// Gradients w.r.t. the critic parameters of a scalar built from the
// critic's input gradient (the penalty term); requires that the inner
// gradient was produced by backward() on the same tape.
std::vector<Tensor> grad_of_gradnorm(Tape& tape, Var penalty_scalar, const std::vector<Var>& critic_leaves);

} // namespace fg
