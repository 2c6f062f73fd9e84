#include "fg/adversarial.hpp"

namespace fg {

Params Critic::params() {
  Params out;
  net.collect(out, "critic");
  return out;
}

Critic build_critic(int dim, const std::vector<int>& hidden, Activation act, uint64_t seed, bool zero_init) {
  if (dim < 1) raise(Err::Contract, "build_critic: dim must be positive");
  std::vector<int> widths;
  widths.push_back(dim);
  for (int h : hidden) widths.push_back(h);
  widths.push_back(1);
  Critic c;
  Rng rng = Rng::derive(seed, "critic_init");
  c.net.build(widths, act, rng, /*zero_last=*/false);
  if (zero_init) {
    for (auto& w : c.net.weights)
      for (int i = 0; i < w.size(); ++i) w[i] = 0.0;
  }
  return c;
}

CriticGraph::CriticGraph(Tape& tape, const Critic& critic, bool trainable) : tape_(&tape), critic_(&critic) {
  leaves_ = critic.net.lift(tape, trainable);
}

Var CriticGraph::value(Var x) {
  const Tensor& xv = x.val();
  if (xv.ndim() != 2 || xv.dim(1) != critic_->input_dim())
    raise(Err::Contract, strf("critic input width mismatch: got %s, want [*,%d]", xv.shape_str().c_str(),
                              critic_->input_dim()));
  Var out = critic_->net.forward(x, leaves_);
  return reshape(out, {xv.dim(0)});
}

AdvLosses wgan_losses(Tape& tape, CriticGraph& critic, Var x_real, Var x_fake, double penalty_coeff,
                      Rng& eps_rng) {
  const Tensor& r = x_real.val();
  const Tensor& f = x_fake.val();
  if (r.ndim() != 2 || !r.same_shape(f)) raise(Err::Contract, "wgan_losses: batches must share shape [n, d]");
  if (penalty_coeff < 0) raise(Err::Contract, "wgan_losses: penalty_coeff must be nonnegative");
  int n = r.dim(0), d = r.dim(1);

  // Interpolates are fresh inputs: the penalty differentiates the critic
  // w.r.t. them, not w.r.t. either batch.
  Tensor hat({n, d});
  for (int i = 0; i < n; ++i) {
    double e = eps_rng.uniform();
    for (int j = 0; j < d; ++j) hat.at(i, j) = e * r.at(i, j) + (1.0 - e) * f.at(i, j);
  }
  Var x_hat = tape.leaf(std::move(hat), true);

  Var d_real = critic.value(x_real);
  Var d_fake = critic.value(x_fake);
  Var d_hat = critic.value(x_hat);

  std::vector<int> gids = tape.backward(sum(d_hat), {x_hat.id});
  Var grad_hat = gids[0] >= 0 ? Var{&tape, gids[0]} : tape.constant(Tensor::zeros({n, d}));

  Var norm = sqrt_guard(sum_axis(square(grad_hat), 1));
  Var penalty = mean(square(norm - 1.0));

  AdvLosses out;
  out.penalty = penalty;
  out.critic_loss = add(sub(mean(d_fake), mean(d_real)), penalty * penalty_coeff);
  out.generator_loss = neg(mean(d_fake));
  return out;
}

AdvLosses jsd_losses(Tape& tape, CriticGraph& critic, Var x_real, Var x_fake) {
  const Tensor& r = x_real.val();
  const Tensor& f = x_fake.val();
  if (r.ndim() != 2 || f.ndim() != 2 || r.dim(1) != f.dim(1))
    raise(Err::Contract, "jsd_losses: batches must share width");

  Var p_real = clamp(sigmoid(critic.value(x_real)), 1e-7, 1.0 - 1e-7);
  Var p_fake = clamp(sigmoid(critic.value(x_fake)), 1e-7, 1.0 - 1e-7);
  Var one = tape.constant_scalar(1.0);

  Var objective = add(mean(vlog(p_real)), mean(vlog(sub(one, p_fake))));
  AdvLosses out;
  out.penalty = tape.constant_scalar(0.0);
  out.critic_loss = neg(objective);
  out.generator_loss = mean(vlog(sub(one, p_fake)));
  return out;
}

Var generator_adv_loss(Tape& tape, CriticGraph& critic, Var x_fake, Divergence kind) {
  if (kind == Divergence::Wgan) return neg(mean(critic.value(x_fake)));
  Var p_fake = clamp(sigmoid(critic.value(x_fake)), 1e-7, 1.0 - 1e-7);
  return mean(vlog(sub(tape.constant_scalar(1.0), p_fake)));
}

std::vector<Tensor> grad_of_gradnorm(Tape& tape, Var penalty_scalar, const std::vector<Var>& critic_leaves) {
  return tape.gradients(penalty_scalar, critic_leaves);
}

} // namespace fg
