#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fg/adversarial.hpp"
#include "fg/data.hpp"
#include "fg/evaluation.hpp"
#include "fg/flow.hpp"
#include "fg/optim.hpp"
#include "fg/rng.hpp"

namespace fg {

enum class Objective { Mle, Adv, Hybrid };

const char* objective_name(Objective o);

struct TrainConfig {
  Objective objective = Objective::Mle;
  double lambda = 1.0; // hybrid: generator loss + lambda * NLL
  Divergence divergence = Divergence::Wgan;
  double penalty_coeff = 10.0;
  int n_critic = 5;
  AdamConfig gen_adam{1e-3, 0.9, 0.999, 1e-8};
  AdamConfig critic_adam{1e-4, 0.5, 0.9, 1e-8};
  int batch_size = 64;
  int64_t n_iters = 10000; // generator steps
  int64_t eval_every = 500;
  uint64_t seed = 1;
  int eval_batch = 256;   // batching for exact-NLL evaluation
  int train_eval_n = 512; // fixed train subsample logged as train NLL
  int score_n = 1024;     // generated samples per score evaluation
  bool compute_scores = true;
  bool log_wallclock = false;
  ClassifierConfig classifier;
};

struct MetricRow {
  int64_t iteration = 0;
  double train_nll = 0, val_nll = 0, train_bpd = 0, val_bpd = 0;
  double adv_loss = 0, mode_score = 0, inception_score = 0, wallclock = 0;
  bool diverged = false;
};

struct MetricLog {
  std::vector<MetricRow> rows;

  static const char* csv_header(); // exact column contract
  std::string to_csv() const;
};

struct TrainResult {
  bool diverged = false;
  std::string message;
};

// Per-operation pieces (also used directly by tests).
Var mle_loss(FlowGraph& flow, Var x_batch);                      // -mean log p
Tensor dequantize_and_scale(const Tensor& raw, uint64_t seed);   // (x+u)/256
double nats_to_bits_per_dim(double nll_nats, int d, double scale_correction);

// Hybrid objective on one tape: the generator adds lambda * NLL to its
// adversarial loss, the critic loss is unchanged. lambda = 0 reproduces
// the plain adversarial generator loss bit for bit.
struct HybridLosses {
  Var generator_loss;
  Var critic_loss;
};
HybridLosses hybrid_losses(Tape& tape, FlowGraph& flow, CriticGraph& critic, Var x_real, Var z_batch,
                           double lambda, const DivergenceSpec& spec, Rng& eps_rng);

// Deterministic training driver. The runner owns persistence; hooks fire
// after every generator iteration (and once for iteration 0).
class Trainer {
public:
  Trainer(FlowModel model, Critic critic, const Dataset& data, TrainConfig cfg);

  using Hook = std::function<void(Trainer&, int64_t iteration)>;
  TrainResult run(const Hook& after_iter = {});

  FlowModel& model() { return model_; }
  Critic& critic() { return critic_; }
  Adam& gen_opt() { return gen_opt_; }
  Adam& critic_opt() { return critic_opt_; }
  Rng& data_rng() { return data_rng_; }
  Rng& prior_rng() { return prior_rng_; }
  Rng& interp_rng() { return interp_rng_; }
  int64_t iteration() const { return iteration_; }
  void set_iteration(int64_t it) { iteration_ = it; }
  const MetricLog& log() const { return log_; }
  const TrainConfig& config() const { return cfg_; }

  // Exact mean NLL over a set, batched with a fixed summation order.
  double eval_mean_nll(const Tensor& x) const;

private:
  void mle_step();
  void adversarial_step(); // n_critic critic updates then one generator update
  void append_eval_row();
  Tensor draw_real(int n);

  TrainConfig cfg_;
  FlowModel model_;
  Critic critic_;
  const Dataset* data_;
  Adam gen_opt_, critic_opt_;
  Rng data_rng_, prior_rng_, interp_rng_;
  int64_t iteration_ = 0;
  MetricLog log_;
  double last_adv_loss_;
  Tensor train_eval_set_;
  bool scores_enabled_ = false;
  Classifier classifier_;
  std::vector<double> p_star_;
  double t_start_ = 0;
};

} // namespace fg
