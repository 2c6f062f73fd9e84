#include "fg/training.hpp"

#include <chrono>
#include <cmath>

#include "fg/parallel.hpp"

namespace fg {

namespace {
constexpr double kLn2 = 0.6931471805599453;

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return strf("%.17g", v);
}
} // namespace

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::Mle: return "mle";
    case Objective::Adv: return "adv";
    case Objective::Hybrid: return "hybrid";
  }
  return "?";
}

// ---------------------------------------------------------------------
//  Pieces
// ---------------------------------------------------------------------
Var mle_loss(FlowGraph& flow, Var x_batch) {
  if (x_batch.val().dim(0) < 1) raise(Err::Contract, "mle_loss: empty batch");
  return neg(mean(flow.log_likelihood(x_batch)));
}

Tensor dequantize_and_scale(const Tensor& raw, uint64_t seed) {
  Rng rng = Rng::derive(seed, "dequant");
  Tensor out(raw.shape());
  for (int i = 0; i < raw.size(); ++i) {
    double v = raw[i];
    if (v != std::floor(v) || v < 0.0 || v > 255.0)
      raise(Err::Contract, strf("dequantize: value %g outside {0..255}", v));
    out[i] = (v + rng.uniform()) / 256.0;
  }
  return out;
}

double nats_to_bits_per_dim(double nll_nats, int d, double scale_correction) {
  if (d < 1) raise(Err::Contract, "bits/dim: d must be positive");
  return (nll_nats + scale_correction) / (d * kLn2);
}

HybridLosses hybrid_losses(Tape& tape, FlowGraph& flow, CriticGraph& critic, Var x_real, Var z_batch,
                           double lambda, const DivergenceSpec& spec, Rng& eps_rng) {
  if (lambda < 0) raise(Err::Contract, "hybrid_losses: lambda must be nonnegative");
  Var x_fake = flow.generate(z_batch);
  AdvLosses adv = spec.kind == Divergence::Wgan
                      ? wgan_losses(tape, critic, x_real, x_fake, spec.penalty_coeff, eps_rng)
                      : jsd_losses(tape, critic, x_real, x_fake);
  HybridLosses out;
  out.critic_loss = adv.critic_loss;
  out.generator_loss = add(adv.generator_loss, mle_loss(flow, x_real) * lambda);
  return out;
}

const char* MetricLog::csv_header() {
  return "iteration,train_nll_nats,val_nll_nats,train_bpd,val_bpd,adv_loss,mode_score,inception_score,"
         "wallclock_s";
}

std::string MetricLog::to_csv() const {
  std::string out = csv_header();
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration);
    if (r.diverged) {
      out += ",diverged,diverged,diverged,diverged";
    } else {
      out += "," + fmt_double(r.train_nll) + "," + fmt_double(r.val_nll) + "," + fmt_double(r.train_bpd) +
             "," + fmt_double(r.val_bpd);
    }
    out += "," + fmt_double(r.adv_loss) + "," + fmt_double(r.mode_score) + "," +
           fmt_double(r.inception_score) + "," + fmt_double(r.wallclock) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------
//  Trainer
// ---------------------------------------------------------------------
Trainer::Trainer(FlowModel model, Critic critic, const Dataset& data, TrainConfig cfg)
    : cfg_(cfg),
      model_(std::move(model)),
      critic_(std::move(critic)),
      data_(&data),
      data_rng_(Rng::derive(cfg.seed, "data")),
      prior_rng_(Rng::derive(cfg.seed, "prior")),
      interp_rng_(Rng::derive(cfg.seed, "interp")),
      last_adv_loss_(std::nan("")) {
  if (data.train.dim(1) != model_.dim) raise(Err::Contract, "trainer: dataset width != model dim");
  if (cfg_.batch_size < 1 || cfg_.n_iters < 0 || cfg_.eval_every < 1)
    raise(Err::Contract, "trainer: invalid batch/iteration configuration");
  if (cfg_.lambda < 0) raise(Err::Contract, "trainer: lambda must be nonnegative");

  gen_opt_ = Adam(cfg_.gen_adam, model_.params());
  critic_opt_ = Adam(cfg_.critic_adam, critic_.params());

  // Fixed train subsample for the logged train NLL.
  int n_train = data.train.dim(0);
  int n_sub = std::min(cfg_.train_eval_n, n_train);
  Rng sub_rng = Rng::derive(cfg_.seed, "train_eval");
  train_eval_set_ = Tensor({n_sub, model_.dim});
  for (int i = 0; i < n_sub; ++i) {
    int src = static_cast<int>(sub_rng.below(static_cast<uint64_t>(n_train)));
    for (int j = 0; j < model_.dim; ++j) train_eval_set_.at(i, j) = data.train.at(src, j);
  }

  if (cfg_.compute_scores && data.has_labels()) {
    classifier_ = train_surrogate_classifier(data.train, data.train_labels, data.n_classes, data.val,
                                             data.val_labels, cfg_.classifier, cfg_.seed);
    p_star_ = data.train_label_dist();
    scores_enabled_ = true;
  }
}

Tensor Trainer::draw_real(int n) {
  int n_train = data_->train.dim(0);
  Tensor batch({n, model_.dim});
  for (int i = 0; i < n; ++i) {
    int src = static_cast<int>(data_rng_.below(static_cast<uint64_t>(n_train)));
    for (int j = 0; j < model_.dim; ++j) batch.at(i, j) = data_->train.at(src, j);
  }
  return batch;
}

double Trainer::eval_mean_nll(const Tensor& x) const {
  int n = x.dim(0), d = x.dim(1);
  int bs = std::max(1, cfg_.eval_batch);
  int nb = (n + bs - 1) / bs;
  std::vector<double> sums(static_cast<size_t>(nb), 0.0);
  parallel_for(nb, [&](int b) {
    int lo = b * bs, hi = std::min(n, lo + bs);
    Tensor chunk({hi - lo, d});
    for (int i = lo; i < hi; ++i)
      for (int j = 0; j < d; ++j) chunk.at(i - lo, j) = x.at(i, j);
    Tensor ll = log_likelihood_values(model_, chunk);
    double s = 0.0;
    for (int i = 0; i < ll.size(); ++i) s -= ll[i];
    sums[static_cast<size_t>(b)] = s;
  });
  double total = 0.0;
  for (double s : sums) total += s; // fixed order regardless of thread count
  return total / n;
}

void Trainer::mle_step() {
  Tensor batch = draw_real(cfg_.batch_size);
  Tape tape;
  FlowGraph flow(tape, model_, true);
  Var loss = mle_loss(flow, tape.leaf(batch, false));
  std::vector<Tensor> grads = tape.gradients(loss, flow.leaves());
  gen_opt_.step(model_.params(), grads);
}

void Trainer::adversarial_step() {
  int bs = cfg_.batch_size;
  // Critic updates: generator parameters enter as constants.
  for (int c = 0; c < cfg_.n_critic; ++c) {
    Tensor real = draw_real(bs);
    Tensor z = prior_sample(model_.prior, bs, model_.dim, prior_rng_);
    Tape tape;
    FlowGraph flow(tape, model_, false);
    CriticGraph cg(tape, critic_, true);
    Var x_fake = flow.generate(tape.leaf(z, false));
    Var x_real = tape.leaf(real, false);
    AdvLosses losses = cfg_.divergence == Divergence::Wgan
                           ? wgan_losses(tape, cg, x_real, x_fake, cfg_.penalty_coeff, interp_rng_)
                           : jsd_losses(tape, cg, x_real, x_fake);
    std::vector<Tensor> grads = tape.gradients(losses.critic_loss, cg.leaves());
    critic_opt_.step(critic_.params(), grads);
    last_adv_loss_ = losses.critic_loss.val()[0];
  }

  // Generator update; ADV runs the hybrid path with lambda = 0, so the
  // two objectives share one instruction stream (identical trajectories).
  double lambda = cfg_.objective == Objective::Hybrid ? cfg_.lambda : 0.0;
  Tensor real = draw_real(bs);
  Tensor z = prior_sample(model_.prior, bs, model_.dim, prior_rng_);
  Tape tape;
  FlowGraph flow(tape, model_, true);
  CriticGraph cg(tape, critic_, false);
  Var x_fake = flow.generate(tape.leaf(z, false));
  Var adv_gen = generator_adv_loss(tape, cg, x_fake, cfg_.divergence);
  Var nll = mle_loss(flow, tape.leaf(real, false));
  Var loss = add(adv_gen, nll * lambda);
  std::vector<Tensor> grads = tape.gradients(loss, flow.leaves());
  gen_opt_.step(model_.params(), grads);
}

void Trainer::append_eval_row() {
  MetricRow row;
  row.iteration = iteration_;
  row.train_nll = eval_mean_nll(train_eval_set_);
  row.val_nll = eval_mean_nll(data_->val);
  row.train_bpd = nats_to_bits_per_dim(row.train_nll, model_.dim, data_->scale_correction);
  row.val_bpd = nats_to_bits_per_dim(row.val_nll, model_.dim, data_->scale_correction);
  row.adv_loss = cfg_.objective == Objective::Mle ? std::nan("") : last_adv_loss_;
  row.mode_score = std::nan("");
  row.inception_score = std::nan("");
  if (scores_enabled_) {
    Rng score_rng = Rng::derive(cfg_.seed, "score:" + std::to_string(iteration_));
    Tensor samples = sample_values(model_, cfg_.score_n, score_rng);
    Tensor probs = classifier_.predict_probs(samples);
    row.mode_score = mode_score_from_probs(probs, p_star_);
    row.inception_score = inception_score_from_probs(probs);
  }
  row.wallclock = cfg_.log_wallclock ? now_seconds() - t_start_ : 0.0;
  log_.rows.push_back(row);
}

TrainResult Trainer::run(const Hook& after_iter) {
  TrainResult res;
  t_start_ = now_seconds();
  try {
    if (iteration_ == 0) {
      append_eval_row();
      if (after_iter) after_iter(*this, 0);
    }
    while (iteration_ < cfg_.n_iters) {
      if (cfg_.objective == Objective::Mle)
        mle_step();
      else
        adversarial_step();
      ++iteration_;
      if (iteration_ % cfg_.eval_every == 0 || iteration_ == cfg_.n_iters) append_eval_row();
      if (after_iter) after_iter(*this, iteration_);
    }
  } catch (const Error& e) {
    if (e.kind() != Err::Diverged && e.kind() != Err::Numeric) throw;
    MetricRow row;
    row.iteration = iteration_;
    row.diverged = true;
    double nan = std::nan("");
    row.train_nll = row.val_nll = row.train_bpd = row.val_bpd = nan;
    row.adv_loss = cfg_.objective == Objective::Mle ? nan : last_adv_loss_;
    row.mode_score = row.inception_score = nan;
    row.wallclock = cfg_.log_wallclock ? now_seconds() - t_start_ : 0.0;
    log_.rows.push_back(row);
    res.diverged = true;
    res.message = e.what();
  }
  return res;
}

} // namespace fg
