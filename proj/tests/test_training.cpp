#include <cmath>
#include <cstring>

#include "doctest.h"
#include "fg/data.hpp"
#include "fg/training.hpp"
#include "oracles.hpp"

using namespace fg;

namespace {

TrainConfig small_cfg(Objective obj, int64_t iters, int64_t eval_every) {
  TrainConfig tc;
  tc.objective = obj;
  tc.n_iters = iters;
  tc.eval_every = eval_every;
  tc.batch_size = 32;
  tc.train_eval_n = 128;
  tc.score_n = 256;
  tc.seed = 11;
  tc.compute_scores = false;
  if (obj == Objective::Mle) {
    tc.gen_adam = {1e-3, 0.9, 0.999, 1e-8};
  } else {
    tc.gen_adam = {1e-4, 0.5, 0.9, 1e-8};
    tc.n_critic = 2;
  }
  return tc;
}

FlowModel small_flow(uint64_t seed) {
  return build_flow(2, 2, CouplingKind::Affine, 8, MaskScheme::AlternatingHalves, PriorKind::Gaussian, seed);
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("mle loss values") {
  FlowModel m = build_flow(2, 0, CouplingKind::Additive, 4, MaskScheme::AlternatingHalves,
                           PriorKind::Gaussian, 1);
  Tape tape;
  FlowGraph g(tape, m, false);
  Var x0 = tape.leaf(Tensor({1, 2}, {0.0, 0.0}), false);
  CHECK(mle_loss(g, x0).val()[0] == doctest::Approx(std::log(2 * 3.141592653589793)).epsilon(1e-12));

  // two-point batch: mean of the per-point NLLs
  Tensor pair({2, 2}, {0.0, 0.0, 0.5, -0.3});
  Tensor ll = log_likelihood_values(m, pair);
  Tape tape2;
  FlowGraph g2(tape2, m, false);
  double loss = mle_loss(g2, tape2.leaf(pair, false)).val()[0];
  CHECK(loss == doctest::Approx(-(ll[0] + ll[1]) / 2.0).epsilon(1e-12));
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p({2}, {1.0, -2.0});
    Params ps = {{"p", &p}};
    Adam opt({0.1, 0.9, 0.999, 1e-8}, ps);
    opt.step(ps, {Tensor::zeros({2})});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
  }

  SUBCASE("first step is roughly lr * sign(g)") {
    Tensor p({2}, {0.0, 0.0});
    Params ps = {{"p", &p}};
    Adam opt({0.1, 0.9, 0.999, 1e-8}, ps);
    opt.step(ps, {Tensor({2}, {3.0, -0.004})});
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-3));
  }

  SUBCASE("200 steps on theta^2 converge below 1e-3") {
    Tensor p({1}, {1.0});
    Params ps = {{"p", &p}};
    Adam opt({0.1, 0.9, 0.999, 1e-8}, ps);
    for (int i = 0; i < 200; ++i) opt.step(ps, {Tensor({1}, {2.0 * p[0]})});
    CHECK(std::abs(p[0]) < 1e-3);
  }

  SUBCASE("non-finite gradient raises divergence") {
    Tensor p({1}, {1.0});
    Params ps = {{"p", &p}};
    Adam opt({0.1, 0.9, 0.999, 1e-8}, ps);
    Tensor g({1});
    g[0] = std::nan("");
    CHECK_THROWS_AS(opt.step(ps, {g}), Error);
  }
}

TEST_CASE("dequantize_and_scale") {
  Tensor raw({3, 2}, {0, 255, 17, 101, 255, 0});
  Tensor a = dequantize_and_scale(raw, 5);
  Tensor b = dequantize_and_scale(raw, 5);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  CHECK(a[0] >= 0.0);
  CHECK(a[0] < 1.0 / 256.0);
  CHECK(a[1] >= 255.0 / 256.0);
  CHECK(a[1] < 1.0);

  Tensor bad({1, 1}, {256.0});
  CHECK_THROWS_AS(dequantize_and_scale(bad, 1), Error);
  Tensor frac({1, 1}, {0.5});
  CHECK_THROWS_AS(dequantize_and_scale(frac, 1), Error);
}

TEST_CASE("nats_to_bits_per_dim") {
  CHECK(nats_to_bits_per_dim(std::log(2.0), 1, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nats_to_bits_per_dim(0.0, 1, std::log(256.0)) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(nats_to_bits_per_dim(3.0, 4, 0.0) == doctest::Approx(3.0 / (4 * std::log(2.0))).epsilon(1e-12));
}

TEST_CASE("metric log csv header is exact") {
  CHECK(std::string(MetricLog::csv_header()) ==
        "iteration,train_nll_nats,val_nll_nats,train_bpd,val_bpd,adv_loss,mode_score,inception_score,"
        "wallclock_s");
}

TEST_CASE("iteration-0 val NLL equals the prior NLL of the data") {
  Dataset ds = make_synthetic("ring8", 1500, 3);
  TrainConfig tc = small_cfg(Objective::Mle, 0, 100);
  Trainer tr(small_flow(4), build_critic(2, {8}, Activation::Tanh, 4), ds, tc);
  tr.run();
  REQUIRE(tr.log().rows.size() == 1);
  Tensor prior_ll = prior_logpdf_values(PriorKind::Gaussian, ds.val);
  double prior_nll = 0.0;
  for (int i = 0; i < prior_ll.size(); ++i) prior_nll -= prior_ll[i];
  prior_nll /= prior_ll.size();
  CHECK(std::abs(tr.log().rows[0].val_nll - prior_nll) < 1e-6);
}

TEST_CASE("mle training reduces validation NLL by at least 1 nat in 2000 iters") {
  Dataset ds = make_synthetic("ring8", 2000, 3);
  TrainConfig tc = small_cfg(Objective::Mle, 2000, 2000);
  FlowModel m = build_flow(2, 4, CouplingKind::Affine, 16, MaskScheme::AlternatingHalves,
                           PriorKind::Gaussian, 4);
  Trainer tr(std::move(m), build_critic(2, {8}, Activation::Tanh, 4), ds, tc);
  TrainResult res = tr.run();
  CHECK_FALSE(res.diverged);
  const auto& rows = tr.log().rows;
  REQUIRE(rows.size() >= 2);
  CHECK(rows.front().val_nll - rows.back().val_nll >= 1.0);
}

TEST_CASE("metric log is bit-identical across reruns") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  auto run_once = [&] {
    TrainConfig tc = small_cfg(Objective::Adv, 30, 10);
    Trainer tr(small_flow(2), build_critic(2, {8, 8}, Activation::Tanh, 2), ds, tc);
    tr.run();
    return tr.log().to_csv();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("hybrid with lambda 0 matches adv parameter trajectories") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  auto final_params = [&](Objective obj, double lambda) {
    TrainConfig tc = small_cfg(obj, 25, 25);
    tc.lambda = lambda;
    Trainer tr(small_flow(2), build_critic(2, {8, 8}, Activation::Tanh, 2), ds, tc);
    tr.run();
    std::vector<double> flat;
    for (const auto& p : tr.model().params())
      flat.insert(flat.end(), p.tensor->data(), p.tensor->data() + p.tensor->size());
    for (const auto& p : tr.critic().params())
      flat.insert(flat.end(), p.tensor->data(), p.tensor->data() + p.tensor->size());
    return flat;
  };
  std::vector<double> a = final_params(Objective::Adv, 0.0);
  std::vector<double> b = final_params(Objective::Hybrid, 0.0);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("hybrid_losses operation") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  FlowModel m = small_flow(6);
  Critic c = build_critic(2, {8}, Activation::Tanh, 6);
  Rng zr(44);
  Tensor z = prior_sample(PriorKind::Gaussian, 16, 2, zr);
  Tensor real({16, 2});
  for (int i = 0; i < real.size(); ++i) real[i] = ds.train[i];
  DivergenceSpec spec; // wgan, penalty 10

  auto hybrid_at = [&](double lambda) {
    Rng eps(77);
    Tape tape;
    FlowGraph fgm(tape, m, true);
    CriticGraph cg(tape, c, true);
    return hybrid_losses(tape, fgm, cg, tape.leaf(real, false), tape.leaf(z, false), lambda, spec, eps)
        .generator_loss.val()[0];
  };

  double plain;
  {
    Rng eps(77);
    Tape tape;
    FlowGraph fgm(tape, m, true);
    CriticGraph cg(tape, c, true);
    Var x_fake = fgm.generate(tape.leaf(z, false));
    plain = wgan_losses(tape, cg, tape.leaf(real, false), x_fake, spec.penalty_coeff, eps)
                .generator_loss.val()[0];
  }
  CHECK(hybrid_at(0.0) == plain); // bit-for-bit at lambda = 0

  // critic loss is the unmodified adversarial critic loss
  Rng eps(77);
  Tape tape;
  FlowGraph fgm(tape, m, true);
  CriticGraph cg(tape, c, true);
  HybridLosses h = hybrid_losses(tape, fgm, cg, tape.leaf(real, false), tape.leaf(z, false), 3.0, spec, eps);
  Rng eps2(77);
  Tape tape2;
  FlowGraph fgm2(tape2, m, true);
  CriticGraph cg2(tape2, c, true);
  AdvLosses a = wgan_losses(tape2, cg2, tape2.leaf(real, false), fgm2.generate(tape2.leaf(z, false)),
                            spec.penalty_coeff, eps2);
  CHECK(h.critic_loss.val()[0] == a.critic_loss.val()[0]);

  Rng eps3(1);
  Tape tape3;
  FlowGraph fgm3(tape3, m, true);
  CriticGraph cg3(tape3, c, true);
  CHECK_THROWS_AS(
      hybrid_losses(tape3, fgm3, cg3, tape3.leaf(real, false), tape3.leaf(z, false), -1.0, spec, eps3),
      Error);
}

TEST_CASE("hybrid generator loss equals adv loss plus lambda times mle") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  FlowModel m = small_flow(6);
  Critic c = build_critic(2, {8}, Activation::Tanh, 6);
  Rng rng(44);
  Tensor z = prior_sample(PriorKind::Gaussian, 16, 2, rng);
  Tensor real({16, 2});
  for (int i = 0; i < real.size(); ++i) real[i] = ds.train[i];

  auto gen_loss = [&](double lambda) {
    Tape tape;
    FlowGraph fgm(tape, m, true);
    CriticGraph cg(tape, c, false);
    Var adv = neg(mean(cg.value(fgm.generate(tape.leaf(z, false)))));
    Var nll = mle_loss(fgm, tape.leaf(real, false));
    return add(adv, nll * lambda).val()[0];
  };

  double adv_only;
  {
    Tape tape;
    FlowGraph fgm(tape, m, true);
    CriticGraph cg(tape, c, false);
    adv_only = neg(mean(cg.value(fgm.generate(tape.leaf(z, false))))).val()[0];
  }
  CHECK(gen_loss(0.0) == adv_only); // bit-for-bit at lambda = 0

  double nll_only;
  {
    Tape tape;
    FlowGraph fgm(tape, m, true);
    nll_only = mle_loss(fgm, tape.leaf(real, false)).val()[0];
  }
  CHECK(gen_loss(2.5) == doctest::Approx(adv_only + 2.5 * nll_only).epsilon(1e-12));
}

TEST_CASE("large lambda makes the hybrid gradient align with the mle gradient") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  FlowModel m = small_flow(6);
  Critic c = build_critic(2, {8}, Activation::Tanh, 6);
  Rng rng(45);
  Tensor z = prior_sample(PriorKind::Gaussian, 32, 2, rng);
  Tensor real({32, 2});
  for (int i = 0; i < real.size(); ++i) real[i] = ds.train[i];

  auto grad_of = [&](double lambda, bool mle_only) {
    Tape tape;
    FlowGraph fgm(tape, m, true);
    CriticGraph cg(tape, c, false);
    Var nll = mle_loss(fgm, tape.leaf(real, false));
    Var loss = mle_only ? nll : add(neg(mean(cg.value(fgm.generate(tape.leaf(z, false))))), nll * lambda);
    auto gs = tape.gradients(loss, fgm.leaves());
    std::vector<double> flat;
    for (const auto& g : gs) flat.insert(flat.end(), g.data(), g.data() + g.size());
    return flat;
  };

  std::vector<double> hybrid = grad_of(1e6, false);
  std::vector<double> mle = grad_of(1.0, true);
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < hybrid.size(); ++i) {
    dot += hybrid[i] * mle[i];
    na += hybrid[i] * hybrid[i];
    nb += mle[i] * mle[i];
  }
  CHECK(dot / std::sqrt(na * nb) > 0.99);
}

TEST_CASE("divergent training halts with a partial log") {
  Dataset ds = make_synthetic("ring8", 1200, 9);
  TrainConfig tc = small_cfg(Objective::Mle, 500, 50);
  tc.gen_adam.lr = 1e18; // guaranteed blow-up
  Trainer tr(small_flow(2), build_critic(2, {8}, Activation::Tanh, 2), ds, tc);
  TrainResult res = tr.run();
  CHECK(res.diverged);
  CHECK(!res.message.empty());
  REQUIRE(!tr.log().rows.empty());
  CHECK(tr.log().rows.back().diverged);
  std::string csv = tr.log().to_csv();
  CHECK(csv.find("diverged") != std::string::npos);
}

} // TEST_SUITE
