#include <cmath>
#include <cstring>

#include "doctest.h"
#include "fg/flow.hpp"
#include "fg/rng.hpp"
#include "oracles.hpp"

using namespace fg;

namespace {

// Random smooth model: perturbed conditioner output layers and scale.
FlowModel random_model(int dim, int n_layers, CouplingKind kind, PriorKind prior, uint64_t seed) {
  FlowModel m = build_flow(dim, n_layers, kind, 8, MaskScheme::AlternatingHalves, prior, seed);
  Rng rng(seed * 977 + 13);
  for (auto& c : m.couplings) {
    Tensor& w = c.conditioner.weights.back();
    Tensor& b = c.conditioner.biases.back();
    for (int i = 0; i < w.size(); ++i) w[i] = 0.4 * rng.normal();
    for (int i = 0; i < b.size(); ++i) b[i] = 0.2 * rng.normal();
  }
  for (int i = 0; i < m.scale_log_diag.size(); ++i) m.scale_log_diag[i] = 0.5 * rng.normal();
  return m;
}

FlowModel identity_model(int dim, PriorKind prior) {
  return build_flow(dim, 0, CouplingKind::Additive, 4, MaskScheme::AlternatingHalves, prior, 1);
}

} // namespace

TEST_SUITE("flow") {

TEST_CASE("build contract") {
  CHECK_THROWS_AS(build_flow(1, 2, CouplingKind::Affine, 8, MaskScheme::AlternatingHalves,
                             PriorKind::Gaussian, 1),
                  Error);
  FlowModel m = build_flow(4, 3, CouplingKind::Affine, 8, MaskScheme::AlternatingHalves,
                           PriorKind::Gaussian, 1);
  CHECK(m.couplings.size() == 3);
  // masks alternate and always mix both halves
  auto m0 = m.couplings[0].mask(4);
  auto m1 = m.couplings[1].mask(4);
  CHECK(m0 == std::vector<uint8_t>{1, 1, 0, 0});
  CHECK(m1 == std::vector<uint8_t>{0, 0, 1, 1});
  for (const auto& c : m.couplings) {
    auto mask = c.mask(4);
    int ones = 0;
    for (auto v : mask) ones += v;
    CHECK(ones >= 1);
    CHECK(ones <= 3);
  }
}

TEST_CASE("identity model log-likelihood equals prior") {
  FlowModel m = identity_model(2, PriorKind::Gaussian);
  Tensor x({1, 2}, {0.0, 0.0});
  Tensor ll = log_likelihood_values(m, x);
  CHECK(ll[0] == doctest::Approx(-std::log(2 * 3.141592653589793)).epsilon(1e-12));

  FlowModel ml = identity_model(1, PriorKind::Logistic);
  Tensor x1({1, 1}, {0.0});
  CHECK(log_likelihood_values(ml, x1)[0] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("additive layers contribute zero log-det") {
  FlowModel m = random_model(4, 4, CouplingKind::Additive, PriorKind::Logistic, 5);
  for (int i = 0; i < m.scale_log_diag.size(); ++i) m.scale_log_diag[i] = 0.0;
  Rng rng(2);
  Tensor z = prior_sample(PriorKind::Logistic, 16, 4, rng);
  Tensor ld;
  generate_values(m, z, &ld);
  for (int i = 0; i < ld.size(); ++i) CHECK(ld[i] == 0.0);
}

TEST_CASE("scale layer map and log-det") {
  FlowModel m = identity_model(2, PriorKind::Gaussian);
  m.scale_log_diag[0] = std::log(2.0);
  m.scale_log_diag[1] = std::log(3.0);
  Tensor z({1, 2}, {1.0, 1.0});
  Tensor ld;
  Tensor x = generate_values(m, z, &ld);
  CHECK(x.at(0, 0) == doctest::Approx(2.0));
  CHECK(x.at(0, 1) == doctest::Approx(3.0));
  CHECK(ld[0] == doctest::Approx(std::log(6.0)));

  Tensor ldi;
  Tensor zz = invert_values(m, x, &ldi);
  CHECK(zz.at(0, 0) == doctest::Approx(1.0));
  CHECK(zz.at(0, 1) == doctest::Approx(1.0));
  CHECK(ldi[0] == doctest::Approx(-std::log(6.0)));
}

TEST_CASE("round trip and log-det consistency across random models") {
  int idx = 0;
  for (auto kind : {CouplingKind::Additive, CouplingKind::Affine}) {
    for (int dim : {2, 3, 5}) {
      FlowModel m = random_model(dim, 4, kind, PriorKind::Gaussian, 100 + idx++);
      Rng rng(42 + idx);
      Tensor z({100, dim});
      for (int i = 0; i < z.size(); ++i) z[i] = 2.0 * rng.normal();
      Tensor ld_f, ld_i;
      Tensor x = generate_values(m, z, &ld_f);
      Tensor z2 = invert_values(m, x, &ld_i);
      for (int i = 0; i < z.size(); ++i) CHECK(std::abs(z2[i] - z[i]) < 1e-6);
      for (int i = 0; i < ld_f.size(); ++i) CHECK(std::abs(ld_f[i] + ld_i[i]) < 1e-8);
    }
  }
}

TEST_CASE("likelihood matches dense change-of-variables oracle") {
  for (int dim : {2, 3, 4}) {
    FlowModel m = random_model(dim, 3, CouplingKind::Affine, PriorKind::Gaussian, 200 + dim);
    Rng rng(7 + dim);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> x0(static_cast<size_t>(dim));
      for (auto& v : x0) v = 1.5 * rng.normal();

      auto inv = [&](const std::vector<double>& xv) {
        Tensor xt({1, dim});
        for (int j = 0; j < dim; ++j) xt[j] = xv[static_cast<size_t>(j)];
        Tensor zt = invert_values(m, xt);
        return std::vector<double>(zt.data(), zt.data() + dim);
      };

      Tensor jac = oracle::fd_jacobian(inv, x0, 1e-5);
      double det = oracle::lu_det(jac);
      Tensor xt({1, dim});
      for (int j = 0; j < dim; ++j) xt[j] = x0[static_cast<size_t>(j)];
      Tensor z = invert_values(m, xt);
      double pz = std::exp(prior_logpdf_values(PriorKind::Gaussian, z)[0]);
      double oracle_p = pz * std::abs(det);
      double model_p = std::exp(log_likelihood_values(m, xt)[0]);
      CHECK(model_p == doctest::Approx(oracle_p).epsilon(1e-4));
    }
  }
}

TEST_CASE("generate log-det matches fd jacobian determinant") {
  FlowModel m = random_model(3, 4, CouplingKind::Affine, PriorKind::Gaussian, 321);
  Rng rng(17);
  std::vector<double> z0 = {rng.normal(), rng.normal(), rng.normal()};
  auto fwd = [&](const std::vector<double>& zv) {
    Tensor zt({1, 3});
    for (int j = 0; j < 3; ++j) zt[j] = zv[static_cast<size_t>(j)];
    Tensor xt = generate_values(m, zt);
    return std::vector<double>(xt.data(), xt.data() + 3);
  };
  Tensor jac = oracle::fd_jacobian(fwd, z0, 1e-5);
  double det = oracle::lu_det(jac);
  Tensor zt({1, 3}, {z0[0], z0[1], z0[2]});
  Tensor ld;
  generate_values(m, zt, &ld);
  CHECK(ld[0] == doctest::Approx(std::log(std::abs(det))).epsilon(1e-4));
}

TEST_CASE("prior logpdf values") {
  Tensor z0({1, 1}, {0.0});
  CHECK(prior_logpdf_values(PriorKind::Gaussian, z0)[0] == doctest::Approx(-0.918939).epsilon(1e-6));

  Tensor z2({1, 2}, {0.0, 0.0});
  CHECK(prior_logpdf_values(PriorKind::Logistic, z2)[0] == doctest::Approx(-2.772589).epsilon(1e-6));

  Tensor z34({1, 2}, {3.0, 4.0});
  CHECK(prior_logpdf_values(PriorKind::Gaussian, z34)[0] == doctest::Approx(-14.337877).epsilon(1e-6));

  // extreme logistic inputs stay finite (stable softplus form)
  Tensor zbig({1, 1}, {-700.0});
  CHECK(std::isfinite(prior_logpdf_values(PriorKind::Logistic, zbig)[0]));
}

TEST_CASE("sampling is seeded and matches moments") {
  FlowModel m = identity_model(2, PriorKind::Gaussian);

  Rng r1(9), r2(9);
  Tensor a = sample_values(m, 64, r1);
  Tensor b = sample_values(m, 64, r2);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);

  Rng r3(123);
  Tensor big = sample_values(m, 10000, r3);
  for (int j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (int i = 0; i < big.dim(0); ++i) mean += big.at(i, j);
    mean /= big.dim(0);
    CHECK(std::abs(mean) < 4.0 / std::sqrt(10000.0));
  }

  FlowModel ms = identity_model(1, PriorKind::Gaussian);
  ms.scale_log_diag[0] = std::log(2.0);
  Rng r4(55);
  Tensor s = sample_values(ms, 10000, r4);
  double var = 0.0, mu = 0.0;
  for (int i = 0; i < s.size(); ++i) mu += s[i];
  mu /= s.size();
  for (int i = 0; i < s.size(); ++i) var += (s[i] - mu) * (s[i] - mu);
  var /= s.size();
  CHECK(var == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("log-likelihood gradient matches finite differences") {
  FlowModel m = random_model(2, 2, CouplingKind::Affine, PriorKind::Gaussian, 71);
  Rng rng(5);
  Tensor xb({4, 2});
  for (int i = 0; i < xb.size(); ++i) xb[i] = rng.normal();

  Params ps = m.params();
  std::vector<double> theta;
  for (const auto& p : ps)
    theta.insert(theta.end(), p.tensor->data(), p.tensor->data() + p.tensor->size());

  auto eval = [&](const std::vector<double>& th) {
    FlowModel mm = m;
    Params pp = mm.params();
    size_t k = 0;
    for (auto& p : pp)
      for (int i = 0; i < p.tensor->size(); ++i) (*p.tensor)[i] = th[k++];
    Tensor ll = log_likelihood_values(mm, xb);
    double s = 0.0;
    for (int i = 0; i < ll.size(); ++i) s += ll[i];
    return s / ll.size();
  };

  Tape tape;
  FlowGraph fgm(tape, m, true);
  Var obj = mean(fgm.log_likelihood(tape.leaf(xb, false)));
  auto grads = tape.gradients(obj, fgm.leaves());

  std::vector<double> fd = finite_diff_gradient(eval, theta, 1e-5);
  size_t k = 0;
  for (const auto& g : grads)
    for (int i = 0; i < g.size(); ++i, ++k) CHECK(oracle::close_rel(g[i], fd[k], 1e-5));
}

TEST_CASE("divergence error names the layer") {
  FlowModel m = identity_model(2, PriorKind::Gaussian);
  m.scale_log_diag[0] = 1e7; // exp overflows
  Rng rng(1);
  Tensor z = prior_sample(PriorKind::Gaussian, 2, 2, rng);
  try {
    generate_values(m, z);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::Diverged);
    CHECK(std::string(e.what()).find("scale layer") != std::string::npos);
  }
}

} // TEST_SUITE
