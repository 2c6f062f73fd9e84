#include "fg/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "fg/parallel.hpp"

namespace fg {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

// ---------------------------------------------------------------------
//  GMM / KDE
// ---------------------------------------------------------------------
double gmm_logpdf_point(const GmmBaseline& gmm, const double* x, int d) {
  if (gmm.centers.size() == 0) raise(Err::Contract, "gmm: empty centers");
  if (!(gmm.sigma > 0.0 && gmm.sigma <= 1.0)) raise(Err::Contract, "gmm: sigma must lie in (0, 1]");
  if (gmm.centers.dim(1) != d) raise(Err::Contract, "gmm: dimension mismatch");
  int m = gmm.centers.dim(0);
  double inv2s2 = 1.0 / (2.0 * gmm.sigma * gmm.sigma);

  // log-sum-exp with max subtraction
  double best = -HUGE_VAL;
  std::vector<double> expo(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double q = 0.0;
    const double* c = gmm.centers.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      double t = x[j] - c[j];
      q += t * t;
    }
    expo[static_cast<size_t>(i)] = -q * inv2s2;
    best = std::max(best, expo[static_cast<size_t>(i)]);
  }
  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += std::exp(expo[static_cast<size_t>(i)] - best);
  double logmix = best + std::log(acc) - std::log(static_cast<double>(m));
  return logmix - 0.5 * d * (kLog2Pi + 2.0 * std::log(gmm.sigma));
}

Tensor gmm_logpdf(const GmmBaseline& gmm, const Tensor& x) {
  if (x.ndim() != 2) raise(Err::Contract, "gmm_logpdf: x must be [n, d]");
  int n = x.dim(0), d = x.dim(1);
  Tensor out({n});
  parallel_for(n, [&](int i) { out[i] = gmm_logpdf_point(gmm, x.data() + static_cast<size_t>(i) * d, d); });
  return out;
}

Tensor sample_gmm(const GmmBaseline& gmm, int n, Rng& rng) {
  int m = gmm.centers.dim(0), d = gmm.centers.dim(1);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    int c = static_cast<int>(rng.below(static_cast<uint64_t>(m)));
    for (int j = 0; j < d; ++j) out.at(i, j) = gmm.centers.at(c, j) + gmm.sigma * rng.normal();
  }
  return out;
}

std::vector<double> bandwidth_grid(int n, double lo, double hi) {
  if (n < 1 || !(lo > 0.0) || !(hi > lo) || hi > 1.0) raise(Err::Contract, "bandwidth grid must lie in (0, 1]");
  std::vector<double> g(static_cast<size_t>(n));
  if (n == 1) {
    g[0] = hi;
    return g;
  }
  double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1));
  g.back() = hi;
  return g;
}

BandwidthCurve gmm_bandwidth_search(const Tensor& centers, const Tensor& val_set,
                                    const std::vector<double>& grid) {
  if (grid.empty()) raise(Err::Contract, "bandwidth search: empty grid");
  BandwidthCurve curve;
  curve.sigma = grid;
  std::sort(curve.sigma.begin(), curve.sigma.end());
  curve.val_nll.resize(curve.sigma.size());
  parallel_for(static_cast<int>(curve.sigma.size()), [&](int gi) {
    GmmBaseline gmm{centers, curve.sigma[static_cast<size_t>(gi)]};
    Tensor ll = gmm_logpdf(gmm, val_set);
    double s = 0.0;
    for (int i = 0; i < ll.size(); ++i) s -= ll[i];
    curve.val_nll[static_cast<size_t>(gi)] = s / ll.size();
  });
  curve.best = 0;
  for (size_t i = 1; i < curve.sigma.size(); ++i)
    if (curve.val_nll[i] < curve.val_nll[static_cast<size_t>(curve.best)]) curve.best = static_cast<int>(i);
  return curve;
}

Tensor kde_estimate(const Tensor& samples, const Tensor& x_eval, double sigma) {
  if (samples.size() == 0) raise(Err::Contract, "kde: empty sample set");
  GmmBaseline parzen{samples, sigma};
  return gmm_logpdf(parzen, x_eval);
}

// ---------------------------------------------------------------------
//  AIS
// ---------------------------------------------------------------------
double log_mean_exp(const std::vector<double>& v) {
  if (v.empty()) raise(Err::Contract, "log_mean_exp of empty set");
  double best = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - best);
  return best + std::log(acc / static_cast<double>(v.size()));
}

std::vector<double> ais_schedule(int n_temps) {
  if (n_temps < 1) raise(Err::Contract, "ais: need at least one temperature");
  std::vector<double> beta(static_cast<size_t>(n_temps) + 1);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double lo = sig(-4.0), hi = sig(4.0);
  for (int t = 0; t <= n_temps; ++t) {
    double u = static_cast<double>(t) / n_temps;
    beta[static_cast<size_t>(t)] = (sig(4.0 * (2.0 * u - 1.0)) - lo) / (hi - lo);
  }
  beta.front() = 0.0;
  beta.back() = 1.0;
  return beta;
}

namespace {

// log N(x; G(z), sigma^2 I) for every chain row of z.
std::vector<double> obs_loglik(const FlowModel& model, const Tensor& z, const double* x, double sigma_obs) {
  Tensor gx = generate_values(model, z);
  int c = z.dim(0), d = z.dim(1);
  double inv2s2 = 1.0 / (2.0 * sigma_obs * sigma_obs);
  double norm = -0.5 * d * (kLog2Pi + 2.0 * std::log(sigma_obs));
  std::vector<double> out(static_cast<size_t>(c));
  for (int i = 0; i < c; ++i) {
    double q = 0.0;
    for (int j = 0; j < d; ++j) {
      double t = x[j] - gx.at(i, j);
      q += t * t;
    }
    out[static_cast<size_t>(i)] = norm - q * inv2s2;
  }
  return out;
}

std::vector<double> prior_rows(const FlowModel& model, const Tensor& z) {
  Tensor lp = prior_logpdf_values(model.prior, z);
  return std::vector<double>(lp.data(), lp.data() + lp.size());
}

} // namespace

AisResult ais_estimate(const FlowModel& model, const double* x, AisConfig cfg, Rng& rng) {
  if (cfg.n_chains < 1 || cfg.n_temps < 1 || cfg.mh_sweeps < 0 || !(cfg.sigma_obs > 0))
    raise(Err::Contract, "ais: invalid configuration");
  int c = cfg.n_chains, d = model.dim;
  std::vector<double> beta = ais_schedule(cfg.n_temps);

  Tensor z = prior_sample(model.prior, c, d, rng);
  std::vector<double> log_l = obs_loglik(model, z, x, cfg.sigma_obs);
  std::vector<double> log_p = prior_rows(model, z);
  std::vector<double> logw(static_cast<size_t>(c), 0.0);
  std::vector<int> accepted(static_cast<size_t>(c), 0);

  // The annealed target narrows from the prior toward the posterior; the
  // proposal tracks that width and lands on the configured step at beta=1.
  double s2 = cfg.sigma_obs * cfg.sigma_obs;
  double width_end = 1.0 / std::sqrt(1.0 + 1.0 / s2);

  Tensor prop({c, d});
  for (size_t t = 1; t < beta.size(); ++t) {
    double db = beta[t] - beta[t - 1];
    for (int i = 0; i < c; ++i) logw[static_cast<size_t>(i)] += db * log_l[static_cast<size_t>(i)];

    double step_t = cfg.step * (1.0 / std::sqrt(1.0 + beta[t] / s2)) / width_end;
    for (int sweep = 0; sweep < cfg.mh_sweeps; ++sweep) {
      for (int i = 0; i < prop.size(); ++i) prop[i] = z[i] + step_t * rng.normal();
      std::vector<double> log_l2 = obs_loglik(model, prop, x, cfg.sigma_obs);
      std::vector<double> log_p2 = prior_rows(model, prop);
      for (int i = 0; i < c; ++i) {
        double cur = log_p[static_cast<size_t>(i)] + beta[t] * log_l[static_cast<size_t>(i)];
        double nxt = log_p2[static_cast<size_t>(i)] + beta[t] * log_l2[static_cast<size_t>(i)];
        double u = rng.uniform_open();
        if (std::log(u) < nxt - cur) {
          for (int j = 0; j < d; ++j) z.at(i, j) = prop.at(i, j);
          log_l[static_cast<size_t>(i)] = log_l2[static_cast<size_t>(i)];
          log_p[static_cast<size_t>(i)] = log_p2[static_cast<size_t>(i)];
          ++accepted[static_cast<size_t>(i)];
        }
      }
    }
  }

  AisResult res;
  res.chain_logw = logw;
  res.log_p = log_mean_exp(logw);
  if (cfg.mh_sweeps > 0)
    for (int a : accepted)
      if (a == 0) ++res.stuck_chains;
  return res;
}

// ---------------------------------------------------------------------
//  Jacobian and singular values
// ---------------------------------------------------------------------
Tensor flow_jacobian(const FlowModel& model, const Tensor& z) {
  if (!(z.ndim() == 1 && z.dim(0) == model.dim) && !(z.ndim() == 2 && z.dim(0) == 1 && z.dim(1) == model.dim))
    raise(Err::Contract, "flow_jacobian: z must be a single point of width dim");
  int d = model.dim;
  Tensor zrow({1, d});
  for (int j = 0; j < d; ++j) zrow[j] = z[j];

  Tape tape;
  FlowGraph g(tape, model, false);
  Var zv = tape.leaf(zrow, true);
  Var x = g.generate(zv);
  Tensor jac({d, d});
  for (int i = 0; i < d; ++i) {
    Var xi = sum(slice(x, 1, i, 1));
    std::vector<int> gid = tape.backward(xi, {zv.id});
    if (gid[0] < 0) raise(Err::Numeric, "flow_jacobian: output does not reach the input");
    const Tensor& row = tape.val(gid[0]);
    for (int j = 0; j < d; ++j) jac.at(i, j) = row[j];
  }
  if (!jac.all_finite()) raise(Err::Numeric, "flow_jacobian: non-finite entries");
  return jac;
}

std::vector<double> singular_values(const Tensor& m) {
  if (m.ndim() != 2 || m.dim(0) != m.dim(1)) raise(Err::Contract, "singular_values: matrix must be square");
  if (!m.all_finite()) raise(Err::Contract, "singular_values: matrix must be finite");
  int n = m.dim(0);
  Tensor a = m; // columns rotated in place

  // One-sided cyclic Jacobi: each rotation zeroes one off-diagonal entry
  // of the implicit Gram matrix A^T A. Working on the columns instead of
  // the explicit product keeps small singular values accurate.
  const double tol = 1e-12;
  const int max_sweeps = 100;
  double off = 0.0;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    off = 0.0;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < n; ++i) {
          double vp = a.at(i, p), vq = a.at(i, q);
          app += vp * vp;
          aqq += vq * vq;
          apq += vp * vq;
        }
        if (apq == 0.0 || app * aqq == 0.0) continue;
        off = std::max(off, std::abs(apq) / std::sqrt(app * aqq));
        if (apq * apq <= tol * tol * app * aqq) continue;
        converged = false;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double cs = 1.0 / std::sqrt(1.0 + t * t);
        double sn = cs * t;
        for (int i = 0; i < n; ++i) {
          double vp = a.at(i, p), vq = a.at(i, q);
          a.at(i, p) = cs * vp - sn * vq;
          a.at(i, q) = sn * vp + cs * vq;
        }
      }
    }
  }
  if (!converged) raise(Err::Numeric, strf("singular_values: no convergence, relative off-diagonal %.3e", off));

  std::vector<double> sv(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a.at(i, j) * a.at(i, j);
    sv[static_cast<size_t>(j)] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

double SpectralReport::quantile_log_sv(double p) const {
  if (pooled_log_sv.empty()) raise(Err::Contract, "empty spectral report");
  double pos = p * (static_cast<double>(pooled_log_sv.size()) - 1.0);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, pooled_log_sv.size() - 1);
  double w = pos - static_cast<double>(lo);
  return (1.0 - w) * pooled_log_sv[lo] + w * pooled_log_sv[hi];
}

SpectralReport spectral_report(const FlowModel& model, int n_z, uint64_t seed) {
  if (n_z < 1) raise(Err::Contract, "spectral_report: n_z must be positive");
  Rng rng = Rng::derive(seed, "spectral");
  Tensor zs = prior_sample(model.prior, n_z, model.dim, rng);

  SpectralReport rep;
  rep.per_z_sv.resize(static_cast<size_t>(n_z));
  parallel_for(n_z, [&](int i) {
    Tensor z({model.dim});
    for (int j = 0; j < model.dim; ++j) z[j] = zs.at(i, j);
    rep.per_z_sv[static_cast<size_t>(i)] = singular_values(flow_jacobian(model, z));
  });

  double acc = 0.0;
  for (const auto& sv : rep.per_z_sv) {
    double ld = 0.0;
    for (double s : sv) ld += std::log(std::max(s, 1e-300));
    acc += ld;
    for (double s : sv) rep.pooled_log_sv.push_back(std::log(std::max(s, 1e-300)));
  }
  rep.avg_logdet = acc / static_cast<double>(n_z);
  std::sort(rep.pooled_log_sv.begin(), rep.pooled_log_sv.end());
  rep.cdf.resize(rep.pooled_log_sv.size());
  for (size_t i = 0; i < rep.cdf.size(); ++i)
    rep.cdf[i] = static_cast<double>(i + 1) / static_cast<double>(rep.cdf.size());
  return rep;
}

// ---------------------------------------------------------------------
//  Surrogate classifier and scores
// ---------------------------------------------------------------------
Tensor Classifier::predict_probs(const Tensor& x) const {
  Tape tape;
  auto leaves = net.lift(tape, false);
  Var logits = net.forward(tape.leaf(x, false), leaves);
  const Tensor& lv = logits.val();
  int n = lv.dim(0), k = lv.dim(1);
  Tensor probs({n, k});
  for (int i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (int j = 0; j < k; ++j) mx = std::max(mx, lv.at(i, j));
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += std::exp(lv.at(i, j) - mx);
    for (int j = 0; j < k; ++j) probs.at(i, j) = std::exp(lv.at(i, j) - mx) / acc;
  }
  return probs;
}

double classifier_accuracy(const Classifier& clf, const Tensor& x, const std::vector<int>& y) {
  Tensor probs = clf.predict_probs(x);
  int n = x.dim(0), hit = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int j = 1; j < clf.n_classes; ++j)
      if (probs.at(i, j) > probs.at(i, arg)) arg = j;
    if (arg == y[static_cast<size_t>(i)]) ++hit;
  }
  return static_cast<double>(hit) / n;
}

Classifier train_surrogate_classifier(const Tensor& x, const std::vector<int>& y, int n_classes,
                                      const Tensor& x_val, const std::vector<int>& y_val,
                                      const ClassifierConfig& cfg, uint64_t seed) {
  if (x.ndim() != 2 || static_cast<size_t>(x.dim(0)) != y.size())
    raise(Err::Contract, "classifier: sample/label count mismatch");
  for (int v : y)
    if (v < 0 || v >= n_classes) raise(Err::Contract, "classifier: label out of range");

  int d = x.dim(1), n = x.dim(0);
  Classifier clf;
  clf.n_classes = n_classes;
  Rng rng = Rng::derive(seed, "classifier");
  clf.net.build({d, cfg.hidden, n_classes}, Activation::Tanh, rng, /*zero_last=*/false);

  Params params;
  clf.net.collect(params, "clf");
  Adam opt({cfg.lr, 0.9, 0.999, 1e-8}, params);

  int bs = std::min(cfg.batch_size, n);
  Tensor bx({bs, d});
  Tensor onehot({bs, n_classes});
  for (int it = 0; it < cfg.n_iters; ++it) {
    for (int i = 0; i < onehot.size(); ++i) onehot[i] = 0.0;
    for (int i = 0; i < bs; ++i) {
      int src = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      for (int j = 0; j < d; ++j) bx.at(i, j) = x.at(src, j);
      onehot.at(i, y[static_cast<size_t>(src)]) = 1.0;
    }

    Tape tape;
    auto leaves = clf.net.lift(tape, true);
    Var logits = clf.net.forward(tape.leaf(bx, false), leaves);

    // numerically stable cross entropy: constant row-max shift
    const Tensor& lv = logits.val();
    Tensor shift({bs, n_classes});
    Tensor rowmax({bs});
    for (int i = 0; i < bs; ++i) {
      double mx = -HUGE_VAL;
      for (int j = 0; j < n_classes; ++j) mx = std::max(mx, lv.at(i, j));
      rowmax[i] = mx;
      for (int j = 0; j < n_classes; ++j) shift.at(i, j) = mx;
    }
    Var shifted = sub(logits, tape.constant(shift));
    Var lse = add(vlog(sum_axis(vexp(shifted), 1)), tape.constant(rowmax));
    Var picked = sum_axis(mul(logits, tape.constant(onehot)), 1);
    Var loss = mean(sub(lse, picked));

    std::vector<Var> wrt(leaves.begin(), leaves.end());
    std::vector<Tensor> grads = tape.gradients(loss, wrt);
    opt.step(params, grads);

    if ((it + 1) % 250 == 0 && classifier_accuracy(clf, x_val, y_val) >= cfg.min_accuracy) break;
  }

  double acc = classifier_accuracy(clf, x_val, y_val);
  if (acc < cfg.min_accuracy)
    raise(Err::Config, strf("surrogate classifier reached %.3f held-out accuracy, below the %.3f floor", acc,
                            cfg.min_accuracy));
  return clf;
}

namespace {

double kl_rows_mean(const Tensor& probs, const std::vector<double>& q) {
  int n = probs.dim(0), k = probs.dim(1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double kl = 0.0;
    for (int j = 0; j < k; ++j) {
      double p = probs.at(i, j);
      if (p <= 0.0) continue;
      kl += p * (std::log(std::max(p, 1e-12)) - std::log(std::max(q[static_cast<size_t>(j)], 1e-12)));
    }
    acc += kl;
  }
  return acc / n;
}

std::vector<double> marginal(const Tensor& probs) {
  int n = probs.dim(0), k = probs.dim(1);
  std::vector<double> q(static_cast<size_t>(k), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) q[static_cast<size_t>(j)] += probs.at(i, j);
  for (double& v : q) v /= n;
  return q;
}

} // namespace

double inception_score_from_probs(const Tensor& probs) {
  if (probs.ndim() != 2 || probs.dim(0) < 1) raise(Err::Contract, "inception score: probs must be [n, k]");
  return std::exp(kl_rows_mean(probs, marginal(probs)));
}

double mode_score_from_probs(const Tensor& probs, const std::vector<double>& p_star) {
  if (probs.ndim() != 2 || probs.dim(0) < 1) raise(Err::Contract, "mode score: probs must be [n, k]");
  if (static_cast<size_t>(probs.dim(1)) != p_star.size()) raise(Err::Contract, "mode score: p* size mismatch");
  std::vector<double> q = marginal(probs);
  double kl1 = kl_rows_mean(probs, p_star);
  double kl2 = 0.0;
  for (size_t j = 0; j < p_star.size(); ++j) {
    double p = p_star[j];
    if (p <= 0.0) continue;
    kl2 += p * (std::log(std::max(p, 1e-12)) - std::log(std::max(q[j], 1e-12)));
  }
  return std::exp(kl1 - kl2);
}

double inception_score(const Classifier& clf, const Tensor& samples) {
  return inception_score_from_probs(clf.predict_probs(samples));
}

double mode_score(const Classifier& clf, const Tensor& samples, const std::vector<double>& p_star) {
  return mode_score_from_probs(clf.predict_probs(samples), p_star);
}

} // namespace fg
