#pragma once

#include <cstdint>
#include <vector>

#include "fg/flow.hpp"
#include "fg/nets.hpp"
#include "fg/optim.hpp"
#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

// ---------------------------------------------------------------------
//  Mixture-of-Gaussians density (GMM baseline and Parzen/KDE estimator
//  share this: KDE is the same mixture with generated samples as centers).
// ---------------------------------------------------------------------
struct GmmBaseline {
  Tensor centers; // [m, d]
  double sigma = 1.0;
};

double gmm_logpdf_point(const GmmBaseline& gmm, const double* x, int d);
Tensor gmm_logpdf(const GmmBaseline& gmm, const Tensor& x); // [n] nats
Tensor sample_gmm(const GmmBaseline& gmm, int n, Rng& rng);

struct BandwidthCurve {
  std::vector<double> sigma;   // grid, ascending
  std::vector<double> val_nll; // mean validation NLL per grid point
  int best = -1;               // argmin, ties toward smaller sigma
  double best_sigma() const { return sigma[static_cast<size_t>(best)]; }
};

std::vector<double> bandwidth_grid(int n, double lo, double hi); // log-spaced in (lo, hi]
BandwidthCurve gmm_bandwidth_search(const Tensor& centers, const Tensor& val_set,
                                    const std::vector<double>& grid);

Tensor kde_estimate(const Tensor& samples, const Tensor& x_eval, double sigma); // [n] nats

// ---------------------------------------------------------------------
//  Annealed importance sampling under a Gaussian observation model
// ---------------------------------------------------------------------
struct AisConfig {
  int n_chains = 64;
  int n_temps = 1000;   // number of annealing temperatures after beta_0 = 0
  int mh_sweeps = 8;    // MH sweeps per temperature
  double step = 0.05;   // gaussian proposal std
  double sigma_obs = 0.1;
};

struct AisResult {
  double log_p = 0.0;               // log-mean-exp over chains
  std::vector<double> chain_logw;   // per-chain diagnostics
  int stuck_chains = 0;             // chains with zero accepted moves
};

// Sigmoid-spaced schedule 0 = beta_0 < ... < beta_T = 1.
std::vector<double> ais_schedule(int n_temps);
AisResult ais_estimate(const FlowModel& model, const double* x, AisConfig cfg, Rng& rng);
double log_mean_exp(const std::vector<double>& v);

// ---------------------------------------------------------------------
//  Jacobian spectra
// ---------------------------------------------------------------------
Tensor flow_jacobian(const FlowModel& model, const Tensor& z); // [d, d], dG/dz at one z

// Singular values via cyclic Jacobi rotations applied one-sidedly to the
// columns (implicit Gram eigen-decomposition), descending order.
std::vector<double> singular_values(const Tensor& m);

struct SpectralReport {
  std::vector<std::vector<double>> per_z_sv; // descending per z
  std::vector<double> pooled_log_sv;         // ascending
  std::vector<double> cdf;                   // fraction <= pooled_log_sv[i]
  double avg_logdet = 0.0;                   // mean over z of sum(log sv)
  double quantile_log_sv(double p) const;
};

SpectralReport spectral_report(const FlowModel& model, int n_z, uint64_t seed);

// ---------------------------------------------------------------------
//  Sample-quality scores with a surrogate classifier
// ---------------------------------------------------------------------
struct Classifier {
  DenseNet net; // [d, hidden, K] softmax head
  int n_classes = 0;

  Tensor predict_probs(const Tensor& x) const; // [n, K], rows sum to 1
};

struct ClassifierConfig {
  int hidden = 32;
  int n_iters = 2000;
  int batch_size = 128;
  double lr = 1e-2;
  double min_accuracy = 0.95; // on held-out data; Config error if missed
};

Classifier train_surrogate_classifier(const Tensor& x, const std::vector<int>& y, int n_classes,
                                      const Tensor& x_val, const std::vector<int>& y_val,
                                      const ClassifierConfig& cfg, uint64_t seed);
double classifier_accuracy(const Classifier& clf, const Tensor& x, const std::vector<int>& y);

// Score formulas over conditional label distributions (rows of probs).
double inception_score_from_probs(const Tensor& probs);
double mode_score_from_probs(const Tensor& probs, const std::vector<double>& p_star);
double inception_score(const Classifier& clf, const Tensor& samples);
double mode_score(const Classifier& clf, const Tensor& samples, const std::vector<double>& p_star);

} // namespace fg
