#include "fg/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fg/evaluation.hpp"
#include "fg/parallel.hpp"
#include "fg/svg.hpp"

namespace fs = std::filesystem;

namespace fg {

namespace {

uint64_t derive_seed(uint64_t seed, const std::string& label) {
  uint64_t h = 1469598103934665603ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return seed ^ h;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& file) {
  return (fs::path(cfg.str("out_dir")) / file).string();
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.str("out_dir"), ec);
  if (ec) raise(Err::Io, "cannot create output directory '" + cfg.str("out_dir") + "'");
}

ClassifierConfig classifier_config_from(const ExperimentConfig& cfg) {
  ClassifierConfig c;
  c.hidden = static_cast<int>(cfg.integer("classifier_hidden"));
  c.n_iters = static_cast<int>(cfg.integer("classifier_iters"));
  c.lr = cfg.real("classifier_lr");
  c.min_accuracy = cfg.real("classifier_min_acc");
  return c;
}

Classifier classifier_from_config(const ExperimentConfig& cfg, const Dataset& ds) {
  if (!ds.has_labels()) raise(Err::Config, "dataset has no labels; cannot train the surrogate classifier");
  return train_surrogate_classifier(ds.train, ds.train_labels, ds.n_classes, ds.val, ds.val_labels,
                                    classifier_config_from(cfg), static_cast<uint64_t>(cfg.integer("seed")));
}

} // namespace

// ---------------------------------------------------------------------
//  Config assembly
// ---------------------------------------------------------------------
Dataset dataset_from_config(const ExperimentConfig& cfg) {
  uint64_t seed = static_cast<uint64_t>(cfg.integer("seed"));
  const std::string& name = cfg.str("dataset");
  if (name != "idx") return make_synthetic(name, static_cast<int>(cfg.integer("data_n")), seed);

  if (cfg.str("idx_images").empty()) raise(Err::Config, "dataset=idx requires idx_images");
  Dataset ds = load_idx_dataset(cfg.str("idx_images"), cfg.str("idx_labels"), cfg.str("idx_test_images"),
                                cfg.str("idx_test_labels"), cfg.boolean("idx_pool14"), seed);
  // Dequantize once at ingestion; exact NLLs are then reported on the
  // continuous data with the d*ln(256) bits/dim correction.
  ds.train = dequantize_and_scale(ds.train, derive_seed(seed, "split:train"));
  ds.val = dequantize_and_scale(ds.val, derive_seed(seed, "split:val"));
  ds.test = dequantize_and_scale(ds.test, derive_seed(seed, "split:test"));
  ds.scale_correction = ds.dim() * std::log(256.0);
  ds.discrete = false;
  return ds;
}

FlowModel flow_from_config(const ExperimentConfig& cfg, int dim) {
  CouplingKind kind = cfg.str("flow_kind") == "additive" ? CouplingKind::Additive : CouplingKind::Affine;
  PriorKind prior = cfg.str("prior") == "logistic" ? PriorKind::Logistic : PriorKind::Gaussian;
  FlowModel m = build_flow(dim, static_cast<int>(cfg.integer("n_layers")), kind,
                           static_cast<int>(cfg.integer("conditioner_width")), MaskScheme::AlternatingHalves,
                           prior, static_cast<uint64_t>(cfg.integer("seed")));
  double clampv = cfg.real("log_scale_clamp");
  for (auto& c : m.couplings) c.log_scale_clamp = clampv;
  return m;
}

Critic critic_from_config(const ExperimentConfig& cfg, int dim) {
  return build_critic(dim, cfg.int_list("critic_widths"), activation_from_string(cfg.str("critic_activation")),
                      static_cast<uint64_t>(cfg.integer("seed")));
}

TrainConfig train_config_from(const ExperimentConfig& cfg) {
  TrainConfig tc;
  const std::string& obj = cfg.str("objective");
  tc.objective = obj == "mle" ? Objective::Mle : obj == "adv" ? Objective::Adv : Objective::Hybrid;
  tc.lambda = cfg.real("lambda");
  tc.divergence = cfg.str("divergence") == "jsd" ? Divergence::Jsd : Divergence::Wgan;
  tc.penalty_coeff = cfg.real("penalty_coeff");
  tc.n_critic = cfg.is_auto("n_critic") ? (tc.divergence == Divergence::Wgan ? 5 : 1)
                                        : static_cast<int>(cfg.integer("n_critic"));
  bool mle = tc.objective == Objective::Mle;
  tc.gen_adam.lr = cfg.is_auto("adam_lr") ? (mle ? 1e-3 : 1e-4) : cfg.real("adam_lr");
  tc.gen_adam.beta1 = cfg.is_auto("adam_beta1") ? (mle ? 0.9 : 0.5) : cfg.real("adam_beta1");
  tc.gen_adam.beta2 = cfg.is_auto("adam_beta2") ? (mle ? 0.999 : 0.9) : cfg.real("adam_beta2");
  tc.gen_adam.eps = cfg.real("adam_eps");
  tc.critic_adam = {cfg.real("critic_lr"), cfg.real("critic_beta1"), cfg.real("critic_beta2"),
                    cfg.real("adam_eps")};
  tc.batch_size = static_cast<int>(cfg.integer("batch_size"));
  tc.n_iters = cfg.integer("n_iters");
  tc.eval_every = cfg.integer("eval_every");
  tc.seed = static_cast<uint64_t>(cfg.integer("seed"));
  tc.eval_batch = static_cast<int>(cfg.integer("eval_batch"));
  tc.train_eval_n = static_cast<int>(cfg.integer("train_eval_n"));
  tc.score_n = static_cast<int>(cfg.integer("score_n"));
  tc.compute_scores = cfg.boolean("compute_scores");
  tc.log_wallclock = cfg.boolean("log_wallclock");
  tc.classifier = classifier_config_from(cfg);
  return tc;
}

std::string checkpoint_path_from(const ExperimentConfig& cfg) {
  if (!cfg.str("checkpoint").empty()) return cfg.str("checkpoint");
  return out_path(cfg, "ckpt_final.bin");
}

// ---------------------------------------------------------------------
//  Checkpoint assembly / restore
// ---------------------------------------------------------------------
Checkpoint checkpoint_of(Trainer& tr, const std::string& config_echo) {
  Checkpoint ck;
  ck.config_echo = config_echo;
  ck.iteration = tr.iteration();
  ck.streams.emplace_back("data", tr.data_rng().state());
  ck.streams.emplace_back("prior", tr.prior_rng().state());
  ck.streams.emplace_back("interp", tr.interp_rng().state());

  auto add_params = [&ck](const std::string& prefix, const Params& params) {
    for (const auto& p : params) ck.blocks.emplace_back(prefix + p.name, *p.tensor);
  };
  auto add_adam = [&ck](const std::string& prefix, Adam& opt, const Params& params) {
    for (size_t i = 0; i < params.size(); ++i) {
      ck.blocks.emplace_back(prefix + ".m." + params[i].name, opt.first_moments()[i]);
      ck.blocks.emplace_back(prefix + ".v." + params[i].name, opt.second_moments()[i]);
    }
    ck.blocks.emplace_back(prefix + ".t", Tensor::scalar(static_cast<double>(opt.timestep())));
  };
  add_params("model.", tr.model().params());
  add_params("", tr.critic().params()); // critic params are already "critic.*"
  add_adam("adam_g", tr.gen_opt(), tr.model().params());
  add_adam("adam_c", tr.critic_opt(), tr.critic().params());
  return ck;
}

namespace {

void restore_params(const Checkpoint& ck, const std::string& prefix, const Params& params) {
  for (const auto& p : params) {
    const Tensor* t = ck.find(prefix + p.name);
    if (!t) raise(Err::Format, "checkpoint is missing block '" + prefix + p.name + "'");
    if (!t->same_shape(*p.tensor))
      raise(Err::Format, strf("checkpoint block '%s%s' has shape %s, config wants %s", prefix.c_str(),
                              p.name.c_str(), t->shape_str().c_str(), p.tensor->shape_str().c_str()));
    *p.tensor = *t;
  }
}

void restore_adam(const Checkpoint& ck, const std::string& prefix, Adam& opt, const Params& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor* m = ck.find(prefix + ".m." + params[i].name);
    const Tensor* v = ck.find(prefix + ".v." + params[i].name);
    if (!m || !v) raise(Err::Format, "checkpoint is missing optimizer state for '" + params[i].name + "'");
    opt.first_moments()[i] = *m;
    opt.second_moments()[i] = *v;
  }
  const Tensor* t = ck.find(prefix + ".t");
  if (!t) raise(Err::Format, "checkpoint is missing optimizer timestep");
  opt.set_timestep(static_cast<int64_t>((*t)[0]));
}

} // namespace

void restore_trainer(Trainer& tr, const Checkpoint& ck) {
  restore_params(ck, "model.", tr.model().params());
  restore_params(ck, "", tr.critic().params());
  restore_adam(ck, "adam_g", tr.gen_opt(), tr.model().params());
  restore_adam(ck, "adam_c", tr.critic_opt(), tr.critic().params());
  for (const char* name : {"data", "prior", "interp"}) {
    const auto* st = ck.find_stream(name);
    if (!st) raise(Err::Format, strf("checkpoint is missing the '%s' rng stream", name));
    if (std::string(name) == "data")
      tr.data_rng().set_state(*st);
    else if (std::string(name) == "prior")
      tr.prior_rng().set_state(*st);
    else
      tr.interp_rng().set_state(*st);
  }
  tr.set_iteration(ck.iteration);
}

FlowModel model_from_checkpoint(const Checkpoint& ck) {
  ExperimentConfig cfg = parse_config_text(ck.config_echo, "checkpoint");
  const Tensor* diag = ck.find("model.scale.log_diag");
  if (!diag) raise(Err::Format, "checkpoint has no model.scale.log_diag block");
  FlowModel m = flow_from_config(cfg, diag->dim(0));
  restore_params(ck, "model.", m.params());
  return m;
}

double mean_exact_nll(const FlowModel& model, const Tensor& x, int batch) {
  int n = x.dim(0), d = x.dim(1);
  int bs = std::max(1, batch);
  int nb = (n + bs - 1) / bs;
  std::vector<double> sums(static_cast<size_t>(nb), 0.0);
  parallel_for(nb, [&](int b) {
    int lo = b * bs, hi = std::min(n, lo + bs);
    Tensor chunk({hi - lo, d});
    for (int i = lo; i < hi; ++i)
      for (int j = 0; j < d; ++j) chunk.at(i - lo, j) = x.at(i, j);
    Tensor ll = log_likelihood_values(model, chunk);
    double s = 0.0;
    for (int i = 0; i < ll.size(); ++i) s -= ll[i];
    sums[static_cast<size_t>(b)] = s;
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / n;
}

// ---------------------------------------------------------------------
//  Subcommands
// ---------------------------------------------------------------------
namespace {

FlowModel load_model(const ExperimentConfig& cfg) {
  return model_from_checkpoint(load_checkpoint_file(checkpoint_path_from(cfg)));
}

void cmd_train(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  TrainConfig tc = train_config_from(cfg);
  Trainer tr(flow_from_config(cfg, ds.dim()), critic_from_config(cfg, ds.dim()), ds, tc);

  if (!cfg.str("resume").empty()) restore_trainer(tr, load_checkpoint_file(cfg.str("resume")));

  std::string echo = cfg.echo();
  int64_t ckpt_every = cfg.integer("checkpoint_every");
  TrainResult res = tr.run([&](Trainer& t, int64_t iter) {
    if (ckpt_every > 0 && iter > 0 && iter % ckpt_every == 0)
      save_checkpoint_file(out_path(cfg, strf("ckpt_iter%lld.bin", static_cast<long long>(iter))),
                           checkpoint_of(t, echo));
  });

  save_checkpoint_file(out_path(cfg, "ckpt_final.bin"), checkpoint_of(tr, echo));
  write_text_file(out_path(cfg, "metrics.csv"), tr.log().to_csv());
  if (res.diverged) raise(Err::Diverged, "training diverged: " + res.message + " (checkpoint and partial log saved)");
}

void cmd_eval_nll(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  FlowModel model = load_model(cfg);
  if (model.dim != ds.dim()) raise(Err::Config, "checkpoint model dimension does not match the dataset");
  int batch = static_cast<int>(cfg.integer("eval_batch"));

  std::string csv = "split,n,mean_nll_nats,mean_bpd\n";
  struct Row {
    const char* name;
    const Tensor* x;
  } rows[] = {{"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& r : rows) {
    double nll = mean_exact_nll(model, *r.x, batch);
    csv += strf("%s,%d,%s,%s\n", r.name, r.x->dim(0), csv_double(nll).c_str(),
                csv_double(nats_to_bits_per_dim(nll, ds.dim(), ds.scale_correction)).c_str());
  }
  write_text_file(out_path(cfg, "eval_nll.csv"), csv);
}

void cmd_eval_gmm(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  uint64_t seed = static_cast<uint64_t>(cfg.integer("seed"));

  std::vector<double> grid = bandwidth_grid(static_cast<int>(cfg.integer("bandwidth_grid_n")),
                                            cfg.real("bandwidth_min"), cfg.real("bandwidth_max"));
  BandwidthCurve curve = gmm_bandwidth_search(ds.train, ds.val, grid);

  std::vector<double> mode(curve.sigma.size(), std::nan(""));
  if (ds.has_labels()) {
    Classifier clf = classifier_from_config(cfg, ds);
    std::vector<double> p_star = ds.train_label_dist();
    int n_score = static_cast<int>(cfg.integer("gmm_score_n"));
    parallel_for(static_cast<int>(curve.sigma.size()), [&](int i) {
      GmmBaseline gmm{ds.train, curve.sigma[static_cast<size_t>(i)]};
      Rng rng = Rng::derive(seed, "gmm_score:" + std::to_string(i));
      mode[static_cast<size_t>(i)] = mode_score(clf, sample_gmm(gmm, n_score, rng), p_star);
    });
  }

  std::string csv = "sigma,val_nll,mode_score\n";
  for (size_t i = 0; i < curve.sigma.size(); ++i)
    csv += csv_double(curve.sigma[i]) + "," + csv_double(curve.val_nll[i]) + "," + csv_double(mode[i]) + "\n";
  write_text_file(out_path(cfg, "gmm_sweep.csv"), csv);
}

void cmd_eval_kde(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  FlowModel model = load_model(cfg);
  uint64_t seed = static_cast<uint64_t>(cfg.integer("seed"));

  Rng rng = Rng::derive(seed, "kde_sample");
  Tensor samples = sample_values(model, static_cast<int>(cfg.integer("kde_samples")), rng);

  std::vector<double> grid = bandwidth_grid(static_cast<int>(cfg.integer("bandwidth_grid_n")),
                                            cfg.real("bandwidth_min"), cfg.real("bandwidth_max"));
  BandwidthCurve curve = gmm_bandwidth_search(samples, ds.val, grid);
  double sigma = curve.best_sigma();

  std::string sweep = "sigma,val_nll\n";
  for (size_t i = 0; i < curve.sigma.size(); ++i)
    sweep += csv_double(curve.sigma[i]) + "," + csv_double(curve.val_nll[i]) + "\n";
  write_text_file(out_path(cfg, "kde_sweep.csv"), sweep);

  int batch = static_cast<int>(cfg.integer("eval_batch"));
  int n_eval = std::min(static_cast<int>(cfg.integer("kde_eval_n")), ds.test.dim(0));
  Tensor test_subset({n_eval, ds.dim()});
  for (int i = 0; i < n_eval; ++i)
    for (int j = 0; j < ds.dim(); ++j) test_subset.at(i, j) = ds.test.at(i, j);

  std::string csv = "split,n,sigma,mean_est_nll_nats,mean_exact_nll_nats\n";
  struct Row {
    const char* name;
    const Tensor* x;
  } rows[] = {{"val", &ds.val}, {"test", &test_subset}};
  for (const auto& r : rows) {
    Tensor est = kde_estimate(samples, *r.x, sigma);
    double est_nll = 0.0;
    for (int i = 0; i < est.size(); ++i) est_nll -= est[i];
    est_nll /= est.size();
    double exact = mean_exact_nll(model, *r.x, batch);
    csv += strf("%s,%d,%s,%s,%s\n", r.name, r.x->dim(0), csv_double(sigma).c_str(),
                csv_double(est_nll).c_str(), csv_double(exact).c_str());
  }
  write_text_file(out_path(cfg, "kde.csv"), csv);
}

void cmd_eval_ais(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  FlowModel model = load_model(cfg);
  uint64_t seed = static_cast<uint64_t>(cfg.integer("seed"));

  AisConfig ais;
  ais.n_chains = static_cast<int>(cfg.integer("ais_chains"));
  ais.n_temps = static_cast<int>(cfg.integer("ais_temps"));
  ais.mh_sweeps = static_cast<int>(cfg.integer("ais_mh_steps"));
  ais.step = cfg.real("ais_step");
  ais.sigma_obs = cfg.real("ais_sigma_obs");

  int n_eval = std::min(static_cast<int>(cfg.integer("ais_eval_n")), ds.test.dim(0));
  Tensor subset({n_eval, ds.dim()});
  for (int i = 0; i < n_eval; ++i)
    for (int j = 0; j < ds.dim(); ++j) subset.at(i, j) = ds.test.at(i, j);
  Tensor exact = log_likelihood_values(model, subset);

  std::vector<AisResult> results(static_cast<size_t>(n_eval));
  parallel_for(n_eval, [&](int i) {
    Rng rng = Rng::derive(seed, "ais:" + std::to_string(i));
    results[static_cast<size_t>(i)] = ais_estimate(model, subset.data() + static_cast<size_t>(i) * ds.dim(),
                                                   ais, rng);
  });

  std::string csv = "index,ais_logp_nats,exact_logp_nats,stuck_chains\n";
  for (int i = 0; i < n_eval; ++i)
    csv += strf("%d,%s,%s,%d\n", i, csv_double(results[static_cast<size_t>(i)].log_p).c_str(),
                csv_double(exact[i]).c_str(), results[static_cast<size_t>(i)].stuck_chains);
  write_text_file(out_path(cfg, "ais.csv"), csv);
}

void cmd_spectral(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  FlowModel model = load_model(cfg);
  SpectralReport rep = spectral_report(model, static_cast<int>(cfg.integer("spectral_n_z")),
                                       static_cast<uint64_t>(cfg.integer("seed")));
  std::string csv = "log_sv,cdf\n";
  for (size_t i = 0; i < rep.pooled_log_sv.size(); ++i)
    csv += csv_double(rep.pooled_log_sv[i]) + "," + csv_double(rep.cdf[i]) + "\n";
  csv += "avg_logdet," + csv_double(rep.avg_logdet) + "\n";
  write_text_file(out_path(cfg, "spectral.csv"), csv);
}

void cmd_sample(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  FlowModel model = load_model(cfg);
  Rng rng = Rng::derive(static_cast<uint64_t>(cfg.integer("seed")), "sample_cmd");
  Tensor x = sample_values(model, static_cast<int>(cfg.integer("sample_n")), rng);

  std::string csv;
  for (int j = 0; j < model.dim; ++j) csv += (j ? ",x" : "x") + std::to_string(j);
  csv += "\n";
  for (int i = 0; i < x.dim(0); ++i) {
    for (int j = 0; j < model.dim; ++j) {
      if (j) csv += ",";
      csv += csv_double(x.at(i, j));
    }
    csv += "\n";
  }
  write_text_file(out_path(cfg, "samples.csv"), csv);
}

void cmd_score(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset ds = dataset_from_config(cfg);
  FlowModel model = load_model(cfg);
  Classifier clf = classifier_from_config(cfg, ds);

  Rng rng = Rng::derive(static_cast<uint64_t>(cfg.integer("seed")), "score_cmd");
  Tensor samples = sample_values(model, static_cast<int>(cfg.integer("score_n")), rng);
  Tensor probs = clf.predict_probs(samples);
  double is = inception_score_from_probs(probs);
  double ms = mode_score_from_probs(probs, ds.train_label_dist());
  write_text_file(out_path(cfg, "scores.csv"),
                  "inception_score,mode_score\n" + csv_double(is) + "," + csv_double(ms) + "\n");
}

// --- plot -------------------------------------------------------------
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows; // nan for non-numeric cells
};

double parse_cell(const std::string& s) {
  if (s == "nan" || s == "diverged" || s.empty()) return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  char* end = nullptr;
  double v = strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nan("");
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::string text = read_text_file(path);
  CsvTable t;
  size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    size_t next = text.find('\n', pos);
    std::string line = next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos);
    if (!line.empty()) {
      std::vector<std::string> cells;
      size_t c = 0;
      while (c <= line.size()) {
        size_t nc = line.find(',', c);
        cells.push_back(nc == std::string::npos ? line.substr(c) : line.substr(c, nc - c));
        if (nc == std::string::npos) break;
        c = nc + 1;
      }
      if (first) {
        t.header = cells;
        first = false;
      } else {
        std::vector<double> row;
        for (const auto& cell : cells) row.push_back(parse_cell(cell));
        t.rows.push_back(std::move(row));
      }
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return t;
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  size_t idx = t.header.size();
  for (size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) idx = i;
  if (idx == t.header.size()) raise(Err::Format, "csv is missing column '" + name + "'");
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(idx < r.size() ? r[idx] : std::nan(""));
  return out;
}

bool wants_log_scale(const std::vector<double>& v) {
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return lo > 0 && hi / lo > 100.0;
}

void cmd_plot(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  int emitted = 0;

  std::string metrics = out_path(cfg, "metrics.csv");
  if (fs::exists(metrics)) {
    CsvTable t = read_csv(metrics);
    std::vector<double> it = column(t, "iteration");
    std::vector<double> train = column(t, "train_nll_nats");
    std::vector<double> val = column(t, "val_nll_nats");
    ChartSpec spec{"negative log-likelihood", "iteration", "NLL (nats)", false, false};
    std::vector<double> joined = train;
    joined.insert(joined.end(), val.begin(), val.end());
    spec.log10_y = wants_log_scale(joined);
    if (spec.log10_y) spec.ylabel = "NLL (nats, log10 axis)";
    write_text_file(out_path(cfg, "nll_curves.svg"),
                    render_line_chart(spec, {{"train", it, train}, {"val", it, val}}));
    ++emitted;

    std::vector<double> adv = column(t, "adv_loss");
    bool any_adv = std::any_of(adv.begin(), adv.end(), [](double v) { return std::isfinite(v); });
    if (any_adv) {
      write_text_file(out_path(cfg, "adv_loss.svg"),
                      render_line_chart({"adversarial loss", "iteration", "critic loss", false, false},
                                        {{"critic", it, adv}}));
      ++emitted;
    }
    std::vector<double> ms = column(t, "mode_score");
    std::vector<double> is = column(t, "inception_score");
    bool any_scores = std::any_of(ms.begin(), ms.end(), [](double v) { return std::isfinite(v); });
    if (any_scores) {
      write_text_file(out_path(cfg, "quality_curves.svg"),
                      render_line_chart({"sample quality", "iteration", "score", false, false},
                                        {{"mode", it, ms}, {"inception", it, is}}));
      ++emitted;
    }
  }

  std::string gmm = out_path(cfg, "gmm_sweep.csv");
  if (fs::exists(gmm)) {
    CsvTable t = read_csv(gmm);
    std::vector<double> sg = column(t, "sigma");
    std::vector<double> nll = column(t, "val_nll");
    std::vector<double> ms = column(t, "mode_score");
    write_text_file(out_path(cfg, "gmm_sweep.svg"),
                    render_line_chart({"bandwidth sweep", "sigma (log10 axis)", "value", true, false},
                                      {{"val NLL", sg, nll}, {"MODE", sg, ms}}));
    ++emitted;
  }

  std::string spectral = out_path(cfg, "spectral.csv");
  if (fs::exists(spectral)) {
    CsvTable t = read_csv(spectral);
    std::vector<double> lsv, cdf;
    std::vector<double> a = column(t, "log_sv");
    std::vector<double> b = column(t, "cdf");
    for (size_t i = 0; i < a.size(); ++i) {
      if (std::isfinite(a[i]) && std::isfinite(b[i])) { // skips the avg_logdet summary row
        lsv.push_back(a[i]);
        cdf.push_back(b[i]);
      }
    }
    write_text_file(out_path(cfg, "spectral_cdf.svg"),
                    render_line_chart({"Jacobian singular values", "log |sv|", "fraction <= x", false, false},
                                      {{"cdf", lsv, cdf}}));
    ++emitted;
  }

  if (emitted == 0) raise(Err::Io, "nothing to plot in '" + cfg.str("out_dir") + "'");
}

} // namespace

std::vector<std::string> subcommand_names() {
  return {"train", "eval-nll", "eval-gmm", "eval-kde", "eval-ais", "spectral", "sample", "score", "plot"};
}

void run_subcommand(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "train")
    cmd_train(cfg);
  else if (name == "eval-nll")
    cmd_eval_nll(cfg);
  else if (name == "eval-gmm")
    cmd_eval_gmm(cfg);
  else if (name == "eval-kde")
    cmd_eval_kde(cfg);
  else if (name == "eval-ais")
    cmd_eval_ais(cfg);
  else if (name == "spectral")
    cmd_spectral(cfg);
  else if (name == "sample")
    cmd_sample(cfg);
  else if (name == "score")
    cmd_score(cfg);
  else if (name == "plot")
    cmd_plot(cfg);
  else
    raise(Err::Unsupported, "unknown subcommand '" + name + "'");
}

} // namespace fg
