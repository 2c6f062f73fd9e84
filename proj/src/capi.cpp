#include "flowgan.h"

#include <cstring>
#include <string>

#include "fg/common.hpp"
#include "fg/flow.hpp"
#include "fg/io.hpp"
#include "fg/rng.hpp"
#include "fg/runner.hpp"

using fg::Err;

struct fg_config {
  fg::ExperimentConfig cfg;
};

struct fg_model {
  fg::FlowModel model;
  int64_t iteration = 0;
};

namespace {

thread_local std::string g_last_error;

fg_status status_of(Err kind) {
  switch (kind) {
    case Err::Argument: return FG_ERR_ARGUMENT;
    case Err::Contract: return FG_ERR_CONTRACT;
    case Err::Domain: return FG_ERR_DOMAIN;
    case Err::Numeric: return FG_ERR_NUMERIC;
    case Err::Diverged: return FG_ERR_DIVERGED;
    case Err::Parse: return FG_ERR_PARSE;
    case Err::Format: return FG_ERR_FORMAT;
    case Err::Io: return FG_ERR_IO;
    case Err::Config: return FG_ERR_CONFIG;
    case Err::Unsupported: return FG_ERR_UNSUPPORTED;
  }
  return FG_ERR_CONTRACT;
}

template <class F>
fg_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FG_OK;
  } catch (const fg::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FG_ERR_CONTRACT;
  }
}

fg_status fail_argument(const char* msg) {
  g_last_error = msg;
  return FG_ERR_ARGUMENT;
}

} // namespace

extern "C" {

const char* fg_status_name(fg_status s) {
  switch (s) {
    case FG_OK: return "ok";
    case FG_ERR_ARGUMENT: return "argument";
    case FG_ERR_CONTRACT: return "contract";
    case FG_ERR_DOMAIN: return "domain";
    case FG_ERR_NUMERIC: return "numeric";
    case FG_ERR_DIVERGED: return "diverged";
    case FG_ERR_PARSE: return "parse";
    case FG_ERR_FORMAT: return "format";
    case FG_ERR_IO: return "io";
    case FG_ERR_CONFIG: return "config";
    case FG_ERR_UNSUPPORTED: return "unsupported";
  }
  return "?";
}

const char* fg_last_error(void) { return g_last_error.c_str(); }

const char* fg_version(void) { return "flowgan 1.0.0"; }

fg_status fg_config_load(const char* path, fg_config** out) {
  if (!path || !out) return fail_argument("fg_config_load: null argument");
  return guarded([&] { *out = new fg_config{fg::parse_config_file(path)}; });
}

fg_status fg_config_from_string(const char* text, fg_config** out) {
  if (!text || !out) return fail_argument("fg_config_from_string: null argument");
  return guarded([&] { *out = new fg_config{fg::parse_config_text(text, "<string>")}; });
}

fg_status fg_config_set(fg_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail_argument("fg_config_set: null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

fg_status fg_config_get(const fg_config* cfg, const char* key, char* buf, size_t bufsize) {
  if (!cfg || !key || !buf) return fail_argument("fg_config_get: null argument");
  return guarded([&] {
    const std::string& v = cfg->cfg.str(key);
    if (v.size() + 1 > bufsize) fg::raise(Err::Argument, "fg_config_get: buffer too small");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

void fg_config_free(fg_config* cfg) { delete cfg; }

fg_status fg_run(const char* name, const fg_config* cfg) {
  if (!name || !cfg) return fail_argument("fg_run: null argument");
  return guarded([&] { fg::run_subcommand(name, cfg->cfg); });
}

fg_status fg_model_load(const char* checkpoint_path, fg_model** out) {
  if (!checkpoint_path || !out) return fail_argument("fg_model_load: null argument");
  return guarded([&] {
    fg::Checkpoint ck = fg::load_checkpoint_file(checkpoint_path);
    auto* m = new fg_model;
    m->model = fg::model_from_checkpoint(ck);
    m->iteration = ck.iteration;
    *out = m;
  });
}

void fg_model_free(fg_model* m) { delete m; }

int fg_model_dim(const fg_model* m) { return m ? m->model.dim : 0; }

int64_t fg_model_iteration(const fg_model* m) { return m ? m->iteration : -1; }

fg_status fg_model_log_likelihood(const fg_model* m, const double* x, int n, int d, double* out_nats) {
  if (!m || !x || !out_nats) return fail_argument("fg_model_log_likelihood: null argument");
  if (n < 1 || d != m->model.dim) return fail_argument("fg_model_log_likelihood: bad n or d");
  return guarded([&] {
    fg::Tensor xs({n, d});
    for (int i = 0; i < xs.size(); ++i) xs[i] = x[i];
    fg::Tensor ll = fg::log_likelihood_values(m->model, xs);
    for (int i = 0; i < n; ++i) out_nats[i] = ll[i];
  });
}

fg_status fg_model_sample(const fg_model* m, int n, uint64_t seed, double* out) {
  if (!m || !out) return fail_argument("fg_model_sample: null argument");
  if (n < 1) return fail_argument("fg_model_sample: n must be positive");
  return guarded([&] {
    fg::Rng rng = fg::Rng::derive(seed, "sample_api");
    fg::Tensor x = fg::sample_values(m->model, n, rng);
    for (int i = 0; i < x.size(); ++i) out[i] = x[i];
  });
}

} // extern "C"
