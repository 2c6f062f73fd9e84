#include "fg/flow.hpp"

#include <cmath>

namespace fg {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

const char* coupling_kind_name(CouplingKind k) { return k == CouplingKind::Additive ? "additive" : "affine"; }
const char* prior_kind_name(PriorKind p) { return p == PriorKind::Gaussian ? "gaussian" : "logistic"; }

std::vector<uint8_t> CouplingLayer::mask(int dim) const {
  std::vector<uint8_t> m(static_cast<size_t>(dim), 0);
  if (pass_first)
    for (int i = 0; i < n_pass; ++i) m[static_cast<size_t>(i)] = 1;
  else
    for (int i = dim - n_pass; i < dim; ++i) m[static_cast<size_t>(i)] = 1;
  return m;
}

Params FlowModel::params() {
  Params out;
  for (size_t i = 0; i < couplings.size(); ++i) couplings[i].conditioner.collect(out, "c" + std::to_string(i));
  out.push_back({"scale.log_diag", &scale_log_diag});
  return out;
}

int FlowModel::n_params() {
  int n = scale_log_diag.size();
  for (auto& c : couplings) n += c.conditioner.n_params();
  return n;
}

FlowModel build_flow(int dim, int n_layers, CouplingKind kind, int conditioner_width,
                     MaskScheme scheme, PriorKind prior, uint64_t seed) {
  (void)scheme; // single scheme: alternating contiguous halves
  if (n_layers < 0) raise(Err::Contract, "build_flow: n_layers must be nonnegative");
  if (n_layers >= 1 && dim < 2) raise(Err::Contract, "build_flow: coupling masks impossible for dim < 2");
  if (dim < 1) raise(Err::Contract, "build_flow: dim must be positive");
  if (conditioner_width < 1) raise(Err::Contract, "build_flow: conditioner width must be positive");

  FlowModel m;
  m.dim = dim;
  m.prior = prior;
  Rng rng = Rng::derive(seed, "flow_init");
  int k = dim / 2;
  for (int l = 0; l < n_layers; ++l) {
    CouplingLayer c;
    c.kind = kind;
    c.pass_first = (l % 2 == 0);
    c.n_pass = k;
    c.n_trans = dim - k;
    int out = (kind == CouplingKind::Affine) ? 2 * c.n_trans : c.n_trans;
    c.conditioner.build({c.n_pass, conditioner_width, conditioner_width, out}, Activation::Tanh, rng,
                        /*zero_last=*/true);
    m.couplings.push_back(std::move(c));
  }
  m.scale_log_diag = Tensor::zeros({dim});
  return m;
}

// ---------------------------------------------------------------------
//  FlowGraph
// ---------------------------------------------------------------------
FlowGraph::FlowGraph(Tape& tape, const FlowModel& model, bool trainable) : tape_(&tape), model_(&model) {
  for (const auto& c : model.couplings) {
    layer_offset_.push_back(leaves_.size());
    auto lv = c.conditioner.lift(tape, trainable);
    leaves_.insert(leaves_.end(), lv.begin(), lv.end());
  }
  scale_leaf_ = tape.leaf(model.scale_log_diag, trainable);
  leaves_.push_back(scale_leaf_);
}

Var FlowGraph::couple(size_t layer, Var in, Var* logdet, bool forward) {
  const CouplingLayer& c = model_->couplings[layer];
  int d = model_->dim;
  Var pass = c.pass_first ? slice(in, 1, 0, c.n_pass) : slice(in, 1, d - c.n_pass, c.n_pass);
  Var rest = c.pass_first ? slice(in, 1, c.n_pass, c.n_trans) : slice(in, 1, 0, c.n_trans);

  std::span<const Var> nl(leaves_.data() + layer_offset_[layer], static_cast<size_t>(c.conditioner.n_slots()));
  Var h = c.conditioner.forward(pass, nl);

  Var out_rest;
  if (c.kind == CouplingKind::Additive) {
    Var t = h;
    out_rest = forward ? add(rest, t) : sub(rest, t);
    // unit-determinant layer: no logdet contribution
  } else {
    Var raw = slice(h, 1, 0, c.n_trans);
    Var t = slice(h, 1, c.n_trans, c.n_trans);
    Var s = vtanh(raw * (1.0 / c.log_scale_clamp)) * c.log_scale_clamp;
    if (forward)
      out_rest = add(mul(rest, vexp(s)), t);
    else
      out_rest = mul(sub(rest, t), vexp(neg(s)));
    if (logdet) {
      Var term = sum_axis(s, 1);
      *logdet = forward ? add(*logdet, term) : sub(*logdet, term);
    }
  }
  return c.pass_first ? concat(pass, out_rest, 1) : concat(out_rest, pass, 1);
}

Var FlowGraph::generate(Var z, Var* logdet_fwd) {
  const Tensor& zv = z.val();
  if (zv.ndim() != 2 || zv.dim(1) != model_->dim) raise(Err::Contract, "generate: input must be [n, dim]");
  int n = zv.dim(0);
  Var ld = tape_->constant(Tensor::zeros({n}));
  Var h = z;
  for (size_t l = 0; l < model_->couplings.size(); ++l) {
    try {
      h = couple(l, h, &ld, /*forward=*/true);
    } catch (const Error& e) {
      if (e.kind() == Err::Numeric) raise(Err::Diverged, strf("coupling layer %zu: %s", l, e.what()));
      throw;
    }
  }
  try {
    h = mul(h, vexp(scale_leaf_));
    ld = add(ld, broadcast_to(sum(scale_leaf_), {n}));
  } catch (const Error& e) {
    if (e.kind() == Err::Numeric) raise(Err::Diverged, strf("scale layer: %s", e.what()));
    throw;
  }
  if (logdet_fwd) *logdet_fwd = ld;
  return h;
}

Var FlowGraph::invert(Var x, Var* logdet_inv) {
  const Tensor& xv = x.val();
  if (xv.ndim() != 2 || xv.dim(1) != model_->dim) raise(Err::Contract, "invert: input must be [n, dim]");
  int n = xv.dim(0);
  Var ld = tape_->constant(Tensor::zeros({n}));
  Var h = x;
  try {
    h = mul(h, vexp(neg(scale_leaf_)));
    ld = sub(ld, broadcast_to(sum(scale_leaf_), {n}));
  } catch (const Error& e) {
    if (e.kind() == Err::Numeric) raise(Err::Diverged, strf("scale layer: %s", e.what()));
    throw;
  }
  for (size_t l = model_->couplings.size(); l-- > 0;) {
    try {
      h = couple(l, h, &ld, /*forward=*/false);
    } catch (const Error& e) {
      if (e.kind() == Err::Numeric) raise(Err::Diverged, strf("coupling layer %zu: %s", l, e.what()));
      throw;
    }
  }
  if (logdet_inv) *logdet_inv = ld;
  return h;
}

Var FlowGraph::prior_logpdf(Var z) {
  const Tensor& zv = z.val();
  if (zv.ndim() != 2 || zv.dim(1) != model_->dim) raise(Err::Contract, "prior_logpdf: input must be [n, dim]");
  int d = model_->dim;
  if (model_->prior == PriorKind::Gaussian) {
    Var q = sum_axis(square(z), 1);
    return add(q * (-0.5), tape_->constant_scalar(-0.5 * d * kLog2Pi));
  }
  // standard logistic, iid per coordinate: -z - 2*softplus(-z)
  Var nz = neg(z);
  Var term = sub(nz, softplus(nz) * 2.0);
  return sum_axis(term, 1);
}

Var FlowGraph::log_likelihood(Var x) {
  Var ld{};
  Var z = invert(x, &ld);
  try {
    return add(prior_logpdf(z), ld);
  } catch (const Error& e) {
    if (e.kind() == Err::Numeric) raise(Err::Diverged, strf("prior log-density: %s", e.what()));
    throw;
  }
}

// ---------------------------------------------------------------------
//  Value-level paths
// ---------------------------------------------------------------------
Tensor generate_values(const FlowModel& m, const Tensor& z, Tensor* logdet_fwd) {
  Tape tape;
  FlowGraph g(tape, m, false);
  Var ld{};
  Var x = g.generate(tape.leaf(z, false), &ld);
  if (logdet_fwd) *logdet_fwd = ld.val();
  return x.val();
}

Tensor invert_values(const FlowModel& m, const Tensor& x, Tensor* logdet_inv) {
  Tape tape;
  FlowGraph g(tape, m, false);
  Var ld{};
  Var z = g.invert(tape.leaf(x, false), &ld);
  if (logdet_inv) *logdet_inv = ld.val();
  return z.val();
}

Tensor log_likelihood_values(const FlowModel& m, const Tensor& x) {
  Tape tape;
  FlowGraph g(tape, m, false);
  return g.log_likelihood(tape.leaf(x, false)).val();
}

Tensor prior_logpdf_values(PriorKind prior, const Tensor& z) {
  Tape tape;
  FlowModel stub;
  stub.dim = z.dim(1);
  stub.prior = prior;
  stub.scale_log_diag = Tensor::zeros({stub.dim});
  FlowGraph g(tape, stub, false);
  return g.prior_logpdf(tape.leaf(z, false)).val();
}

Tensor prior_sample(PriorKind prior, int n, int d, Rng& rng) {
  Tensor z({n, d});
  if (prior == PriorKind::Gaussian) {
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  } else {
    for (int i = 0; i < z.size(); ++i) {
      double u = rng.uniform_open();
      if (u >= 1.0) u = 1.0 - 0x1.0p-53;
      z[i] = std::log(u / (1.0 - u));
    }
  }
  return z;
}

Tensor sample_values(const FlowModel& m, int n, Rng& rng) {
  if (n < 1) raise(Err::Contract, "sample: n must be positive");
  return generate_values(m, prior_sample(m.prior, n, m.dim, rng));
}

} // namespace fg
