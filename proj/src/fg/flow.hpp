#pragma once

#include <cstdint>
#include <vector>

#include "fg/nets.hpp"
#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

enum class CouplingKind { Additive, Affine };
enum class PriorKind { Gaussian, Logistic };
enum class MaskScheme { AlternatingHalves };

// Invertible coupling layer over a contiguous split of the coordinates.
// The passed half goes through unchanged and conditions the transform of
// the other half, so the Jacobian is triangular and the inverse is exact.
struct CouplingLayer {
  CouplingKind kind = CouplingKind::Affine;
  bool pass_first = true; // passed coords are the first n_pass (else the last n_pass)
  int n_pass = 0;
  int n_trans = 0;
  double log_scale_clamp = 5.0; // affine log-scales are squashed into +-clamp
  DenseNet conditioner;         // [n_pass, w, w, n_trans or 2*n_trans]

  std::vector<uint8_t> mask(int dim) const; // 1 = passed through
};

struct FlowModel {
  int dim = 0;
  PriorKind prior = PriorKind::Gaussian;
  std::vector<CouplingLayer> couplings; // applied in order on the z -> x pass
  Tensor scale_log_diag;                // final diagonal scaling layer, [dim]

  Params params();
  int n_params();
};

// Masks alternate between consecutive layers so every coordinate is
// transformed. The conditioner output layer is zero-initialized, so the
// fresh model is exactly the identity map (its NLL is the prior NLL).
// n_layers == 0 builds the pure diagonal-scaling model (dim 1 allowed).
FlowModel build_flow(int dim, int n_layers, CouplingKind kind, int conditioner_width,
                     MaskScheme scheme, PriorKind prior, uint64_t seed);

// Taped evaluation of one model on one tape. Leaves are created in
// FlowModel::params() order; trainable=false lifts them as constants.
class FlowGraph {
public:
  FlowGraph(Tape& tape, const FlowModel& model, bool trainable);

  Var generate(Var z, Var* logdet_fwd = nullptr);   // z -> x, logdet of dG/dz per row
  Var invert(Var x, Var* logdet_inv = nullptr);     // x -> z, logdet of df/dx per row
  Var log_likelihood(Var x);                        // log p(f(x)) + logdet_inv, [n]
  Var prior_logpdf(Var z);

  const std::vector<Var>& leaves() const { return leaves_; }

private:
  Var couple(size_t layer, Var in, Var* logdet, bool forward);

  Tape* tape_;
  const FlowModel* model_;
  std::vector<Var> leaves_;
  std::vector<size_t> layer_offset_; // first leaf slot of each coupling layer
  Var scale_leaf_;
};

// Value-level paths (scratch tape inside).
Tensor generate_values(const FlowModel& m, const Tensor& z, Tensor* logdet_fwd = nullptr);
Tensor invert_values(const FlowModel& m, const Tensor& x, Tensor* logdet_inv = nullptr);
Tensor log_likelihood_values(const FlowModel& m, const Tensor& x); // [n]
Tensor prior_logpdf_values(PriorKind prior, const Tensor& z);      // [n]
Tensor prior_sample(PriorKind prior, int n, int d, Rng& rng);
Tensor sample_values(const FlowModel& m, int n, Rng& rng);

const char* coupling_kind_name(CouplingKind k);
const char* prior_kind_name(PriorKind p);

} // namespace fg
