#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

struct Dataset {
  Tensor train, val, test;                         // [n, d] each
  std::vector<int> train_labels, val_labels, test_labels; // empty when unlabeled
  int n_classes = 0;
  bool discrete = false;     // raw integer pixels; training dequantizes
  double scale_correction = 0.0; // d*ln(256) once dequantized, else 0
  std::string provenance;

  int dim() const { return train.dim(1); }
  bool has_labels() const { return !train_labels.empty(); }
  std::vector<double> train_label_dist() const; // empirical p*(y)
};

// Synthetic desk-scale datasets: ring8 (8 Gaussians on a radius-2 circle,
// std 0.1), grid25 (5x5 grid), two_moons. 80/10/10 split, deterministic
// per seed, labels = mixture component.
Dataset make_synthetic(const std::string& name, int n, uint64_t seed);

// IDX (big-endian) readers. Images: magic 0x00000803, uint8, [n,r,c];
// labels: magic 0x00000801. No normalization here.
Tensor load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

// Assembles a dataset from IDX files: flattens images to [n, r*c],
// optionally 2x2-average-pools 28x28 down to 14x14 first, and carves a
// seeded 10% validation split out of the training set.
Dataset load_idx_dataset(const std::string& images, const std::string& labels,
                         const std::string& test_images, const std::string& test_labels,
                         bool pool14, uint64_t seed);

} // namespace fg
