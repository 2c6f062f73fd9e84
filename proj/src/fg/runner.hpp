#pragma once

#include <string>
#include <vector>

#include "fg/adversarial.hpp"
#include "fg/data.hpp"
#include "fg/flow.hpp"
#include "fg/io.hpp"
#include "fg/training.hpp"

namespace fg {

// Subcommands: train, eval-nll, eval-gmm, eval-kde, eval-ais, spectral,
// sample, score, plot. Throws fg::Error on failure; artifacts land in
// the config's out_dir.
void run_subcommand(const std::string& name, const ExperimentConfig& cfg);
std::vector<std::string> subcommand_names();

// Config-to-object assembly, shared with the C API.
Dataset dataset_from_config(const ExperimentConfig& cfg);
FlowModel flow_from_config(const ExperimentConfig& cfg, int dim);
Critic critic_from_config(const ExperimentConfig& cfg, int dim);
TrainConfig train_config_from(const ExperimentConfig& cfg);
std::string checkpoint_path_from(const ExperimentConfig& cfg);

// Checkpoint assembly/restore around a Trainer, and standalone model
// reconstruction (used by the eval commands and the C API).
Checkpoint checkpoint_of(Trainer& tr, const std::string& config_echo);
void restore_trainer(Trainer& tr, const Checkpoint& ck);
FlowModel model_from_checkpoint(const Checkpoint& ck);

double mean_exact_nll(const FlowModel& model, const Tensor& x, int batch);

} // namespace fg
