#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fg/tensor.hpp"

namespace fg {

// Flat key=value experiment configuration. Parsing validates every key
// against the schema (unknown keys are rejected) and fills defaults, so
// the stored map is always complete.
struct ExperimentConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const;
  const std::string& str(const std::string& key) const;
  int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;
  bool is_auto(const std::string& key) const { return str(key) == "auto"; }

  void set(const std::string& key, const std::string& value); // validates
  std::string echo() const; // canonical sorted key=value text
};

ExperimentConfig default_config();
ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name);
ExperimentConfig parse_config_file(const std::string& path);

// Binary checkpoint: magic "FLOWGAN1", config echo, iteration, RNG
// streams, named little-endian float64 parameter blocks.
struct Checkpoint {
  std::string config_echo;
  int64_t iteration = 0;
  std::vector<std::pair<std::string, std::array<uint64_t, 4>>> streams;
  std::vector<std::pair<std::string, Tensor>> blocks;

  const Tensor* find(const std::string& name) const;
  const std::array<uint64_t, 4>* find_stream(const std::string& name) const;
};

void save_checkpoint_file(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
std::string csv_double(double v); // %.17g with stable nan/inf spelling

} // namespace fg
