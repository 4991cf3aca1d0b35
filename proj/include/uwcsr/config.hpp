#pragma once

// Flat "key = value" run configuration shared by the command-line tools.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uwcsr/experiments.hpp"
#include "uwcsr/training.hpp"

namespace uwcsr {

struct RunConfig {
  DatasetSpec dataset;
  std::size_t depth = 20;
  std::size_t width = 64;
  double lrelu_slope = 0.3;
  TrainingConfig training;
  LossWeighting loss_weighting = LossWeighting::uniform;  // CSRNet training pairs
  int threads = 0;  // 0 = OpenMP default
  std::vector<std::string> methods{"LS-2", "LS-4", "DNN-2", "DNN-4", "CSRNet-2", "CSRNet-4", "FullCsi"};
  std::size_t bootstrap_resamples = 1000;

  // Sets every seed derived from the single run seed.
  void set_seed(std::uint64_t seed);
  std::uint64_t seed() const { return dataset.seed; }

  // Throws ConfigSemanticError.
  void validate() const;
};

// '#' starts a comment; blank lines are ignored. Unknown keys and lines
// without '=' throw ConfigParseError; unparsable or out-of-range values throw
// ConfigSemanticError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Every key in a fixed order, one per line; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);

std::vector<std::string> config_keys();

std::uint64_t fnv1a64(const std::string& bytes);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string output;
  std::vector<std::pair<std::string, std::string>> fields;   // command-specific
  std::vector<std::pair<std::string, double>> stage_seconds;  // not part of outputs' identity

  std::string to_text() const;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace uwcsr
