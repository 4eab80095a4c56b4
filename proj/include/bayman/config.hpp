#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bayman/model.hpp"
#include "bayman/perturbation.hpp"

namespace bayman {

/// File-backed experiment description. The text format is flat
/// `key = value` lines under `[section]` headers; see docs/config.md.
struct ExperimentConfig {
  // [paths]
  std::string input_path;
  std::string out_dir = ".";

  // [model]
  ModelConfig model;

  // [split]
  double train_frac = 0.8;

  // [perturb]
  PerturbMode perturb_mode = PerturbMode::None;
  double perturb_ratio = 0.0;
  int perturb_k = 1;
  bool perturb_per_user = false;
  bool perturb_train_only = false;
  std::optional<std::uint64_t> perturb_seed;  // defaults to a sub-seed of model.seed

  // [eval]
  std::vector<int> k_list{5, 10};
  bool baseline_popularity = true;
  bool baseline_markov = true;

  static ExperimentConfig from_string(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  /// Round-trips through from_string; also the checkpoint config echo.
  std::string to_string() const;

  void validate() const;  // throws ConfigError

  /// Perturbation spec with the seed resolved (explicit value or the
  /// "perturb" sub-seed of model.seed).
  PerturbationSpec perturbation() const;
};

}  // namespace bayman
