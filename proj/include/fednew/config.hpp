#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fednew/algorithms.hpp"
#include "fednew/protocol.hpp"

namespace fednew {

struct DatasetConfig {
  std::filesystem::path path;
  std::optional<int> dim_override;
  int n_clients = 1;
  double mu = 1e-3;
  bool truncate_to_multiple = false;
  std::optional<std::uint64_t> shuffle_seed;
  // Reference shape; mismatches are reported as warnings.
  std::optional<std::size_t> expect_samples;
  std::optional<std::size_t> expect_shard_size;
  std::optional<int> expect_dim;
};

struct RunSpec {
  std::string label;
  AlgoConfig algo;
  bool explicit_seed = false;
};

struct DiagConfig {
  bool enabled = false;
  double beta1 = 0.0;  // <= 0: default L_q^2 / rho
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  std::vector<RunSpec> runs;
  DiagConfig diag;
  AccountingRules accounting;
  bool message_log = false;
  std::filesystem::path output_dir = "out";
  std::vector<double> targets{1e-2, 1e-4, 1e-6};
  std::optional<std::filesystem::path> fstar_cache_path;
};

/// Parses the plain-text `key = value` format. Lines before the first
/// `[label]` header set experiment-wide keys and algo.* defaults; each
/// `[label]` section declares one run and may override algo.* keys only.
/// Unknown or repeated keys are rejected with ConfigError.
ExperimentConfig parse_config(std::istream& in, const std::string& name = "experiment");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace fednew
