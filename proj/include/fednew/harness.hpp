#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fednew/algorithms.hpp"
#include "fednew/config.hpp"
#include "fednew/dataset.hpp"
#include "fednew/diagnostics.hpp"
#include "fednew/summary.hpp"

namespace fednew {

/// Raised when the dataset file is missing or unreadable.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedData {
  Dataset dataset;
  Federation clients;
  std::size_t shard_size = 0;
};

/// Parses, validates against the reference shape (warnings only) and shards.
LoadedData load_data(const DatasetConfig& cfg, std::ostream* warnings = nullptr);

struct FStar {
  VectorXd x;
  double f = 0;
  double grad_norm = 0;
  std::vector<double> history;
  bool from_cache = false;
};

inline constexpr int kReferenceNewtonRounds = 30;

/// Reference optimum from 30 Newton iterates, cached on disk keyed by the
/// dataset fingerprint and mu. A stale or unreadable cache is recomputed.
FStar compute_fstar(const LoadedData& data, double mu,
                    const std::optional<std::filesystem::path>& cache_path);

std::optional<FStar> read_fstar_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                                      double mu);
void write_fstar_cache(const std::filesystem::path& path, std::uint64_t fingerprint, double mu,
                       const FStar& fs);

struct RoundRow {
  int round = 0;
  double f = 0;
  double gap = 0;
  std::uint64_t up_bits = 0;
  std::uint64_t down_bits = 0;
  std::optional<diag::RoundDiagnostics> diag;
};

struct RunRecord {
  std::string label;
  Algorithm algorithm = Algorithm::FedNew;
  std::vector<RoundRow> rows;
  int clamp_warnings = 0;
  double wall_seconds = 0;
  std::filesystem::path csv_path;
};

/// Drives one optimizer for `algo.max_rounds` rounds. Row k reports the
/// model after round k and the bits spent through round k by client 0.
RunRecord run_single(const Federation& clients, const RunSpec& run, double f_star,
                     const DiagConfig& diag, const AccountingRules& rules, int threads,
                     std::ostream* message_log = nullptr, std::ostream* warnings = nullptr);

std::vector<std::string> csv_header(bool with_diagnostics);
void write_csv(std::ostream& out, const RunRecord& record, bool with_diagnostics);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::ostream* log = nullptr;  // progress and warnings
};

struct ExperimentResult {
  FStar fstar;
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
  int clamp_warnings = 0;
  std::filesystem::path out_dir;
};

/// Loads data, resolves f*, runs every configured algorithm, and writes one
/// CSV per run plus summary.txt into the output directory.
ExperimentResult run_experiment(ExperimentConfig cfg, const RunOptions& options);

}  // namespace fednew
