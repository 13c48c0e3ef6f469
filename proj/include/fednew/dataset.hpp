#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "fednew/linalg.hpp"

namespace fednew {

struct Feature {
  int index;  // 1-based
  double value;

  friend bool operator==(const Feature&, const Feature&) = default;
};

struct Sample {
  int label;  // -1 or +1
  std::vector<Feature> features;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  int dim = 0;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ShardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reads LibSVM text ("label idx:val idx:val ..."). Positive labels map to +1,
/// everything else to -1. Blank lines and '#' comments are skipped.
Dataset parse_libsvm(std::istream& in, std::optional<int> dim_override = std::nullopt);
Dataset load_libsvm(const std::filesystem::path& path,
                    std::optional<int> dim_override = std::nullopt);
void write_libsvm(std::ostream& out, const Dataset& data);

/// FNV-1a over the parsed content; stable across runs and platforms.
std::uint64_t fingerprint(const Dataset& data);

struct ShardOptions {
  bool truncate_to_multiple = false;
  std::optional<std::uint64_t> shuffle_seed;
};

/// One client's slice of the data together with the logistic-regression
/// oracle inputs. The regularizer mu is replicated into every shard so the
/// plain average of shard objectives equals the global objective.
class ClientShard {
 public:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  ClientShard(int client_id, std::vector<Sample> samples, int dim, double mu);

  int client_id() const { return client_id_; }
  int dim() const { return dim_; }
  double mu() const { return mu_; }
  std::size_t size() const { return samples_.size(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const SparseRows& features() const { return features_; }
  const VectorXd& labels() const { return labels_; }

 private:
  int client_id_;
  int dim_;
  double mu_;
  std::vector<Sample> samples_;
  SparseRows features_;
  VectorXd labels_;
};

std::vector<ClientShard> shard(const Dataset& data, int n_clients, double mu,
                               const ShardOptions& options = {});

/// (1/m) sum log(1 + exp(-b a^T x)) + (mu/2)||x||^2
double loss(const ClientShard& s, const VectorXd& x);
VectorXd gradient(const ClientShard& s, const VectorXd& x);
MatrixXd hessian(const ClientShard& s, const VectorXd& x);

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// 1 / (1 + exp(-t)) without overflow.
inline double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace fednew
