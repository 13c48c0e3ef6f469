#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fednew/dataset.hpp"
#include "fednew/linalg.hpp"
#include "fednew/objective.hpp"

namespace fednew::test {

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("FEDNEW_DATA_DIR")) return env;
  return "data";
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = -1, double hi = 1) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>()(engine_); }

  VectorXd vector(Index d) {
    VectorXd v(d);
    for (Index i = 0; i < d; ++i) v(i) = uniform();
    return v;
  }
  MatrixXd matrix(Index r, Index c) {
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = uniform();
    return m;
  }
  /// B^T B + shift I
  MatrixXd spd(Index d, double shift = 1.0) {
    const MatrixXd b = matrix(d, d);
    MatrixXd a = b.transpose() * b;
    a.diagonal().array() += shift;
    return a;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// n quadratic clients 0.5 x^T Q_i x - c_i^T x with random SPD Q_i.
inline Federation quadratic_federation(Rng& rng, int n, Index d, double shift = 1.0) {
  Federation out;
  for (int i = 0; i < n; ++i) {
    out.push_back(std::make_shared<QuadraticObjective>(rng.spd(d, shift), rng.vector(d)));
  }
  return out;
}

/// Shards one of the generated data files the build places in data_dir().
inline Federation load_federation(const std::string& name, int n_clients, double mu = 1e-3,
                                  std::optional<int> dim = std::nullopt) {
  const auto ds = load_libsvm(data_dir() / (name + ".libsvm"), dim);
  return logistic_federation(shard(ds, n_clients, mu, {.truncate_to_multiple = true}));
}

}  // namespace fednew::test
