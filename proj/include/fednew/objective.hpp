#pragma once

#include <memory>
#include <vector>

#include "fednew/dataset.hpp"
#include "fednew/linalg.hpp"

namespace fednew {

/// A client's smooth local objective f_i.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual Index dim() const = 0;
  virtual double value(const VectorXd& x) const = 0;
  virtual VectorXd gradient(const VectorXd& x) const = 0;
  virtual MatrixXd hessian(const VectorXd& x) const = 0;
};

using Federation = std::vector<std::shared_ptr<const LocalObjective>>;

class LogisticObjective final : public LocalObjective {
 public:
  explicit LogisticObjective(ClientShard shard) : shard_(std::move(shard)) {}

  Index dim() const override { return shard_.dim(); }
  double value(const VectorXd& x) const override { return loss(shard_, x); }
  VectorXd gradient(const VectorXd& x) const override { return fednew::gradient(shard_, x); }
  MatrixXd hessian(const VectorXd& x) const override { return fednew::hessian(shard_, x); }

  const ClientShard& shard() const { return shard_; }

 private:
  ClientShard shard_;
};

/// 0.5 x^T Q x - c^T x; constant Hessian Q.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(MatrixXd q, VectorXd c);

  Index dim() const override { return c_.size(); }
  double value(const VectorXd& x) const override;
  VectorXd gradient(const VectorXd& x) const override;
  MatrixXd hessian(const VectorXd&) const override { return q_; }

 private:
  MatrixXd q_;
  VectorXd c_;
};

Federation logistic_federation(std::vector<ClientShard> shards);

/// Plain client average of f_i, the global objective.
double global_value(const Federation& clients, const VectorXd& x);
VectorXd global_gradient(const Federation& clients, const VectorXd& x);
MatrixXd global_hessian(const Federation& clients, const VectorXd& x);

}  // namespace fednew
