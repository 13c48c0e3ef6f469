#include "fednew/objective.hpp"

#include <stdexcept>

namespace fednew {

QuadraticObjective::QuadraticObjective(MatrixXd q, VectorXd c) : q_(std::move(q)), c_(std::move(c)) {
  require_dim(q_.rows(), c_.size(), "quadratic objective");
  require_dim(q_.cols(), c_.size(), "quadratic objective");
}

double QuadraticObjective::value(const VectorXd& x) const {
  require_dim(x.size(), dim(), "quadratic objective");
  return 0.5 * x.dot(q_ * x) - c_.dot(x);
}

VectorXd QuadraticObjective::gradient(const VectorXd& x) const {
  require_dim(x.size(), dim(), "quadratic objective");
  return q_ * x - c_;
}

Federation logistic_federation(std::vector<ClientShard> shards) {
  Federation out;
  out.reserve(shards.size());
  for (auto& s : shards) out.push_back(std::make_shared<LogisticObjective>(std::move(s)));
  return out;
}

double global_value(const Federation& clients, const VectorXd& x) {
  if (clients.empty()) throw std::invalid_argument("empty federation");
  std::vector<double> values;
  values.reserve(clients.size());
  for (const auto& c : clients) values.push_back(c->value(x));
  return linalg::deterministic_mean(std::span<const double>(values));
}

VectorXd global_gradient(const Federation& clients, const VectorXd& x) {
  if (clients.empty()) throw std::invalid_argument("empty federation");
  std::vector<VectorXd> g;
  g.reserve(clients.size());
  for (const auto& c : clients) g.push_back(c->gradient(x));
  return linalg::deterministic_mean(std::span<const VectorXd>(g));
}

MatrixXd global_hessian(const Federation& clients, const VectorXd& x) {
  if (clients.empty()) throw std::invalid_argument("empty federation");
  std::vector<MatrixXd> h;
  h.reserve(clients.size());
  for (const auto& c : clients) h.push_back(c->hessian(x));
  return linalg::deterministic_mean(std::span<const MatrixXd>(h));
}

}  // namespace fednew
