#include "fednew/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fednew::diag {

VectorXd inner_optimum(std::span<const MatrixXd> hessians, std::span<const VectorXd> grads,
                       double alpha) {
  MatrixXd h = linalg::deterministic_mean(hessians);
  h.diagonal().array() += alpha;
  return linalg::cholesky(h).solve(linalg::deterministic_mean(grads));
}

std::vector<VectorXd> optimal_duals(std::span<const MatrixXd> hessians,
                                    std::span<const VectorXd> grads, const VectorXd& y_star,
                                    double alpha) {
  if (hessians.size() != grads.size()) throw std::invalid_argument("optimal_duals: size mismatch");
  std::vector<VectorXd> out;
  out.reserve(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    out.push_back(grads[i] - hessians[i] * y_star - alpha * y_star);
  }
  return out;
}

LyapunovTerms lyapunov_terms(std::span<const VectorXd> local_y, std::span<const VectorXd> lambdas,
                             const VectorXd& y, const VectorXd& y_prev, const VectorXd& y_star,
                             std::span<const VectorXd> lambda_star, double rho, double beta1) {
  if (local_y.size() != lambdas.size() || lambdas.size() != lambda_star.size()) {
    throw std::invalid_argument("lyapunov: client count mismatch");
  }
  const auto n = static_cast<double>(local_y.size());
  LyapunovTerms t;
  for (std::size_t i = 0; i < local_y.size(); ++i) {
    t.dual += (lambdas[i] - lambda_star[i]).squaredNorm();
    t.local += (local_y[i] - y_star).squaredNorm();
  }
  t.dual /= rho;
  t.local *= 2.0 * beta1;
  t.global = rho * n * (y - y_star).squaredNorm();
  t.successive = 2.0 * rho * n * (y - y_prev).squaredNorm();
  return t;
}

double lyapunov(std::span<const VectorXd> local_y, std::span<const VectorXd> lambdas,
                const VectorXd& y, const VectorXd& y_prev, const VectorXd& y_star,
                std::span<const VectorXd> lambda_star, double rho, double beta1) {
  return lyapunov_terms(local_y, lambdas, y, y_prev, y_star, lambda_star, rho, beta1).total();
}

double estimate_lq(const Federation& clients, std::span<const Probe> probes, double alpha) {
  if (probes.size() < 2) throw std::invalid_argument("estimate_lq: need at least two probes");
  // grad Q_i at every probe; H_i and g_i evaluated once per distinct model.
  std::vector<std::vector<VectorXd>> grad_q(probes.size());
  std::vector<std::size_t> model_of(probes.size());
  std::vector<std::vector<MatrixXd>> h;
  std::vector<std::vector<VectorXd>> g;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::size_t m = h.size();
    for (std::size_t q = 0; q < p; ++q) {
      if (probes[q].x == probes[p].x) {
        m = model_of[q];
        break;
      }
    }
    if (m == h.size()) {
      h.emplace_back();
      g.emplace_back();
      for (const auto& c : clients) {
        h.back().push_back(c->hessian(probes[p].x));
        g.back().push_back(c->gradient(probes[p].x));
      }
    }
    model_of[p] = m;
    grad_q[p].resize(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
      grad_q[p][i] = h[m][i] * probes[p].y + alpha * probes[p].y - g[m][i];
    }
  }
  double best = 0;
  bool usable = false;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t q = p + 1; q < probes.size(); ++q) {
      const double dy = (probes[p].y - probes[q].y).norm();
      if (dy == 0) continue;
      usable = true;
      for (std::size_t i = 0; i < clients.size(); ++i) {
        best = std::max(best, (grad_q[p][i] - grad_q[q][i]).norm() / dy);
      }
    }
  }
  if (!usable) throw std::invalid_argument("estimate_lq: all probe pairs share the same y");
  return best;
}

Gap optimality_gap(double f_value, double f_star) {
  const double diff = f_value - f_star;
  if (diff >= 0) return {diff, false};
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f_star));
  return {0.0, -diff > noise};
}

RoundDiagnostics analyze(const FedNew& opt, double beta1) {
  const auto& states = opt.client_states();
  const double alpha = opt.config().alpha;
  const double rho = opt.config().rho;
  std::vector<MatrixXd> hessians;
  std::vector<VectorXd> grads, local_y, lambdas;
  for (const auto& s : states) {
    hessians.push_back(s.hessian);
    grads.push_back(s.grad);
    local_y.push_back(s.y);
    lambdas.push_back(s.lambda);
  }

  RoundDiagnostics d;
  d.y_star = inner_optimum(hessians, grads, alpha);
  d.lambda_star = optimal_duals(hessians, grads, d.y_star, alpha);
  const VectorXd& y = opt.server().y;
  const VectorXd& y_prev = opt.previous_direction();
  d.y_star_norm = d.y_star.norm();
  d.direction_error = (y - d.y_star).norm();
  d.direction_error_rel = d.direction_error / (d.y_star_norm + 1e-12);
  d.dual_residual_norm = rho * (y - y_prev).norm();
  VectorXd dual_sum = VectorXd::Zero(y.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    d.max_primal_residual = std::max(d.max_primal_residual, (local_y[i] - y).norm());
    dual_sum += lambdas[i];
  }
  d.dual_sum_norm = dual_sum.norm();

  const VectorXd& x = opt.round_model();
  std::vector<Probe> probes{{x, VectorXd::Zero(y.size())}, {x, d.y_star}, {x, y}, {x, y_prev}};
  try {
    d.lq_estimate = estimate_lq(opt.clients(), probes, alpha);
  } catch (const std::invalid_argument&) {
    d.lq_estimate = 0;
  }
  d.beta1 = beta1 > 0 ? beta1 : default_beta1(d.lq_estimate, rho);
  d.alpha_slack = alpha_condition_slack(alpha, rho, d.lq_estimate, states.size(), d.beta1);
  d.lyapunov = lyapunov(local_y, lambdas, y, y_prev, d.y_star, d.lambda_star, rho, d.beta1);
  const double denom = (y - d.y_star).squaredNorm();
  d.step_ratio = denom > 0 ? (y_prev - y).squaredNorm() / denom : 0.0;
  return d;
}

}  // namespace fednew::diag
