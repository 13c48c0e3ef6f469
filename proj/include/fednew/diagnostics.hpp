#pragma once

#include <span>
#include <vector>

#include "fednew/algorithms.hpp"
#include "fednew/linalg.hpp"

namespace fednew::diag {

/// y* = (mean H_i + alpha I)^{-1} mean g_i for the Hessians and gradients
/// the clients are currently using.
VectorXd inner_optimum(std::span<const MatrixXd> hessians, std::span<const VectorXd> grads,
                       double alpha);

/// lambda_i* = g_i - (H_i + alpha I) y*
std::vector<VectorXd> optimal_duals(std::span<const MatrixXd> hessians,
                                    std::span<const VectorXd> grads, const VectorXd& y_star,
                                    double alpha);

struct LyapunovTerms {
  double dual = 0;        // (1/rho) sum ||lambda_i - lambda_i*||^2
  double local = 0;       // 2 beta1 sum ||y_i - y*||^2
  double global = 0;      // rho n ||y - y*||^2
  double successive = 0;  // 2 rho n ||y - y_prev||^2

  double total() const { return dual + local + global + successive; }
};

LyapunovTerms lyapunov_terms(std::span<const VectorXd> local_y, std::span<const VectorXd> lambdas,
                             const VectorXd& y, const VectorXd& y_prev, const VectorXd& y_star,
                             std::span<const VectorXd> lambda_star, double rho, double beta1);

double lyapunov(std::span<const VectorXd> local_y, std::span<const VectorXd> lambdas,
                const VectorXd& y, const VectorXd& y_prev, const VectorXd& y_star,
                std::span<const VectorXd> lambda_star, double rho, double beta1);

/// A point (x, y) at which grad_y Q_i(x, y) = (H_i(x) + alpha I) y - g_i(x) is probed.
struct Probe {
  VectorXd x;
  VectorXd y;
};

/// Empirical lower bound on the Lipschitz constant of grad Q in y: the
/// largest ratio ||grad Q_i(p) - grad Q_i(q)|| / ||y_p - y_q|| over clients
/// and probe pairs. Pairs with identical y are skipped; throws if no pair
/// is usable.
double estimate_lq(const Federation& clients, std::span<const Probe> probes, double alpha);

/// Smallest beta1 admitted by the convergence theorem: L_q^2 / rho.
inline double default_beta1(double lq, double rho) { return lq * lq / rho; }

/// alpha - 2.5 rho - 8 L_q^2 n / rho - beta1: the room left for beta2.
/// Positive means the step-size condition holds for some beta2 > 0.
inline double alpha_condition_slack(double alpha, double rho, double lq, std::size_t n,
                                    double beta1) {
  return alpha - 2.5 * rho - 8.0 * lq * lq * static_cast<double>(n) / rho - beta1;
}

struct Gap {
  double value = 0;
  bool clamped = false;
};

/// f(x^k) - f*, clamped at zero. Differences within a few ulps of f* are
/// rounding noise and are reported as an exact zero without a clamp flag.
Gap optimality_gap(double f_value, double f_star);

/// Everything logged for one FedNew round.
struct RoundDiagnostics {
  VectorXd y_star;
  std::vector<VectorXd> lambda_star;
  double y_star_norm = 0;
  double direction_error = 0;
  double direction_error_rel = 0;
  double dual_residual_norm = 0;   // ||rho (y^k - y^{k-1})||
  double max_primal_residual = 0;  // max_i ||y_i^k - y^k||
  double dual_sum_norm = 0;        // ||sum_i lambda_i^k||
  double lyapunov = 0;
  double lq_estimate = 0;
  double beta1 = 0;
  double alpha_slack = 0;
  double step_ratio = 0;  // ||y^{k-1} - y^k||^2 / ||y^k - y*||^2
};

/// Snapshot diagnostics of a FedNew optimizer after a pass. `beta1` <= 0
/// selects the default L_q^2 / rho.
RoundDiagnostics analyze(const FedNew& opt, double beta1 = 0);

}  // namespace fednew::diag
