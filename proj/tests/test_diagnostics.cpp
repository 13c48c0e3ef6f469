#include <doctest.h>

#include <cmath>
#include <limits>

#include "fednew/diagnostics.hpp"
#include "support.hpp"

using namespace fednew;

namespace {

std::vector<MatrixXd> hessians_at(const Federation& clients, const VectorXd& x) {
  std::vector<MatrixXd> out;
  for (const auto& c : clients) out.push_back(c->hessian(x));
  return out;
}

std::vector<VectorXd> grads_at(const Federation& clients, const VectorXd& x) {
  std::vector<VectorXd> out;
  for (const auto& c : clients) out.push_back(c->gradient(x));
  return out;
}

}  // namespace

TEST_CASE("inner optimum closed forms") {
  std::vector<MatrixXd> h{2 * MatrixXd::Identity(3, 3)};
  std::vector<VectorXd> zero{VectorXd::Zero(3)};
  CHECK(diag::inner_optimum(h, zero, 0.0).norm() == 0.0);
  std::vector<VectorXd> e1{VectorXd::Unit(3, 0)};
  CHECK((diag::inner_optimum(h, e1, 0.0) - VectorXd::Unit(3, 0) / 2).norm() <= 1e-15);
}

TEST_CASE("inner optimum residual on random instances") {
  test::Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<MatrixXd> h{rng.spd(8), rng.spd(8), rng.spd(8)};
    std::vector<VectorXd> g{rng.vector(8), rng.vector(8), rng.vector(8)};
    const double alpha = 0.1 * trial;
    const VectorXd y = diag::inner_optimum(h, g, alpha);
    MatrixXd hbar = (h[0] + h[1] + h[2]) / 3;
    hbar.diagonal().array() += alpha;
    const VectorXd gbar = (g[0] + g[1] + g[2]) / 3;
    CHECK((hbar * y - gbar).norm() <= 1e-10 * gbar.norm());
  }
}

TEST_CASE("optimal duals") {
  test::Rng rng(62);
  std::vector<MatrixXd> h1{rng.spd(4)};
  std::vector<VectorXd> g1{rng.vector(4)};
  const auto single = diag::optimal_duals(h1, g1, diag::inner_optimum(h1, g1, 0.3), 0.3);
  CHECK(single[0].norm() <= 1e-12);

  std::vector<MatrixXd> same{h1[0], h1[0], h1[0]};
  std::vector<VectorXd> same_g{g1[0], g1[0], g1[0]};
  for (const auto& l : diag::optimal_duals(same, same_g, diag::inner_optimum(same, same_g, 0.1), 0.1)) {
    CHECK(l.norm() <= 1e-12);
  }

  std::vector<MatrixXd> h{rng.spd(6), rng.spd(6), rng.spd(6)};
  std::vector<VectorXd> g{rng.vector(6), rng.vector(6), rng.vector(6)};
  const auto duals = diag::optimal_duals(h, g, diag::inner_optimum(h, g, 0.05), 0.05);
  CHECK((duals[0] + duals[1] + duals[2]).norm() <= 1e-9);
  CHECK_THROWS(diag::optimal_duals(h, g1, g1[0], 0.0));
}

TEST_CASE("Lyapunov function terms") {
  test::Rng rng(63);
  const VectorXd y_star = rng.vector(3);
  const std::vector<VectorXd> lambda_star{rng.vector(3)};
  const std::vector<VectorXd> at_star{y_star};
  CHECK(diag::lyapunov(at_star, lambda_star, y_star, y_star, y_star, lambda_star, 0.5, 2.0) == 0.0);

  const double rho = 0.7;
  const VectorXd v = rng.vector(3);
  const std::vector<VectorXd> shifted{lambda_star[0] + rho * v};
  const double value = diag::lyapunov(at_star, shifted, y_star, y_star, y_star, lambda_star, rho, 2.0);
  CHECK(value == doctest::Approx(rho * v.squaredNorm()).epsilon(1e-14));

  const std::vector<VectorXd> local{y_star + v, y_star - v};
  const std::vector<VectorXd> lambdas{lambda_star[0], lambda_star[0]};
  const std::vector<VectorXd> lstar{lambda_star[0], lambda_star[0]};
  const auto t = diag::lyapunov_terms(local, lambdas, y_star + v, y_star, y_star, lstar, rho, 1.5);
  CHECK(t.dual == 0.0);
  CHECK(t.local == doctest::Approx(2 * 1.5 * 2 * v.squaredNorm()));
  CHECK(t.global == doctest::Approx(rho * 2 * v.squaredNorm()));
  CHECK(t.successive == doctest::Approx(2 * rho * 2 * v.squaredNorm()));
  CHECK(t.total() == doctest::Approx(t.local + t.global + t.successive));
}

TEST_CASE("L_q estimate") {
  // H = c I at a fixed x and alpha = 0: the estimate is exactly c.
  const double c = 3.5;
  const Federation iso{std::make_shared<QuadraticObjective>(c * MatrixXd::Identity(4, 4),
                                                            VectorXd::Ones(4))};
  test::Rng rng(64);
  const VectorXd x = rng.vector(4);
  std::vector<diag::Probe> probes{{x, rng.vector(4)}, {x, rng.vector(4)}, {x, rng.vector(4)}};
  CHECK(diag::estimate_lq(iso, probes, 0.0) == doctest::Approx(c).epsilon(1e-14));

  // Hand-computed 2x2: H = diag(1, 4), probes differ by e2, so the ratio is 4 + alpha.
  MatrixXd h(2, 2);
  h << 1, 0, 0, 4;
  const Federation two{std::make_shared<QuadraticObjective>(h, VectorXd::Zero(2))};
  std::vector<diag::Probe> pair{{VectorXd::Zero(2), VectorXd::Zero(2)},
                                {VectorXd::Zero(2), VectorXd::Unit(2, 1)}};
  CHECK(diag::estimate_lq(two, pair, 0.5) == doctest::Approx(4.5).epsilon(1e-15));

  std::vector<diag::Probe> same{{x, x}, {x, x}};
  CHECK_THROWS(diag::estimate_lq(iso, same, 0.0));
  std::vector<diag::Probe> lonely{{x, x}};
  CHECK_THROWS(diag::estimate_lq(iso, lonely, 0.0));
}

TEST_CASE("L_q estimate never exceeds the operator norm at a fixed model") {
  test::Rng rng(65);
  for (int trial = 0; trial < 10; ++trial) {
    const auto clients = test::quadratic_federation(rng, 3, 5);
    const VectorXd x = rng.vector(5);
    std::vector<diag::Probe> probes;
    for (int p = 0; p < 6; ++p) probes.push_back({x, rng.vector(5)});
    const double alpha = 0.2;
    double bound = 0;
    for (const auto& c : clients) {
      MatrixXd a = c->hessian(x);
      a.diagonal().array() += alpha;
      bound = std::max(bound, Eigen::SelfAdjointEigenSolver<MatrixXd>(a).eigenvalues().maxCoeff());
    }
    CHECK(diag::estimate_lq(clients, probes, alpha) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("optimality gap clamping") {
  CHECK(diag::optimality_gap(1.5, 1.0).value == 0.5);
  CHECK_FALSE(diag::optimality_gap(1.5, 1.0).clamped);
  CHECK(diag::optimality_gap(1.0, 1.0).value == 0.0);
  const double tiny_below = 1.0 - 4 * std::numeric_limits<double>::epsilon();
  CHECK(diag::optimality_gap(tiny_below, 1.0).value == 0.0);
  CHECK_FALSE(diag::optimality_gap(tiny_below, 1.0).clamped);
  CHECK(diag::optimality_gap(0.9, 1.0).value == 0.0);
  CHECK(diag::optimality_gap(0.9, 1.0).clamped);
}

TEST_CASE("gap at the initial model is positive on a1a") {
  const auto clients = test::load_federation("a1a", 10);
  const auto ref = exact_newton(clients);
  const auto g0 = diag::optimality_gap(global_value(clients, VectorXd::Zero(ref.x.size())), ref.f);
  CHECK(g0.value > 0);
  CHECK(diag::optimality_gap(global_value(clients, ref.x), ref.f).value == 0.0);
}

TEST_CASE("Lyapunov sequence decreases when the step-size condition holds") {
  // H_i = c I + small symmetric perturbation, so L_q is known to within the
  // perturbation: L_q <= c + eps + alpha. Choose rho and alpha so that
  // alpha - 2.5 rho - 8 L_q^2 n / rho - beta1 > 0 with beta1 = L_q^2 / rho.
  test::Rng rng(66);
  const int n = 2;
  const Index d = 6;
  const double c = 0.01;
  Federation clients;
  for (int i = 0; i < n; ++i) {
    MatrixXd e = rng.matrix(d, d) * 1e-3;
    clients.push_back(std::make_shared<QuadraticObjective>(
        c * MatrixXd::Identity(d, d) + (e + e.transpose()) / 2, rng.vector(d)));
  }
  const double lq = c + 2e-3 * d;  // crude bound on the Hessian part
  const double rho = 4.0 * lq * std::sqrt(double(n));
  const double beta1 = lq * lq / rho;
  const double alpha = 2.5 * rho + 8 * lq * lq * n / rho + beta1 + 1.0;
  CHECK(diag::alpha_condition_slack(alpha, rho, lq, n, beta1) > 0);

  AlgoConfig cfg;
  cfg.algorithm = Algorithm::FedNew;
  cfg.alpha = alpha;
  cfg.rho = rho;
  FedNew opt(clients, cfg);
  opt.begin_round();
  double prev = INFINITY;
  for (int p = 0; p < 100; ++p) {
    opt.inner_pass(false);
    const double v = diag::analyze(opt, beta1).lyapunov;
    CHECK(v <= prev * (1 + 1e-12) + 1e-300);
    prev = v;
  }
}

TEST_CASE("analyze reports consistent quantities") {
  const auto clients = test::load_federation("a1a", 10);
  AlgoConfig cfg;
  cfg.algorithm = Algorithm::FedNew;
  cfg.alpha = 0.003;
  cfg.rho = 0.01;
  FedNew opt(clients, cfg);
  for (int k = 0; k < 5; ++k) {
    opt.run_round();
    const auto d = diag::analyze(opt);
    CHECK(d.lyapunov >= 0);
    CHECK(d.y_star_norm == doctest::Approx(d.y_star.norm()));
    CHECK(d.dual_sum_norm <= 1e-9 * 10);
    CHECK(d.lq_estimate > 0);
    CHECK(d.beta1 == doctest::Approx(d.lq_estimate * d.lq_estimate / cfg.rho));
    VectorXd dual_star_sum = VectorXd::Zero(opt.dim());
    for (const auto& l : d.lambda_star) dual_star_sum += l;
    CHECK(dual_star_sum.norm() <= 1e-9);
    CHECK(d.direction_error == doctest::Approx((opt.server().y - d.y_star).norm()));
  }
}
