#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fednew/linalg.hpp"
#include "fednew/objective.hpp"
#include "fednew/protocol.hpp"
#include "fednew/quantizer.hpp"

namespace fednew {

enum class Algorithm { FedNew, QFedNew, FedGD, NewtonZero, Newton };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iteration produces a non-finite model or a factorization
/// fails; carries the round it happened in.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(int round, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + ": " + what), round_(round) {}
  int round() const { return round_; }

 private:
  int round_;
};

struct AlgoConfig {
  Algorithm algorithm = Algorithm::FedNew;
  double alpha = 0.0;
  double rho = 1.0;
  double refresh_rate = 1.0;  // r: Hessian refresh rate in [0, 1]
  std::optional<double> gd_step;
  int bits = 3;
  int range_bits = 32;
  int inner_passes = 1;
  int max_rounds = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Refresh at round k iff r > 0 and k mod round(1/r) == 0; r = 0 refreshes
/// only at round 0.
bool hessian_refresh_due(double rate, int round);

struct ClientState {
  int client_id = 0;
  VectorXd y;       // local direction y_i
  VectorXd lambda;  // dual lambda_i
  MatrixXd hessian;  // H_i in use (evaluated at the model of hessian_round)
  VectorXd grad;     // g_i at the current round's model
  linalg::SpdFactor<double> factor;  // of hessian + (alpha + rho) I
  int hessian_round = -1;
  std::optional<QuantState> quant;
};

struct ServerState {
  VectorXd x;  // global model
  VectorXd y;  // global direction
  int k = 0;   // completed rounds
};

ClientState make_client_state(int client_id, Index dim);

/// Recomputes H_i at x and refactors H_i + (alpha + rho) I.
void refresh_hessian(ClientState& s, const LocalObjective& f, const VectorXd& x, double alpha,
                     double rho, int round);

/// (H_i + (alpha + rho) I)^{-1} (g_i - lambda_i + rho y_prev), using the cached factor.
VectorXd local_direction(const ClientState& s, const VectorXd& y_prev, double rho);

/// Full client step: optional Hessian refresh, fresh gradient at x, new y_i.
VectorXd fednew_client_step(ClientState& s, const LocalObjective& f, const VectorXd& x,
                            const VectorXd& y_prev, bool refresh, double alpha, double rho,
                            int round);

/// y^k = mean(directions) in client order; x^{k+1} = x^k - y^k; k += 1.
void fednew_server_step(ServerState& server, std::span<const VectorXd> directions,
                        std::size_t n_clients);

/// lambda_i += rho (y_i - y)
void fednew_dual_step(ClientState& s, const VectorXd& y_global, double rho);

struct BusOptions {
  AccountingRules rules;
  std::ostream* log = nullptr;
};

class Optimizer {
 public:
  Optimizer(Federation clients, AlgoConfig cfg, BusOptions bus, int threads);
  virtual ~Optimizer() = default;

  virtual void run_round() = 0;

  const VectorXd& model() const { return server_.x; }
  int rounds_completed() const { return server_.k; }
  const Bus& bus() const { return bus_; }
  const AlgoConfig& config() const { return cfg_; }
  const Federation& clients() const { return clients_; }
  std::size_t n_clients() const { return clients_.size(); }
  Index dim() const { return server_.x.size(); }

  /// Direction applied in the most recent outer step (x^{k+1} = x^k - d).
  const VectorXd& last_step() const { return last_step_; }

 protected:
  void check_model(const char* what) const;

  Federation clients_;
  AlgoConfig cfg_;
  Bus bus_;
  int threads_;
  ServerState server_;
  VectorXd last_step_;
};

/// FedNew and its quantized variant: one-pass ADMM on the regularized
/// Newton system, followed by the outer step x^{k+1} = x^k - y^k.
class FedNew final : public Optimizer {
 public:
  FedNew(Federation clients, AlgoConfig cfg, BusOptions bus = {}, int threads = 1);

  void run_round() override;

  /// Opens round k: Hessian refresh decision and fresh gradients at x^k.
  void begin_round();
  /// One client-step / aggregate / dual-step cycle at the frozen x^k. The
  /// final pass also takes the outer step and closes the round.
  void inner_pass(bool final_pass);

  bool quantized() const { return cfg_.algorithm == Algorithm::QFedNew; }

  std::vector<ClientState>& client_states() { return states_; }
  const std::vector<ClientState>& client_states() const { return states_; }
  ServerState& server() { return server_; }
  const ServerState& server() const { return server_; }

  /// Model the current round's gradients and Hessians were taken at.
  const VectorXd& round_model() const { return round_x_; }
  /// Global direction before the most recent pass (y^{k-1}).
  const VectorXd& previous_direction() const { return prev_y_; }
  /// What the server aggregated in the most recent pass (reconstructed
  /// vectors in quantized mode).
  const std::vector<VectorXd>& received() const { return received_; }

 private:
  std::vector<ClientState> states_;
  std::vector<VectorXd> receiver_prev_;
  std::vector<VectorXd> received_;
  VectorXd round_x_;
  VectorXd prev_y_;
  bool round_open_ = false;
};

/// Gradient descent with the client-averaged gradient.
class FedGD final : public Optimizer {
 public:
  FedGD(Federation clients, AlgoConfig cfg, BusOptions bus = {}, int threads = 1);

  void run_round() override;
  double step_size() const { return step_; }

 private:
  double step_;
};

/// Ships every client's Hessian once at round 0, then reuses the factor of
/// the averaged Hessian with fresh averaged gradients.
class NewtonZero final : public Optimizer {
 public:
  NewtonZero(Federation clients, AlgoConfig cfg, BusOptions bus = {}, int threads = 1);

  void run_round() override;

 private:
  linalg::SpdFactor<double> factor_;
};

/// Full Newton with Hessians and gradients shipped every round.
class Newton final : public Optimizer {
 public:
  Newton(Federation clients, AlgoConfig cfg, BusOptions bus = {}, int threads = 1);

  void run_round() override;
};

/// Default FedGD step 1/L, L = max_i ||H_i(x)||_2 via power iteration.
double default_gd_step(const Federation& clients, const VectorXd& x);

std::unique_ptr<Optimizer> make_optimizer(Federation clients, const AlgoConfig& cfg,
                                          BusOptions bus = {}, int threads = 1);

struct NewtonResult {
  VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  std::vector<double> history;  // f at x^1 .. x^rounds
};

/// Undamped Newton from x = 0 on the client-averaged objective.
NewtonResult exact_newton(const Federation& clients, int rounds = 30);

/// One Newton step x - (mean H_i(x))^{-1} mean g_i(x).
VectorXd newton_step(const Federation& clients, const VectorXd& x);

}  // namespace fednew
