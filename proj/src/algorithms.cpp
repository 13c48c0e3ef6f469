#include "fednew/algorithms.hpp"

#include <algorithm>
#include <cmath>

#include "fednew/parallel.hpp"

namespace fednew {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::FedNew: return "fednew";
    case Algorithm::QFedNew: return "qfednew";
    case Algorithm::FedGD: return "fedgd";
    case Algorithm::NewtonZero: return "newton_zero";
    case Algorithm::Newton: return "newton";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::FedNew, Algorithm::QFedNew, Algorithm::FedGD, Algorithm::NewtonZero,
                 Algorithm::Newton}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("unknown algorithm '" + s + "'");
}

void AlgoConfig::validate() const {
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw ConfigError("algo.alpha must be >= 0");
  if (!(rho > 0) || !std::isfinite(rho)) throw ConfigError("algo.rho must be > 0");
  if (!(refresh_rate >= 0 && refresh_rate <= 1)) throw ConfigError("algo.r must lie in [0, 1]");
  if (gd_step && !(*gd_step > 0 && std::isfinite(*gd_step))) {
    throw ConfigError("algo.gd_step must be > 0");
  }
  if (bits < 1 || bits > 32) throw ConfigError("algo.bits must lie in [1, 32]");
  if (range_bits < 1 || range_bits > 32) throw ConfigError("algo.range_bits must lie in [1, 32]");
  if (inner_passes < 1) throw ConfigError("algo.inner_passes must be >= 1");
  if (max_rounds < 0) throw ConfigError("algo.max_rounds must be >= 0");
}

bool hessian_refresh_due(double rate, int round) {
  if (round == 0) return true;
  if (!(rate > 0)) return false;
  const long period = std::max(1L, std::lround(1.0 / rate));
  return round % period == 0;
}

ClientState make_client_state(int client_id, Index dim) {
  ClientState s;
  s.client_id = client_id;
  s.y = VectorXd::Zero(dim);
  s.lambda = VectorXd::Zero(dim);
  s.grad = VectorXd::Zero(dim);
  return s;
}

void refresh_hessian(ClientState& s, const LocalObjective& f, const VectorXd& x, double alpha,
                     double rho, int round) {
  s.hessian = f.hessian(x);
  MatrixXd shifted = s.hessian;
  shifted.diagonal().array() += alpha + rho;
  s.factor = linalg::cholesky(shifted);
  s.hessian_round = round;
}

VectorXd local_direction(const ClientState& s, const VectorXd& y_prev, double rho) {
  return s.factor.solve(s.grad - s.lambda + rho * y_prev);
}

VectorXd fednew_client_step(ClientState& s, const LocalObjective& f, const VectorXd& x,
                            const VectorXd& y_prev, bool refresh, double alpha, double rho,
                            int round) {
  if (refresh || s.factor.empty()) refresh_hessian(s, f, x, alpha, rho, round);
  s.grad = f.gradient(x);
  s.y = local_direction(s, y_prev, rho);
  return s.y;
}

void fednew_server_step(ServerState& server, std::span<const VectorXd> directions,
                        std::size_t n_clients) {
  if (directions.size() != n_clients) {
    throw ProtocolError("server step expects " + std::to_string(n_clients) + " directions, got " +
                        std::to_string(directions.size()));
  }
  server.y = linalg::deterministic_mean(directions);
  server.x -= server.y;
  ++server.k;
}

void fednew_dual_step(ClientState& s, const VectorXd& y_global, double rho) {
  s.lambda += rho * (s.y - y_global);
}

namespace {

int nonempty_size(const Federation& clients) {
  if (clients.empty()) throw ConfigError("federation has no clients");
  return static_cast<int>(clients.size());
}

}  // namespace

Optimizer::Optimizer(Federation clients, AlgoConfig cfg, BusOptions bus, int threads)
    : clients_(std::move(clients)),
      cfg_(cfg),
      bus_(nonempty_size(clients_), bus.rules, bus.log),
      threads_(std::max(1, threads)) {
  cfg_.validate();
  const Index d = clients_.front()->dim();
  for (const auto& c : clients_) require_dim(c->dim(), d, "federation");
  server_.x = VectorXd::Zero(d);
  server_.y = VectorXd::Zero(d);
  last_step_ = VectorXd::Zero(d);
}

void Optimizer::check_model(const char* what) const {
  if (!server_.x.allFinite()) {
    throw NumericalFailure(server_.k, std::string(what) + " produced a non-finite model");
  }
}

// FedNew -------------------------------------------------------------------

FedNew::FedNew(Federation clients, AlgoConfig cfg, BusOptions bus, int threads)
    : Optimizer(std::move(clients), cfg, bus, threads) {
  if (cfg_.algorithm != Algorithm::FedNew && cfg_.algorithm != Algorithm::QFedNew) {
    throw ConfigError("FedNew optimizer built with another algorithm name");
  }
  const Index d = dim();
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    auto s = make_client_state(static_cast<int>(i), d);
    if (quantized()) s.quant.emplace(d, cfg_.bits, cfg_.seed, static_cast<std::uint64_t>(i));
    states_.push_back(std::move(s));
    receiver_prev_.push_back(VectorXd::Zero(d));
  }
  round_x_ = server_.x;
  prev_y_ = server_.y;
}

void FedNew::run_round() {
  begin_round();
  for (int p = 0; p < cfg_.inner_passes; ++p) inner_pass(p + 1 == cfg_.inner_passes);
}

void FedNew::begin_round() {
  const int k = server_.k;
  bus_.begin_round(k);
  round_x_ = server_.x;
  const bool refresh = hessian_refresh_due(cfg_.refresh_rate, k);
  try {
    parallel_for(states_.size(), threads_, [&](std::size_t i) {
      auto& s = states_[i];
      if (refresh || s.factor.empty()) {
        refresh_hessian(s, *clients_[i], round_x_, cfg_.alpha, cfg_.rho, k);
      }
      s.grad = clients_[i]->gradient(round_x_);
    });
  } catch (const linalg::FactorizationError& e) {
    throw NumericalFailure(k, e.what());
  }
  round_open_ = true;
}

void FedNew::inner_pass(bool final_pass) {
  if (!round_open_) throw ProtocolError("inner pass outside an open round");
  const VectorXd y_prev = server_.y;
  parallel_for(states_.size(), threads_, [&](std::size_t i) {
    states_[i].y = local_direction(states_[i], y_prev, cfg_.rho);
  });

  std::vector<Message> outbox;
  outbox.reserve(states_.size());
  for (auto& s : states_) {
    if (quantized()) {
      outbox.push_back(upstream(s.client_id, encode(s.y, *s.quant)));
    } else {
      outbox.push_back(upstream(s.client_id, s.y));
    }
  }
  auto inbox = bus_.gather(std::move(outbox));

  received_.clear();
  for (auto& m : inbox) {
    if (quantized()) {
      auto& prev = receiver_prev_[static_cast<std::size_t>(m.client)];
      prev = decode(std::get<QuantMsg>(m.payload), prev);
      received_.push_back(prev);
    } else {
      received_.push_back(std::move(std::get<VectorXd>(m.payload)));
    }
  }

  prev_y_ = y_prev;
  if (final_pass) {
    fednew_server_step(server_, received_, states_.size());
    last_step_ = server_.y;
    bus_.broadcast(broadcast_message(ModelAndDirection{server_.x, server_.y}));
    round_open_ = false;
  } else {
    if (received_.size() != states_.size()) throw ProtocolError("missing directions");
    server_.y = linalg::deterministic_mean(std::span<const VectorXd>(received_));
    bus_.broadcast(broadcast_message(server_.y));
  }

  for (auto& s : states_) fednew_dual_step(s, server_.y, cfg_.rho);
  if (!server_.y.allFinite()) {
    throw NumericalFailure(server_.k, "FedNew produced a non-finite direction");
  }
  check_model("FedNew");
}

// FedGD --------------------------------------------------------------------

double default_gd_step(const Federation& clients, const VectorXd& x) {
  double lipschitz = 0;
  for (const auto& c : clients) lipschitz = std::max(lipschitz, linalg::spectral_norm(c->hessian(x)));
  if (!(lipschitz > 0)) throw ConfigError("cannot derive a FedGD step from a zero Hessian");
  return 1.0 / lipschitz;
}

FedGD::FedGD(Federation clients, AlgoConfig cfg, BusOptions bus, int threads)
    : Optimizer(std::move(clients), cfg, bus, threads) {
  step_ = cfg_.gd_step ? *cfg_.gd_step : default_gd_step(clients_, server_.x);
}

void FedGD::run_round() {
  bus_.begin_round(server_.k);
  std::vector<Message> outbox(clients_.size());
  parallel_for(clients_.size(), threads_, [&](std::size_t i) {
    outbox[i] = upstream(static_cast<int>(i), clients_[i]->gradient(server_.x));
  });
  auto inbox = bus_.gather(std::move(outbox));
  std::vector<VectorXd> grads;
  grads.reserve(inbox.size());
  for (auto& m : inbox) grads.push_back(std::move(std::get<VectorXd>(m.payload)));
  last_step_ = step_ * linalg::deterministic_mean(std::span<const VectorXd>(grads));
  server_.x -= last_step_;
  ++server_.k;
  bus_.broadcast(broadcast_message(server_.x));
  check_model("FedGD");
}

// Newton Zero --------------------------------------------------------------

NewtonZero::NewtonZero(Federation clients, AlgoConfig cfg, BusOptions bus, int threads)
    : Optimizer(std::move(clients), cfg, bus, threads) {}

void NewtonZero::run_round() {
  const int k = server_.k;
  bus_.begin_round(k);
  const bool first = factor_.empty();
  std::vector<std::vector<Message>> per_client(clients_.size());
  parallel_for(clients_.size(), threads_, [&](std::size_t i) {
    const int id = static_cast<int>(i);
    if (first) per_client[i].push_back(upstream(id, clients_[i]->hessian(server_.x)));
    per_client[i].push_back(upstream(id, clients_[i]->gradient(server_.x)));
  });
  std::vector<Message> outbox;
  for (auto& msgs : per_client) {
    for (auto& m : msgs) outbox.push_back(std::move(m));
  }
  auto inbox = bus_.gather(std::move(outbox));

  std::vector<VectorXd> grads;
  std::vector<MatrixXd> hessians;
  for (auto& m : inbox) {
    if (m.kind() == PayloadKind::DenseMatrix) {
      hessians.push_back(std::move(std::get<MatrixXd>(m.payload)));
    } else {
      grads.push_back(std::move(std::get<VectorXd>(m.payload)));
    }
  }
  if (first) {
    MatrixXd h = linalg::deterministic_mean(std::span<const MatrixXd>(hessians));
    h.diagonal().array() += cfg_.alpha;
    try {
      factor_ = linalg::cholesky(h);
    } catch (const linalg::FactorizationError& e) {
      throw NumericalFailure(k, e.what());
    }
  }
  last_step_ = factor_.solve(linalg::deterministic_mean(std::span<const VectorXd>(grads)));
  server_.x -= last_step_;
  ++server_.k;
  bus_.broadcast(broadcast_message(server_.x));
  check_model("Newton Zero");
}

// Newton -------------------------------------------------------------------

Newton::Newton(Federation clients, AlgoConfig cfg, BusOptions bus, int threads)
    : Optimizer(std::move(clients), cfg, bus, threads) {}

namespace {

VectorXd newton_direction(std::span<const MatrixXd> hessians, std::span<const VectorXd> grads) {
  const MatrixXd h = linalg::deterministic_mean(hessians);
  const VectorXd g = linalg::deterministic_mean(grads);
  return linalg::cholesky(h).solve(g);
}

}  // namespace

void Newton::run_round() {
  const int k = server_.k;
  bus_.begin_round(k);
  std::vector<std::vector<Message>> per_client(clients_.size());
  parallel_for(clients_.size(), threads_, [&](std::size_t i) {
    const int id = static_cast<int>(i);
    per_client[i].push_back(upstream(id, clients_[i]->hessian(server_.x)));
    per_client[i].push_back(upstream(id, clients_[i]->gradient(server_.x)));
  });
  std::vector<Message> outbox;
  for (auto& msgs : per_client) {
    for (auto& m : msgs) outbox.push_back(std::move(m));
  }
  auto inbox = bus_.gather(std::move(outbox));
  std::vector<VectorXd> grads;
  std::vector<MatrixXd> hessians;
  for (auto& m : inbox) {
    if (m.kind() == PayloadKind::DenseMatrix) {
      hessians.push_back(std::move(std::get<MatrixXd>(m.payload)));
    } else {
      grads.push_back(std::move(std::get<VectorXd>(m.payload)));
    }
  }
  try {
    last_step_ = newton_direction(hessians, grads);
  } catch (const linalg::FactorizationError& e) {
    throw NumericalFailure(k, e.what());
  }
  server_.x -= last_step_;
  ++server_.k;
  bus_.broadcast(broadcast_message(server_.x));
  check_model("Newton");
}

VectorXd newton_step(const Federation& clients, const VectorXd& x) {
  std::vector<MatrixXd> hessians;
  std::vector<VectorXd> grads;
  for (const auto& c : clients) {
    hessians.push_back(c->hessian(x));
    grads.push_back(c->gradient(x));
  }
  return x - newton_direction(hessians, grads);
}

NewtonResult exact_newton(const Federation& clients, int rounds) {
  if (clients.empty()) throw ConfigError("federation has no clients");
  NewtonResult out;
  out.x = VectorXd::Zero(clients.front()->dim());
  for (int k = 0; k < rounds; ++k) {
    try {
      out.x = newton_step(clients, out.x);
    } catch (const linalg::FactorizationError& e) {
      throw NumericalFailure(k, e.what());
    }
    if (!out.x.allFinite()) throw NumericalFailure(k, "Newton produced a non-finite iterate");
    out.history.push_back(global_value(clients, out.x));
  }
  out.f = out.history.empty() ? global_value(clients, out.x) : out.history.back();
  out.grad_norm = global_gradient(clients, out.x).norm();
  return out;
}

std::unique_ptr<Optimizer> make_optimizer(Federation clients, const AlgoConfig& cfg,
                                          BusOptions bus, int threads) {
  switch (cfg.algorithm) {
    case Algorithm::FedNew:
    case Algorithm::QFedNew:
      return std::make_unique<FedNew>(std::move(clients), cfg, bus, threads);
    case Algorithm::FedGD: return std::make_unique<FedGD>(std::move(clients), cfg, bus, threads);
    case Algorithm::NewtonZero:
      return std::make_unique<NewtonZero>(std::move(clients), cfg, bus, threads);
    case Algorithm::Newton: return std::make_unique<Newton>(std::move(clients), cfg, bus, threads);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace fednew
