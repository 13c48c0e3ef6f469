#include "fednew/protocol.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace fednew {

const char* to_string(Direction d) { return d == Direction::Upstream ? "up" : "down"; }

const char* to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::DenseVector: return "dense_vector";
    case PayloadKind::QuantizedVector: return "quantized_vector";
    case PayloadKind::DenseMatrix: return "dense_matrix";
    case PayloadKind::ModelAndDirection: return "model_and_direction";
  }
  throw ProtocolError("unknown payload kind");
}

PayloadKind payload_kind_from_string(const std::string& s) {
  for (auto k : {PayloadKind::DenseVector, PayloadKind::QuantizedVector, PayloadKind::DenseMatrix,
                 PayloadKind::ModelAndDirection}) {
    if (s == to_string(k)) return k;
  }
  throw ProtocolError("unknown payload kind '" + s + "'");
}

PayloadKind Message::kind() const {
  switch (payload.index()) {
    case 0: return PayloadKind::DenseVector;
    case 1: return PayloadKind::QuantizedVector;
    case 2: return PayloadKind::DenseMatrix;
    case 3: return PayloadKind::ModelAndDirection;
  }
  throw ProtocolError("unknown payload kind");
}

Index Message::dim() const {
  return std::visit(
      [](const auto& p) -> Index {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, VectorXd>) {
          return p.size();
        } else if constexpr (std::is_same_v<T, QuantMsg>) {
          return p.dim();
        } else if constexpr (std::is_same_v<T, MatrixXd>) {
          if (p.rows() != p.cols()) throw ProtocolError("dense matrix payload must be square");
          return p.rows();
        } else {
          if (p.model.size() != p.direction.size()) {
            throw ProtocolError("model and direction lengths differ");
          }
          return p.model.size();
        }
      },
      payload);
}

Message upstream(int client, Payload payload) {
  return Message{Direction::Upstream, client, std::move(payload)};
}

Message broadcast_message(Payload payload) {
  return Message{Direction::Downstream, -1, std::move(payload)};
}

std::uint64_t account(PayloadKind kind, Index dim, const AccountingRules& rules, int quant_bits) {
  const auto d = static_cast<std::uint64_t>(dim);
  switch (kind) {
    case PayloadKind::DenseVector: return 32 * d;
    case PayloadKind::QuantizedVector:
      if (quant_bits < 1) throw ProtocolError("quantized payload without resolution");
      return static_cast<std::uint64_t>(quant_bits) * d +
             static_cast<std::uint64_t>(rules.range_bits);
    case PayloadKind::DenseMatrix:
      return rules.symmetric_matrices ? 32 * d * (d + 1) / 2 : 32 * d * d;
    case PayloadKind::ModelAndDirection: return 2 * 32 * d;
  }
  throw ProtocolError("unknown payload kind");
}

std::uint64_t account(const Message& m, const AccountingRules& rules) {
  const int qbits = m.kind() == PayloadKind::QuantizedVector ? std::get<QuantMsg>(m.payload).bits : 0;
  return account(m.kind(), m.dim(), rules, qbits);
}

void write_message_log_header(std::ostream& out) {
  out << "round,direction,client,kind,dim,quant_bits,bits\n";
}

void write_message_record(std::ostream& out, const MessageRecord& r) {
  out << r.round << ',' << to_string(r.direction) << ',' << r.client << ',' << to_string(r.kind)
      << ',' << r.dim << ',' << r.quant_bits << ',' << r.bits << '\n';
}

std::vector<MessageRecord> read_message_log(std::istream& in) {
  std::vector<MessageRecord> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 7) throw ProtocolError("message log: expected 7 fields in '" + line + "'");
    MessageRecord r;
    r.round = std::stoi(f[0]);
    if (f[1] == "up") {
      r.direction = Direction::Upstream;
    } else if (f[1] == "down") {
      r.direction = Direction::Downstream;
    } else {
      throw ProtocolError("message log: bad direction '" + f[1] + "'");
    }
    r.client = std::stoi(f[2]);
    r.kind = payload_kind_from_string(f[3]);
    r.dim = std::stoll(f[4]);
    r.quant_bits = std::stoi(f[5]);
    r.bits = std::stoull(f[6]);
    out.push_back(r);
  }
  return out;
}

BitLedger::BitLedger(int n_clients) : up_total_(static_cast<std::size_t>(n_clients), 0) {}

std::uint64_t BitLedger::upstream(int client) const {
  return up_total_.at(static_cast<std::size_t>(client));
}

std::uint64_t BitLedger::total() const {
  std::uint64_t t = 0;
  for (auto u : up_total_) t += u;
  return t + down_total_ * up_total_.size();
}

void BitLedger::begin_round(int round) {
  if (!rounds_.empty() && round <= rounds_.back().round) {
    throw ProtocolError("ledger rounds must increase");
  }
  rounds_.push_back(RoundBits{round, std::vector<std::uint64_t>(up_total_.size(), 0), 0});
}

void BitLedger::charge(const MessageRecord& r) {
  if (rounds_.empty() || rounds_.back().round != r.round) begin_round(r.round);
  auto& cur = rounds_.back();
  if (r.direction == Direction::Upstream) {
    if (r.client < 0 || r.client >= n_clients()) throw ProtocolError("ledger: bad client id");
    up_total_[static_cast<std::size_t>(r.client)] += r.bits;
    cur.upstream[static_cast<std::size_t>(r.client)] += r.bits;
  } else {
    down_total_ += r.bits;
    cur.downstream += r.bits;
  }
}

BitLedger BitLedger::replay(std::span<const MessageRecord> log, int n_clients) {
  BitLedger ledger(n_clients);
  for (const auto& r : log) ledger.charge(r);
  return ledger;
}

Bus::Bus(int n_clients, AccountingRules rules, std::ostream* log)
    : n_clients_(n_clients), rules_(rules), log_(log), ledger_(n_clients) {
  if (n_clients < 1) throw ProtocolError("bus needs at least one client");
  if (rules_.range_bits < 1 || rules_.range_bits > 32) {
    throw ProtocolError("range bits must be in [1, 32]");
  }
  if (log_) write_message_log_header(*log_);
}

void Bus::begin_round(int round) {
  ledger_.begin_round(round);
  round_ = round;
  awaiting_broadcast_ = false;
}

void Bus::record(const Message& m) {
  MessageRecord r;
  r.round = round_;
  r.direction = m.direction;
  r.client = m.client;
  r.kind = m.kind();
  r.dim = m.dim();
  r.quant_bits =
      r.kind == PayloadKind::QuantizedVector ? std::get<QuantMsg>(m.payload).bits : 0;
  r.bits = account(r.kind, r.dim, rules_, r.quant_bits);
  ledger_.charge(r);
  records_.push_back(r);
  if (log_) write_message_record(*log_, r);
}

std::vector<Message> Bus::gather(std::vector<Message> messages) {
  if (round_ < 0) throw ProtocolError("gather before begin_round");
  if (awaiting_broadcast_) throw ProtocolError("gather twice without a broadcast in between");
  std::vector<int> seen(static_cast<std::size_t>(n_clients_), 0);
  for (const auto& m : messages) {
    if (m.direction != Direction::Upstream) throw ProtocolError("gather expects upstream messages");
    if (m.client < 0 || m.client >= n_clients_) {
      throw ProtocolError("gather: unknown client " + std::to_string(m.client));
    }
    ++seen[static_cast<std::size_t>(m.client)];
  }
  for (int c = 0; c < n_clients_; ++c) {
    if (seen[static_cast<std::size_t>(c)] == 0) {
      throw ProtocolError("gather: missing message from client " + std::to_string(c));
    }
  }
  std::stable_sort(messages.begin(), messages.end(),
                   [](const Message& a, const Message& b) { return a.client < b.client; });
  for (const auto& m : messages) record(m);
  awaiting_broadcast_ = true;
  return messages;
}

void Bus::broadcast(const Message& m) {
  if (m.direction != Direction::Downstream) throw ProtocolError("broadcast expects downstream");
  if (!awaiting_broadcast_) throw ProtocolError("broadcast without a preceding gather");
  record(m);
  awaiting_broadcast_ = false;
}

}  // namespace fednew
