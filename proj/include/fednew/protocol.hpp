#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fednew/linalg.hpp"
#include "fednew/quantizer.hpp"

namespace fednew {

enum class Direction { Upstream, Downstream };

enum class PayloadKind { DenseVector, QuantizedVector, DenseMatrix, ModelAndDirection };

const char* to_string(Direction d);
const char* to_string(PayloadKind k);
PayloadKind payload_kind_from_string(const std::string& s);

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelAndDirection {
  VectorXd model;
  VectorXd direction;
};

using Payload = std::variant<VectorXd, QuantMsg, MatrixXd, ModelAndDirection>;

/// A message on the simulated bus. Broadcasts carry client = -1.
struct Message {
  Direction direction = Direction::Upstream;
  int client = -1;
  Payload payload;

  PayloadKind kind() const;
  Index dim() const;
};

Message upstream(int client, Payload payload);
Message broadcast_message(Payload payload);

struct AccountingRules {
  int range_bits = 32;
  bool symmetric_matrices = false;
};

/// Bits charged for a payload of the given kind and dimension. Quantized
/// payloads need the per-entry resolution.
std::uint64_t account(PayloadKind kind, Index dim, const AccountingRules& rules = {},
                      int quant_bits = 0);
std::uint64_t account(const Message& m, const AccountingRules& rules = {});

/// One line of the audit log.
struct MessageRecord {
  int round = 0;
  Direction direction = Direction::Upstream;
  int client = -1;
  PayloadKind kind = PayloadKind::DenseVector;
  Index dim = 0;
  int quant_bits = 0;
  std::uint64_t bits = 0;

  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

void write_message_log_header(std::ostream& out);
void write_message_record(std::ostream& out, const MessageRecord& r);
std::vector<MessageRecord> read_message_log(std::istream& in);

struct RoundBits {
  int round = 0;
  std::vector<std::uint64_t> upstream;  // per client
  std::uint64_t downstream = 0;         // per client (each receives every broadcast)

  friend bool operator==(const RoundBits&, const RoundBits&) = default;
};

class BitLedger {
 public:
  explicit BitLedger(int n_clients = 0);

  int n_clients() const { return static_cast<int>(up_total_.size()); }
  std::uint64_t upstream(int client) const;
  std::uint64_t downstream() const { return down_total_; }
  std::uint64_t total() const;
  const std::vector<RoundBits>& rounds() const { return rounds_; }

  void begin_round(int round);
  void charge(const MessageRecord& r);

  /// Rebuilds a ledger from a recorded log.
  static BitLedger replay(std::span<const MessageRecord> log, int n_clients);

  friend bool operator==(const BitLedger&, const BitLedger&) = default;

 private:
  std::vector<std::uint64_t> up_total_;
  std::uint64_t down_total_ = 0;
  std::vector<RoundBits> rounds_;
};

/// Synchronous parameter-server bus. Each round is a sequence of
/// gather/broadcast pairs; every client must report in every gather.
class Bus {
 public:
  Bus(int n_clients, AccountingRules rules = {}, std::ostream* log = nullptr);

  void begin_round(int round);

  /// Validates that every client sent at least one message, charges them,
  /// and returns the messages ordered by (client, submission order).
  std::vector<Message> gather(std::vector<Message> messages);
  void broadcast(const Message& m);

  const BitLedger& ledger() const { return ledger_; }
  const std::vector<MessageRecord>& records() const { return records_; }
  const AccountingRules& rules() const { return rules_; }
  int n_clients() const { return n_clients_; }
  int round() const { return round_; }

 private:
  void record(const Message& m);

  int n_clients_;
  AccountingRules rules_;
  std::ostream* log_;
  BitLedger ledger_;
  std::vector<MessageRecord> records_;
  int round_ = -1;
  bool awaiting_broadcast_ = false;
};

}  // namespace fednew
