#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fednew {

/// The columns of a metrics CSV that summaries are computed from.
struct MetricsSeries {
  std::string label;
  std::vector<int> round;
  std::vector<double> gap;
  std::vector<std::uint64_t> up_bits;
  std::vector<std::uint64_t> down_bits;
};

MetricsSeries read_metrics_csv(std::istream& in, const std::string& label);
MetricsSeries read_metrics_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string label;
  double target = 0;
  std::optional<int> round;  // first round whose gap is <= target
  std::optional<std::uint64_t> up_bits;
  std::optional<std::uint64_t> total_bits;  // up + down, per client

  bool reached() const { return round.has_value(); }
};

SummaryRow summarize(const MetricsSeries& series, double target);
std::vector<SummaryRow> summarize(std::span<const MetricsSeries> series,
                                  std::span<const double> targets);

/// Fixed-width text table; unreached targets print "not_reached".
void write_summary(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace fednew
