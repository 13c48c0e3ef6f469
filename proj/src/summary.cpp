#include "fednew/summary.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fednew {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

MetricsSeries read_metrics_csv(std::istream& in, const std::string& label) {
  MetricsSeries s;
  s.label = label;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(label + ": empty metrics file");
  const auto header = split_csv(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error(label + ": metrics file lacks column '" + name + "'");
  };
  const auto c_round = column("round");
  const auto c_gap = column("gap");
  const auto c_up = column("up_bits_cum");
  const auto c_down = column("down_bits_cum");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw std::runtime_error(label + ": ragged row '" + line + "'");
    s.round.push_back(std::stoi(f[c_round]));
    s.gap.push_back(std::stod(f[c_gap]));
    s.up_bits.push_back(std::stoull(f[c_up]));
    s.down_bits.push_back(std::stoull(f[c_down]));
  }
  return s;
}

MetricsSeries read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_metrics_csv(in, path.stem().string());
}

SummaryRow summarize(const MetricsSeries& series, double target) {
  if (!(target > 0)) throw std::invalid_argument("summary target must be > 0");
  SummaryRow row;
  row.label = series.label;
  row.target = target;
  for (std::size_t i = 0; i < series.gap.size(); ++i) {
    if (series.gap[i] <= target) {
      row.round = series.round[i];
      row.up_bits = series.up_bits[i];
      row.total_bits = series.up_bits[i] + series.down_bits[i];
      break;
    }
  }
  return row;
}

std::vector<SummaryRow> summarize(std::span<const MetricsSeries> series,
                                  std::span<const double> targets) {
  std::vector<SummaryRow> rows;
  for (double t : targets) {
    for (const auto& s : series) rows.push_back(summarize(s, t));
  }
  return rows;
}

void write_summary(std::ostream& out, std::span<const SummaryRow> rows) {
  out << fmt::format("{:<20} {:>8} {:>12} {:>16} {:>16}\n", "run", "target", "rounds", "up_bits",
                     "total_bits");
  for (const auto& r : rows) {
    if (r.reached()) {
      out << fmt::format("{:<20} {:>8.0e} {:>12} {:>16} {:>16}\n", r.label, r.target, *r.round,
                         *r.up_bits, *r.total_bits);
    } else {
      out << fmt::format("{:<20} {:>8.0e} {:>12} {:>16} {:>16}\n", r.label, r.target,
                         "not_reached", "-", "-");
    }
  }
}

}  // namespace fednew
