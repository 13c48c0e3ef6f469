#include <doctest.h>

#include <sstream>

#include "fednew/summary.hpp"

using namespace fednew;

namespace {

MetricsSeries read(const std::string& text, const std::string& label = "run") {
  std::istringstream in(text);
  return read_metrics_csv(in, label);
}

}  // namespace

TEST_CASE("reads the metric columns by name") {
  const auto s = read(
      "round,f,gap,up_bits_cum,down_bits_cum,lyapunov\n"
      "0,1.5,0.5,100,200,3\n"
      "1,1.1,0.1,200,400,2\n");
  CHECK(s.round == std::vector<int>{0, 1});
  CHECK(s.gap == std::vector<double>{0.5, 0.1});
  CHECK(s.up_bits == std::vector<std::uint64_t>{100, 200});
  CHECK(s.down_bits == std::vector<std::uint64_t>{200, 400});
  CHECK_THROWS(read("round,f\n0,1\n"));
  CHECK_THROWS(read("round,f,gap,up_bits_cum,down_bits_cum\n0,1\n"));
  CHECK_THROWS(read(""));
}

TEST_CASE("a first row already below target reports round zero") {
  const auto s = read("round,f,gap,up_bits_cum,down_bits_cum\n0,1,1e-9,3168,6336\n");
  const auto row = summarize(s, 1e-4);
  REQUIRE(row.reached());
  CHECK(*row.round == 0);
  CHECK(*row.up_bits == 3168u);
  CHECK(*row.total_bits == 3168u + 6336u);
}

TEST_CASE("targets never reached are reported as such") {
  const auto s = read("round,f,gap,up_bits_cum,down_bits_cum\n0,1,0.5,1,1\n1,1,0.2,2,2\n");
  const auto row = summarize(s, 1e-4);
  CHECK_FALSE(row.reached());
  std::ostringstream out;
  const std::vector<SummaryRow> rows{row};
  write_summary(out, rows);
  CHECK(out.str().find("not_reached") != std::string::npos);
  CHECK_THROWS(summarize(s, 0.0));
}

TEST_CASE("first crossing wins and the table lists every target") {
  const auto s = read(
      "round,f,gap,up_bits_cum,down_bits_cum\n"
      "0,1,1e-1,10,20\n1,1,1e-3,20,40\n2,1,1e-2,30,60\n3,1,1e-5,40,80\n");
  std::vector<MetricsSeries> all{s};
  const std::vector<double> targets{1e-2, 1e-4};
  const auto rows = summarize(all, targets);
  REQUIRE(rows.size() == 2);
  CHECK(*rows[0].round == 1);
  CHECK(*rows[1].round == 3);
}

TEST_CASE("dense against quantized bits at equal rounds") {
  // d = 267: 32 d per dense message against 3 d + 32 per quantized message.
  std::ostringstream dense, quant;
  dense << "round,f,gap,up_bits_cum,down_bits_cum\n";
  quant << "round,f,gap,up_bits_cum,down_bits_cum\n";
  for (int k = 0; k < 5; ++k) {
    dense << k << ",1," << 1.0 / (k + 1) << ',' << 8544 * (k + 1) << ",0\n";
    quant << k << ",1," << 1.0 / (k + 1) << ',' << 833 * (k + 1) << ",0\n";
  }
  const auto d = summarize(read(dense.str()), 0.3);
  const auto q = summarize(read(quant.str()), 0.3);
  CHECK(*d.round == *q.round);
  CHECK(double(*d.up_bits) / double(*q.up_bits) == doctest::Approx(32.0 * 267 / (3 * 267 + 32)));
}
