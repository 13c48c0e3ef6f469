#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "fednew/harness.hpp"
#include "fednew/protocol.hpp"
#include "support.hpp"

using namespace fednew;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fednew-harness-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_a1a(int rounds) {
  std::istringstream in(
      "dataset.path = placeholder\n"
      "dataset.n_clients = 10\n"
      "dataset.dim_override = 99\n"
      "diag.enabled = true\n"
      "account.message_log = true\n"
      "algo.alpha = 0.003\n"
      "algo.rho = 0.003\n"
      "algo.max_rounds = " +
      std::to_string(rounds) +
      "\n"
      "[fedgd]\nalgo.name = fedgd\n"
      "[newton_zero]\nalgo.name = newton_zero\n"
      "[fednew_r01]\nalgo.name = fednew\nalgo.r = 0.1\n"
      "[qfednew_r1]\nalgo.name = qfednew\nalgo.r = 1\n");
  auto cfg = parse_config(in, "a1a");
  cfg.dataset.path = test::data_dir() / "a1a.libsvm";
  return cfg;
}

}  // namespace

TEST_CASE("zero rounds gives a header-only CSV") {
  const auto dir = scratch("zero");
  auto cfg = small_a1a(0);
  const auto result = run_experiment(cfg, {.out_dir = dir});
  for (const auto& run : result.runs) {
    CHECK(run.rows.empty());
    const std::string text = slurp(run.csv_path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(text.rfind("round,f,gap,up_bits_cum,down_bits_cum", 0) == 0);
  }
}

TEST_CASE("outputs are byte-identical across repeats and thread counts") {
  const auto a = scratch("det-a");
  const auto b = scratch("det-b");
  const auto cfg = small_a1a(6);
  const auto ra = run_experiment(cfg, {.out_dir = a, .threads = 1});
  const auto rb = run_experiment(cfg, {.out_dir = b, .threads = 4});
  REQUIRE(ra.runs.size() == rb.runs.size());
  for (std::size_t i = 0; i < ra.runs.size(); ++i) {
    CHECK(slurp(ra.runs[i].csv_path) == slurp(rb.runs[i].csv_path));
    const auto log = fs::path(ra.runs[i].csv_path).replace_extension(".messages.log");
    const auto log_b = fs::path(rb.runs[i].csv_path).replace_extension(".messages.log");
    CHECK(slurp(log) == slurp(log_b));
  }
  CHECK(slurp(a / "summary.txt") == slurp(b / "summary.txt"));
}

TEST_CASE("summary agrees with the CSVs and the message log with the CSV bits") {
  const auto dir = scratch("summary");
  const auto result = run_experiment(small_a1a(8), {.out_dir = dir});
  for (const auto& run : result.runs) {
    std::ifstream in(run.csv_path);
    const auto series = read_metrics_csv(in, run.label);
    REQUIRE(series.round.size() == 8);
    for (std::size_t k = 0; k < series.round.size(); ++k) {
      CHECK(series.gap[k] == run.rows[k].gap);
      CHECK(series.up_bits[k] == run.rows[k].up_bits);
    }
    std::ifstream log_in(fs::path(run.csv_path).replace_extension(".messages.log"));
    const auto ledger = BitLedger::replay(read_message_log(log_in), 10);
    CHECK(ledger.upstream(0) == run.rows.back().up_bits);
    CHECK(ledger.downstream() == run.rows.back().down_bits);
  }
  std::vector<MetricsSeries> all;
  for (const auto& run : result.runs) {
    std::ifstream in(run.csv_path);
    all.push_back(read_metrics_csv(in, run.label));
  }
  std::ostringstream expect;
  write_summary(expect, summarize(all, small_a1a(8).targets));
  CHECK(slurp(dir / "summary.txt") == expect.str());
}

TEST_CASE("reference optimum cache round trip and staleness") {
  const auto dir = scratch("fstar");
  DatasetConfig dc;
  dc.path = test::data_dir() / "a1a.libsvm";
  dc.n_clients = 10;
  dc.dim_override = 99;
  const auto data = load_data(dc);
  const auto cache = dir / "a1a.fstar";
  const auto first = compute_fstar(data, 1e-3, cache);
  CHECK_FALSE(first.from_cache);
  REQUIRE(fs::exists(cache));
  const auto second = compute_fstar(data, 1e-3, cache);
  CHECK(second.from_cache);
  CHECK(second.f == first.f);
  CHECK(second.grad_norm == first.grad_norm);
  CHECK(second.x == first.x);
  CHECK(second.history == first.history);

  const auto fp = fingerprint(data.dataset);
  CHECK_FALSE(read_fstar_cache(cache, fp + 1, 1e-3).has_value());
  CHECK_FALSE(read_fstar_cache(cache, fp, 2e-3).has_value());
  write_file_atomic(cache, "garbage\n");
  const auto third = compute_fstar(data, 1e-3, cache);
  CHECK_FALSE(third.from_cache);
  CHECK(third.f == first.f);
}

TEST_CASE("missing dataset is a dataset error") {
  DatasetConfig dc;
  dc.path = "/nonexistent/nothing.libsvm";
  CHECK_THROWS_AS(load_data(dc), DatasetError);
}

TEST_CASE("shape mismatches warn without failing") {
  DatasetConfig dc;
  dc.path = test::data_dir() / "a1a.libsvm";
  dc.n_clients = 10;
  dc.expect_samples = 1234;
  dc.expect_dim = 7;
  std::ostringstream warn;
  const auto data = load_data(dc, &warn);
  CHECK(data.clients.size() == 10);
  CHECK(warn.str().find("1234") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const std::string lab = FEDNEW_LAB_PATH;
  const auto dir = scratch("cli");
  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "dataset.path = x\nalgo.name = nonsense\n";
  }
  {
    std::ofstream missing(dir / "missing.cfg");
    missing << "dataset.path = /nonexistent/none.libsvm\nalgo.name = fednew\n";
  }
  auto status = [&](const std::string& args) {
    const int raw = std::system((lab + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("run --config " + (dir / "bad.cfg").string()) == 2);
  CHECK(status("run --config " + (dir / "missing.cfg").string() + " --out " + dir.string()) == 3);
}
