#include "fednew/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace fednew {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  std::size_t line;
};

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

double to_real(const Entry& e, const std::string& key) {
  double v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto res = std::from_chars(e.value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    fail(e.line, key + " expects a real number, got '" + e.value + "'");
  }
  return v;
}

long long to_int(const Entry& e, const std::string& key) {
  long long v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto res = std::from_chars(e.value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    fail(e.line, key + " expects an integer, got '" + e.value + "'");
  }
  return v;
}

std::uint64_t to_u64(const Entry& e, const std::string& key) {
  std::uint64_t v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto res = std::from_chars(e.value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    fail(e.line, key + " expects a nonnegative integer, got '" + e.value + "'");
  }
  return v;
}

bool to_bool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  fail(e.line, key + " expects true or false, got '" + e.value + "'");
}

int to_bounded_int(const Entry& e, const std::string& key) {
  const long long v = to_int(e, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    fail(e.line, key + " is out of range");
  }
  return static_cast<int>(v);
}

using Block = std::map<std::string, Entry>;

const std::set<std::string> kAlgoKeys{"algo.name",   "algo.alpha",        "algo.rho",
                                      "algo.r",      "algo.gd_step",      "algo.bits",
                                      "algo.range_bits", "algo.inner_passes", "algo.max_rounds",
                                      "algo.seed"};

const std::set<std::string> kGlobalKeys{
    "name",
    "seed",
    "dataset.path",
    "dataset.dim_override",
    "dataset.n_clients",
    "dataset.mu",
    "dataset.truncate_to_multiple",
    "dataset.shuffle_seed",
    "dataset.expect_samples",
    "dataset.expect_shard_size",
    "dataset.expect_dim",
    "diag.enabled",
    "diag.beta1",
    "account.symmetric_matrices",
    "account.message_log",
    "output.dir",
    "output.targets",
    "algo.fstar_cache_path",
};

void apply_algo(const Block& block, AlgoConfig& algo, bool& explicit_seed) {
  for (const auto& [key, e] : block) {
    if (key == "algo.name") {
      try {
        algo.algorithm = algorithm_from_string(e.value);
      } catch (const ConfigError& err) {
        fail(e.line, err.what());
      }
    } else if (key == "algo.alpha") {
      algo.alpha = to_real(e, key);
    } else if (key == "algo.rho") {
      algo.rho = to_real(e, key);
    } else if (key == "algo.r") {
      algo.refresh_rate = to_real(e, key);
    } else if (key == "algo.gd_step") {
      algo.gd_step = to_real(e, key);
    } else if (key == "algo.bits") {
      algo.bits = to_bounded_int(e, key);
    } else if (key == "algo.range_bits") {
      algo.range_bits = to_bounded_int(e, key);
    } else if (key == "algo.inner_passes") {
      algo.inner_passes = to_bounded_int(e, key);
    } else if (key == "algo.max_rounds") {
      algo.max_rounds = to_bounded_int(e, key);
    } else if (key == "algo.seed") {
      algo.seed = to_u64(e, key);
      explicit_seed = true;
    }
  }
}

bool valid_label(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& name) {
  Block global;
  std::vector<std::pair<std::string, Block>> sections;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      const std::string label = trim(line.substr(1, line.size() - 2));
      if (!valid_label(label)) fail(lineno, "run labels may use letters, digits, '_' and '-'");
      for (const auto& [l, _] : sections) {
        if (l == label) fail(lineno, "duplicate run label '" + label + "'");
      }
      sections.emplace_back(label, Block{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) fail(lineno, "empty value for '" + key + "'");
    Block& block = sections.empty() ? global : sections.back().second;
    const bool allowed = sections.empty() ? (kGlobalKeys.count(key) || kAlgoKeys.count(key))
                                          : kAlgoKeys.count(key) > 0;
    if (!allowed) {
      fail(lineno, sections.empty() ? "unknown key '" + key + "'"
                                    : "key '" + key + "' is not allowed inside a run section");
    }
    if (!block.emplace(key, Entry{value, lineno}).second) {
      fail(lineno, "duplicate key '" + key + "'");
    }
  }

  ExperimentConfig cfg;
  cfg.name = name;
  for (const auto& [key, e] : global) {
    if (key == "name") {
      cfg.name = e.value;
    } else if (key == "seed") {
      cfg.seed = to_u64(e, key);
    } else if (key == "dataset.path") {
      cfg.dataset.path = e.value;
    } else if (key == "dataset.dim_override") {
      cfg.dataset.dim_override = to_bounded_int(e, key);
      if (*cfg.dataset.dim_override < 1) fail(e.line, "dataset.dim_override must be >= 1");
    } else if (key == "dataset.n_clients") {
      cfg.dataset.n_clients = to_bounded_int(e, key);
      if (cfg.dataset.n_clients < 1) fail(e.line, "dataset.n_clients must be >= 1");
    } else if (key == "dataset.mu") {
      cfg.dataset.mu = to_real(e, key);
      if (cfg.dataset.mu < 0) fail(e.line, "dataset.mu must be >= 0");
    } else if (key == "dataset.truncate_to_multiple") {
      cfg.dataset.truncate_to_multiple = to_bool(e, key);
    } else if (key == "dataset.shuffle_seed") {
      cfg.dataset.shuffle_seed = to_u64(e, key);
    } else if (key == "dataset.expect_samples") {
      cfg.dataset.expect_samples = to_u64(e, key);
    } else if (key == "dataset.expect_shard_size") {
      cfg.dataset.expect_shard_size = to_u64(e, key);
    } else if (key == "dataset.expect_dim") {
      cfg.dataset.expect_dim = to_bounded_int(e, key);
    } else if (key == "diag.enabled") {
      cfg.diag.enabled = to_bool(e, key);
    } else if (key == "diag.beta1") {
      cfg.diag.beta1 = to_real(e, key);
    } else if (key == "account.symmetric_matrices") {
      cfg.accounting.symmetric_matrices = to_bool(e, key);
    } else if (key == "account.message_log") {
      cfg.message_log = to_bool(e, key);
    } else if (key == "output.dir") {
      cfg.output_dir = e.value;
    } else if (key == "output.targets") {
      cfg.targets.clear();
      std::stringstream ss(e.value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const double t = to_real(Entry{trim(item), e.line}, key);
        if (!(t > 0)) fail(e.line, "summary targets must be > 0");
        cfg.targets.push_back(t);
      }
      if (cfg.targets.empty()) fail(e.line, "output.targets is empty");
    } else if (key == "algo.fstar_cache_path") {
      cfg.fstar_cache_path = e.value;
    }
  }
  if (cfg.dataset.path.empty()) throw ConfigError("dataset.path is required");

  AlgoConfig defaults;
  bool default_seed = false;
  apply_algo(global, defaults, default_seed);
  if (sections.empty()) {
    if (!global.count("algo.name")) {
      throw ConfigError("no runs: add [label] sections or a top-level algo.name");
    }
    sections.emplace_back(to_string(defaults.algorithm), Block{});
  }
  for (const auto& [label, block] : sections) {
    RunSpec run;
    run.label = label;
    run.algo = defaults;
    run.explicit_seed = default_seed;
    apply_algo(block, run.algo, run.explicit_seed);
    if (!block.count("algo.name") && !global.count("algo.name")) {
      throw ConfigError("run [" + label + "] has no algo.name");
    }
    try {
      run.algo.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("run [" + label + "]: " + e.what());
    }
    if (!run.explicit_seed) run.algo.seed = cfg.seed;
    cfg.runs.push_back(std::move(run));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.stem().string());
}

}  // namespace fednew
