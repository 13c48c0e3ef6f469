#include "fednew/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace fednew {

namespace {

void warn(std::ostream* out, const std::string& msg) {
  if (out) *out << "warning: " << msg << '\n';
}

std::string hex(double v) { return fmt::format("{:a}", v); }

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("bad number '" + s + "'");
  return v;
}

}  // namespace

LoadedData load_data(const DatasetConfig& cfg, std::ostream* warnings) {
  if (!std::filesystem::exists(cfg.path)) {
    throw DatasetError("dataset file not found: " + cfg.path.string());
  }
  LoadedData out;
  try {
    out.dataset = load_libsvm(cfg.path, cfg.dim_override);
  } catch (const ParseError& e) {
    throw DatasetError(cfg.path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw DatasetError(e.what());
  }
  if (cfg.expect_samples && *cfg.expect_samples != out.dataset.size()) {
    warn(warnings, fmt::format("{}: expected {} samples, found {}", cfg.path.string(),
                               *cfg.expect_samples, out.dataset.size()));
  }
  if (cfg.expect_dim && *cfg.expect_dim != out.dataset.dim) {
    warn(warnings, fmt::format("{}: expected dimension {}, found {}", cfg.path.string(),
                               *cfg.expect_dim, out.dataset.dim));
  }
  ShardOptions opts;
  opts.truncate_to_multiple = cfg.truncate_to_multiple;
  opts.shuffle_seed = cfg.shuffle_seed;
  std::vector<ClientShard> shards;
  try {
    shards = shard(out.dataset, cfg.n_clients, cfg.mu, opts);
  } catch (const ShardError& e) {
    throw ConfigError(e.what());
  }
  out.shard_size = shards.front().size();
  if (cfg.expect_shard_size && *cfg.expect_shard_size != out.shard_size) {
    warn(warnings, fmt::format("{}: expected {} samples per client, using {}", cfg.path.string(),
                               *cfg.expect_shard_size, out.shard_size));
  }
  out.clients = logistic_federation(std::move(shards));
  return out;
}

std::optional<FStar> read_fstar_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                                      double mu) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    std::string tag, version, key, value;
    in >> tag >> version;
    if (tag != "fednew-fstar" || version != "1") return std::nullopt;
    in >> key >> value;
    if (key != "fingerprint" || value != fmt::format("{:016x}", fingerprint)) return std::nullopt;
    in >> key >> value;
    if (key != "mu" || parse_hex(value) != mu) return std::nullopt;
    FStar fs;
    in >> key >> value;
    if (key != "f") return std::nullopt;
    fs.f = parse_hex(value);
    in >> key >> value;
    if (key != "grad_norm") return std::nullopt;
    fs.grad_norm = parse_hex(value);
    std::size_t count = 0;
    in >> key >> count;
    if (key != "history") return std::nullopt;
    for (std::size_t i = 0; i < count; ++i) {
      in >> value;
      fs.history.push_back(parse_hex(value));
    }
    in >> key >> count;
    if (key != "x" || !in) return std::nullopt;
    fs.x.resize(static_cast<Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      in >> value;
      fs.x(static_cast<Index>(i)) = parse_hex(value);
    }
    if (!in) return std::nullopt;
    fs.from_cache = true;
    return fs;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_fstar_cache(const std::filesystem::path& path, std::uint64_t fingerprint, double mu,
                       const FStar& fs) {
  std::string out = "fednew-fstar 1\n";
  out += fmt::format("fingerprint {:016x}\nmu {}\nf {}\ngrad_norm {}\n", fingerprint, hex(mu),
                     hex(fs.f), hex(fs.grad_norm));
  out += fmt::format("history {}", fs.history.size());
  for (double h : fs.history) out += " " + hex(h);
  out += fmt::format("\nx {}", fs.x.size());
  for (Index i = 0; i < fs.x.size(); ++i) out += " " + hex(fs.x(i));
  out += "\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, out);
}

FStar compute_fstar(const LoadedData& data, double mu,
                    const std::optional<std::filesystem::path>& cache_path) {
  const auto fp = fingerprint(data.dataset);
  if (cache_path) {
    if (auto cached = read_fstar_cache(*cache_path, fp, mu);
        cached && cached->x.size() == data.dataset.dim) {
      return *cached;
    }
  }
  const auto newton = exact_newton(data.clients, kReferenceNewtonRounds);
  FStar fs{newton.x, newton.f, newton.grad_norm, newton.history, false};
  if (cache_path) write_fstar_cache(*cache_path, fp, mu, fs);
  return fs;
}

RunRecord run_single(const Federation& clients, const RunSpec& run, double f_star,
                     const DiagConfig& diag_cfg, const AccountingRules& rules, int threads,
                     std::ostream* message_log, std::ostream* warnings) {
  AccountingRules effective = rules;
  effective.range_bits = run.algo.range_bits;
  auto opt = make_optimizer(clients, run.algo, BusOptions{effective, message_log}, threads);
  const bool fednew_family =
      run.algo.algorithm == Algorithm::FedNew || run.algo.algorithm == Algorithm::QFedNew;

  RunRecord rec;
  rec.label = run.label;
  rec.algorithm = run.algo.algorithm;
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < run.algo.max_rounds; ++k) {
    opt->run_round();
    RoundRow row;
    row.round = k;
    row.f = global_value(clients, opt->model());
    if (!std::isfinite(row.f)) throw NumericalFailure(k, "objective is not finite");
    const auto gap = diag::optimality_gap(row.f, f_star);
    row.gap = gap.value;
    if (gap.clamped) {
      ++rec.clamp_warnings;
      warn(warnings, fmt::format("{}: round {}: f(x) = {} is below f* = {}; gap clamped to 0",
                                 run.label, k, row.f, f_star));
    }
    row.up_bits = opt->bus().ledger().upstream(0);
    row.down_bits = opt->bus().ledger().downstream();
    if (diag_cfg.enabled && fednew_family) {
      row.diag = diag::analyze(static_cast<const FedNew&>(*opt), diag_cfg.beta1);
    }
    rec.rows.push_back(std::move(row));
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<std::string> csv_header(bool with_diagnostics) {
  std::vector<std::string> cols{"round", "f", "gap", "up_bits_cum", "down_bits_cum"};
  if (with_diagnostics) {
    for (const char* c : {"y_star_norm", "direction_error", "direction_error_rel",
                          "dual_residual_norm", "max_primal_residual", "dual_sum_norm",
                          "lyapunov", "lq_estimate", "beta1", "alpha_slack", "step_ratio"}) {
      cols.emplace_back(c);
    }
  }
  return cols;
}

void write_csv(std::ostream& out, const RunRecord& record, bool with_diagnostics) {
  const auto header = csv_header(with_diagnostics);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : record.rows) {
    out << fmt::format("{},{},{},{},{}", r.round, r.f, r.gap, r.up_bits, r.down_bits);
    if (with_diagnostics) {
      const auto& d = r.diag.value();
      out << fmt::format(",{},{},{},{},{},{},{},{},{},{},{}", d.y_star_norm, d.direction_error,
                         d.direction_error_rel, d.dual_residual_norm, d.max_primal_residual,
                         d.dual_sum_norm, d.lyapunov, d.lq_estimate, d.beta1, d.alpha_slack,
                         d.step_ratio);
    }
    out << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ExperimentResult run_experiment(ExperimentConfig cfg, const RunOptions& options) {
  if (options.seed) {
    cfg.seed = *options.seed;
    for (auto& r : cfg.runs) {
      if (!r.explicit_seed) r.algo.seed = cfg.seed;
    }
  }
  ExperimentResult result;
  result.out_dir = options.out_dir ? *options.out_dir : cfg.output_dir;
  std::filesystem::create_directories(result.out_dir);

  const auto data = load_data(cfg.dataset, options.log);
  const auto cache = cfg.fstar_cache_path ? *cfg.fstar_cache_path
                                          : result.out_dir / (cfg.name + ".fstar");
  result.fstar = compute_fstar(data, cfg.dataset.mu, cache);
  if (options.log) {
    *options.log << fmt::format("{}: N={} d={} n={} m={} f*={} |grad f*|={:.3e}{}\n", cfg.name,
                                data.dataset.size(), data.dataset.dim, data.clients.size(),
                                data.shard_size, result.fstar.f, result.fstar.grad_norm,
                                result.fstar.from_cache ? " (cached)" : "");
  }

  std::vector<MetricsSeries> series;
  for (const auto& run : cfg.runs) {
    std::ostringstream log_buf;
    auto rec = run_single(data.clients, run, result.fstar.f, cfg.diag, cfg.accounting,
                          options.threads, cfg.message_log ? &log_buf : nullptr, options.log);
    const bool with_diag = cfg.diag.enabled && (run.algo.algorithm == Algorithm::FedNew ||
                                                run.algo.algorithm == Algorithm::QFedNew);
    std::ostringstream csv;
    write_csv(csv, rec, with_diag);
    rec.csv_path = result.out_dir / (run.label + ".csv");
    write_file_atomic(rec.csv_path, csv.str());
    if (cfg.message_log) {
      write_file_atomic(result.out_dir / (run.label + ".messages.log"), log_buf.str());
    }
    if (options.log) {
      *options.log << fmt::format("  {:<16} {:>5} rounds  {:8.3f}s  final gap {:.3e}\n", run.label,
                                  rec.rows.size(), rec.wall_seconds,
                                  rec.rows.empty() ? 0.0 : rec.rows.back().gap);
    }
    MetricsSeries s;
    s.label = run.label;
    for (const auto& r : rec.rows) {
      s.round.push_back(r.round);
      s.gap.push_back(r.gap);
      s.up_bits.push_back(r.up_bits);
      s.down_bits.push_back(r.down_bits);
    }
    series.push_back(std::move(s));
    result.clamp_warnings += rec.clamp_warnings;
    result.runs.push_back(std::move(rec));
  }
  result.summary = summarize(series, cfg.targets);
  std::ostringstream table;
  write_summary(table, result.summary);
  write_file_atomic(result.out_dir / "summary.txt", table.str());
  return result;
}

}  // namespace fednew
