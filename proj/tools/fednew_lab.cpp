// Command-line driver: runs experiments from config files, resolves the
// reference optimum, summarizes metric CSVs and writes synthetic datasets.

#include <glob.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fednew/harness.hpp"
#include "fednew/parallel.hpp"
#include "fednew/synth.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNumeric = 4 };

std::vector<std::filesystem::path> expand(const std::string& pattern) {
  glob_t g{};
  std::vector<std::filesystem::path> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  return out;
}

int cmd_run(const std::string& config, const std::optional<std::string>& out,
            const std::optional<std::uint64_t>& seed) {
  auto cfg = fednew::load_config(config);
  fednew::RunOptions opts;
  if (out) opts.out_dir = *out;
  opts.seed = seed;
  opts.threads = fednew::thread_budget();
  opts.log = &std::cerr;
  const auto result = fednew::run_experiment(std::move(cfg), opts);
  fednew::write_summary(std::cout, result.summary);
  if (result.clamp_warnings > 0) {
    std::cerr << fmt::format("{} round(s) fell below f* by more than rounding noise\n",
                             result.clamp_warnings);
  }
  return kOk;
}

int cmd_fstar(const std::string& config) {
  const auto cfg = fednew::load_config(config);
  const auto data = fednew::load_data(cfg.dataset, &std::cerr);
  const auto cache = cfg.fstar_cache_path ? *cfg.fstar_cache_path
                                          : cfg.output_dir / (cfg.name + ".fstar");
  const auto fs = fednew::compute_fstar(data, cfg.dataset.mu, cache);
  std::cout << fmt::format("f* = {:.17g}\n|grad f*| = {:.3e}\nsource: {}\n", fs.f, fs.grad_norm,
                           fs.from_cache ? "cache" : "computed");
  return kOk;
}

int cmd_summarize(const std::string& pattern, const std::vector<double>& targets) {
  const auto files = expand(pattern);
  if (files.empty()) {
    std::cerr << "no files match " << pattern << '\n';
    return kUsage;
  }
  std::vector<fednew::MetricsSeries> series;
  for (const auto& f : files) series.push_back(fednew::read_metrics_csv(f));
  fednew::write_summary(std::cout, fednew::summarize(series, targets));
  return kOk;
}

int cmd_synth(const std::string& profile, const std::string& out) {
  const auto ds = fednew::synth::generate(fednew::synth::profile(profile));
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw fednew::DatasetError("cannot write " + out);
  fednew::write_libsvm(file, ds);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedNew experiment driver"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run every algorithm in a config");
  run->add_option("--config", config, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides output.dir)");
  run->add_option("--seed", seed, "seed for runs without an explicit algo.seed");

  auto* fstar = app.add_subcommand("fstar", "compute or load the reference optimum");
  fstar->add_option("--config", config, "experiment config file")->required();

  std::string pattern;
  std::vector<double> targets{1e-2, 1e-4, 1e-6};
  auto* summarize = app.add_subcommand("summarize", "rounds and bits to reach target gaps");
  summarize->add_option("--glob", pattern, "metrics CSV glob")->required();
  summarize->add_option("--target", targets, "target gap(s)");

  std::string profile, synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic stand-in dataset");
  synth->add_option("--profile", profile, "a1a, w7a, w8a or phishing")->required();
  synth->add_option("--out", synth_out, "output LibSVM file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out_dir, seed);
    if (*fstar) return cmd_fstar(config);
    if (*summarize) return cmd_summarize(pattern, targets);
    if (*synth) return cmd_synth(profile, synth_out);
  } catch (const fednew::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const fednew::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kData;
  } catch (const fednew::ParseError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kData;
  } catch (const fednew::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
