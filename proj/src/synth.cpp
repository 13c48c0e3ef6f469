#include "fednew/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fednew::synth {

namespace {

// Raw-bit conversions keep the generated files identical across standard
// library implementations (std distributions are implementation-defined).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<double> zipf_weights(int count, double exponent) {
  std::vector<double> w(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) w[static_cast<std::size_t>(c)] = 1.0 / std::pow(c + 1.0, exponent);
  return w;
}

}  // namespace

std::vector<std::string> profile_names() { return {"a1a", "w7a", "w8a", "phishing"}; }

Profile profile(const std::string& name) {
  if (name == "a1a") {
    return {"a1a", 1600, 99, {5, 5, 7, 16, 7, 6, 14, 6, 5, 2, 3, 3, 3, 17}, 0.0, 0.25, 1.0, 0xa1a};
  }
  if (name == "w7a") return {"w7a", 24640, 263, {}, 11.6, 0.03, 1.5, 0x77a};
  if (name == "w8a") return {"w8a", 49700, 267, {}, 11.6, 0.03, 1.5, 0x78a};
  if (name == "phishing") {
    return {"phishing", 11040, 40, {3, 3, 2, 2, 2, 2, 3, 3, 2, 2, 2, 2, 3, 3, 2, 2, 2},
            0.0, 0.56, 1.5, 0x9415};
  }
  throw std::invalid_argument("unknown synthetic profile '" + name + "'");
}

Dataset generate(const Profile& p) {
  const int grouped = std::accumulate(p.groups.begin(), p.groups.end(), 0);
  const int keywords = p.dim - grouped;
  if (p.samples == 0 || keywords < 0) throw std::invalid_argument("inconsistent profile");
  if (keywords > 0 && !(p.keyword_density > 0)) {
    throw std::invalid_argument("keyword columns need a positive density");
  }

  Stream rng(p.seed);

  std::vector<std::vector<double>> group_cdf;
  for (int g : p.groups) {
    auto w = zipf_weights(g, 1.1);
    std::partial_sum(w.begin(), w.end(), w.begin());
    for (double& v : w) v /= w.back();
    group_cdf.push_back(std::move(w));
  }

  std::vector<double> keyword_rate;
  if (keywords > 0) {
    keyword_rate = zipf_weights(keywords, 0.8);
    const double total = std::accumulate(keyword_rate.begin(), keyword_rate.end(), 0.0);
    for (double& r : keyword_rate) r = std::min(0.5, r * p.keyword_density / total);
  }

  VectorXd planted(p.dim);
  for (int j = 0; j < p.dim; ++j) planted(j) = p.weight_scale * rng.normal();

  Dataset data;
  data.dim = p.dim;
  data.samples.resize(p.samples);
  std::vector<double> scores(p.samples);
  for (std::size_t s = 0; s < p.samples; ++s) {
    auto& features = data.samples[s].features;
    int offset = 0;
    for (const auto& cdf : group_cdf) {
      const double u = rng.uniform();
      const auto pick = std::upper_bound(cdf.begin(), cdf.end() - 1, u) - cdf.begin();
      features.push_back({offset + static_cast<int>(pick) + 1, 1.0});
      offset += static_cast<int>(cdf.size());
    }
    for (int k = 0; k < keywords; ++k) {
      if (rng.uniform() < keyword_rate[static_cast<std::size_t>(k)]) {
        features.push_back({offset + k + 1, 1.0});
      }
    }
    double score = 0;
    for (const auto& f : features) score += planted(f.index - 1) * f.value;
    scores[s] = score;
  }

  // Shift the planted scores so the expected positive fraction matches the
  // profile, then draw labels from the logistic model.
  double lo = -50, hi = 50;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double rate = 0;
    for (double sc : scores) rate += logistic(sc + mid);
    rate /= static_cast<double>(scores.size());
    (rate < p.positive_rate ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);
  for (std::size_t s = 0; s < p.samples; ++s) {
    data.samples[s].label = rng.uniform() < logistic(scores[s] + shift) ? 1 : -1;
  }
  return data;
}

}  // namespace fednew::synth
