#include "fednew/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>

namespace fednew {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

bool parse_real(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_int(std::string_view tok, long long& out) {
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

void append_real(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<int> dim_override) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto tokens = split_ws(view);
    if (tokens.empty()) continue;

    double raw_label = 0;
    if (!parse_real(tokens[0], raw_label)) {
      throw ParseError(lineno, "malformed label '" + std::string(tokens[0]) + "'");
    }
    if (!std::isfinite(raw_label)) throw ParseError(lineno, "non-finite label");

    Sample sample;
    sample.label = raw_label > 0 ? 1 : -1;
    sample.features.reserve(tokens.size() - 1);
    int prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(lineno, "malformed token '" + std::string(tok) + "'");
      }
      long long index = 0;
      double value = 0;
      if (!parse_int(tok.substr(0, colon), index)) {
        throw ParseError(lineno, "malformed index in '" + std::string(tok) + "'");
      }
      if (!parse_real(tok.substr(colon + 1), value)) {
        throw ParseError(lineno, "malformed value in '" + std::string(tok) + "'");
      }
      if (index < 1) throw ParseError(lineno, "feature index < 1");
      if (index > std::numeric_limits<int>::max()) {
        throw ParseError(lineno, "feature index too large");
      }
      if (index <= prev) {
        throw ParseError(lineno, "feature indices not strictly increasing at '" +
                                     std::string(tok) + "'");
      }
      if (!std::isfinite(value)) throw ParseError(lineno, "non-finite feature value");
      prev = static_cast<int>(index);
      sample.features.push_back({prev, value});
    }
    max_index = std::max(max_index, prev);
    data.samples.push_back(std::move(sample));
  }
  if (data.samples.empty()) throw ParseError(lineno, "no samples");
  if (dim_override) {
    if (*dim_override < max_index) {
      throw ParseError(lineno, "dimension override " + std::to_string(*dim_override) +
                                   " is below the largest feature index " +
                                   std::to_string(max_index));
    }
    data.dim = *dim_override;
  } else {
    data.dim = max_index;
  }
  if (data.dim < 1) throw ParseError(lineno, "dataset has no features");
  return data;
}

Dataset load_libsvm(const std::filesystem::path& path, std::optional<int> dim_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return parse_libsvm(in, dim_override);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  std::string line;
  for (const auto& s : data.samples) {
    line.assign(s.label > 0 ? "1" : "-1");
    for (const auto& f : s.features) {
      line.push_back(' ');
      line.append(std::to_string(f.index));
      line.push_back(':');
      append_real(line, f.value);
    }
    line.push_back('\n');
    out << line;
  }
}

std::uint64_t fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dim = data.dim;
  mix(&dim, sizeof dim);
  for (const auto& s : data.samples) {
    const std::int32_t label = s.label;
    const std::int64_t nnz = static_cast<std::int64_t>(s.features.size());
    mix(&label, sizeof label);
    mix(&nnz, sizeof nnz);
    for (const auto& f : s.features) {
      const std::int32_t idx = f.index;
      mix(&idx, sizeof idx);
      mix(&f.value, sizeof f.value);
    }
  }
  return h;
}

ClientShard::ClientShard(int client_id, std::vector<Sample> samples, int dim, double mu)
    : client_id_(client_id), dim_(dim), mu_(mu), samples_(std::move(samples)) {
  if (samples_.empty()) throw ShardError("shard has no samples");
  if (!(mu_ >= 0)) throw ShardError("mu must be nonnegative");
  std::vector<Eigen::Triplet<double>> triplets;
  labels_.resize(static_cast<Index>(samples_.size()));
  for (std::size_t r = 0; r < samples_.size(); ++r) {
    labels_(static_cast<Index>(r)) = samples_[r].label;
    for (const auto& f : samples_[r].features) {
      if (f.index > dim_) throw ShardError("feature index exceeds dimension");
      triplets.emplace_back(static_cast<int>(r), f.index - 1, f.value);
    }
  }
  features_.resize(static_cast<Index>(samples_.size()), dim_);
  features_.setFromTriplets(triplets.begin(), triplets.end());
  features_.makeCompressed();
}

std::vector<ClientShard> shard(const Dataset& data, int n_clients, double mu,
                               const ShardOptions& options) {
  if (n_clients < 1) throw ShardError("client count must be >= 1");
  const std::size_t n = static_cast<std::size_t>(n_clients);
  std::size_t total = data.samples.size();
  if (total % n != 0) {
    if (!options.truncate_to_multiple) {
      throw ShardError(std::to_string(n_clients) + " clients do not divide " +
                       std::to_string(total) +
                       " samples; set dataset.truncate_to_multiple = true to drop the remainder");
    }
    total -= total % n;
  }
  const std::size_t m = total / n;
  if (m == 0) throw ShardError("more clients than samples");

  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.shuffle_seed) {
    std::mt19937_64 rng(*options.shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
  }

  std::vector<ClientShard> shards;
  shards.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<Sample> part;
    part.reserve(m);
    for (std::size_t j = c * m; j < (c + 1) * m; ++j) part.push_back(data.samples[order[j]]);
    shards.emplace_back(static_cast<int>(c), std::move(part), data.dim, mu);
  }
  return shards;
}

double loss(const ClientShard& s, const VectorXd& x) {
  require_dim(x.size(), s.dim(), "loss");
  const VectorXd margins = s.labels().cwiseProduct(s.features() * x);
  double sum = 0;
  for (Index j = 0; j < margins.size(); ++j) sum += softplus(-margins(j));
  return sum / static_cast<double>(s.size()) + 0.5 * s.mu() * x.squaredNorm();
}

VectorXd gradient(const ClientShard& s, const VectorXd& x) {
  require_dim(x.size(), s.dim(), "gradient");
  const VectorXd margins = s.labels().cwiseProduct(s.features() * x);
  VectorXd weights(margins.size());
  for (Index j = 0; j < margins.size(); ++j) {
    weights(j) = -s.labels()(j) * logistic(-margins(j));
  }
  VectorXd g = s.features().transpose() * weights;
  g /= static_cast<double>(s.size());
  g += s.mu() * x;
  return g;
}

MatrixXd hessian(const ClientShard& s, const VectorXd& x) {
  require_dim(x.size(), s.dim(), "hessian");
  const auto& a = s.features();
  const VectorXd margins = s.labels().cwiseProduct(a * x);
  MatrixXd h = MatrixXd::Zero(s.dim(), s.dim());
  // Rank-one accumulation over each sample's nonzeros, lower triangle only.
  for (Index r = 0; r < a.outerSize(); ++r) {
    const double w = logistic(margins(r)) * logistic(-margins(r));
    for (ClientShard::SparseRows::InnerIterator it(a, r); it; ++it) {
      const double wi = w * it.value();
      for (ClientShard::SparseRows::InnerIterator jt(a, r); jt && jt.col() <= it.col(); ++jt) {
        h(it.col(), jt.col()) += wi * jt.value();
      }
    }
  }
  h /= static_cast<double>(s.size());
  h.diagonal().array() += s.mu();
  for (Index c = 1; c < h.cols(); ++c) {
    for (Index r = 0; r < c; ++r) h(r, c) = h(c, r);
  }
  return h;
}

}  // namespace fednew
