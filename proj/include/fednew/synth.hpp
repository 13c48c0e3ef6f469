#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fednew/dataset.hpp"

namespace fednew::synth {

/// Shape of a generated binary-feature classification set.
///
/// `groups` lists one-hot categorical blocks (each sample activates exactly
/// one column per block, with skewed category frequencies); the remaining
/// `dim - sum(groups)` columns are independent sparse keyword-style
/// indicators with Zipf-like activation rates averaging `keyword_density`.
struct Profile {
  std::string name;
  std::size_t samples = 0;
  int dim = 0;
  std::vector<int> groups;
  double keyword_density = 0.0;
  double positive_rate = 0.5;
  double weight_scale = 1.0;
  std::uint64_t seed = 0;
};

Profile profile(const std::string& name);
std::vector<std::string> profile_names();

Dataset generate(const Profile& p);

}  // namespace fednew::synth
