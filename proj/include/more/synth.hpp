#pragma once

#include "more/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace more {

struct SynthSpec {
  Index num_experts = 3;
  Index input_dim = 5;
  Index output_dim = 10;
  Index num_samples = 2000;
  double gate_separation = 4.0;
  double weight_scale = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;

  /// K=3, k=5, m=10, N=2000, gate separation 4, unit weights, noise 0.1.
  static SynthSpec well_separated(std::uint64_t seed = 0);
};

SynthSpec synth_preset(const std::string& name, std::uint64_t seed);

struct SynthResult {
  Dataset data;
  MoreModel truth;
  std::vector<Index> assignments;  // generating expert per sample
};

/// Samples a random MoRE model, then a dataset from it. Deterministic per seed.
SynthResult generate(const SynthSpec& spec);

/// Draws N samples from `model`: x ~ N(0, I), z ~ Categorical(g(x)),
/// y = W_z x + noise with the expert's own variances.
SynthResult sample_from_model(const MoreModel& model, Index num_samples, std::uint64_t seed);

}  // namespace more
