#include "more/synth.hpp"

#include "more/core_model.hpp"
#include "more/error.hpp"
#include "more/rng.hpp"

#include <cmath>

namespace more {

void SynthSpec::validate() const {
  if (num_experts < 1 || input_dim < 1 || output_dim < 1) {
    throw ValidationError("synth dimensions must be >= 1");
  }
  if (num_samples < num_experts) throw ValidationError("synth needs N >= K");
  if (!(gate_separation >= 0.0) || !std::isfinite(gate_separation)) {
    throw ValidationError("gate_separation must be finite and >= 0");
  }
  if (!std::isfinite(weight_scale)) throw ValidationError("weight_scale must be finite");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noise_sigma must be > 0");
  }
}

SynthSpec SynthSpec::well_separated(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  return spec;
}

SynthSpec synth_preset(const std::string& name, std::uint64_t seed) {
  if (name == "well-separated") return SynthSpec::well_separated(seed);
  throw ValidationError("unknown synth preset '" + name + "'");
}

SynthResult sample_from_model(const MoreModel& model, Index num_samples, std::uint64_t seed) {
  model.validate();
  const Index K = model.num_experts();
  const Index k = model.input_dim();
  const Index m = model.output_dim();
  Rng rng(seed);

  SynthResult out;
  out.truth = model;
  out.data.inputs.resize(num_samples, k);
  out.data.targets.resize(num_samples, m);
  out.assignments.resize(static_cast<std::size_t>(num_samples));
  std::vector<Vector> noise_sd;
  for (const auto& e : model.experts) noise_sd.push_back((0.5 * e.log_variances.array()).exp());

  for (Index n = 0; n < num_samples; ++n) {
    Vector x(k);
    for (Index i = 0; i < k; ++i) x(i) = rng.normal();
    const Vector g = gate_probabilities(model, x);
    const double u = rng.uniform();
    Index z = K - 1;
    double acc = 0.0;
    for (Index j = 0; j < K; ++j) {
      acc += g(j);
      if (u < acc) {
        z = j;
        break;
      }
    }
    Vector y = model.experts[static_cast<std::size_t>(z)].weights * x;
    const auto& sd = noise_sd[static_cast<std::size_t>(z)];
    for (Index i = 0; i < m; ++i) y(i) += sd(i) * rng.normal();
    out.data.inputs.row(n) = x.transpose();
    out.data.targets.row(n) = y.transpose();
    out.assignments[static_cast<std::size_t>(n)] = z;
  }
  return out;
}

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x6d6f64656cULL));
  MoreModel model = make_zero_model(spec.num_experts, spec.input_dim, spec.output_dim);
  for (Index j = 0; j < spec.num_experts; ++j) {
    for (Index i = 0; i < spec.input_dim; ++i) {
      model.gate.vectors(j, i) = spec.gate_separation * rng.normal();
    }
  }
  const double log_var = 2.0 * std::log(spec.noise_sigma);
  for (auto& expert : model.experts) {
    for (Index r = 0; r < spec.output_dim; ++r) {
      for (Index c = 0; c < spec.input_dim; ++c) expert.weights(r, c) = spec.weight_scale * rng.normal();
    }
    expert.log_variances.setConstant(log_var);
  }
  return sample_from_model(model, spec.num_samples, derive_seed(spec.seed, 0x73616d706c65ULL));
}

}  // namespace more
