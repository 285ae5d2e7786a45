#include "more/model_selection.hpp"

#include "more/error.hpp"
#include "more/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace more {

std::int64_t parameter_count(Index num_experts, Index input_dim, Index output_dim) {
  if (num_experts < 1 || input_dim < 1 || output_dim < 1) {
    throw ValidationError("parameter_count needs K, k, m >= 1");
  }
  const std::int64_t K = num_experts;
  const std::int64_t k = input_dim;
  const std::int64_t m = output_dim;
  return K * (m * k + m + k);
}

double bic(double loglik, std::int64_t num_params, Index num_samples) {
  if (num_samples < 1) throw ValidationError("bic needs at least one sample");
  return static_cast<double>(num_params) * std::log(static_cast<double>(num_samples)) -
         2.0 * loglik;
}

std::uint64_t sweep_seed(std::uint64_t base, Index num_experts, int restart) {
  return derive_seed(base, static_cast<std::uint64_t>(num_experts),
                     static_cast<std::uint64_t>(restart));
}

BicSweepResult sweep_experts(const Dataset& data, std::vector<Index> candidates,
                             const TrainConfig& config, int restarts) {
  if (candidates.empty()) throw ValidationError("no candidate expert counts");
  if (restarts < 1) throw ValidationError("restarts must be >= 1");
  data.validate();
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  BicSweepResult result;
  for (const Index K : candidates) {
    BicEntry entry;
    entry.num_experts = K;
    try {
      entry.num_params = parameter_count(K, data.input_dim(), data.output_dim());
      if (K > data.size()) {
        throw ValidationError("K=" + std::to_string(K) + " exceeds N=" +
                              std::to_string(data.size()));
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int r = 0; r < restarts; ++r) {
        TrainConfig cfg = config;
        cfg.num_experts = K;
        cfg.seed = sweep_seed(config.seed, K, r);
        const double loglik = fit(data, cfg).report.loglik_trace.back();
        if (r == 0 || loglik > best) {
          best = loglik;
          entry.seed = cfg.seed;
        }
      }
      entry.loglik = best;
      entry.bic = bic(entry.loglik, entry.num_params, data.size());
      entry.ok = std::isfinite(entry.bic);
      entry.status = entry.ok ? "ok" : "non-finite BIC";
    } catch (const Error& e) {
      entry.ok = false;
      entry.status = e.what();
    }
    result.entries.push_back(entry);
  }

  const BicEntry* best = nullptr;
  for (const auto& e : result.entries) {
    if (e.ok && (best == nullptr || e.bic < best->bic)) best = &e;
  }
  if (best == nullptr) throw ValidationError("every candidate failed to train");
  result.best_k = best->num_experts;
  return result;
}

}  // namespace more
