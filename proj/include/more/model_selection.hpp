#pragma once

#include "more/em_trainer.hpp"
#include "more/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace more {

/// Free parameters of a K-expert model: K*m*k weights, K*m variances and
/// K*k gate entries.
std::int64_t parameter_count(Index num_experts, Index input_dim, Index output_dim);

/// d ln(n) - 2 loglik. Lower is better.
double bic(double loglik, std::int64_t num_params, Index num_samples);

struct BicEntry {
  Index num_experts = 0;
  std::int64_t num_params = 0;
  double loglik = 0.0;
  double bic = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string status;  // "ok" or the failure message
};

struct BicSweepResult {
  std::vector<BicEntry> entries;  // sorted by K
  Index best_k = 0;
};

/// Seed used for candidate K on restart r; depends only on (base, K, r).
std::uint64_t sweep_seed(std::uint64_t base, Index num_experts, int restart);

/// Trains one model per candidate K (best of `restarts` runs by training
/// log-likelihood) and picks the K with the smallest BIC, smaller K on ties.
/// Candidates that fail to train are kept as failed entries; throws
/// ValidationError if every candidate fails.
BicSweepResult sweep_experts(const Dataset& data, std::vector<Index> candidates,
                             const TrainConfig& config, int restarts = 1);

}  // namespace more
