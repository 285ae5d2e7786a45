#pragma once

#include "more/types.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

namespace more::test {

inline Matrix random_matrix(std::mt19937_64& gen, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) out(r, c) = dist(gen);
  }
  return out;
}

inline MoreModel random_model(std::mt19937_64& gen, Index K, Index k, Index m) {
  MoreModel model;
  model.gate.vectors = random_matrix(gen, K, k);
  std::uniform_real_distribution<double> logvar(-1.0, 1.0);
  for (Index j = 0; j < K; ++j) {
    ExpertParams e;
    e.weights = random_matrix(gen, m, k);
    e.log_variances.resize(m);
    for (Index i = 0; i < m; ++i) e.log_variances(i) = logvar(gen);
    model.experts.push_back(std::move(e));
  }
  return model;
}

inline Dataset random_dataset(std::mt19937_64& gen, Index N, Index k, Index m) {
  return {random_matrix(gen, N, k), random_matrix(gen, N, m), {}};
}

/// Gaussian density evaluated literally (exp of the quadratic form, divided
/// by the normalizer); only usable at small m.
inline double direct_density(const ExpertParams& e, const Vector& x, const Vector& y) {
  const Index m = y.size();
  double det_root = 1.0;
  double quad = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double var = std::exp(e.log_variances(i));
    det_root *= std::sqrt(var);
    const double r = y(i) - e.weights.row(i).dot(x);
    quad += r * r / (2.0 * var);
  }
  return std::exp(-quad) / (std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(m)) * det_root);
}

/// Gate probabilities evaluated literally, without max subtraction.
inline Vector direct_gate(const MoreModel& model, const Vector& x) {
  Vector g(model.num_experts());
  for (Index j = 0; j < g.size(); ++j) g(j) = std::exp(model.gate.vectors.row(j).dot(x));
  return g / g.sum();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("more_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace more::test
