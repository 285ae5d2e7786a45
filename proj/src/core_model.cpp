#include "more/core_model.hpp"

#include "more/error.hpp"
#include "more/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace more {
namespace {

constexpr Index kRowBlock = 256;

void check_input(const MoreModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.input_dim()));
  }
  if (!x.allFinite()) throw ValidationError("input contains NaN or Inf");
}

void check_data(const ExpertParams& expert, const Dataset& data) {
  if (data.input_dim() != expert.weights.cols() || data.output_dim() != expert.weights.rows()) {
    throw ShapeError("dataset is " + std::to_string(data.input_dim()) + " -> " +
                     std::to_string(data.output_dim()) + ", expert is " +
                     std::to_string(expert.weights.cols()) + " -> " +
                     std::to_string(expert.weights.rows()));
  }
}

double log_normalizer(const ExpertParams& expert) {
  const double m = static_cast<double>(expert.log_variances.size());
  return -0.5 * m * std::log(2.0 * std::numbers::pi) - 0.5 * expert.log_variances.sum();
}

}  // namespace

Vector log_sum_exp_rows(const Matrix& values) {
  Vector out(values.rows());
  for (Index n = 0; n < values.rows(); ++n) {
    const double peak = values.row(n).maxCoeff();
    if (!std::isfinite(peak)) {
      out(n) = peak;
      continue;
    }
    out(n) = peak + std::log((values.row(n).array() - peak).exp().sum());
  }
  return out;
}

Vector gate_probabilities(const MoreModel& model, const Eigen::Ref<const Vector>& x) {
  check_input(model, x);
  Vector logits = model.gate.vectors * x;
  logits.array() -= logits.maxCoeff();
  Vector g = logits.array().exp().matrix();
  return g / g.sum();
}

Matrix log_gate_matrix(const GateParams& gate, const Matrix& inputs) {
  if (inputs.cols() != gate.vectors.cols()) {
    throw ShapeError("inputs have dimension " + std::to_string(inputs.cols()) +
                     ", gate expects " + std::to_string(gate.vectors.cols()));
  }
  Matrix logits = inputs * gate.vectors.transpose();
  const Vector lse = log_sum_exp_rows(logits);
  logits.colwise() -= lse;
  return logits;
}

double expert_log_density(const ExpertParams& expert, const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y) {
  if (x.size() != expert.weights.cols() || y.size() != expert.weights.rows()) {
    throw ShapeError("expert expects x of dimension " + std::to_string(expert.weights.cols()) +
                     " and y of dimension " + std::to_string(expert.weights.rows()));
  }
  const Vector residual = y - expert.weights * x;
  const double quad =
      (residual.array().square() * (-expert.log_variances.array()).exp()).sum();
  return log_normalizer(expert) - 0.5 * quad;
}

Vector expert_log_density_column(const ExpertParams& expert, const Dataset& data,
                                 int num_threads) {
  check_data(expert, data);
  const Index N = data.size();
  const double constant = log_normalizer(expert);
  const Eigen::RowVectorXd inv_var = (-expert.log_variances.array()).exp().matrix().transpose();
  Vector out(N);
  const auto blocks = static_cast<std::size_t>((N + kRowBlock - 1) / kRowBlock);
  detail::parallel_for(blocks, num_threads, [&](std::size_t b) {
    const Index begin = static_cast<Index>(b) * kRowBlock;
    const Index rows = std::min(kRowBlock, N - begin);
    Matrix residual = data.targets.middleRows(begin, rows);
    residual.noalias() -= data.inputs.middleRows(begin, rows) * expert.weights.transpose();
    const Vector quad =
        (residual.array().square().rowwise() * inv_var.array()).rowwise().sum().matrix();
    out.segment(begin, rows) = (constant - 0.5 * quad.array()).matrix();
  });
  return out;
}

Matrix expert_log_density_matrix(const MoreModel& model, const Dataset& data, int num_threads) {
  Matrix out(data.size(), model.num_experts());
  for (Index j = 0; j < model.num_experts(); ++j) {
    out.col(j) = expert_log_density_column(model.experts[static_cast<std::size_t>(j)], data,
                                           num_threads);
  }
  return out;
}

Vector per_sample_log_likelihood(const Matrix& log_gates, const Matrix& log_densities) {
  if (log_gates.rows() != log_densities.rows() || log_gates.cols() != log_densities.cols()) {
    throw ShapeError("log gate and log density matrices differ in shape");
  }
  return log_sum_exp_rows(log_gates + log_densities);
}

double mixture_log_likelihood(const Matrix& log_gates, const Matrix& log_densities) {
  const Vector per_sample = per_sample_log_likelihood(log_gates, log_densities);
  double total = 0.0;
  for (Index n = 0; n < per_sample.size(); ++n) total += per_sample(n);
  return total;
}

double mixture_log_likelihood(const MoreModel& model, const Dataset& data, int num_threads) {
  if (data.size() < 1) throw ValidationError("dataset is empty");
  if (data.input_dim() != model.input_dim() || data.output_dim() != model.output_dim()) {
    throw ShapeError("dataset dimensions do not match the model");
  }
  return mixture_log_likelihood(log_gate_matrix(model.gate, data.inputs),
                                expert_log_density_matrix(model, data, num_threads));
}

Vector predict(const MoreModel& model, const Eigen::Ref<const Vector>& x) {
  const Vector g = gate_probabilities(model, x);
  Vector y = Vector::Zero(model.output_dim());
  for (Index j = 0; j < model.num_experts(); ++j) {
    y.noalias() += g(j) * (model.experts[static_cast<std::size_t>(j)].weights * x);
  }
  return y;
}

Matrix predict_batch(const MoreModel& model, const Matrix& inputs) {
  Matrix out(inputs.rows(), model.output_dim());
  for (Index n = 0; n < inputs.rows(); ++n) out.row(n) = predict(model, inputs.row(n).transpose());
  return out;
}

HardPrediction hard_predict(const MoreModel& model, const Eigen::Ref<const Vector>& x) {
  const Vector g = gate_probabilities(model, x);
  Index best = 0;
  for (Index j = 1; j < g.size(); ++j) {
    if (g(j) > g(best)) best = j;
  }
  return {best, model.experts[static_cast<std::size_t>(best)].weights * x};
}

std::vector<Index> hard_assignments(const MoreModel& model, const Matrix& inputs) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Index n = 0; n < inputs.rows(); ++n) {
    out.push_back(hard_predict(model, inputs.row(n).transpose()).expert);
  }
  return out;
}

}  // namespace more
