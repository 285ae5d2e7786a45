#include "more/error.hpp"
#include "more/model_selection.hpp"
#include "more/synth.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace more {
namespace {

TEST(ParameterCount, Examples) {
  EXPECT_EQ(parameter_count(1, 1, 1), 3);
  EXPECT_EQ(parameter_count(12, 25, 21000), 6552300);
  EXPECT_EQ(parameter_count(2, 3, 4), 38);
  EXPECT_THROW(parameter_count(0, 1, 1), ValidationError);
}

TEST(ParameterCount, StrictlyIncreasingInEachArgument) {
  for (Index K = 1; K < 6; ++K) {
    for (Index k = 1; k < 6; ++k) {
      for (Index m = 1; m < 6; ++m) {
        const auto d = parameter_count(K, k, m);
        EXPECT_LT(d, parameter_count(K + 1, k, m));
        EXPECT_LT(d, parameter_count(K, k + 1, m));
        EXPECT_LT(d, parameter_count(K, k, m + 1));
      }
    }
  }
}

TEST(Bic, Examples) {
  EXPECT_NEAR(bic(-50.0, 3, 100), 113.8155, 1e-3);
  EXPECT_EQ(bic(-12.25, 0, 40), 24.5);
  EXPECT_EQ(bic(0.0, 1, 1), 0.0);
  EXPECT_THROW(bic(0.0, 1, 0), ValidationError);
}

TEST(Bic, LinearInParameterCount) {
  for (Index n : {1, 2, 7, 60, 2000}) {
    for (double loglik : {-1e4, -3.5, 0.0, 12.0}) {
      const double step = bic(loglik, 11, n) - bic(loglik, 10, n);
      EXPECT_NEAR(step, std::log(static_cast<double>(n)), 1e-12 * std::max(1.0, std::abs(loglik)));
    }
  }
}

TEST(Bic, PrefersSmallerModelWithoutLikelihoodGain) {
  for (Index K = 1; K < 5; ++K) {
    const double small = bic(-100.0, parameter_count(K, 3, 4), 50);
    const double large = bic(-100.0, parameter_count(K + 1, 3, 4), 50);
    EXPECT_LT(small, large);
  }
}

TEST(SweepExperts, SingleCandidate) {
  SynthSpec spec = SynthSpec::well_separated(1);
  spec.num_samples = 300;
  const auto synth = generate(spec);
  const auto sweep = sweep_experts(synth.data, {2}, TrainConfig{});
  ASSERT_EQ(sweep.entries.size(), 1u);
  EXPECT_EQ(sweep.best_k, 2);
  const auto& e = sweep.entries[0];
  EXPECT_EQ(e.num_params, parameter_count(2, 5, 10));
  EXPECT_EQ(e.bic, e.num_params * std::log(300.0) - 2.0 * e.loglik);
}

TEST(SweepExperts, ConstantTargetsStillGiveFiniteBic) {
  std::mt19937_64 gen(2);
  Dataset data{test::random_matrix(gen, 40, 3), Matrix::Constant(40, 2, 1.5), {}};
  const auto sweep = sweep_experts(data, {1}, TrainConfig{});
  EXPECT_EQ(sweep.best_k, 1);
  EXPECT_TRUE(std::isfinite(sweep.entries[0].bic));
}

TEST(SweepExperts, FailedCandidatesAreRecordedAndSkipped) {
  std::mt19937_64 gen(3);
  Dataset data = test::random_dataset(gen, 4, 2, 2);
  const auto sweep = sweep_experts(data, {1, 9}, TrainConfig{});
  ASSERT_EQ(sweep.entries.size(), 2u);
  EXPECT_TRUE(sweep.entries[0].ok);
  EXPECT_FALSE(sweep.entries[1].ok);
  EXPECT_EQ(sweep.best_k, 1);
  EXPECT_THROW(sweep_experts(data, {8, 9}, TrainConfig{}), ValidationError);
  EXPECT_THROW(sweep_experts(data, {}, TrainConfig{}), ValidationError);
}

TEST(SweepExperts, ResultIndependentOfCandidateOrder) {
  SynthSpec spec = SynthSpec::well_separated(4);
  spec.num_samples = 300;
  const auto synth = generate(spec);
  TrainConfig cfg;
  cfg.seed = 17;
  const auto a = sweep_experts(synth.data, {3, 1, 2}, cfg);
  const auto b = sweep_experts(synth.data, {1, 2, 3}, cfg);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].num_experts, static_cast<Index>(i + 1));
    EXPECT_EQ(a.entries[i].bic, b.entries[i].bic);
    EXPECT_EQ(a.entries[i].seed, b.entries[i].seed);
  }
  EXPECT_EQ(a.best_k, b.best_k);
}

TEST(SweepExperts, RestartsKeepBestLikelihood) {
  SynthSpec spec = SynthSpec::well_separated(6);
  spec.num_samples = 300;
  const auto synth = generate(spec);
  TrainConfig cfg;
  cfg.init_strategy = InitStrategy::random_responsibility;
  const auto one = sweep_experts(synth.data, {3}, cfg, 1);
  const auto three = sweep_experts(synth.data, {3}, cfg, 3);
  EXPECT_GE(three.entries[0].loglik, one.entries[0].loglik);
}

}  // namespace
}  // namespace more
