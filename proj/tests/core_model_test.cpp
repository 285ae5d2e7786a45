#include "more/core_model.hpp"
#include "more/error.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace more {
namespace {

MoreModel single_expert(Index k, Index m) { return make_zero_model(1, k, m); }

TEST(GateProbabilities, ZeroVectorsGiveUniformGate) {
  MoreModel model = make_zero_model(4, 3, 1);
  const Vector g = gate_probabilities(model, Vector::Constant(3, 2.5));
  for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(g(j), 0.25);
}

TEST(GateProbabilities, TwoExpertsLogitGapOfOne) {
  MoreModel model = make_zero_model(2, 1, 1);
  model.gate.vectors(0, 0) = 1.0;
  const Vector g = gate_probabilities(model, Vector::Ones(1));
  // 1 / (1 + e^-1)
  EXPECT_NEAR(g(0), 0.731059, 1e-6);
  EXPECT_NEAR(g(1), 0.268941, 1e-6);
}

TEST(GateProbabilities, SingleExpertAlwaysOne) {
  std::mt19937_64 gen(3);
  MoreModel model = test::random_model(gen, 1, 4, 2);
  EXPECT_EQ(gate_probabilities(model, test::random_matrix(gen, 4, 1)), Vector::Ones(1));
}

TEST(GateProbabilities, HugeLogitsDoNotOverflow) {
  MoreModel model = make_zero_model(2, 1, 1);
  model.gate.vectors(0, 0) = 1e4;
  const Vector g = gate_probabilities(model, Vector::Ones(1));
  EXPECT_TRUE(g.allFinite());
  EXPECT_DOUBLE_EQ(g(0), 1.0);
}

TEST(GateProbabilities, RejectsBadInput) {
  MoreModel model = make_zero_model(2, 3, 1);
  EXPECT_THROW(gate_probabilities(model, Vector::Zero(2)), ShapeError);
  Vector x = Vector::Zero(3);
  x(1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(gate_probabilities(model, x), ValidationError);
}

TEST(GateProbabilities, SumsToOneAndIsShiftInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 gen(seed);
    MoreModel model = test::random_model(gen, 1 + static_cast<Index>(seed % 5), 3, 1);
    const Vector x = test::random_matrix(gen, 3, 1, 3.0);
    const Vector g = gate_probabilities(model, x);
    EXPECT_NEAR(g.sum(), 1.0, 1e-12);
    EXPECT_TRUE((g.array() > 0.0).all());

    MoreModel shifted = model;
    shifted.gate.vectors.rowwise() += test::random_matrix(gen, 1, 3, 5.0).row(0);
    const Vector gs = gate_probabilities(shifted, x);
    EXPECT_LE((g - gs).cwiseAbs().maxCoeff(), 1e-12) << "seed " << seed;
    EXPECT_LE((g - test::direct_gate(model, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ExpertLogDensity, ExactFitUnitVariance) {
  ExpertParams e{Matrix::Constant(1, 1, 2.0), Vector::Zero(1)};
  EXPECT_NEAR(expert_log_density(e, Vector::Constant(1, 1.5), Vector::Constant(1, 3.0)),
              -0.918939, 1e-6);
}

TEST(ExpertLogDensity, TwoOutputsZeroResidual) {
  ExpertParams e{Matrix::Zero(2, 1), Vector::Zero(2)};
  EXPECT_NEAR(expert_log_density(e, Vector::Ones(1), Vector::Zero(2)), -1.837877, 1e-6);
}

TEST(ExpertLogDensity, ResidualOfTwo) {
  ExpertParams e{Matrix::Zero(1, 1), Vector::Zero(1)};
  EXPECT_NEAR(expert_log_density(e, Vector::Ones(1), Vector::Constant(1, 2.0)), -2.918939, 1e-6);
}

TEST(ExpertLogDensity, ShapeMismatchThrows) {
  ExpertParams e{Matrix::Zero(2, 3), Vector::Zero(2)};
  EXPECT_THROW(expert_log_density(e, Vector::Zero(2), Vector::Zero(2)), ShapeError);
  EXPECT_THROW(expert_log_density(e, Vector::Zero(3), Vector::Zero(3)), ShapeError);
}

TEST(ExpertLogDensity, FiniteAtFullVoxelScaleWhereDirectDensityUnderflows) {
  std::mt19937_64 gen(11);
  ExpertParams e{test::random_matrix(gen, 21000, 25, 0.1), Vector::Zero(21000)};
  const Vector x = test::random_matrix(gen, 25, 1);
  const Vector y = test::random_matrix(gen, 21000, 1);
  const double lp = expert_log_density(e, x, y);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_EQ(std::exp(lp), 0.0);
}

TEST(ExpertLogDensity, MaximizedAtMean) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    MoreModel model = test::random_model(gen, 1, 3, 4);
    const auto& e = model.experts[0];
    const Vector x = test::random_matrix(gen, 3, 1);
    const Vector mean = e.weights * x;
    Vector eps = test::random_matrix(gen, 4, 1, 0.1);
    if (eps.isZero()) eps(0) = 1e-3;
    EXPECT_GT(expert_log_density(e, x, mean), expert_log_density(e, x, mean + eps));
  }
}

TEST(MixtureLogLikelihood, SingleExpertEqualsDensitySum) {
  std::mt19937_64 gen(7);
  MoreModel model = test::random_model(gen, 1, 3, 2);
  Dataset data = test::random_dataset(gen, 6, 3, 2);
  double direct = 0.0;
  for (Index n = 0; n < data.size(); ++n) {
    direct += expert_log_density(model.experts[0], data.inputs.row(n).transpose(),
                                 data.targets.row(n).transpose());
  }
  EXPECT_NEAR(mixture_log_likelihood(model, data), direct, 1e-9);
}

TEST(MixtureLogLikelihood, IdenticalExpertsCollapseToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    MoreModel one = test::random_model(gen, 1, 3, 2);
    Dataset data = test::random_dataset(gen, 8, 3, 2);
    MoreModel many = one;
    const Index K = 2 + static_cast<Index>(seed % 3);
    many.experts.assign(static_cast<std::size_t>(K), one.experts[0]);
    many.gate.vectors = test::random_matrix(gen, K, 3, 2.0);
    EXPECT_NEAR(mixture_log_likelihood(many, data), mixture_log_likelihood(one, data), 1e-9);
  }
}

TEST(MixtureLogLikelihood, MatchesDirectDensityOracle) {
  std::mt19937_64 gen(13);
  MoreModel model = test::random_model(gen, 3, 2, 2);
  Dataset data = test::random_dataset(gen, 3, 2, 2);
  double oracle = 0.0;
  for (Index n = 0; n < 3; ++n) {
    const Vector x = data.inputs.row(n).transpose();
    const Vector y = data.targets.row(n).transpose();
    const Vector g = test::direct_gate(model, x);
    double p = 0.0;
    for (Index j = 0; j < 3; ++j) p += g(j) * test::direct_density(model.experts[static_cast<std::size_t>(j)], x, y);
    oracle += std::log(p);
  }
  EXPECT_NEAR(mixture_log_likelihood(model, data), oracle, 1e-10);
}

TEST(MixtureLogLikelihood, Errors) {
  MoreModel model = make_zero_model(2, 3, 2);
  Dataset wrong{Matrix::Zero(4, 2), Matrix::Zero(4, 2), {}};
  EXPECT_THROW(mixture_log_likelihood(model, wrong), ShapeError);
  Dataset empty{Matrix::Zero(0, 3), Matrix::Zero(0, 2), {}};
  EXPECT_THROW(mixture_log_likelihood(model, empty), ValidationError);
}

TEST(ExpertLogDensityMatrix, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 gen(17);
  MoreModel model = test::random_model(gen, 3, 4, 5);
  Dataset data = test::random_dataset(gen, 1000, 4, 5);
  const Matrix serial = expert_log_density_matrix(model, data, 1);
  const Matrix threaded = expert_log_density_matrix(model, data, 4);
  EXPECT_EQ(serial, threaded);
}

TEST(Predict, SingleExpertIsLinearMap) {
  std::mt19937_64 gen(19);
  MoreModel model = test::random_model(gen, 1, 3, 4);
  const Vector x = test::random_matrix(gen, 3, 1);
  EXPECT_EQ(predict(model, x), model.experts[0].weights * x);

  // predict(alpha W, x) = alpha predict(W, x)
  MoreModel scaled = model;
  scaled.experts[0].weights *= 2.5;
  EXPECT_LE((predict(scaled, x) - 2.5 * predict(model, x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, EqualExpertsIgnoreGate) {
  std::mt19937_64 gen(23);
  MoreModel model = test::random_model(gen, 2, 3, 4);
  model.experts[1].weights = model.experts[0].weights;
  const Vector x = test::random_matrix(gen, 3, 1);
  EXPECT_LE((predict(model, x) - model.experts[0].weights * x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, ConvexCombinationOfExpertMeans) {
  MoreModel model = make_zero_model(2, 1, 2);
  model.gate.vectors(0, 0) = 1.0;
  model.experts[0].weights << 1.0, 0.0;
  model.experts[1].weights << 0.0, 1.0;
  const Vector y = predict(model, Vector::Ones(1));
  EXPECT_NEAR(y(0), 0.731059, 1e-6);
  EXPECT_NEAR(y(1), 0.268941, 1e-6);
}

TEST(Predict, WrongDimensionThrows) {
  EXPECT_THROW(predict(single_expert(2, 1), Vector::Zero(3)), ShapeError);
  EXPECT_THROW(hard_predict(single_expert(2, 1), Vector::Zero(3)), ShapeError);
}

TEST(HardPredict, SingleExpert) {
  std::mt19937_64 gen(29);
  MoreModel model = test::random_model(gen, 1, 2, 3);
  const Vector x = test::random_matrix(gen, 2, 1);
  const auto hp = hard_predict(model, x);
  EXPECT_EQ(hp.expert, 0);
  EXPECT_EQ(hp.response, model.experts[0].weights * x);
}

TEST(HardPredict, PicksArgmaxGate) {
  MoreModel model = make_zero_model(3, 1, 1);
  model.gate.vectors << std::log(0.2), std::log(0.5), std::log(0.3);
  EXPECT_EQ(hard_predict(model, Vector::Ones(1)).expert, 1);
}

TEST(HardPredict, TieGoesToLowestIndex) {
  MoreModel model = make_zero_model(2, 1, 1);
  EXPECT_EQ(hard_predict(model, Vector::Ones(1)).expert, 0);
}

TEST(HardPredict, IndependentOfVariances) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    MoreModel model = test::random_model(gen, 4, 3, 2);
    MoreModel scaled = model;
    for (auto& e : scaled.experts) e.log_variances.array() += std::log(7.0);
    const Vector x = test::random_matrix(gen, 3, 1);
    EXPECT_EQ(hard_predict(model, x).expert, hard_predict(scaled, x).expert);
  }
}

TEST(MoreModel, ValidateCatchesShapeMismatch) {
  MoreModel model = make_zero_model(2, 3, 4);
  EXPECT_NO_THROW(model.validate());
  model.gate.vectors = Matrix::Zero(3, 3);
  EXPECT_THROW(model.validate(), ShapeError);
  model = make_zero_model(2, 3, 4);
  model.experts[1].weights = Matrix::Zero(4, 2);
  EXPECT_THROW(model.validate(), ShapeError);
  model = make_zero_model(2, 3, 4);
  model.experts[0].log_variances(0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(model.validate(), ValidationError);
}

}  // namespace
}  // namespace more
