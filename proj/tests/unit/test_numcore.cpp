#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "f3/numcore/adam.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/gradcheck.hpp"
#include "f3/numcore/matrix.hpp"
#include "f3/numcore/matrix_io.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"
#include "oracles.hpp"

using f3::Matrix;
using f3::Tape;
using f3::Var;

TEST(Matrix, IdentityAndShapes) {
  const Matrix i = Matrix::identity(3);
  EXPECT_EQ(i(1, 1), 1.0);
  EXPECT_EQ(i(0, 2), 0.0);
  EXPECT_EQ(i.shape_str(), "3x3");
  EXPECT_THROW(i.reshaped(2, 2), f3::ShapeError);
  EXPECT_EQ(i.reshaped(1, 9).cols(), 9u);
}

TEST(Ops, MatmulMatchesTripleLoop) {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(1 + trial % 5, 2 + trial % 4, g);
    const Matrix b = oracle::random_matrix(a.cols(), 1 + trial % 3, g);
    EXPECT_LT(f3::max_abs_diff(f3::matmul(a, b), oracle::matmul(a, b)), 1e-12);
  }
}

TEST(Ops, MatmulShapeMismatchNamesBothShapes) {
  try {
    f3::matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL();
  } catch (const f3::ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos);
  }
}

TEST(Ops, SoftmaxRowsSumToOneAndSurviveLargeInputs) {
  const Matrix m{{1000.0, 1000.0, -1000.0}, {0.0, 1.0, 2.0}};
  const Matrix s = f3::softmax_rows(m);
  EXPECT_TRUE(f3::all_finite(s));
  EXPECT_NEAR(s(0, 0), 0.5, 1e-15);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(s(r, 0) + s(r, 1) + s(r, 2), 1.0, 1e-15);
  const double e = std::exp(1.0), z = 1 + e + e * e;
  EXPECT_NEAR(s(1, 2), e * e / z, 1e-15);
}

TEST(Ops, CrossEntropyOfUniformIsLogC) {
  const Matrix p(4, 3, 1.0 / 3.0);
  const std::vector<int> y{0, 1, 2, 1};
  EXPECT_NEAR(f3::cross_entropy(p, y), std::log(3.0), 1e-15);
}

TEST(Ops, ArgmaxTiesGoToLowestIndex) {
  const Matrix m{{0.2, 0.4, 0.4}, {0.9, 0.05, 0.05}};
  EXPECT_EQ(f3::argmax_rows(m), (std::vector<int>{1, 0}));
}

TEST(Rng, CounterDrawsAreOrderIndependent) {
  const f3::CounterRng rng(42);
  const double a = rng.uniform(3, 7);
  (void)rng.uniform(3, 8);
  EXPECT_EQ(a, rng.uniform(3, 7));
  f3::DrawStream s(42, 3);
  for (int i = 0; i < 7; ++i) s.next_uniform();
  EXPECT_EQ(s.next_uniform(), a);
  EXPECT_EQ(s.draws(), 8u);
}

TEST(Rng, UniformsAreInsideOpenInterval) {
  EXPECT_GT(f3::to_open_unit(0), 0.0);
  EXPECT_LT(f3::to_open_unit(~0ULL), 1.0);
  const f3::CounterRng rng(1);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) mean += rng.uniform(0, i);
  EXPECT_NEAR(mean / 100000, 0.5, 0.005);
}

// Each differentiable op against central differences of its own forward,
// inputs in [-2, 2], many seeds.
namespace {

using UnaryFn = std::function<Var(Var)>;

double check_unary(const UnaryFn& op, const Matrix& x, const Matrix& weights) {
  auto scalar = [&](const Matrix& in) {
    Tape t;
    const Var out = op(t.constant(in));
    double s = 0;
    for (std::size_t i = 0; i < out.value().size(); ++i) s += weights[i] * out.value()[i];
    return s;
  };
  Tape t;
  const Var p = t.parameter(x);
  const Var out = op(p);
  const Var loss = f3::sum(f3::hadamard(out, t.constant(weights)));
  t.backward(loss);
  return oracle::max_rel_err(t.grad(p), oracle::numeric_grad(scalar, x), 1e-4);
}

}  // namespace

TEST(Autodiff, ElementwiseAndReductionsMatchFiniteDifferences) {
  std::mt19937_64 g(5);
  const std::vector<std::pair<const char*, UnaryFn>> ops = {
      {"sigmoid", [](Var v) { return f3::sigmoid(v); }},
      {"tanh", [](Var v) { return f3::tanh(v); }},
      {"exp", [](Var v) { return f3::exp(v); }},
      {"softmax", [](Var v) { return f3::softmax_rows(v); }},
      {"transpose", [](Var v) { return f3::transpose(v); }},
      {"mean_rows", [](Var v) { return f3::mean_rows(v); }},
      {"row_sums", [](Var v) { return f3::row_sums(v); }},
      {"col_sums", [](Var v) { return f3::col_sums(v); }},
      {"power", [](Var v) { return f3::power(f3::add_scalar(f3::hadamard(v, v), 0.5), 1.5); }},
      {"self_matmul", [](Var v) { return f3::matmul(v, f3::transpose(v)); }},
  };
  for (const auto& [name, op] : ops) {
    double worst = 0;
    for (int seed = 0; seed < 100; ++seed) {
      const Matrix x = oracle::random_matrix(3, 4, g);
      Tape probe;
      const Var shape = op(probe.constant(x));
      const Matrix w = oracle::random_matrix(shape.rows(), shape.cols(), g);
      worst = std::max(worst, check_unary(op, x, w));
    }
    EXPECT_LT(worst, 1e-4) << name;
  }
}

TEST(Autodiff, ReluAwayFromKink) {
  std::mt19937_64 g(6);
  Matrix x = oracle::random_matrix(4, 4, g);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < 0.05) x[i] = 0.5;
  const Matrix w = oracle::random_matrix(4, 4, g);
  EXPECT_LT(check_unary([](Var v) { return f3::relu(v); }, x, w), 1e-6);
}

TEST(Autodiff, MatmulGradientOfSumIsOnesTimesBTransposed) {
  std::mt19937_64 g(7);
  const Matrix a = oracle::random_matrix(5, 4, g), b = oracle::random_matrix(4, 3, g);
  Tape t;
  const Var va = t.parameter(a);
  t.backward(f3::sum(f3::matmul(va, t.constant(b))));
  const Matrix want = oracle::matmul(Matrix(5, 3, 1.0), f3::transpose(b));
  EXPECT_LT(f3::max_abs_diff(t.grad(va), want), 1e-12);
}

TEST(Autodiff, CrossEntropyGradientIsProbsMinusOneHotOverM) {
  const Matrix logits{{1.0, 2.0, 0.5}, {0.0, -1.0, 3.0}};
  const std::vector<int> y{1, 2};
  Tape t;
  const Var z = t.parameter(logits);
  t.backward(f3::cross_entropy(f3::softmax_rows(z), y));
  const Matrix p = f3::softmax_rows(logits);
  const Matrix g = t.grad(z);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(g(r, c), (p(r, c) - (static_cast<int>(c) == y[r] ? 1.0 : 0.0)) / 2.0, 1e-12);
}

TEST(Autodiff, UnusedParameterGetsZeroGradient) {
  Tape t;
  const Var a = t.parameter(Matrix(2, 2, 1.0));
  const Var b = t.parameter(Matrix(2, 2, 3.0));
  t.backward(f3::sum(a));
  EXPECT_EQ(t.grad(b), Matrix(2, 2));
}

TEST(Autodiff, StackScatterSliceRoundTrip) {
  std::mt19937_64 g(8);
  const Matrix a = oracle::random_matrix(2, 3, g), b = oracle::random_matrix(3, 3, g);
  Tape t;
  const Var va = t.parameter(a), vb = t.parameter(b);
  const std::vector<Var> parts{va, vb};
  const Var s = f3::vstack(parts);
  EXPECT_EQ(f3::slice_rows(s, 2, 3).value(), b);
  const std::vector<std::size_t> idx{4, 0};
  const Var sc = f3::scatter_rows(va, idx, 5);
  EXPECT_EQ(sc.value()(4, 1), a(0, 1));
  EXPECT_EQ(sc.value()(1, 1), 0.0);
}

TEST(GradCheck, PassesOnCorrectGradientAndReportsPerParameter) {
  std::mt19937_64 g(9);
  const std::vector<Matrix> params{oracle::random_matrix(3, 2, g), oracle::random_matrix(2, 2, g)};
  const f3::ScalarFn f = [](Tape&, std::span<const Var> p) {
    return f3::sum(f3::tanh(f3::matmul(p[0], p[1])));
  };
  const auto report = f3::grad_check(f, params, 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.max_rel_error.size(), 2u);
  EXPECT_LT(report.worst(), 1e-6);
}

TEST(GradCheck, CatchesAWrongBackward) {
  const std::vector<Matrix> params{Matrix{{0.3, -0.7}}};
  // Forward doubles the input, backward claims the identity.
  const f3::ScalarFn f = [](Tape& t, std::span<const Var> p) {
    const Var y = t.record(f3::scale(p[0].value(), 2.0), {p[0]},
                           [x = p[0]](Tape& tp, const Matrix& g) { tp.accumulate(x, g); });
    return f3::sum(y);
  };
  EXPECT_FALSE(f3::grad_check(f, params, 1e-4).passed);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  f3::Adam opt(f3::AdamConfig{.lr = 0.1});
  Matrix p{{1.0, -1.0}};
  Matrix* pp = &p;
  const Matrix g{{0.5, -2.0}};
  opt.step(std::span<Matrix* const>(&pp, 1), std::span<const Matrix>(&g, 1));
  // Bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(p(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(p(0, 1), -0.9, 1e-7);
}

TEST(MatrixIo, JsonRoundTripIsExact) {
  std::mt19937_64 g(10);
  const Matrix m = oracle::random_matrix(3, 5, g);
  EXPECT_EQ(f3::matrix_from_json(f3::matrix_to_json(m)), m);
}
