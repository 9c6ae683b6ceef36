#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "f3/alignment/alignment.hpp"
#include "f3/alignment/sinkhorn.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/gradcheck.hpp"
#include "f3/numcore/ops.hpp"
#include "oracles.hpp"

using f3::Matrix;

namespace {

Matrix permutation_matrix(const std::vector<std::size_t>& p) {
  Matrix m(p.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m(i, p[i]) = 1.0;
  return m;
}

Matrix positive_kernel(std::size_t n, std::mt19937_64& g, double spread = 1.0) {
  std::normal_distribution<double> z(0, 1);
  Matrix k(n, n);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = std::exp(spread * z(g));
  return k;
}

// Independent Sinkhorn: alternate column then row normalization of the matrix itself.
Matrix naive_sinkhorn(Matrix k, std::size_t iterations) {
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < k.cols(); ++j) {
      double s = 0;
      for (std::size_t i = 0; i < k.rows(); ++i) s += k(i, j);
      for (std::size_t i = 0; i < k.rows(); ++i) k(i, j) /= s;
    }
    for (std::size_t i = 0; i < k.rows(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < k.cols(); ++j) s += k(i, j);
      for (std::size_t j = 0; j < k.cols(); ++j) k(i, j) /= s;
    }
  }
  return k;
}

}  // namespace

TEST(Alignment, NoneModeIsIdentity) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::none, 2, 3, 3, 1);
  const std::vector<Matrix> h{Matrix::column(std::vector<double>{1, 2, 3}),
                              Matrix::column(std::vector<double>{4, 5, 6})};
  const Matrix out = f3::apply_alignment(a, h);
  EXPECT_EQ(out, (Matrix{{1, 2, 3}, {4, 5, 6}}));
}

TEST(Alignment, SoftInitIsIdentityPlusSmallNoise) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::soft, 3, 4, 4, 7);
  for (const Matrix& p : a.effective()) {
    EXPECT_LE(f3::max_abs_diff(p, Matrix::identity(4)), 0.01);
    EXPECT_GT(f3::max_abs_diff(p, Matrix::identity(4)), 0.0);
  }
}

TEST(Alignment, TiedSharesOneMatrix) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::tied, 5, 3, 3, 7);
  EXPECT_EQ(a.parameters().size(), 1u);
  const auto p = a.effective();
  ASSERT_EQ(p.size(), 5u);
  for (const Matrix& m : p) EXPECT_EQ(m, p[0]);
}

TEST(Alignment, InverseMapsRepairPlantedPermutations) {
  std::mt19937_64 g(1);
  const std::size_t d = 5, n = 3;
  std::vector<Matrix> h, permuted, inverse;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> p(d);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), g);
    const Matrix col = oracle::random_matrix(d, 1, g);
    Matrix pc(d, 1);
    for (std::size_t j = 0; j < d; ++j) pc(j, 0) = col(p[j], 0);  // h[p]
    h.push_back(col);
    permuted.push_back(pc);
    inverse.push_back(f3::transpose(permutation_matrix(p)));
  }
  auto a = f3::AlignmentSet::create(f3::AlignmentMode::soft, n, d, d, 1);
  a.set_matrices(inverse);
  const auto none = f3::AlignmentSet::create(f3::AlignmentMode::none, n, d, d, 1);
  EXPECT_EQ(f3::apply_alignment(a, permuted), f3::apply_alignment(none, h));
}

TEST(Alignment, ShapeErrorNamesTheClient) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::soft, 2, 3, 3, 1);
  const std::vector<Matrix> h{Matrix(3, 1), Matrix(4, 1)};
  try {
    f3::apply_alignment(a, h);
    FAIL();
  } catch (const f3::ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("client 1"), std::string::npos) << e.what();
  }
}

TEST(Alignment, RectangularSoftMapsToOutDim) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::soft, 2, 6, 4, 3);
  for (const Matrix& p : a.effective()) {
    EXPECT_EQ(p.rows(), 4u);
    EXPECT_EQ(p.cols(), 6u);
  }
  EXPECT_THROW(f3::AlignmentSet::create(f3::AlignmentMode::hard, 2, 6, 4, 3), f3::ValidationError);
}

TEST(Alignment, JsonRoundTrip) {
  const auto a = f3::AlignmentSet::create(f3::AlignmentMode::hard, 2, 3, 3, 4, 0.01, 7);
  const auto b = f3::AlignmentSet::from_json(a.to_json());
  EXPECT_EQ(b.mode(), f3::AlignmentMode::hard);
  EXPECT_EQ(b.sinkhorn_iterations(), 7u);
  EXPECT_EQ(b.effective()[1], a.effective()[1]);
}

TEST(Sinkhorn, MatchesNaiveAlternatingNormalization) {
  std::mt19937_64 g(2);
  const Matrix k0 = positive_kernel(6, g);
  for (std::size_t t : {1u, 3u, 10u}) {
    EXPECT_LT(f3::max_abs_diff(f3::sinkhorn(k0, t).K, naive_sinkhorn(k0, t)), 1e-12) << t;
  }
}

TEST(Sinkhorn, ResidualSequenceIsRecordedFromK0) {
  std::mt19937_64 g(3);
  const Matrix k0 = positive_kernel(4, g);
  const auto r = f3::sinkhorn(k0, 8);
  ASSERT_EQ(r.diagnostics.residual.size(), 9u);
  EXPECT_DOUBLE_EQ(r.diagnostics.residual[0], f3::sinkhorn_residual(k0));
  EXPECT_DOUBLE_EQ(r.diagnostics.residual[8], f3::sinkhorn_residual(r.K));
}

TEST(Sinkhorn, RandomKernelConvergesAtTheSecondSingularValueRate) {
  std::mt19937_64 g(4);
  const Matrix k0 = positive_kernel(16, g, 1.5);
  const auto r = f3::sinkhorn(k0, 60);
  EXPECT_LT(r.diagnostics.residual[50], 1e-8);
  const auto sv = oracle::singular_values(r.K);
  EXPECT_NEAR(r.diagnostics.sigma2, sv[1], 1e-8);
  const auto fit = f3::fit_decay_rate(r.diagnostics);
  ASSERT_TRUE(fit.sufficient);
  EXPECT_LE(fit.slope, 2 * std::log(sv[1]) + 0.1);
}

TEST(Sinkhorn, NearPermutationKernelIsSlow) {
  std::mt19937_64 g(5);
  std::vector<std::size_t> p(16);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), g);
  Matrix k0 = permutation_matrix(p);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < k0.size(); ++i) k0[i] += 1e-4 * u(g);
  const auto r = f3::sinkhorn(k0, 100);
  EXPECT_GT(f3::mean_decay_ratio(r.diagnostics), 0.99);
}

TEST(Sinkhorn, DoublyStochasticInputIsAFixedPoint) {
  const Matrix k0(4, 4, 0.25);
  EXPECT_LT(f3::max_abs_diff(f3::sinkhorn(k0, 5).K, k0), 1e-15);
  EXPECT_LT(f3::sinkhorn_residual(k0), 1e-15);
}

TEST(Sinkhorn, RejectsNonPositiveKernels) {
  Matrix k0(3, 3, 1.0);
  k0(1, 2) = 0.0;
  EXPECT_THROW(f3::sinkhorn(k0, 3), f3::DomainError);
  EXPECT_THROW(f3::sinkhorn(Matrix(2, 3, 1.0), 3), f3::ShapeError);
}

TEST(Sinkhorn, GradientMatchesFiniteDifferences) {
  std::mt19937_64 g(6);
  const std::vector<Matrix> params{oracle::random_matrix(4, 4, g, -1, 1)};
  const Matrix w = oracle::random_matrix(4, 4, g);
  for (std::size_t t : {1u, 5u, 20u}) {
    const f3::ScalarFn f = [&](f3::Tape& tape, std::span<const f3::Var> p) {
      const f3::Var k = f3::sinkhorn(f3::exp(p[0]), t);
      return f3::sum(f3::hadamard(k, tape.constant(w)));
    };
    EXPECT_TRUE(f3::grad_check(f, params, 1e-4).passed) << "T=" << t;
  }
}
