#include "fesc/linalg.hpp"
#include "fesc/simplicial.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fesc;

namespace {

RatMatrix random_matrix(std::mt19937& g, std::size_t r, std::size_t c, int lo = -3, int hi = 3) {
  std::uniform_int_distribution<int> d(lo, hi);
  RatMatrix M(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) M(i, j) = frac(d(g), 1 + std::abs(d(g)));
  return M;
}

}  // namespace

TEST(Rational, ParseAndPrint) {
  EXPECT_EQ(parse_rational("6/4"), frac(3, 2));
  EXPECT_EQ(parse_rational("-7"), Rational(-7));
  EXPECT_EQ(to_string(frac(-2, 4)), "-1/2");
  EXPECT_THROW(parse_rational("1/0"), std::exception);
}

TEST(Rank, Basics) {
  EXPECT_EQ(rank(RatMatrix::identity(2)), 2u);
  EXPECT_EQ(rank(RatMatrix(3, 5)), 0u);
}

TEST(Rank, TriangleCoboundary) {
  SimplicialComplex K(2, {{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
  EXPECT_EQ(rank(coboundary_matrix(K, 0)), 2u);
}

TEST(Rank, BareissAgreesWithRref) {
  std::mt19937 g(7);
  for (int t = 0; t < 60; ++t) {
    std::size_t r = 1 + g() % 7, c = 1 + g() % 7;
    RatMatrix M = random_matrix(g, r, c);
    // force some dependence
    if (r > 2) {
      for (std::size_t j = 0; j < c; ++j) M(r - 1, j) = M(0, j) * 2 - M(1, j);
    }
    if (c > 3) {
      for (std::size_t i = 0; i < r; ++i) M(i, 1) = 0;
    }
    EXPECT_EQ(rank(M), rref(M).pivots.size());
  }
}

TEST(Nullspace, RankNullity) {
  std::mt19937 g(11);
  EXPECT_EQ(nullspace(RatMatrix::identity(3)).cols(), 0u);
  RatMatrix a = RatMatrix::from_rows({{1, -1}}, 2);
  RatMatrix N = nullspace(a);
  ASSERT_EQ(N.cols(), 1u);
  EXPECT_EQ(N(0, 0), 1);
  EXPECT_EQ(N(1, 0), 1);
  for (int t = 0; t < 40; ++t) {
    std::size_t r = 1 + g() % 6, c = 1 + g() % 8;
    RatMatrix M = random_matrix(g, r, c);
    RatMatrix Z = nullspace(M);
    EXPECT_EQ(rank(M) + Z.cols(), c);
    EXPECT_TRUE((M * Z).is_zero());
  }
}

TEST(Annihilator, LeftKernel) {
  std::mt19937 g(3);
  RatMatrix M = random_matrix(g, 6, 3);
  RatMatrix Y = annihilator(M);
  EXPECT_EQ(Y.rows(), 6 - rank(M));
  EXPECT_TRUE((Y * M).is_zero());
}

TEST(Solve, InverseAndMinNorm) {
  std::mt19937 g(5);
  RatMatrix A = random_matrix(g, 4, 4);
  while (rank(A) < 4) A = random_matrix(g, 4, 4);
  EXPECT_EQ(A * inverse(A), RatMatrix::identity(4));
  RatMatrix B = RatMatrix::from_rows({{1, 1, 0}, {0, 1, 1}}, 3);
  auto x = min_norm_solution(B, RatVec{1, 1});
  ASSERT_TRUE(x);
  EXPECT_EQ(B * *x, (RatVec{1, 1}));
  // orthogonal to the kernel (1,-1,1)
  EXPECT_EQ((*x)[0] - (*x)[1] + (*x)[2], 0);
  RatMatrix C = RatMatrix::from_rows({{1, 1}, {1, 1}}, 2);
  EXPECT_FALSE(solve(C, RatVec{1, 0}));
}

TEST(Integrate, ClosedForms) {
  std::vector<RatVec> tri{{0, 0}, {1, 0}, {0, 1}};
  EXPECT_EQ(integrate_monomial({0, 0, 0}, tri), frac(1, 2));
  EXPECT_EQ(integrate_monomial({1, 1, 0}, tri), frac(1, 24));
  std::vector<RatVec> seg{{0}, {1}};
  EXPECT_EQ(integrate_monomial({2, 0}, seg), frac(1, 3));
  EXPECT_THROW(integrate_monomial({0, 0, 0}, std::vector<RatVec>{{0, 0}, {1, 1}, {2, 2}}), std::exception);
}

TEST(Integrate, AffineInvariance) {
  std::vector<RatVec> tri{{0, 0}, {1, 0}, {0, 1}};
  // x -> A x + b with det A = 6
  std::vector<RatVec> img;
  for (auto& p : tri) img.push_back({p[0] * 2 + p[1] + 1, p[1] * 3 - 2});
  for (auto alpha : std::vector<std::vector<int>>{{0, 0, 0}, {2, 1, 0}, {1, 1, 3}})
    EXPECT_EQ(integrate_monomial(alpha, img), integrate_monomial(alpha, tri) * 6);
}

TEST(GeneralizedSV, Trivial) {
  DenseF I(3, 3);
  for (int i = 0; i < 3; ++i) I(i, i) = 1;
  EXPECT_NEAR(smallest_generalized_singular_value(I, I, I), 1.0, 1e-12);
  DenseF Z(3, 3);
  EXPECT_EQ(smallest_generalized_singular_value(I, Z, I), 0.0);
  DenseF B(2, 3);
  B(0, 0) = 3;
  B(1, 1) = 4;
  EXPECT_NEAR(smallest_generalized_singular_value(I, B, to_float(RatMatrix::identity(2))), 3.0, 1e-12);
}
