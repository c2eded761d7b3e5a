#include "fesc/simplicial.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace fesc;

namespace {

SimplicialComplex annulus() {
  // square ring between [-2,2]^2 and [-1,1]^2, 8 triangles
  std::vector<Point> v{{-2, -2}, {2, -2}, {2, 2}, {-2, 2}, {-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  std::vector<Simplex> t{{0, 1, 4}, {1, 4, 5}, {1, 2, 5}, {2, 5, 6}, {2, 3, 6}, {3, 6, 7}, {0, 3, 7}, {0, 4, 7}};
  return SimplicialComplex(2, v, t);
}

}  // namespace

TEST(Subcells, Counts) {
  EXPECT_EQ(subcells({0, 1, 2, 3}, 1).size(), 6u);
  EXPECT_EQ(subcells({0, 1, 2}, 0).size(), 3u);
  EXPECT_EQ(subcells({4, 7}, 1), (std::vector<Simplex>{{4, 7}}));
}

TEST(Orientation, Convention) {
  EXPECT_EQ(relative_orientation({0, 1}, {1}), 1);
  EXPECT_EQ(relative_orientation({0, 1}, {0}), -1);
  EXPECT_EQ(relative_orientation({0, 1, 2}, {0, 2}), -1);
  EXPECT_EQ(relative_orientation({0, 1, 2}, {0}), 0);
}

TEST(Coboundary, SquaresToZero) {
  std::vector<Point> v{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}, {0, 2}, {1, 2}, {2, 2}};
  std::vector<Simplex> t;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      int a = 3 * j + i;
      t.push_back({a, a + 1, a + 4});
      t.push_back({a, a + 3, a + 4});
    }
  SimplicialComplex K(2, v, t);
  EXPECT_TRUE((coboundary_matrix(K, 1) * coboundary_matrix(K, 0)).is_zero());
  SimplicialComplex P(1, {{0}, {1}, {2}}, {{0, 1}, {1, 2}});
  EXPECT_EQ(rank(coboundary_matrix(P, 0)), 2u);
  SimplicialComplex tet(3, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 1, 2, 3}});
  for (int k = 0; k + 2 <= 3; ++k)
    EXPECT_TRUE((coboundary_matrix(tet, k + 1) * coboundary_matrix(tet, k)).is_zero());
}

TEST(Cohomology, Fixtures) {
  SimplicialComplex tri(2, {{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
  EXPECT_EQ(cellular_cohomology(tri), (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(cellular_cohomology(annulus()), (std::vector<int>{1, 1, 0}));
  SimplicialComplex two(2, {{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}}, {{0, 1, 2}, {3, 4, 5}});
  EXPECT_EQ(cellular_cohomology(two), (std::vector<int>{2, 0, 0}));
}

TEST(Complex, GeometryCheckRejectsOverlap) {
  EXPECT_THROW(SimplicialComplex(2, {{0, 0}, {2, 0}, {0, 2}, {1, 1}, {3, 3}}, {{0, 1, 2}, {1, 2, 4}, {0, 3, 4}}),
               std::exception);
  EXPECT_THROW(SimplicialComplex(2, {{0, 0}, {1, 1}, {2, 2}}, {{0, 1, 2}}), std::exception);
}

TEST(Complex, ClosureIsValid) {
  auto K = annulus();
  auto B = K.closure_of(boundary_cells({0, 1, 4}));
  EXPECT_EQ(B.count(0), 3u);
  EXPECT_EQ(B.count(1), 3u);
  EXPECT_EQ(B.dim(), 1);
  EXPECT_TRUE(boundary_cells({3}).empty());
}

TEST(Barycentric, LowerDim) {
  bool in = false;
  auto l = barycentric({{0, 0, 0}, {2, 0, 0}}, {1, 0, 0}, &in);
  EXPECT_TRUE(in);
  EXPECT_EQ(l, (RatVec{frac(1, 2), frac(1, 2)}));
  barycentric({{0, 0, 0}, {2, 0, 0}}, {1, 1, 0}, &in);
  EXPECT_FALSE(in);
}

TEST(MeshFormat, RoundTrip) {
  std::istringstream in("# unit triangle\ndim 2\nv 0 0\nv 1 0\nv 0 1/2\ns 0 1 2\n");
  auto mf = parse_mesh(in);
  auto K = to_complex(mf);
  EXPECT_EQ(K.vertex(2)[1], frac(1, 2));
  std::ostringstream out;
  write_mesh(out, K, {{0, 6}});
  std::istringstream back(out.str());
  auto mf2 = parse_mesh(back);
  EXPECT_EQ(mf2.tops, mf.tops);
  EXPECT_EQ(mf2.parents.size(), 1u);
  std::istringstream bad("dim 2\nv 0 0\ns 0 1 2\n");
  EXPECT_THROW(to_complex(parse_mesh(bad)), std::exception);
}
