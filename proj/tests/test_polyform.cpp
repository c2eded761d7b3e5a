#include "fesc/polyform.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fesc;

namespace {

CarrierPtr ref_triangle() { return simplex_carrier({{0, 0}, {1, 0}, {0, 1}}); }

SparsePoly mono(int nv, std::vector<int> e, Rational c = 1) {
  SparsePoly s(nv);
  s.terms[e] = c;
  return s;
}

PolyForm random_form(std::mt19937& g, CarrierPtr C, int k, int p) {
  std::uniform_int_distribution<int> d(-4, 4);
  PolyForm u = zero_form(C, k, p);
  for (auto& c : u.coef) c = frac(d(g), 1 + std::abs(d(g)));
  return u;
}

std::shared_ptr<const SimplicialComplex> single(const std::vector<Point>& pts) {
  Simplex s(pts.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<int>(i);
  return std::make_shared<SimplicialComplex>(static_cast<int>(pts[0].size()), pts, std::vector<Simplex>{s});
}

std::vector<Point> ref_tet() { return {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}; }

}  // namespace

TEST(Alt, TablesAndSigns) {
  EXPECT_EQ(alt_dim(3, 2), 3u);
  EXPECT_EQ(mask_axes(alt_masks(3, 2)[1]), (std::vector<int>{0, 2}));
  EXPECT_EQ(wedge_sign(0b10, 0b01), -1);
  EXPECT_EQ(wedge_sign(0b01, 0b10), 1);
  EXPECT_EQ(wedge_sign(0b01, 0b11), 0);
  EXPECT_EQ(monomials(3, 2).size(), 6u);
  EXPECT_EQ(monomial_index(3, monomials(3, 2)[4]), 4);
}

TEST(ExteriorDerivative, XdyOnTriangle) {
  auto C = ref_triangle();
  auto u = from_cartesian(C, 1, {SparsePoly(2), mono(2, {1, 0})});
  auto du = exterior_derivative(u);
  EXPECT_EQ(du, constant_form(C, 2, {1}));
}

TEST(ExteriorDerivative, BarycentricCubic) {
  auto C = ref_triangle();
  auto l0 = cell_barycentric(C, 0), l1 = cell_barycentric(C, 1);
  auto u = wedge(wedge(l0, l0), l1);
  // lambda0 = 1 - x - y, lambda1 = x; u = (1-x-y)^2 x
  SparsePoly one = SparsePoly::constant(2, 1), x = SparsePoly::variable(2, 0), y = SparsePoly::variable(2, 1);
  SparsePoly L0 = one;
  L0 += x.scaled(-1);
  L0 += y.scaled(-1);
  SparsePoly ux = (L0 * x).scaled(-2);
  ux += L0 * L0;
  SparsePoly uy = (L0 * x).scaled(-2);
  EXPECT_EQ(exterior_derivative(u), from_cartesian(C, 1, {ux, uy}, 2));
  // same thing written with d lambda
  auto expect = Rational(2) * wedge(wedge(l0, l1), exterior_derivative(l0)) + wedge(wedge(l0, l0), exterior_derivative(l1));
  EXPECT_EQ(exterior_derivative(u), expect);
}

TEST(ExteriorDerivative, DSquaredZero) {
  std::mt19937 g(1);
  auto rc = refine(single(ref_tet()), 1);
  auto C = carrier_of(rc, {0, 1, 2, 3});
  for (int k = 0; k <= 2; ++k) {
    auto u = random_form(g, C, k, 3);
    EXPECT_TRUE(exterior_derivative(exterior_derivative(u)).is_zero());
  }
}

TEST(Contract, Examples) {
  auto C = ref_triangle();
  EXPECT_EQ(contract(constant_form(C, 2, {1}), {1, 0}), constant_form(C, 1, {0, 1}));
  EXPECT_TRUE(contract(constant_form(C, 0, {5}), {1, 0}).is_zero());
  auto xdy = from_cartesian(C, 1, {SparsePoly(2), mono(2, {1, 0})});
  EXPECT_EQ(koszul(xdy, {0, 0}), from_cartesian(C, 0, {mono(2, {1, 1})}));
}

TEST(Contract, SumOfWedgesIsKTimesIdentity) {
  for (int n = 2; n <= 3; ++n) {
    std::vector<Point> pts;
    for (int i = 0; i <= n; ++i) {
      Point p(n);
      if (i) p[i - 1] = 1;
      pts.push_back(p);
    }
    auto C = simplex_carrier(pts);
    for (int k = 1; k <= n; ++k)
      for (std::size_t b = 0; b < alt_dim(n, k); ++b) {
        RatVec w(alt_dim(n, k));
        w[b] = 1;
        auto u = constant_form(C, k, w);
        PolyForm acc = zero_form(C, k, 0);
        for (int i = 0; i < n; ++i) {
          RatVec e(n), f(alt_dim(n, 1));
          e[i] = 1;
          f[i] = 1;
          acc = acc + wedge(constant_form(C, 1, f), contract(u, e));
        }
        EXPECT_EQ(acc, Rational(k) * u);
      }
  }
}

TEST(Poincare, Examples) {
  auto C = ref_triangle();
  EXPECT_EQ(poincare(constant_form(C, 1, {1, 0}), {0, 0}), from_cartesian(C, 0, {mono(2, {1, 0})}));
  auto xdy = from_cartesian(C, 1, {SparsePoly(2), mono(2, {1, 0})});
  auto pu = poincare(xdy, {0, 0});
  EXPECT_EQ(pu, from_cartesian(C, 0, {mono(2, {1, 1}, frac(1, 2))}));
  EXPECT_EQ(poincare(exterior_derivative(xdy), {0, 0}) + exterior_derivative(pu), xdy);
  EXPECT_THROW(poincare(xdy, {5, 5}), std::invalid_argument);
}

TEST(Poincare, HomotopyOnSplits) {
  std::mt19937 g(2);
  auto rc2 = refine(single({{0, 0}, {3, 0}, {1, 2}}), 1);
  auto rc3 = refine(single(ref_tet()), 1);
  for (auto* rc : {&rc2, &rc3}) {
    const Simplex& T = rc->base->simplices(rc->base->dim())[0];
    auto C = carrier_of(*rc, T);
    Point W = rc->inpoints.at(T);
    int n = C->n;
    for (int k = 1; k <= n; ++k)
      for (int p = 0; p <= 3; ++p) {
        auto u = random_form(g, C, k, p);
        EXPECT_EQ(poincare(exterior_derivative(u), W) + exterior_derivative(poincare(u, W)), u) << k << " " << p;
        EXPECT_TRUE(poincare(poincare(u, W), W).is_zero());
      }
    // k = 0 on a continuous function
    auto V = c0_space(C, 0, 3);
    RatVec c(V.dim());
    for (auto& x : c) x = frac(static_cast<long>(g() % 9) - 4, 1 + g() % 3);
    auto u = V.combine(c);
    auto uW = evaluate(u, W)[0];
    EXPECT_EQ(poincare(exterior_derivative(u), W), u - constant_form(C, 0, {uW}));
  }
}

TEST(Poincare, HomogeneousRule) {
  auto C = ref_triangle();
  Point W{frac(1, 3), frac(1, 3)};
  // u = (x - 1/3)^2 (y - 1/3) dx: homogeneous of degree r = 3 around W
  SparsePoly X = SparsePoly::variable(2, 0);
  X += SparsePoly::constant(2, frac(-1, 3));
  SparsePoly Y = SparsePoly::variable(2, 1);
  Y += SparsePoly::constant(2, frac(-1, 3));
  auto u = from_cartesian(C, 1, {X * X * Y, SparsePoly(2)});
  EXPECT_EQ(poincare(u, W), frac(1, 4) * koszul(u, W));
}

TEST(Restriction, TraceVsPullback) {
  auto C = ref_triangle();
  auto E = simplex_carrier({{0, 0}, {1, 0}});
  auto dy = constant_form(C, 1, {0, 1});
  EXPECT_TRUE(pullback(dy, E).is_zero());
  EXPECT_EQ(trace(dy, E), constant_form(E, 1, {0, 1}));
  // u = x^2 y
  auto u = from_cartesian(C, 0, {mono(2, {2, 1})});
  auto [t0, t1] = double_trace(u, E);
  EXPECT_TRUE(t0.is_zero());
  EXPECT_EQ(t1, from_cartesian(E, 1, {SparsePoly(2), mono(2, {2, 0})}, 2));
  // pullback commutes with d
  std::mt19937 g(4);
  auto w = random_form(g, C, 0, 3);
  EXPECT_EQ(pullback(exterior_derivative(w), E), exterior_derivative(pullback(w, E)));
}

TEST(Restriction, MultiValuedTraceThrows) {
  auto rc = refine(single({{0, 0}, {1, 0}, {0, 1}}), 1);
  auto C = carrier_of(rc, {0, 1, 2});
  auto u = broken_space(C, 0, 1).element(1);  // nonzero on one piece only
  auto E = simplex_carrier({rc.inpoints.at({0, 1, 2}), {0, 0}});
  try {
    trace(u, E);
    SUCCEED();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("multi-valued"), std::string::npos);
  }
  // a random broken form is certainly multi-valued on the inner edge
  std::mt19937 g(9);
  auto r = random_form(g, C, 0, 2);
  EXPECT_THROW(trace(r, E), std::invalid_argument);
}

TEST(Admissible, Examples) {
  auto C = ref_triangle();
  std::mt19937 g(5);
  auto v0 = random_form(g, C, 0, 2);
  EXPECT_TRUE(is_admissible(v0, exterior_derivative(v0)));
  auto E = simplex_carrier({{0, 0}, {1, 0}});
  // lambda_2 = y vanishes on the edge
  EXPECT_TRUE(is_admissible(zero_form(E, 0, 0), constant_form(E, 1, {0, 1})));
  auto x = from_cartesian(E, 0, {mono(2, {1, 0})});
  EXPECT_FALSE(is_admissible(x, constant_form(E, 1, {2, 0})));
  AdmissiblePair a{v0, exterior_derivative(v0)};
  auto b = admissible_differential(a);
  EXPECT_EQ(b.v0, exterior_derivative(v0));
  auto c = admissible_differential(b);
  EXPECT_TRUE(c.v0.is_zero() && c.v1.is_zero());
}

TEST(Admissible, EdgeExactnessTransfer) {
  // on an edge of the plane: B^k = polynomial traces of degree 3-k; the pair
  // sequence is exact iff the pulled-back one is
  auto E = simplex_carrier({{0, 0}, {2, 1}});
  auto P = [&](int k, int p) { return broken_space(E, k, p); };
  // pulled back: P3 -> P2 dx on the edge, exact after R
  auto B0 = P(0, 3);
  auto B1 = pullback_map(E, 1, 2)->apply(P(1, 2).basis);
  auto d0 = d_map(E, 0, 3)->apply(B0.basis);
  EXPECT_EQ(rank(d0), B0.dim() - 1);
  EXPECT_EQ(rank(d0), rank(B1));
}

TEST(Integrate, Examples) {
  auto E = simplex_carrier({{0, 0}, {1, 0}});
  EXPECT_EQ(integrate(constant_form(E, 1, {1, 0})), 1);
  auto C = ref_triangle();
  auto w = wedge(exterior_derivative(cell_barycentric(C, 0)), exterior_derivative(cell_barycentric(C, 1)));
  EXPECT_EQ(integrate(w), frac(1, 2));
}

TEST(Integrate, Stokes) {
  std::vector<Point> pts{{0, 0}, {2, 1}, {frac(1, 2), 3}};
  auto C = simplex_carrier(pts);
  auto u = from_cartesian(C, 1, {SparsePoly(2), mono(2, {2, 0})});
  Rational rhs = 0;
  Simplex T{0, 1, 2};
  for (const auto& f : subcells(T, 1)) {
    auto F = simplex_carrier({pts[f[0]], pts[f[1]]});
    rhs += relative_orientation(T, f) * integrate(trace(u, F));
  }
  EXPECT_EQ(integrate(exterior_derivative(u)), rhs);
  // and on a split carrier
  auto rc = refine(single(pts), 1);
  auto R = carrier_of(rc, T);
  auto v = trace(u, R);
  EXPECT_EQ(integrate(exterior_derivative(v)), rhs);
}

TEST(Spaces, ClosedFormDimensions) {
  auto ct = refine(single({{0, 0}, {1, 0}, {0, 1}}), 1);
  auto C = carrier_of(ct, {0, 1, 2});
  EXPECT_EQ(constrained_space(C, 1, 0, Continuity::C0).dim(), 4u);
  EXPECT_EQ(constrained_space(C, 3, 0, Continuity::C1).dim(), 12u);
  EXPECT_EQ(constrained_space(C, 2, 1, Continuity::C0d).dim(), 15u);
  EXPECT_EQ(constrained_space(C, 1, 2, Continuity::C0).dim(), 4u);
  auto wf = refine(single(ref_tet()), 1);
  EXPECT_EQ(constrained_space(carrier_of(wf, {0, 1, 2, 3}), 1, 2, Continuity::C0).dim(), 27u);
  auto ps = refine(single(ref_tet()), 0);
  EXPECT_EQ(constrained_space(carrier_of(ps, {0, 1, 2, 3}), 1, 1, Continuity::C0).dim(), 45u);
}

TEST(Spaces, JumpCheckAtRandomPoints) {
  auto ct = refine(single({{0, 0}, {1, 0}, {0, 1}}), 1);
  auto C = carrier_of(ct, {0, 1, 2});
  auto V = constrained_space(C, 3, 0, Continuity::C1);
  std::mt19937 g(6);
  Point W = ct.inpoints.at({0, 1, 2});
  for (std::size_t j = 0; j < V.dim(); ++j) {
    auto u = V.element(j);
    auto du = exterior_derivative(u);
    for (int v = 0; v < 3; ++v)
      for (int s = 0; s < 10; ++s) {
        Rational t = frac(1 + static_cast<long>(g() % 97), 99);
        Point x(2);
        for (int i = 0; i < 2; ++i) x[i] = W[i] + t * (C->cell[v][i] - W[i]);
        // both pieces sharing the inner edge toward vertex v
        std::vector<std::size_t> sides;
        for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
          bool hull = false;
          auto l = barycentric(C->piece_points(pc), x, &hull);
          if (std::all_of(l.begin(), l.end(), [](const Rational& q) { return sgn(q) >= 0; })) sides.push_back(pc);
        }
        ASSERT_EQ(sides.size(), 2u);
        EXPECT_EQ(evaluate_on_piece(u, sides[0], x), evaluate_on_piece(u, sides[1], x));
        EXPECT_EQ(evaluate_on_piece(du, sides[0], x), evaluate_on_piece(du, sides[1], x));
      }
  }
}

TEST(Augment, WhitneyAndTrimmed) {
  auto C = ref_triangle();
  Point W{frac(1, 3), frac(1, 3)};
  std::vector<std::size_t> wh, tr;
  for (int k = 0; k <= 2; ++k) {
    auto Vk1 = k < 2 ? broken_space(C, k + 1, 0) : FormSpace{C, 3, 0, RatMatrix(0, 0), ""};
    Augmented a = k < 2 ? augment(broken_space(C, k, 0), Vk1, W) : Augmented{broken_space(C, 2, 0), true, true};
    wh.push_back(a.W.dim());
    EXPECT_TRUE(a.direct);
    EXPECT_TRUE(a.decomposition);
    Augmented b = k < 2 ? augment(broken_space(C, k, 1), broken_space(C, k + 1, 1), W)
                        : Augmented{broken_space(C, 2, 1), true, true};
    tr.push_back(b.W.dim());
    EXPECT_TRUE(b.decomposition);
  }
  EXPECT_EQ(wh, (std::vector<std::size_t>{3, 3, 1}));
  EXPECT_EQ(tr, (std::vector<std::size_t>{6, 8, 3}));
}

TEST(Json, Serializes) {
  auto C = ref_triangle();
  auto j = to_json(constant_form(C, 1, {0, frac(2, 3)}));
  EXPECT_EQ(j["degree"], 1);
  ASSERT_EQ(j["coefficients"].size(), 1u);
  EXPECT_EQ(j["coefficients"][0]["value"], "2/3");
}
