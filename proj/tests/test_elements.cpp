#include "fesc/elements.hpp"

#include <gtest/gtest.h>

using namespace fesc;

namespace {

std::vector<std::size_t> top_dims(const Element& el) {
  int T = el.sys.cx->cells_of_dim(el.sys.n()).front();
  std::vector<std::size_t> d;
  for (int k = 0; k <= el.sys.n(); ++k) d.push_back(el.sys.dim(T, k));
  return d;
}

std::vector<std::size_t> dims_of(const std::string& name, int p = 0) {
  ElementSpec s;
  s.name = name;
  s.p = p;
  return top_dims(*build(s, reference_triangle()));
}

}  // namespace

TEST(Elements, CloughTocherFamily) {
  EXPECT_EQ(dims_of("ct-full"), (std::vector<std::size_t>{12, 15, 4}));
  EXPECT_EQ(dims_of("ct-minimal"), (std::vector<std::size_t>{9, 12, 4}));
  EXPECT_EQ(dims_of("ct-dg"), (std::vector<std::size_t>{12, 20, 9}));
  EXPECT_EQ(dims_of("ct-dg-minimal"), (std::vector<std::size_t>{9, 9, 1}));
}

TEST(Elements, PowellSabin3d) {
  ElementSpec s;
  s.name = "ps3d";
  auto el = build(s, reference_tet());
  EXPECT_EQ(top_dims(*el), (std::vector<std::size_t>{16, 30, 20, 5}));
  int S = el->sys.cx->cells_of_dim(3).front();
  std::vector<std::size_t> kd;
  for (int k = 0; k <= 3; ++k) kd.push_back(el->aux.at("K" + std::to_string(k)).at(S).dim());
  EXPECT_EQ(kd, (std::vector<std::size_t>{1, 15, 15, 5}));
  for (auto& n : el->notes) std::cout << n << "\n";
}

TEST(Elements, WhitneyBranching) {
  ElementSpec s;
  s.name = "ps3d-branch";
  s.ell = 2;
  auto el2 = build(s, reference_tet());
  EXPECT_EQ(top_dims(*el2), (std::vector<std::size_t>{16, 30, 16, 1}));
  s.ell = 1;
  auto el1 = build(s, reference_tet());
  EXPECT_EQ(top_dims(*el1), (std::vector<std::size_t>{16, 18, 4, 1}));
  // the last two spaces for n = 2, 3
  for (int n : {2, 3}) {
    s.n = n;
    s.ell = n - 1;
    auto el = build(s, reference_simplex(n));
    auto d = top_dims(*el);
    EXPECT_EQ(d[n - 1], static_cast<std::size_t>((n + 1) * (n + 1)));
    EXPECT_EQ(d[n], 1u);
  }
}

TEST(Elements, CatalogCompatibility) {
  for (std::string name : {"ct-full", "ct-minimal", "ct-dg", "ct-dg-minimal"}) {
    ElementSpec s;
    s.name = name;
    auto el = build(s, reference_triangle());
    auto rep = check_compatibility(el->sys);
    EXPECT_TRUE(rep.compatible) << name;
    int T = el->sys.cx->cells_of_dim(2).front();
    EXPECT_EQ(check_local_exactness(el->sys, T), (std::vector<int>{0, 0, 0})) << name;
  }
}

TEST(Elements, HighOrderFamily) {
  for (int p = 3; p <= 6; ++p) {
    ElementSpec s;
    s.name = "ct-highorder";
    s.p = p;
    auto el = build(s, reference_triangle());
    const auto& sys = el->sys;
    std::size_t a0 = 3 * p * (p - 1) / 2 + 3, a2 = 3 * (p - 2) * (p - 1) / 2 + 1;
    EXPECT_EQ(top_dims(*el), (std::vector<std::size_t>{a0, a0 + a2 - 1, a2})) << p;
    int E = sys.cx->find({0, 1});
    EXPECT_EQ(sys.dim(E, 0), static_cast<std::size_t>(2 * p + 1));
    EXPECT_EQ(sys.dim(E, 1), static_cast<std::size_t>(3 * p - 1));
    EXPECT_EQ(sys.dim(E, 2), static_cast<std::size_t>(p - 1));
    EXPECT_EQ(zero_boundary_subspace(sys, E, 0).cols(), static_cast<std::size_t>(2 * p - 5));
    EXPECT_EQ(zero_boundary_subspace(sys, E, 1).cols(), static_cast<std::size_t>(3 * p - 7));
    EXPECT_EQ(zero_boundary_subspace(sys, E, 2).cols(), static_cast<std::size_t>(p - 3));
    EXPECT_TRUE(check_compatibility(sys).compatible) << p;
  }
}

TEST(Elements, PowellSabinCompatibility) {
  ElementSpec s;
  s.name = "ps3d";
  auto el = build(s, reference_tet());
  auto rep = check_compatibility(el->sys);
  EXPECT_TRUE(rep.compatible);
  for (const auto& a : rep.audit) EXPECT_TRUE(a.equal) << a.k;
  // dim A^k_0(T) = 1 at k = dim T and vanishes otherwise (vertices excepted)
  for (const auto& c : rep.cells) {
    if (c.dim == 0) continue;
    for (int k = 0; k <= 3; ++k) EXPECT_EQ(c.zero_dims[k], k == c.dim ? 1u : 0u) << c.cell << " " << k;
  }
  for (int l : {1, 2}) {
    s.name = "ps3d-branch";
    s.ell = l;
    EXPECT_TRUE(check_compatibility(build(s, reference_tet())->sys).compatible) << l;
  }
}

namespace {

std::shared_ptr<Element> highorder(int p) {
  ElementSpec s;
  s.name = "ct-highorder";
  s.p = p;
  return build(s, reference_triangle());
}

// coordinates of the restriction of a top element to face F
std::optional<RatVec> restricted(const FESystem& sys, int T, int F, int k, const RatVec& x) {
  return sys.try_coords_of(F, k, sys.restrict_data(T, F, k, sys.data_of(T, k, x)));
}

bool is_zero_vec(const RatVec& v) {
  for (const auto& q : v)
    if (q != 0) return false;
  return true;
}

}  // namespace

TEST(Extensions, VertexJets) {
  auto el = highorder(4);
  const auto& C = el->sys.cx->cells[el->sys.cx->cells_of_dim(2).front()].carrier;
  const Point V = C->cell[0];
  // (1, 0): lambda^2 alone has slope 2 d lambda at V; the correction gives the
  // cubic Hermite profile lambda^2 (3 - 2 lambda)
  auto a = vertex_jet_extension(C, 0, 0, {Rational(1)}, {Rational(0), Rational(0)});
  PolyForm lam = cell_barycentric(C, 0);
  PolyForm three = constant_form(C, 0, {Rational(3)}, 0);
  EXPECT_TRUE(a.v0 == elevate(wedge(wedge(lam, lam), three - Rational(2) * lam), 3));
  EXPECT_EQ(evaluate(a.v0, V), (RatVec{1}));
  EXPECT_EQ(evaluate(exterior_derivative(a.v0), V), (RatVec{0, 0}));
  // (0, dx^dy) for k = 1
  auto b = vertex_jet_extension(C, 0, 1, {Rational(0), Rational(0)}, {Rational(1)});
  EXPECT_EQ(evaluate(b.v0, V), (RatVec{0, 0}));
  EXPECT_EQ(evaluate(b.v1, V), (RatVec{1}));
  EXPECT_TRUE(elevate(exterior_derivative(b.v0), 2) == elevate(b.v1, 2));
  // random-ish data, every k: jet at V, zero double trace on the opposite edge
  auto opp = simplex_carrier({C->cell[1], C->cell[2]});
  for (int k = 0; k <= 2; ++k) {
    RatVec v0(alt_dim(2, k)), v1(alt_dim(2, k + 1));
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = frac(static_cast<long>(i) + 2, 3);
    for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = frac(-5, static_cast<long>(i) + 2);
    auto e = vertex_jet_extension(C, 0, k, v0, v1);
    EXPECT_EQ(evaluate(e.v0, V), v0) << k;
    if (k < 2) {
      EXPECT_EQ(evaluate(e.v1, V), v1) << k;
      EXPECT_TRUE(elevate(exterior_derivative(e.v0), 2) == elevate(e.v1, 2)) << k;
    }
    EXPECT_TRUE(trace(e.v0, opp).is_zero()) << k;
    EXPECT_TRUE(trace(e.v1, opp).is_zero()) << k;
    for (int w : {1, 2}) EXPECT_TRUE(is_zero_vec(evaluate(e.v0, C->cell[w]))) << k;
  }
}

TEST(Extensions, EdgeBubbles) {
  auto el = highorder(3);
  const auto& sys = el->sys;
  int T = sys.cx->cells_of_dim(2).front();
  const auto& C = sys.cx->cells[T].carrier;
  PolyForm phi = edge_bubble_phi(*el, T, 0, 1, 2);
  PolyForm psi = edge_bubble_psi(*el, T, 0, 1, 2);
  PolyForm l0 = cell_barycentric(C, 0), l1 = cell_barycentric(C, 1), l2 = cell_barycentric(C, 2);
  PolyForm tphi = wedge(wedge(l0, l1), exterior_derivative(l2));
  PolyForm tpsi = wedge(wedge(l0, l1), exterior_derivative(l1));
  for (int E : sys.cx->cells_of_dim(1)) {
    const auto& CE = sys.cx->cells[E].carrier;
    EXPECT_TRUE(trace(phi, CE).is_zero());
    EXPECT_TRUE(trace(elevate(exterior_derivative(phi), 2), CE) == trace(tphi, CE));
    EXPECT_TRUE(trace(psi, CE) == trace(tpsi, CE));
    EXPECT_TRUE(trace(exterior_derivative(psi), CE).is_zero());
  }
}

TEST(Extensions, EdgeCases) {
  for (int p = 3; p <= 6; ++p) {
    auto el = highorder(p);
    const auto& sys = el->sys;
    int T = sys.cx->cells_of_dim(2).front();
    for (int E : sys.cx->cells_of_dim(1))
      for (int k = 0; k <= 2; ++k) {
        RatMatrix Z = zero_boundary_subspace(sys, E, k);
        for (std::size_t j = 0; j < Z.cols(); ++j) {
          RatVec x = edge_extension(*el, T, E, k, Z.col(j));
          for (int F : sys.cx->boundary_of(T)) {
            auto r = restricted(sys, T, F, k, x);
            ASSERT_TRUE(r.has_value());
            if (F == E) EXPECT_EQ(*r, Z.col(j)) << p << " " << k;
            else EXPECT_TRUE(is_zero_vec(*r)) << p << " " << k << " face " << F;
          }
        }
      }
  }
}

TEST(Extensions, SweepWithBespokeExtenders) {
  for (int p : {3, 4, 5}) {
    auto el = highorder(p);
    const auto& sys = el->sys;
    int T = sys.cx->cells_of_dim(2).front();
    auto ext = ct_extender(*el);
    for (int k = 0; k <= 2; ++k) {
      InverseLimit B = inverse_limit_space(sys, sys.cx->boundary_of(T), k);
      for (std::size_t j = 0; j < B.dim(); ++j) {
        RatVec v(B.dim(), Rational(0));
        v[j] = 1;
        RatVec x = extend(sys, T, k, B, v, ext);
        RatVec full = B.basis * v;
        for (int F : B.cells) {
          auto r = restricted(sys, T, F, k, x);
          ASSERT_TRUE(r.has_value());
          for (std::size_t i = 0; i < r->size(); ++i) EXPECT_EQ((*r)[i], full[B.offset.at(F) + i]);
        }
      }
    }
  }
}

TEST(Checks, CloughTocherUnisolvence) {
  for (std::string name : {"ct-full", "ct-minimal", "ct-dg-minimal", "ct-dg"}) {
    ElementSpec s;
    s.name = name;
    auto el = build(s, reference_triangle());
    int T = el->sys.cx->cells_of_dim(2).front();
    for (const auto& c : unisolvence_tests(*el, T)) {
      EXPECT_TRUE(c.square) << c.name << " " << c.rows << "x" << c.cols;
      EXPECT_TRUE(c.injective) << c.name << " rank " << c.rank;
    }
  }
  auto ct = build(ElementSpec{"ct-full"}, reference_triangle());
  auto checks = unisolvence_tests(*ct, ct->sys.cx->cells_of_dim(2).front());
  ASSERT_EQ(checks.size(), 3u);
  EXPECT_EQ(checks[1].rows, 15u);
  EXPECT_EQ(checks[1].rank, 15u);
}

TEST(Checks, PowellSabinUnisolvence) {
  ElementSpec s;
  s.name = "ps3d";
  auto el = build(s, reference_tet());
  int T = el->sys.cx->cells_of_dim(3).front();
  std::vector<std::size_t> ranks;
  for (const auto& c : unisolvence_tests(*el, T)) {
    EXPECT_TRUE(c.square && c.injective) << c.name << " " << c.rows << "x" << c.cols << " rank " << c.rank;
    ranks.push_back(c.rank);
  }
  EXPECT_EQ(ranks, (std::vector<std::size_t>{16, 30, 20, 5}));
  for (int l : {1, 2}) {
    s.name = "ps3d-branch";
    s.ell = l;
    auto eb = build(s, reference_tet());
    for (const auto& c : unisolvence_tests(*eb, T))
      EXPECT_TRUE(c.square && c.injective) << l << " " << c.name << " " << c.rows << "x" << c.cols << " rank " << c.rank;
  }
}

TEST(Checks, ConstantDifferential) {
  ElementSpec s;
  s.name = "ps3d";
  auto el = build(s, reference_tet());
  const auto& mesh = *el->ctx->mesh;
  for (int k = 0; k <= 3; ++k) {
    for (int d = std::max(k, 1); d <= 3; ++d)
      for (const auto& S : mesh.simplices(d)) {
        auto c = duconst_check(*el->ctx, S, k);
        EXPECT_TRUE(c.injective) << c.name << " d=" << d << " " << c.rows << "x" << c.cols << " rank " << c.rank;
      }
  }
}

TEST(Checks, FourSector) {
  auto fs = four_sector();
  EXPECT_EQ(fs.A0.dim(), 8u);
  EXPECT_EQ(fs.A1.dim(), 10u);
  EXPECT_EQ(fs.A2.dim(), 4u);
  EXPECT_TRUE(fs.end_surjective);
  EXPECT_EQ(fs.end_kernel, 3u);
  EXPECT_EQ(fs.d_image, 3u);
  EXPECT_EQ(fs.cohomology, (std::vector<int>{0, 0, 0, 0}));
  // unaligned rays: computed, not asserted
  auto un = four_sector({{Rational(1), Rational(0)}, {Rational(1), Rational(2)}, {Rational(-1), Rational(0)}, {Rational(-1), Rational(-3)}});
  std::cout << "unaligned four-sector dims " << un.A0.dim() << " " << un.A1.dim() << " " << un.A2.dim() << "\n";
}

TEST(Checks, Descriptor) {
  auto el = build(ElementSpec{"ct-full"}, reference_triangle());
  auto dofs = harmonic_dofs(el->sys);
  auto j = element_descriptor(*el, dofs);
  EXPECT_EQ(j["name"], "ct-full");
  EXPECT_EQ(j["pressure"], "continuous");
  EXPECT_EQ(j["faces"].size(), 3u);
  EXPECT_EQ(j["faces"][2]["dims"], (std::vector<std::size_t>{12, 15, 4}));
  std::size_t total = 0;
  for (const auto& s : j["dof_schema"])
    if (s["k"] == 1) total += s["count"].get<std::size_t>() * (s["face_dim"] == 0 ? 3 : s["face_dim"] == 1 ? 3 : 1);
  EXPECT_EQ(total, 15u);
}
