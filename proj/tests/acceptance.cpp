// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.
#include "fesc/cli.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace fesc;

namespace {

struct Check {
  std::ostringstream why;
  bool ok = true;
  void expect(bool c, const std::string& what) {
    if (!c) {
      if (!ok) why << "; ";
      why << what;
      ok = false;
    }
  }
};

ElementSpec spec(const std::string& name, int p = 0, int ell = -1, int n = 0) {
  ElementSpec s;
  s.name = name;
  s.p = p;
  s.ell = ell;
  s.n = n;
  return s;
}

std::vector<std::size_t> top_dims(const Element& el) {
  const int T = el.sys.cx->cells_of_dim(el.sys.n()).front();
  std::vector<std::size_t> d;
  for (int k = 0; k <= el.sys.n(); ++k) d.push_back(el.sys.dim(T, k));
  return d;
}

std::string str(const std::vector<std::size_t>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

bool all_zero(const std::vector<int>& v) {
  return std::all_of(v.begin(), v.end(), [](int x) { return x == 0; });
}

bool zero_vec(const RatVec& v) {
  return std::all_of(v.begin(), v.end(), [](const Rational& q) { return q == 0; });
}

// compatible, with zero local cohomology on every cell
void expect_exact(Check& c, const FESystem& sys, const std::string& tag) {
  auto rep = check_compatibility(sys);
  c.expect(rep.compatible, tag + " not compatible");
  for (int T : sys.cx->cells_of_dim(sys.n()))
    c.expect(all_zero(check_local_exactness(sys, T)), tag + " local cohomology on cell " + std::to_string(T));
}

void expect_harmonic_dofs(Check& c, const FESystem& sys, const std::string& tag) {
  auto dofs = harmonic_dofs(sys);
  for (int T : sys.cx->cells_of_dim(sys.n()))
    for (int k = 0; k <= sys.n(); ++k) {
      RatMatrix M = dof_matrix(sys, dofs, T, k);
      c.expect(M.rows() == M.cols() && rank(M) == M.cols(), tag + " harmonic DoF matrix k=" + std::to_string(k));
    }
}

std::vector<std::vector<SparsePoly>> cubic_forms(int n, int k) {
  std::vector<std::vector<SparsePoly>> out;
  const std::size_t na = alt_dim(n, k);
  for (const auto& a : monomials(n + 1, 3)) {
    // a[0] is the homogenizing slot, so the rest ranges over degrees <= 3
    SparsePoly m = SparsePoly::constant(n, 1);
    for (int i = 0; i < n; ++i) m = m * SparsePoly::variable(n, i).pow(a[static_cast<std::size_t>(i + 1)]);
    for (std::size_t comp = 0; comp < na; ++comp) {
      std::vector<SparsePoly> f(na, SparsePoly(n));
      f[comp] = m;
      out.push_back(f);
    }
  }
  return out;
}

// ---------------------------------------------------------------- criteria

void clough_tocher(Check& c) {
  auto el = build(spec("ct-full"), reference_triangle());
  c.expect(top_dims(*el) == std::vector<std::size_t>{12, 15, 4}, "dims " + str(top_dims(*el)));
  expect_exact(c, el->sys, "ct-full");
  const int T = el->sys.cx->cells_of_dim(2).front();
  for (const auto& d : unisolvence_tests(*el, T)) c.expect(d.square && d.injective, d.name + " DoFs");
  expect_harmonic_dofs(c, el->sys, "ct-full");
  std::shared_ptr<const Element> cel = el;
  auto dofs = std::make_shared<const DofSet>(harmonic_dofs(el->sys));
  std::vector<GlobalSpace> G;
  for (int k = 0; k <= 2; ++k) G.push_back(global_space(cel, dofs, k));
  for (int k = 0; k < 2; ++k)
    c.expect(commuting_interpolation_check(G[k], G[k + 1], cubic_forms(2, k)), "I(du) != d(Iu), k=" + std::to_string(k));
}

void four_complexes(Check& c) {
  const std::vector<std::pair<std::string, std::vector<std::size_t>>> want{
      {"ct-full", {12, 15, 4}}, {"ct-minimal", {9, 12, 4}}, {"ct-dg", {12, 20, 9}}, {"ct-dg-minimal", {9, 9, 1}}};
  for (const auto& [name, d] : want) {
    auto el = build(spec(name), reference_triangle());
    c.expect(top_dims(*el) == d, name + " dims " + str(top_dims(*el)));
    expect_exact(c, el->sys, name);
  }
}

void high_order(Check& c) {
  for (int p = 3; p <= 6; ++p) {
    const std::string tag = "p=" + std::to_string(p);
    auto el = build(spec("ct-highorder", p), reference_triangle());
    const auto& sys = el->sys;
    auto d = top_dims(*el);
    const std::size_t a0 = static_cast<std::size_t>(3 * p * (p - 1) / 2 + 3), a2 = static_cast<std::size_t>(3 * (p - 2) * (p - 1) / 2 + 1);
    c.expect(d[0] == a0 && d[2] == a2 && d[1] == a0 + a2 - 1, tag + " dims " + str(d));
    const int T = sys.cx->cells_of_dim(2).front();
    const std::vector<std::size_t> ed{static_cast<std::size_t>(2 * p + 1), static_cast<std::size_t>(3 * p - 1),
                                      static_cast<std::size_t>(p - 1)};
    const std::vector<std::size_t> ez{static_cast<std::size_t>(2 * p - 5), static_cast<std::size_t>(3 * p - 7),
                                      static_cast<std::size_t>(p - 3)};
    for (int E : sys.cx->cells_of_dim(1))
      for (int k = 0; k <= 2; ++k) {
        c.expect(sys.dim(E, k) == ed[k], tag + " edge dim k=" + std::to_string(k));
        RatMatrix Z = zero_boundary_subspace(sys, E, k);
        c.expect(Z.cols() == ez[k], tag + " edge zero dim k=" + std::to_string(k));
        // edge extensions: exact reproduction on E, zero on the other faces
        for (std::size_t j = 0; j < Z.cols(); ++j) {
          RatVec x = edge_extension(*el, T, E, k, Z.col(j));
          for (int F : sys.cx->boundary_of(T)) {
            auto r = sys.try_coords_of(F, k, sys.restrict_data(T, F, k, sys.data_of(T, k, x)));
            bool good = r && (F == E ? *r == Z.col(j) : zero_vec(*r));
            c.expect(good, tag + " edge extension k=" + std::to_string(k));
          }
        }
      }
    // vertex jets: prescribed double trace at every vertex, zero at the other vertices
    const auto& C = sys.cx->cells[T].carrier;
    for (int v = 0; v < 3; ++v)
      for (int k = 0; k <= 2; ++k) {
        RatVec v0(alt_dim(2, k)), v1(alt_dim(2, k + 1));
        for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = frac(static_cast<long>(i) + 1 + v, 3);
        for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = frac(-2 - v, static_cast<long>(i) + 2);
        auto e = vertex_jet_extension(C, v, k, v0, v1);
        bool good = evaluate(e.v0, C->cell[v]) == v0 && (k == 2 || evaluate(e.v1, C->cell[v]) == v1);
        std::vector<Point> rest;
        for (int w = 0; w < 3; ++w)
          if (w != v) rest.push_back(C->cell[static_cast<std::size_t>(w)]);
        auto opp = simplex_carrier(rest);
        good = good && trace(e.v0, opp).is_zero() && trace(e.v1, opp).is_zero();
        c.expect(good, tag + " vertex jet v=" + std::to_string(v) + " k=" + std::to_string(k));
      }
    // the bubbles are elements of the space (they throw otherwise) with the stated traces
    PolyForm phi = edge_bubble_phi(*el, T, 0, 1, 2), psi = edge_bubble_psi(*el, T, 0, 1, 2);
    PolyForm l0 = cell_barycentric(C, 0), l1 = cell_barycentric(C, 1), l2 = cell_barycentric(C, 2);
    PolyForm tphi = wedge(wedge(l0, l1), exterior_derivative(l2)), tpsi = wedge(wedge(l0, l1), exterior_derivative(l1));
    for (int E : sys.cx->cells_of_dim(1)) {
      const auto& CE = sys.cx->cells[E].carrier;
      c.expect(trace(phi, CE).is_zero() && trace(elevate(exterior_derivative(phi), 2), CE) == trace(tphi, CE), tag + " Phi traces");
      c.expect(trace(psi, CE) == trace(tpsi, CE) && trace(exterior_derivative(psi), CE).is_zero(), tag + " Psi traces");
    }
    // full boundary sweep with the bespoke extenders
    auto ext = ct_extender(*el);
    for (int k = 0; k <= 2; ++k) {
      InverseLimit B = inverse_limit_space(sys, sys.cx->boundary_of(T), k);
      for (std::size_t j = 0; j < B.dim(); ++j) {
        RatVec v(B.dim(), Rational(0));
        v[j] = 1;
        RatVec x = extend(sys, T, k, B, v, ext);
        RatVec full = B.basis * v;
        for (int F : B.cells) {
          auto r = sys.try_coords_of(F, k, sys.restrict_data(T, F, k, sys.data_of(T, k, x)));
          bool good = r.has_value();
          for (std::size_t i = 0; good && i < r->size(); ++i) good = (*r)[i] == full[B.offset.at(F) + i];
          c.expect(good, tag + " extension sweep k=" + std::to_string(k));
        }
      }
    }
    expect_exact(c, sys, tag);
  }
}

void powell_sabin(Check& c) {
  for (auto mesh : {reference_tet(), tet_pair()}) {
    auto el = build(spec("ps3d"), mesh);
    const int S = el->sys.cx->cells_of_dim(3).front();
    c.expect(top_dims(*el) == std::vector<std::size_t>{16, 30, 20, 5}, "A dims " + str(top_dims(*el)));
    std::vector<std::size_t> kd;
    for (int k = 0; k <= 3; ++k) kd.push_back(el->aux.at("K" + std::to_string(k)).at(S).dim());
    c.expect(kd == std::vector<std::size_t>{1, 15, 15, 5}, "K dims " + str(kd));
    const Simplex& tv = el->sys.cx->cells[S].verts;
    c.expect(c0_space(el->ctx->carrier(1, tv), 2, 1).dim() == 27, "C0P1L2(R1) != 27");
    c.expect(c0_space(el->ctx->carrier(0, tv), 1, 1).dim() == 45, "C0P1L1(R0) != 45");
    for (const auto& d : unisolvence_tests(*el, S)) c.expect(d.injective, d.name + " not full column rank");
    for (int k = 0; k <= 3; ++k) c.expect(duconst_check(*el->ctx, tv, k).injective, "constant-d vertex values k=" + std::to_string(k));
    expect_exact(c, el->sys, mesh->count(3) == 1 ? "tet" : "tet pair");
  }
}

void whitney_branching(Check& c) {
  auto e2 = build(spec("ps3d-branch", 0, 2), reference_tet());
  auto e1 = build(spec("ps3d-branch", 0, 1), reference_tet());
  c.expect(top_dims(*e2)[2] == 16, "ell=2 A2 " + str(top_dims(*e2)));
  c.expect(top_dims(*e1)[1] == 18, "ell=1 A1 " + str(top_dims(*e1)));
  for (auto* el : {e2.get(), e1.get()}) {
    const auto& sys = el->sys;
    const int T = sys.cx->cells_of_dim(3).front();
    const auto& C = sys.cx->cells[T].carrier;
    for (int k = el->spec.ell + 1; k <= 3; ++k) {
      const auto& sp = sys.spaces[T][k];
      FormSpace W = elevate(whitney_space(C, k), sp.p0);
      const std::size_t r = rank(sp.basis.hstack(W.basis));
      c.expect(r == sp.dim() && r == W.dim(), "ell=" + std::to_string(el->spec.ell) + " k=" + std::to_string(k) + " not Whitney");
    }
    expect_exact(c, sys, "ell=" + std::to_string(el->spec.ell));
  }
  for (int n : {2, 3}) {
    auto el = build(spec("ps3d-branch", 0, n - 1, n), reference_simplex(n));
    auto d = top_dims(*el);
    c.expect(d[n - 1] == static_cast<std::size_t>((n + 1) * (n + 1)) && d[n] == 1, "last dims n=" + std::to_string(n) + " " + str(d));
  }
}

void four_sector_check(Check& c) {
  auto fs = four_sector();
  c.expect(fs.A0.dim() == 8 && fs.A1.dim() == 10 && fs.A2.dim() == 4,
           "dims " + str({fs.A0.dim(), fs.A1.dim(), fs.A2.dim()}));
  c.expect(all_zero(fs.cohomology), "cohomology not zero");
  c.expect(fs.end_surjective && fs.end_kernel == 3 && fs.d_image == 3, "end map");
}

void homotopy(Check& c) {
  std::mt19937 g(20261016);
  std::uniform_int_distribution<int> d(-4, 4);
  auto rnd = [&] { return frac(d(g), 1 + std::abs(d(g))); };
  // split carriers with their centers, and an unsplit edge
  struct Case {
    CarrierPtr C;
    Point W;
  };
  std::vector<Case> cases;
  {
    auto tri = std::make_shared<SimplicialComplex>(2, std::vector<Point>{{0, 0}, {3, 0}, {1, 2}}, std::vector<Simplex>{{0, 1, 2}});
    auto rc = refine(tri, 1);
    cases.push_back({carrier_of(rc, {0, 1, 2}), rc.inpoints.at({0, 1, 2})});
    auto tet = std::make_shared<SimplicialComplex>(
        3, std::vector<Point>{{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {1, 1, 3}}, std::vector<Simplex>{{0, 1, 2, 3}});
    auto rc3 = refine(tet, 1);
    cases.push_back({carrier_of(rc3, {0, 1, 2, 3}), rc3.inpoints.at({0, 1, 2, 3})});
    cases.push_back({simplex_carrier({{Rational(0)}, {Rational(2)}}), {frac(1, 2)}});
  }
  int count = 0;
  for (int it = 0; count < 200; ++it) {
    const auto& cs = cases[static_cast<std::size_t>(it) % cases.size()];
    const int n = cs.C->n;
    const int k = it / 3 % (n + 1), p = it / 7 % 5;
    const std::string tag = "n=" + std::to_string(n) + " k=" + std::to_string(k) + " p=" + std::to_string(p);
    PolyForm u = zero_form(cs.C, k, p);
    if (k == 0) {
      auto V = c0_space(cs.C, 0, p);
      RatVec x(V.dim());
      for (auto& q : x) q = rnd();
      u = V.combine(x);
      c.expect(poincare(exterior_derivative(u), cs.W) == u - constant_form(cs.C, 0, evaluate(u, cs.W), p), "p d u = u - u(W) " + tag);
    } else {
      for (auto& q : u.coef) q = rnd();
      PolyForm lhs = poincare(exterior_derivative(u), cs.W) + exterior_derivative(poincare(u, cs.W));
      c.expect(lhs == u, "p d + d p = id " + tag);
      c.expect(poincare(poincare(u, cs.W), cs.W).is_zero(), "p p = 0 " + tag);
      // homogeneous of degree r = p around W
      std::vector<SparsePoly> comps;
      for (std::size_t a = 0; a < alt_dim(n, k); ++a) {
        SparsePoly h(n);
        for (const auto& m : monomials(n, p)) {
          SparsePoly t = SparsePoly::constant(n, rnd());
          for (int i = 0; i < n; ++i) {
            SparsePoly xi = SparsePoly::variable(n, i);
            xi += SparsePoly::constant(n, -cs.W[static_cast<std::size_t>(i)]);
            t = t * xi.pow(m[static_cast<std::size_t>(i)]);
          }
          h += t;
        }
        h.prune();
        comps.push_back(h);
      }
      PolyForm hu = from_cartesian(cs.C, k, comps, p);
      c.expect(poincare(hu, cs.W) == frac(1, k + p) * koszul(hu, cs.W), "p = kappa/(k+r) " + tag);
    }
    c.expect(exterior_derivative(exterior_derivative(u)).is_zero(), "d d = 0 " + tag);
    ++count;
  }
}

void de_rham(Check& c) {
  for (const std::string name : {"ct-full", "ct-dg-minimal"}) {
    auto s = de_rham_check(unit_square(1), spec(name));
    c.expect(s.matches && s.cohomology == std::vector<int>{1, 0, 0}, name + " contractible");
    auto a = de_rham_check(annulus_mesh(), spec(name));
    c.expect(a.matches && a.cohomology == std::vector<int>{1, 1, 0}, name + " annulus");
  }
  auto t = de_rham_check(tet_pair(), spec("ps3d-branch", 0, 2));
  c.expect(t.matches && t.cohomology == std::vector<int>{1, 0, 0, 0}, "ps3d-branch tet pair");
}

void stokes(Check& c) {
  // divergence inclusion for every pair
  for (const std::string name : {"ct-full", "ct-minimal", "ct-dg", "ct-dg-minimal"})
    c.expect(divergence_inclusion_check(unit_square(1), spec(name)), name + " inclusion");
  c.expect(divergence_inclusion_check(reference_triangle(), spec("ct-highorder", 5)), "ct-highorder inclusion");
  c.expect(divergence_inclusion_check(reference_tet(), spec("ps3d")), "ps3d inclusion");
  for (int l : {1, 2}) c.expect(divergence_inclusion_check(tet_pair(), spec("ps3d-branch", 0, l)), "branch inclusion");
  for (const std::string name : {"ct-dg", "ct-dg-minimal"}) {
    auto s = stokes_solve(unit_square(2), spec(name), enclosed_flow_problem());
    c.expect(s.max_div <= 1e-10, name + " enclosed max_div " + std::to_string(s.max_div));
  }
  std::vector<double> err, beta;
  for (int l = 1; l <= 3; ++l) {
    err.push_back(*stokes_solve(unit_square(l), spec("ct-dg-minimal"), manufactured_problem()).velocity_error);
    beta.push_back(inf_sup(unit_square(l), spec("ct-dg-minimal")));
  }
  c.expect(err[0] > err[1] && err[1] > err[2], "manufactured error not decreasing");
  const double lo = *std::min_element(beta.begin(), beta.end()), hi = *std::max_element(beta.begin(), beta.end());
  c.expect(lo > 0 && (hi - lo) / hi <= 0.25, "inf-sup series spread");
  const double broken = p1p0_inf_sup(*unit_square(2));
  c.expect(broken * 10 <= beta[1], "broken pair not 10x smaller");
  std::ostringstream o;
  o << "errors " << err[0] << " " << err[1] << " " << err[2] << ", inf-sup " << beta[0] << " " << beta[1] << " " << beta[2]
    << ", P1/P0 " << broken;
  c.why << o.str();
}

void discrepancy_ledger(Check& c) {
  for (int p : {4, 5}) {
    bool ok = false;
    auto rep = verify_report(spec("ct-highorder", p), nullptr, &ok);
    c.expect(ok, "verify failed for p=" + std::to_string(p));
    const auto& d = rep.at("known_discrepancies");
    bool flagged = d.is_array() && d.size() == 2;
    for (const auto& e : d)
      flagged = flagged && e.contains("stated_value") && e.contains("computed") && e.contains("flag") &&
                e.at("stated_value").get<std::string>() != std::to_string(e.at("computed").get<std::size_t>());
    c.expect(flagged, "discrepancy flag missing for p=" + std::to_string(p));
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"Clough-Tocher complex", clough_tocher},
      {"four low-order complexes", four_complexes},
      {"high-order family p=3..6", high_order},
      {"3D Powell-Sabin complex", powell_sabin},
      {"Whitney branching", whitney_branching},
      {"four-sector sequence", four_sector_check},
      {"homotopy identities", homotopy},
      {"de Rham comparison", de_rham},
      {"Stokes diagnostics", stokes},
      {"known-discrepancy ledger", discrepancy_ledger},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << (c.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " [" << s << " s]";
    const std::string why = c.why.str();
    if (!why.empty()) line << " - " << why;
    std::cout << line.str() << std::endl;
    if (!c.ok) ++failed;
  }
  return failed ? 1 : 0;
}
