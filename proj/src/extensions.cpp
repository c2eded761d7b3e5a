#include "fesc/elements.hpp"

#include <algorithm>
#include <stdexcept>

namespace fesc {

namespace {

PolyForm scalar_const(const CarrierPtr& C, const Rational& c) { return constant_form(C, 0, {c}, 0); }

PolyForm pow_form(const PolyForm& a, int e) {
  PolyForm r = scalar_const(a.carrier, 1);
  for (int i = 0; i < e; ++i) r = wedge(r, a);
  return r;
}

// univariate polynomials in t, coefficients by increasing power
using Poly1 = std::vector<Rational>;

Poly1 trim(Poly1 a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
  return a;
}

// coefficients of a scalar form on the edge carrier, in the parameter t of
// x = (1 - t) V0 + t V1 (V0, V1 the edge's cell vertices)
Poly1 edge_poly(const PolyForm& s) {
  const auto& C = s.carrier;
  const int deg = s.p;
  RatMatrix V(static_cast<std::size_t>(deg + 1), static_cast<std::size_t>(deg + 1));
  RatVec b(static_cast<std::size_t>(deg + 1));
  for (int i = 0; i <= deg; ++i) {
    Rational t = deg == 0 ? Rational(0) : frac(i, deg);
    Point x(C->cell[0].size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (1 - t) * C->cell[0][j] + t * C->cell[1][j];
    b[i] = evaluate(s, x)[0];
    Rational pw = 1;
    for (int j = 0; j <= deg; ++j, pw *= t) V(i, j) = pw;
  }
  return trim(*solve(V, b));
}

// exact division by t^a (1 - t)^b; throws when not divisible
Poly1 divide(Poly1 f, int a, int b) {
  auto div_lin = [](const Poly1& g, bool at_zero) {
    // at_zero: divide by t; else divide by (1 - t)
    Poly1 q;
    if (g.empty()) return q;
    if (at_zero) {
      if (g[0] != 0) throw std::invalid_argument("edge data does not vanish at the first vertex");
      return Poly1(g.begin() + 1, g.end());
    }
    // g(t) = (1 - t) q(t): synthetic division by (t - 1), then negate
    const std::size_t n = g.size();
    q.assign(n - 1, Rational(0));
    Rational carry = 0;
    for (std::size_t i = n; i-- > 1;) {
      carry = g[i] + carry;
      q[i - 1] = carry;
    }
    if (g[0] + carry != 0) throw std::invalid_argument("edge data does not vanish at the second vertex");
    for (auto& c : q) c = -c;
    return q;
  };
  f = trim(f);
  for (int i = 0; i < a; ++i) f = trim(div_lin(f, true));
  for (int i = 0; i < b; ++i) f = trim(div_lin(f, false));
  return f;
}

Poly1 antiderivative(const Poly1& f) {
  Poly1 g(f.size() + 1, Rational(0));
  for (std::size_t i = 0; i < f.size(); ++i) g[i + 1] = f[i] / static_cast<long>(i + 1);
  return g;
}

Poly1 derivative(const Poly1& f) {
  Poly1 g;
  for (std::size_t i = 1; i < f.size(); ++i) g.push_back(f[i] * static_cast<long>(i));
  return g;
}

// w(lambda) as a scalar form on C
PolyForm lift(const CarrierPtr& C, const Poly1& w, const PolyForm& lambda) {
  PolyForm r = zero_form(C, 0, 0);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] != 0) r = r + w[i] * pow_form(lambda, static_cast<int>(i));
  return r;
}

RatVec diff(const Point& a, const Point& b) {
  RatVec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] - b[i];
  return v;
}

void require_cubic_family(const Element& el) {
  const auto& nm = el.spec.name;
  if (nm != "ct-full" && nm != "ct-highorder")
    throw std::invalid_argument("Clough-Tocher edge extensions need the full C1 family, not " + nm);
}

// u in C1P3 (k = 0) or C0dP2L1 (k = 1) on the split of T, with double trace
// (trace t0, trace t1) on every edge of T
PolyForm solve_boundary(const Element& el, int T, int k, const PolyForm& t0, const PolyForm& t1) {
  const auto& sys = el.sys;
  const auto& C = sys.cx->cells[T].carrier;
  const int p0 = 3 - k, p1 = p0 - 1;
  const FormSpace V = constrained_space(C, p0, k, k == 0 ? Continuity::C1 : Continuity::C0d);
  if (t0.p > p0 || t1.p > p1) throw std::invalid_argument("bubble target above the space degree");
  RatMatrix A(0, V.dim());
  RatVec b;
  for (int E : sys.cx->cells_of_dim(1)) {
    const auto& F = sys.cx->cells[E];
    const auto& tv = sys.cx->cells[T].verts;
    if (!std::includes(tv.begin(), tv.end(), F.verts.begin(), F.verts.end())) continue;
    RatMatrix M0 = trace_map(C, F.carrier, k, p0)->dense() * V.basis;
    RatMatrix M1 = trace_map(C, F.carrier, k + 1, p1)->dense() * d_map(C, k, p0)->dense() * V.basis;
    A = A.rows() == 0 ? M0.vstack(M1) : A.vstack(M0).vstack(M1);
    RatVec r0 = trace(elevate(t0, p0), F.carrier).coef;
    RatVec r1 = trace(elevate(t1, p1), F.carrier).coef;
    b.insert(b.end(), r0.begin(), r0.end());
    b.insert(b.end(), r1.begin(), r1.end());
  }
  auto x = solve(A, b);
  if (!x) throw std::runtime_error("no element of the cell space with the requested boundary traces");
  return V.combine(*x);
}

}  // namespace

AdmissiblePair vertex_jet_extension(const CarrierPtr& C, int vertex, int k, const RatVec& v0, const RatVec& v1) {
  const Point V = C->cell.at(static_cast<std::size_t>(vertex));
  PolyForm lam = cell_barycentric(C, vertex);
  PolyForm dlam = exterior_derivative(lam);
  PolyForm lam2 = wedge(lam, lam);
  PolyForm c0 = constant_form(C, k, v0, 0);
  PolyForm u0 = wedge(lam2, c0);
  PolyForm u1 = zero_form(C, k + 1, 2);
  if (k + 1 <= C->n) {
    PolyForm c1 = constant_form(C, k + 1, v1, 0);
    PolyForm w1 = c1 - Rational(2) * wedge(dlam, c0);
    u1 = Rational(2) * wedge(wedge(lam, dlam), c0);
    PolyForm wX = koszul(w1, V);  // w1 _| X with X = x - V
    Rational s = frac(1, k + 1);
    u0 = u0 + s * wedge(lam2, wX);
    u1 = u1 + (2 * s) * wedge(wedge(lam, dlam), wX) + wedge(lam2, w1);
  }
  return {u0, u1};
}

PolyForm edge_bubble_phi(const Element& el, int T, int a, int b, int c) {
  require_cubic_family(el);
  const auto& C = el.sys.cx->cells[T].carrier;
  PolyForm la = cell_barycentric(C, a), lb = cell_barycentric(C, b), lc = cell_barycentric(C, c);
  PolyForm target = wedge(wedge(la, lb), exterior_derivative(lc));
  return solve_boundary(el, T, 0, zero_form(C, 0, 0), target);
}

PolyForm edge_bubble_psi(const Element& el, int T, int a, int b, int c) {
  require_cubic_family(el);
  (void)c;
  const auto& C = el.sys.cx->cells[T].carrier;
  PolyForm la = cell_barycentric(C, a), lb = cell_barycentric(C, b);
  PolyForm target = wedge(wedge(la, lb), exterior_derivative(lb));
  return solve_boundary(el, T, 1, target, zero_form(C, 2, 0));
}

RatVec edge_extension(const Element& el, int T, int E, int k, const RatVec& r) {
  require_cubic_family(el);
  const auto& sys = el.sys;
  const auto& cx = *sys.cx;
  const auto& C = cx.cells[T].carrier;
  const Simplex& tv = cx.cells[T].verts;
  const Simplex& ev = cx.cells[E].verts;
  auto local = [&](int v) { return static_cast<int>(std::find(tv.begin(), tv.end(), v) - tv.begin()); };
  const int i0 = local(ev[0]), i1 = local(ev[1]), i2 = 3 - i0 - i1;
  const Point V0 = C->cell[i0], V1 = C->cell[i1], V2 = C->cell[i2];
  PolyForm l0 = cell_barycentric(C, i0), l1 = cell_barycentric(C, i1);
  PolyForm dl0 = exterior_derivative(l0), dl1 = exterior_derivative(l1);
  // contraction vectors dual to (d lambda_1, d lambda_2)
  const RatVec e1 = diff(V1, V0), e2 = diff(V2, V0);

  const FaceData data = sys.data_of(E, k, r);
  PolyForm u = zero_form(C, k, sys.spaces[T][k].p0);
  auto residual = [&]() {
    FaceData got = sys.restrict_data(T, E, k, {u});
    FaceData res;
    for (std::size_t i = 0; i < data.size(); ++i) {
      int q = std::max(data[i].p, got[i].p);
      res.push_back(elevate(data[i], q) - elevate(got[i], q));
    }
    return res;
  };
  auto comp = [](const PolyForm& f, const RatVec& x) { return contract(f, x); };
  auto comp2 = [](const PolyForm& f, const RatVec& x, const RatVec& y) { return contract(contract(f, x), y); };

  PolyForm phi, psi;
  if (k == 0) {
    phi = edge_bubble_phi(el, T, i0, i1, i2);
    // v0 = w0 l0^2 l1^2, extended as a polynomial
    Poly1 w0 = divide(edge_poly(residual()[0]), 2, 2);
    u = u + wedge(wedge(wedge(l0, l0), wedge(l1, l1)), lift(C, w0, l1));
    // v1 = w1 l0 l1 d lambda_2
    Poly1 w1 = divide(edge_poly(comp(residual()[1], e2)), 1, 1);
    u = u + wedge(lift(C, w1, l1), phi);
  } else if (k == 1) {
    phi = edge_bubble_phi(el, T, i0, i1, i2);
    psi = edge_bubble_psi(el, T, i0, i1, i2);
    PolyForm dphi = exterior_derivative(phi);
    // w2 from v1 = w2 l0 l1 d lambda_1 ^ d lambda_2
    Poly1 w2 = divide(edge_poly(comp2(residual()[1], e1, e2)), 1, 1);
    u = u + wedge(lift(C, antiderivative(w2), l1), dphi);
    // w1 from the d lambda_2 component of v0; the added form is closed
    Poly1 w1 = divide(edge_poly(comp(residual()[0], e2)), 1, 1);
    u = u + wedge(lift(C, w1, l1), dphi) + wedge(wedge(lift(C, derivative(w1), l1), dl1), phi);
    // w0 from the d lambda_1 component
    Poly1 w0 = divide(edge_poly(comp(residual()[0], e1)), 1, 1);
    u = u + wedge(lift(C, w0, l1), psi);
  } else if (k == 2) {
    psi = edge_bubble_psi(el, T, i0, i1, i2);
    // v0 = w0 l0 l1 d lambda_0 ^ d lambda_1; (e1, e2) evaluates d lambda_0 ^ d lambda_1 to 1
    Poly1 w0 = divide(edge_poly(comp2(residual()[0], e1, e2)), 1, 1);
    u = u + wedge(lift(C, w0, l1), wedge(dl0, psi));
  } else {
    throw std::invalid_argument("edge_extension: k must be 0, 1 or 2");
  }
  for (const auto& f : residual())
    if (!f.is_zero()) throw std::runtime_error("edge_extension: data is not in the zero-boundary space of the edge");
  auto x = sys.try_coords_of(T, k, {u});
  if (!x) throw std::runtime_error("edge_extension: extension left the cell space");
  return *x;
}

FaceExtender ct_extender(const Element& el) {
  const Element* e = &el;
  return [e](int T, int F, int k, const RatVec& r) -> std::optional<RatVec> {
    const auto& sys = e->sys;
    const auto& cell = sys.cx->cells[F];
    if (sys.kinds[k] != RestrictionKind::DoubleTrace) return std::nullopt;
    if (cell.dim == 0) {
      const auto& C = sys.cx->cells[T].carrier;
      const Simplex& tv = sys.cx->cells[T].verts;
      int i = static_cast<int>(std::find(tv.begin(), tv.end(), cell.verts[0]) - tv.begin());
      FaceData d = sys.data_of(F, k, r);
      AdmissiblePair pr = vertex_jet_extension(C, i, k, d[0].coef, d[1].coef);
      // degree 3 (k = 0) fits every space of the family; higher k needs p >= 4
      return sys.try_coords_of(T, k, {pr.v0});
    }
    if (cell.dim == 1 && (e->spec.name == "ct-full" || e->spec.name == "ct-highorder"))
      return edge_extension(*e, T, F, k, r);
    return std::nullopt;
  };
}

}  // namespace fesc
