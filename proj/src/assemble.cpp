#include "fesc/assemble.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

namespace fesc {

// ------------------------------------------------------------------ meshes

std::shared_ptr<const SimplicialComplex> red_refine(const SimplicialComplex& K) {
  if (K.ambient_dim() != 2 || K.dim() != 2) throw std::invalid_argument("red_refine: triangle meshes only");
  std::vector<Point> v = K.vertices();
  std::map<Simplex, int> mid;
  for (const auto& e : K.simplices(1)) {
    Point m(2);
    for (int i = 0; i < 2; ++i) m[i] = (K.vertex(e[0])[i] + K.vertex(e[1])[i]) / 2;
    mid[e] = static_cast<int>(v.size());
    v.push_back(m);
  }
  std::vector<Simplex> t;
  auto add = [&](Simplex s) {
    std::sort(s.begin(), s.end());
    t.push_back(s);
  };
  for (const auto& s : K.simplices(2)) {
    const int a = s[0], b = s[1], c = s[2];
    const int ab = mid[{a, b}], ac = mid[{a, c}], bc = mid[{b, c}];
    add({a, ab, ac});
    add({b, ab, bc});
    add({c, ac, bc});
    add({ab, ac, bc});
  }
  return std::make_shared<SimplicialComplex>(2, v, t, false);
}

std::shared_ptr<const SimplicialComplex> unit_square(int levels) {
  std::shared_ptr<const SimplicialComplex> K = std::make_shared<SimplicialComplex>(
      2, std::vector<Point>{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, std::vector<Simplex>{{0, 1, 2}, {0, 2, 3}});
  for (int l = 0; l < levels; ++l) K = red_refine(*K);
  return K;
}

std::shared_ptr<const SimplicialComplex> annulus_mesh() {
  std::vector<Point> v{{-2, -2}, {2, -2}, {2, 2}, {-2, 2}, {-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  std::vector<Simplex> t{{0, 1, 4}, {1, 4, 5}, {1, 2, 5}, {2, 5, 6}, {2, 3, 6}, {3, 6, 7}, {0, 3, 7}, {0, 4, 7}};
  return std::make_shared<SimplicialComplex>(2, v, t);
}

std::shared_ptr<const SimplicialComplex> cube_mesh() {
  std::vector<Point> v;
  for (int i = 0; i < 8; ++i) v.push_back({Rational(i & 1), Rational((i >> 1) & 1), Rational((i >> 2) & 1)});
  // paths 0 -> 7 through the axes in every order
  std::vector<Simplex> t;
  std::vector<int> axes{0, 1, 2};
  do {
    int c = 0;
    Simplex s{0};
    for (int a : axes) {
      c |= 1 << a;
      s.push_back(c);
    }
    std::sort(s.begin(), s.end());
    t.push_back(s);
  } while (std::next_permutation(axes.begin(), axes.end()));
  return std::make_shared<SimplicialComplex>(3, v, t);
}

// ------------------------------------------------------------------ proxies

std::vector<SparsePoly> velocity_form(const std::vector<SparsePoly>& v) {
  if (v.size() == 2) return {v[1].scaled(-1), v[0]};
  if (v.size() == 3) return {v[2], v[1].scaled(-1), v[0]};
  throw std::invalid_argument("velocity_form: 2 or 3 components");
}

RatVec velocity_of_form(int n, const RatVec& a) {
  if (n == 2) return {a[1], -a[0]};
  if (n == 3) return {a[2], -a[1], a[0]};
  throw std::invalid_argument("velocity_of_form: n must be 2 or 3");
}

SparsePoly partial(const SparsePoly& f, int axis) {
  SparsePoly r(f.nvars);
  for (const auto& [e, c] : f.terms) {
    const int a = e[static_cast<std::size_t>(axis)];
    if (a == 0) continue;
    auto e2 = e;
    e2[static_cast<std::size_t>(axis)] -= 1;
    r.terms[e2] += c * a;
  }
  r.prune();
  return r;
}

namespace {

double to_d(const Rational& q) { return q.get_d(); }

Eigen::MatrixXd to_eigen(const RatMatrix& M) {
  Eigen::MatrixXd E(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) E(static_cast<long>(i), static_cast<long>(j)) = to_d(M(i, j));
  return E;
}

RatMatrix scaled(RatMatrix M, const Rational& s) {
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) M(i, j) *= s;
  return M;
}

Rational cell_volume(const CarrierPtr& C) { return abs(signed_volume(C->cell)); }

// coefficient blocks at a fixed degree (columns: several forms)
struct Coeffs {
  RatMatrix M;
  int p = 0;
};

RatMatrix l2(const CarrierPtr& C, int k, const Coeffs& a, const Coeffs& b) {
  return a.M.transpose() * gram_matrix(C, k, a.p, b.p) * b.M;
}

std::vector<Coeffs> grad(const CarrierPtr& C, int k, const Coeffs& a) {
  std::vector<Coeffs> out;
  for (int j = 0; j < C->n; ++j) out.push_back({partial_map(C, j, k, a.p)->dense() * a.M, std::max(a.p - 1, 0)});
  return out;
}

RatMatrix h1semi(const CarrierPtr& C, int k, const Coeffs& a, const Coeffs& b) {
  auto ga = grad(C, k, a), gb = grad(C, k, b);
  RatMatrix S = l2(C, k, ga[0], gb[0]);
  for (std::size_t j = 1; j < ga.size(); ++j) S = S + l2(C, k, ga[j], gb[j]);
  return S;
}

Coeffs d_of(const CarrierPtr& C, int k, const Coeffs& a) {
  return {d_map(C, k, a.p)->dense() * a.M, std::max(a.p - 1, 0)};
}

Coeffs single(const PolyForm& u) {
  RatMatrix M(u.coef.size(), 1);
  for (std::size_t i = 0; i < u.coef.size(); ++i) M(i, 0) = u.coef[i];
  return {M, u.p};
}

std::set<Simplex> boundary_simplices(const SimplicialComplex& K) {
  const int n = K.dim();
  std::set<Simplex> out;
  for (const auto& f : K.simplices(n - 1)) {
    if (K.cofaces(f, n).size() != 1) continue;
    for (int d = 0; d < n; ++d)
      for (const auto& s : subcells(f, d)) out.insert(s);
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------------ global spaces

RatVec GlobalSpace::local_coords(std::size_t i, const RatVec& c) const {
  RatVec loc;
  for (auto g : indices[i]) loc.push_back(c[g]);
  RatVec out(local[i].rows(), Rational(0));
  for (std::size_t r = 0; r < local[i].rows(); ++r)
    for (std::size_t j = 0; j < loc.size(); ++j)
      if (sgn(loc[j]) != 0) out[r] += local[i](r, j) * loc[j];
  return out;
}

std::vector<double> GlobalSpace::local_coords(std::size_t i, const std::vector<double>& c) const {
  std::vector<double> out(local[i].rows(), 0.0);
  for (std::size_t r = 0; r < local[i].rows(); ++r)
    for (std::size_t j = 0; j < indices[i].size(); ++j) out[r] += to_d(local[i](r, j)) * c[indices[i][j]];
  return out;
}

GlobalSpace global_space(std::shared_ptr<const Element> el, std::shared_ptr<const DofSet> dofs, int k) {
  GlobalSpace G;
  G.el = el;
  G.dofs = dofs;
  G.k = k;
  const auto& sys = el->sys;
  const auto& cx = *sys.cx;
  if (k < 0 || k > sys.n()) throw std::invalid_argument("global_space: degree out of range");
  const auto bnd = boundary_simplices(*el->ctx->mesh);
  G.offset.resize(cx.cells.size());
  for (std::size_t c = 0; c < cx.cells.size(); ++c) {
    G.offset[c] = G.dim;
    const std::size_t m = dofs->count(static_cast<int>(c), k);
    const bool b = bnd.count(cx.cells[c].verts) > 0;
    for (std::size_t i = 0; i < m; ++i) G.on_boundary.push_back(b);
    G.dim += m;
  }
  G.tops = cx.cells_of_dim(sys.n());
  G.local.resize(G.tops.size());
  G.indices.resize(G.tops.size());
  parallel_for(G.tops.size(), [&](std::size_t i) {
    const int T = G.tops[i];
    RatMatrix Phi = dof_matrix(sys, *dofs, T, k);
    if (Phi.rows() != Phi.cols() || rank(Phi) != Phi.cols())
      throw std::runtime_error("global_space: DoFs not unisolvent on cell " + std::to_string(T));
    G.local[i] = inverse(Phi);
    for (int F : cx.faces_of(T))
      for (std::size_t j = 0; j < dofs->count(F, k); ++j) G.indices[i].push_back(G.offset[F] + j);
  });
  return G;
}

GlobalSpace global_space(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec, int k) {
  std::shared_ptr<const Element> el = build(spec, mesh);
  auto dofs = std::make_shared<const DofSet>(harmonic_dofs(el->sys));
  return global_space(el, dofs, k);
}

RatVec interpolate_global(const GlobalSpace& G, const CellForm& u) {
  const auto& sys = G.sys();
  const auto& cx = *sys.cx;
  RatVec out(G.dim, Rational(0));
  std::vector<bool> done(cx.cells.size(), false);
  for (int T : G.tops) {
    PolyForm uT = u(cx.cells[T].carrier);
    for (int F : cx.faces_of(T)) {
      if (done[F]) continue;
      done[F] = true;
      const auto& fs = G.dofs->functionals[F][G.k];
      if (fs.empty()) continue;
      FaceData d = F == T ? FaceData{uT} : sys.restrict_data(T, F, G.k, FaceData{uT});
      for (std::size_t i = 0; i < fs.size(); ++i) out[G.offset[F] + i] = apply_functional(sys, fs[i], d);
    }
  }
  return out;
}

RatMatrix global_differential(const GlobalSpace& G0, const GlobalSpace& G1) {
  if (G1.k != G0.k + 1 || G0.el != G1.el) throw std::invalid_argument("global_differential: spaces do not match");
  const auto& sys = G0.sys();
  RatMatrix D(G1.dim, G0.dim);
  RatMatrix set(G1.dim, G0.dim);  // 1 where written
  for (std::size_t i = 0; i < G0.tops.size(); ++i) {
    const int T = G0.tops[i];
    RatMatrix L = dof_matrix(sys, *G1.dofs, T, G1.k) * sys.differential(T, G0.k) * G0.local[i];
    for (std::size_t r = 0; r < L.rows(); ++r)
      for (std::size_t c = 0; c < L.cols(); ++c) {
        const auto gr = G1.indices[i][r], gc = G0.indices[i][c];
        if (set(gr, gc) != 0 && D(gr, gc) != L(r, c))
          throw std::runtime_error("global_differential: cells disagree on a shared DoF");
        D(gr, gc) = L(r, c);
        set(gr, gc) = 1;
      }
  }
  return D;
}

DeRhamReport de_rham_check(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec) {
  std::shared_ptr<const Element> el = build(spec, mesh);
  auto dofs = std::make_shared<const DofSet>(harmonic_dofs(el->sys));
  const int n = el->sys.n();
  std::vector<GlobalSpace> G;
  for (int k = 0; k <= n; ++k) G.push_back(global_space(el, dofs, k));
  DeRhamReport r;
  for (int k = 0; k <= n; ++k) {
    r.dims.push_back(G[k].dim);
    r.ranks.push_back(k < n ? rank(global_differential(G[k], G[k + 1])) : 0);
  }
  for (int k = 0; k <= n; ++k)
    r.cohomology.push_back(static_cast<int>(r.dims[k]) - static_cast<int>(r.ranks[k]) -
                           (k ? static_cast<int>(r.ranks[k - 1]) : 0));
  r.cellular = cellular_cohomology(*mesh);
  r.cellular.resize(static_cast<std::size_t>(n + 1), 0);
  r.matches = r.cohomology == r.cellular;
  return r;
}

nlohmann::json to_json(const DeRhamReport& r) {
  return {{"dims", r.dims}, {"ranks", r.ranks}, {"cohomology", r.cohomology}, {"cellular", r.cellular},
          {"matches", r.matches}};
}

bool commuting_interpolation_check(const GlobalSpace& G0, const GlobalSpace& G1,
                                   const std::vector<std::vector<SparsePoly>>& forms) {
  RatMatrix D = global_differential(G0, G1);
  for (const auto& f : forms) {
    auto u = [&](const CarrierPtr& C) { return from_cartesian(C, G0.k, f); };
    auto du = [&](const CarrierPtr& C) { return exterior_derivative(from_cartesian(C, G0.k, f)); };
    RatVec a = interpolate_global(G0, u), b = interpolate_global(G1, du);
    for (std::size_t i = 0; i < D.rows(); ++i) {
      Rational s = 0;
      for (std::size_t j = 0; j < D.cols(); ++j)
        if (sgn(D(i, j)) != 0) s += D(i, j) * a[j];
      if (s != b[i]) return false;
    }
  }
  return true;
}

bool divergence_inclusion_check(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec,
                                std::size_t* image_rank) {
  std::shared_ptr<const Element> el = build(spec, mesh);
  auto dofs = std::make_shared<const DofSet>(harmonic_dofs(el->sys));
  const auto& sys = el->sys;
  const int n = sys.n();
  for (int T : sys.cx->cells_of_dim(n)) {
    const auto& sp = sys.spaces[T][n - 1];
    for (std::size_t j = 0; j < sp.dim(); ++j) {
      RatVec e(sp.dim(), Rational(0));
      e[j] = 1;
      PolyForm du = exterior_derivative(sys.data_of(T, n - 1, e)[0]);
      if (!sys.try_coords_of(T, n, {du})) return false;
    }
  }
  auto V = global_space(el, dofs, n - 1), Q = global_space(el, dofs, n);
  RatMatrix D = global_differential(V, Q);  // throws when the cells disagree
  if (image_rank) *image_rank = rank(D);
  return true;
}

// ------------------------------------------------------------------ Stokes

StokesProblem manufactured_problem() {
  const int n = 2;
  auto x = SparsePoly::variable(n, 0), y = SparsePoly::variable(n, 1);
  auto one = SparsePoly::constant(n, 1);
  SparsePoly omx = one;
  omx += x.scaled(-1);
  SparsePoly omy = one;
  omy += y.scaled(-1);
  SparsePoly psi = x.pow(2) * omx.pow(2) * y.pow(2) * omy.pow(2);
  std::vector<SparsePoly> u{partial(psi, 1), partial(psi, 0).scaled(-1)};
  SparsePoly p = x.pow(3);
  p += SparsePoly::constant(n, frac(-1, 4));
  StokesProblem pr;
  for (int c = 0; c < n; ++c) {
    SparsePoly f(n);
    for (int j = 0; j < n; ++j) f += partial(partial(u[c], j), j).scaled(-1);
    f += partial(p, c);
    f.prune();
    pr.force.push_back(f);
  }
  pr.exact_velocity = u;
  pr.exact_pressure = p;
  return pr;
}

StokesProblem enclosed_flow_problem(int n) {
  auto x = SparsePoly::variable(n, 0), y = SparsePoly::variable(n, 1);
  auto h = SparsePoly::constant(n, frac(-1, 2));
  SparsePoly fx = y, fy = x.scaled(-1);
  fx += h;
  fy += h.scaled(-1);
  fx.prune();
  fy.prune();
  // rotational part drives a vortex; the gradient part is absorbed by the pressure
  fx += x.pow(2).scaled(3);
  StokesProblem pr;
  pr.force = {fx, fy};
  if (n == 3) pr.force.push_back(SparsePoly(n));
  return pr;
}

namespace {

struct LocalOps {
  RatMatrix A, B, M;  // velocity stiffness, divergence pairing (pressure x velocity), pressure mass
  RatMatrix F;        // load (column)
  RatMatrix mean;     // pressure integrals (column)
};

struct PairData {
  std::shared_ptr<const Element> el;
  std::shared_ptr<const DofSet> dofs;
  std::shared_ptr<GlobalSpace> V, Q;
  bool continuous = false;
};

PairData make_pair(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec) {
  PairData P;
  P.el = build(spec, mesh);
  const int n = P.el->sys.n();
  if (n < 2) throw std::invalid_argument("Stokes: n >= 2 required");
  P.dofs = std::make_shared<const DofSet>(harmonic_dofs(P.el->sys));
  P.V = std::make_shared<GlobalSpace>(global_space(P.el, P.dofs, n - 1));
  P.Q = std::make_shared<GlobalSpace>(global_space(P.el, P.dofs, n));
  P.continuous = pressure_continuity(P.el->spec) == "continuous";
  return P;
}

// cell matrices in the local dual bases; `norms` selects the inf-sup variant
LocalOps local_ops(const PairData& P, std::size_t i, const std::vector<SparsePoly>* force, bool infsup) {
  const auto& sys = P.el->sys;
  const int n = sys.n(), T = P.V->tops[i];
  const auto& C = sys.cx->cells[T].carrier;
  const Rational vol = cell_volume(C);
  const auto& sv = sys.spaces[T][n - 1];
  const auto& sq = sys.spaces[T][n];
  Coeffs v{sv.basis, sv.p0}, q{sq.basis, sq.p0};
  Coeffs dv = d_of(C, n - 1, v);
  LocalOps o;
  o.A = h1semi(C, n - 1, v, v);
  o.B = l2(C, n, q, dv);
  o.M = l2(C, n, q, q);
  if (infsup && P.continuous) {
    o.A = o.A + h1semi(C, n, dv, dv);
    o.B = o.B + h1semi(C, n, q, dv);
    o.M = o.M + h1semi(C, n, q, q);
  }
  o.mean = l2(C, n, q, single(constant_form(C, n, {Rational(1)}, 0)));
  const RatMatrix& Lv = P.V->local[i];
  const RatMatrix& Lq = P.Q->local[i];
  o.A = scaled(Lv.transpose() * o.A * Lv, vol);
  o.B = scaled(Lq.transpose() * o.B * Lv, vol);
  o.M = scaled(Lq.transpose() * o.M * Lq, vol);
  o.mean = scaled(Lq.transpose() * o.mean, vol);
  if (force) o.F = scaled(Lv.transpose() * l2(C, n - 1, v, single(from_cartesian(C, n - 1, velocity_form(*force)))), vol);
  return o;
}

struct Assembled {
  Eigen::MatrixXd A, B, M;
  Eigen::VectorXd F, mean;
};

Assembled assemble(const PairData& P, const std::vector<SparsePoly>* force, bool infsup) {
  const std::size_t nt = P.V->tops.size();
  std::vector<LocalOps> ops(nt);
  parallel_for(nt, [&](std::size_t i) { ops[i] = local_ops(P, i, force, infsup); });
  const long nv = static_cast<long>(P.V->dim), nq = static_cast<long>(P.Q->dim);
  Assembled a;
  a.A = Eigen::MatrixXd::Zero(nv, nv);
  a.B = Eigen::MatrixXd::Zero(nq, nv);
  a.M = Eigen::MatrixXd::Zero(nq, nq);
  a.F = Eigen::VectorXd::Zero(nv);
  a.mean = Eigen::VectorXd::Zero(nq);
  // ordered reduction
  for (std::size_t i = 0; i < nt; ++i) {
    const auto& iv = P.V->indices[i];
    const auto& iq = P.Q->indices[i];
    Eigen::MatrixXd A = to_eigen(ops[i].A), B = to_eigen(ops[i].B), M = to_eigen(ops[i].M);
    for (std::size_t r = 0; r < iv.size(); ++r) {
      for (std::size_t c = 0; c < iv.size(); ++c) a.A(static_cast<long>(iv[r]), static_cast<long>(iv[c])) += A(r, c);
      if (force) a.F(static_cast<long>(iv[r])) += to_d(ops[i].F(r, 0));
    }
    for (std::size_t r = 0; r < iq.size(); ++r) {
      for (std::size_t c = 0; c < iv.size(); ++c) a.B(static_cast<long>(iq[r]), static_cast<long>(iv[c])) += B(r, c);
      for (std::size_t c = 0; c < iq.size(); ++c) a.M(static_cast<long>(iq[r]), static_cast<long>(iq[c])) += M(r, c);
      a.mean(static_cast<long>(iq[r])) += to_d(ops[i].mean(r, 0));
    }
  }
  return a;
}

// Dirichlet reduction: the velocity is ug + P w. Interior DoFs are free; the
// boundary DoFs move only within the kernel of the facet traces, so DoFs the
// boundary data does not see (du at flat boundary vertices, ...) stay free.
struct Reduced {
  Eigen::MatrixXd P;
  Eigen::VectorXd ug;
  int expected_kernel = 1;  // pressure modes with B^T q = 0: the constant only
};

Reduced reduce(const PairData& Pd, const std::optional<std::vector<SparsePoly>>& boundary) {
  const GlobalSpace& V = *Pd.V;
  const auto& sys = Pd.el->sys;
  const auto& mesh = *Pd.el->ctx->mesh;
  const int n = sys.n();
  Reduced r;
  r.ug = Eigen::VectorXd::Zero(static_cast<long>(V.dim));
  if (boundary) {
    const auto bf = velocity_form(*boundary);
    RatVec gi = interpolate_global(V, [&](const CarrierPtr& C) { return from_cartesian(C, n - 1, bf); });
    for (std::size_t i = 0; i < V.dim; ++i)
      if (V.on_boundary[i]) r.ug(static_cast<long>(i)) = to_d(gi[i]);
  }
  std::vector<long> I, Bd;
  std::map<std::size_t, std::size_t> bpos;
  for (std::size_t i = 0; i < V.dim; ++i) {
    if (V.on_boundary[i]) {
      bpos[i] = Bd.size();
      Bd.push_back(static_cast<long>(i));
    } else {
      I.push_back(static_cast<long>(i));
    }
  }
  std::map<int, std::size_t> top_of;
  for (std::size_t i = 0; i < V.tops.size(); ++i) top_of[V.tops[i]] = i;
  RatMatrix R(0, Bd.size());
  for (const auto& f : mesh.simplices(n - 1)) {
    auto cof = mesh.cofaces(f, n);
    if (cof.size() != 1) continue;
    const int F = sys.cx->find(f), T = sys.cx->find(cof[0]);
    const std::size_t i = top_of.at(T);
    const auto& sp = sys.spaces[T][n - 1];
    const auto& CT = sys.cx->cells[T].carrier;
    RatMatrix L = trace_map(CT, sys.cx->cells[F].carrier, n - 1, sp.p0)->dense() * sp.basis * V.local[i];
    for (std::size_t row = 0; row < L.rows(); ++row) {
      RatVec rr(Bd.size(), Rational(0));
      bool any = false;
      for (std::size_t c = 0; c < L.cols(); ++c) {
        if (sgn(L(row, c)) == 0) continue;
        auto it = bpos.find(V.indices[i][c]);
        if (it == bpos.end()) throw std::runtime_error("stokes: facet trace depends on an interior DoF");
        rr[it->second] = L(row, c);
        any = true;
      }
      if (any) R.push_row(rr);
    }
  }
  RatMatrix N = R.rows() ? nullspace(R) : RatMatrix::identity(Bd.size());
  const long ni = static_cast<long>(I.size()), nz = static_cast<long>(N.cols());
  r.P = Eigen::MatrixXd::Zero(static_cast<long>(V.dim), ni + nz);
  for (long c = 0; c < ni; ++c) r.P(I[c], c) = 1;
  for (std::size_t b = 0; b < Bd.size(); ++b)
    for (long c = 0; c < nz; ++c) r.P(Bd[b], ni + c) = to_d(N(b, static_cast<std::size_t>(c)));
  return r;
}

// basis of {q : B^T q = 0} (columns), numerically
Eigen::MatrixXd pressure_kernel(const Eigen::MatrixXd& B) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  const double mx = sv.size() ? sv(0) : 0.0;
  long rk = 0;
  for (long i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-9 * mx) ++rk;
  return svd.matrixU().rightCols(B.rows() - rk);
}

// barycentric lattice of degree q on the piece
std::vector<Point> lattice(const std::vector<Point>& pts, int q) {
  std::vector<Point> out;
  for (const auto& a : monomials(static_cast<int>(pts.size()), q)) {
    Point x(pts[0].size(), Rational(0));
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += frac(a[i], q) * pts[i][j];
    out.push_back(x);
  }
  return out;
}

PolyForm local_form(const GlobalSpace& G, std::size_t i, const std::vector<double>& c) {
  const auto& sys = G.sys();
  auto loc = G.local_coords(i, c);
  RatVec x;
  for (double d : loc) x.push_back(Rational(d));
  return sys.data_of(G.tops[i], G.k, x)[0];
}

}  // namespace

StokesSolution stokes_solve(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec,
                            const StokesProblem& prob) {
  PairData P = make_pair(mesh, spec);
  const int n = P.el->sys.n();
  if (static_cast<int>(prob.force.size()) != n) throw std::invalid_argument("stokes_solve: force needs n components");
  Assembled a = assemble(P, &prob.force, false);
  const GlobalSpace& V = *P.V;
  const long nv = static_cast<long>(V.dim), nq = static_cast<long>(P.Q->dim);

  Reduced red = reduce(P, prob.boundary);
  const Eigen::MatrixXd Ar = red.P.transpose() * a.A * red.P, Br = a.B * red.P;
  Eigen::MatrixXd Z = pressure_kernel(Br);
  if (Z.cols() != red.expected_kernel)
    throw std::runtime_error("stokes_solve: pressure kernel of dimension " + std::to_string(Z.cols()) + ", expected " +
                             std::to_string(red.expected_kernel));
  Z = a.M * Z;  // pressure M-orthogonal to the kernel
  const long nf = Ar.rows(), nz = Z.cols();
  const long N = nf + nq + nz;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  K.topLeftCorner(nf, nf) = Ar;
  K.block(0, nf, nf, nq) = -Br.transpose();
  K.block(nf, 0, nq, nf) = -Br;
  K.block(nf, nf + nq, nq, nz) = Z;
  K.block(nf + nq, nf, nz, nq) = Z.transpose();
  rhs.head(nf) = red.P.transpose() * (a.F - a.A * red.ug);
  rhs.segment(nf, nq) = a.B * red.ug;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw std::runtime_error("stokes_solve: singular saddle-point system");
  Eigen::VectorXd sol = lu.solve(rhs);

  StokesSolution s;
  s.V = P.V;
  s.Q = P.Q;
  s.pressure_kernel = static_cast<std::size_t>(nz);
  Eigen::VectorXd u = red.ug + red.P * sol.head(nf);
  Eigen::VectorXd p = sol.segment(nf, nq);
  s.velocity.assign(u.data(), u.data() + nv);
  s.pressure.assign(p.data(), p.data() + nq);

  Eigen::VectorXd mom = red.P.transpose() * (a.A * u - a.B.transpose() * p - a.F);
  Eigen::VectorXd Fr = red.P.transpose() * a.F;
  const double mr = mom.size() ? mom.cwiseAbs().maxCoeff() : 0.0;
  const double fn = Fr.size() ? Fr.cwiseAbs().maxCoeff() : 0.0;
  s.momentum_residual = fn > 0 ? mr / fn : mr;
  Eigen::VectorXd mass = a.B * u;
  s.mass_residual = mass.cwiseAbs().maxCoeff() / std::max(1.0, a.B.cwiseAbs().maxCoeff() * u.cwiseAbs().maxCoeff());

  // pointwise divergence and the velocity error, per cell
  const auto& sys = P.el->sys;
  std::vector<double> divmax(V.tops.size(), 0.0), err2(V.tops.size(), 0.0), nrm2(V.tops.size(), 0.0);
  parallel_for(V.tops.size(), [&](std::size_t i) {
    const int T = V.tops[i];
    const auto& C = sys.cx->cells[T].carrier;
    PolyForm uh = local_form(V, i, s.velocity);
    PolyForm du = exterior_derivative(uh);
    const int q = std::max(1, uh.p);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
      for (const auto& x : lattice(C->piece_points(pc), q))
        divmax[i] = std::max(divmax[i], std::abs(to_d(evaluate_on_piece(du, pc, x)[0])));
    if (prob.exact_velocity) {
      PolyForm ue = from_cartesian(C, n - 1, velocity_form(*prob.exact_velocity));
      const int qe = std::max(uh.p, ue.p);
      Coeffs ce = single(ue), cd = single(elevate(uh, qe) - elevate(ue, qe));
      const Rational vol = cell_volume(C);
      const double ee = to_d(l2(C, n - 1, ce, ce)(0, 0) * vol);
      err2[i] = to_d(l2(C, n - 1, cd, cd)(0, 0) * vol);
      nrm2[i] = ee;
    }
  });
  for (double d : divmax) s.max_div = std::max(s.max_div, d);
  if (prob.exact_velocity) {
    double e = 0, m = 0;
    for (std::size_t i = 0; i < err2.size(); ++i) {
      e += err2[i];
      m += nrm2[i];
    }
    s.velocity_error = std::sqrt(std::max(e, 0.0));
    s.velocity_norm = std::sqrt(m);
  }
  return s;
}

nlohmann::json to_json(const StokesSolution& s) {
  nlohmann::json j;
  j["element"] = s.V->el->spec.name;
  j["velocity_dofs"] = s.V->dim;
  j["pressure_dofs"] = s.Q->dim;
  j["velocity"] = s.velocity;
  j["pressure"] = s.pressure;
  j["momentum_residual"] = s.momentum_residual;
  j["mass_residual"] = s.mass_residual;
  j["max_div"] = s.max_div;
  j["pressure_kernel"] = s.pressure_kernel;
  if (s.velocity_error) j["velocity_l2_error"] = *s.velocity_error;
  if (s.velocity_norm) j["velocity_l2_norm"] = *s.velocity_norm;
  return j;
}

void write_field_table(std::ostream& out, const StokesSolution& s) {
  const auto& V = *s.V;
  const auto& Q = *s.Q;
  const auto& sys = V.sys();
  const int n = sys.n();
  out << (n == 2 ? "x y u1 u2 p div\n" : "x y z u1 u2 u3 p div\n");
  for (std::size_t i = 0; i < V.tops.size(); ++i) {
    const auto& C = sys.cx->cells[V.tops[i]].carrier;
    PolyForm uh = local_form(V, i, s.velocity);
    PolyForm ph = local_form(Q, i, s.pressure);
    PolyForm du = exterior_derivative(uh);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
      auto pts = C->piece_points(pc);
      Point c(pts[0].size(), Rational(0));
      for (const auto& x : pts)
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += x[j] / static_cast<long>(pts.size());
      pts.push_back(c);
      for (const auto& x : pts) {
        for (const auto& xi : x) out << to_d(xi) << " ";
        for (const auto& vi : velocity_of_form(n, evaluate_on_piece(uh, pc, x))) out << to_d(vi) << " ";
        out << to_d(evaluate_on_piece(ph, pc, x)[0]) << " " << to_d(evaluate_on_piece(du, pc, x)[0]) << "\n";
      }
    }
  }
}

double inf_sup(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec) {
  PairData P = make_pair(mesh, spec);
  Assembled a = assemble(P, nullptr, true);
  Reduced red = reduce(P, std::nullopt);
  const Eigen::MatrixXd Ar = red.P.transpose() * a.A * red.P, Br = a.B * red.P;
  auto dense = [](const Eigen::MatrixXd& E) {
    DenseF D(static_cast<std::size_t>(E.rows()), static_cast<std::size_t>(E.cols()));
    for (long i = 0; i < E.rows(); ++i)
      for (long j = 0; j < E.cols(); ++j) D(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = E(i, j);
    return D;
  };
  return smallest_generalized_singular_value(dense(Ar), dense(Br), dense(a.M), red.expected_kernel);
}

double p1p0_inf_sup(const SimplicialComplex& mesh) {
  const int n = mesh.ambient_dim();
  const auto bnd = boundary_simplices(mesh);
  std::vector<long> vid(mesh.num_vertices(), -1);
  long nv = 0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (!bnd.count(Simplex{static_cast<int>(v)})) vid[v] = nv++;
  const auto& tops = mesh.simplices(n);
  const std::size_t N = static_cast<std::size_t>(nv * n), nq = tops.size();
  DenseF A(N, N), B(nq, N), M(nq, nq);
  for (std::size_t t = 0; t < tops.size(); ++t) {
    auto pts = mesh.points(tops[t]);
    const double vol = std::abs(to_d(signed_volume(pts)));
    // gradients of the barycentric coordinates: rows of the inverse edge matrix
    RatMatrix E(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) E(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = pts[i + 1][j] - pts[0][j];
    auto Ei = inverse(E);
    std::vector<std::vector<double>> g(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        g[i + 1][j] = to_d(Ei(static_cast<std::size_t>(j), static_cast<std::size_t>(i)));
        g[0][j] -= g[i + 1][j];
      }
    M(t, t) = vol;
    for (int a = 0; a <= n; ++a) {
      const long ia = vid[tops[t][a]];
      if (ia < 0) continue;
      for (int c = 0; c < n; ++c) B(t, static_cast<std::size_t>(ia * n + c)) += vol * g[a][c];
      for (int b = 0; b <= n; ++b) {
        const long ib = vid[tops[t][b]];
        if (ib < 0) continue;
        double s = 0;
        for (int j = 0; j < n; ++j) s += g[a][j] * g[b][j];
        for (int c = 0; c < n; ++c) A(static_cast<std::size_t>(ia * n + c), static_cast<std::size_t>(ib * n + c)) += vol * s;
      }
    }
  }
  return smallest_generalized_singular_value(A, B, M, 1);
}

}  // namespace fesc
