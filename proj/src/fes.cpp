#include "fesc/fes.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

namespace fesc {

std::string to_string(RestrictionKind k) {
  switch (k) {
    case RestrictionKind::Pullback: return "pullback";
    case RestrictionKind::Trace: return "trace";
    case RestrictionKind::DoubleTrace: return "double-trace";
    case RestrictionKind::Interior: return "interior";
  }
  return "?";
}

// ------------------------------------------------------------------ threads

unsigned fesc_threads() {
  if (const char* s = std::getenv("FESC_THREADS")) {
    int v = std::atoi(s);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  unsigned t = std::min<std::size_t>(fesc_threads(), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex emu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next++;
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(emu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// ------------------------------------------------------------------ cell complex

int CellComplex::add_cell(int dim, Simplex verts, CarrierPtr C, std::vector<std::pair<int, int>> f) {
  int id = static_cast<int>(cells.size());
  index_[verts] = id;
  cells.push_back({dim, std::move(verts), std::move(C)});
  facets.push_back(std::move(f));
  return id;
}

void CellComplex::wire_simplicial_facets() {
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!facets[c].empty() || cells[c].dim == 0) continue;
    for (const auto& f : subcells(cells[c].verts, cells[c].dim - 1)) {
      int id = find(f);
      if (id < 0) throw std::invalid_argument("cell complex not closed under faces");
      facets[c].push_back({id, relative_orientation(cells[c].verts, f)});
    }
  }
}

CellComplex CellComplex::from_refinement(const RefinedComplex& rc) {
  std::vector<Simplex> all;
  for (int d = 0; d <= rc.base->dim(); ++d)
    for (const auto& s : rc.base->simplices(d)) all.push_back(s);
  return from_refinement(rc, all);
}

CellComplex CellComplex::from_refinement(const RefinedComplex& rc, const std::vector<Simplex>& keep) {
  CellComplex cx;
  cx.n = rc.base->ambient_dim();
  auto verts = std::make_shared<const std::vector<Point>>(rc.refined->vertices());
  std::vector<Simplex> sorted = keep;
  std::sort(sorted.begin(), sorted.end(), [](const Simplex& a, const Simplex& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const auto& s : sorted)
    cx.add_cell(static_cast<int>(s.size()) - 1, s, make_carrier(verts, rc.pieces(s), rc.base->points(s)));
  cx.wire_simplicial_facets();
  return cx;
}

int CellComplex::find(const Simplex& verts) const {
  auto it = index_.find(verts);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> CellComplex::faces_of(int c) const {
  std::set<int> seen{c};
  std::vector<int> stack{c};
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (auto [f, o] : facets[x])
      if (seen.insert(f).second) stack.push_back(f);
  }
  std::vector<int> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    return cells[a].dim != cells[b].dim ? cells[a].dim < cells[b].dim : a < b;
  });
  return out;
}

std::vector<int> CellComplex::boundary_of(int c) const {
  auto f = faces_of(c);
  f.erase(std::remove(f.begin(), f.end(), c), f.end());
  return f;
}

std::vector<int> CellComplex::closure(const std::vector<int>& gens) const {
  std::set<int> all;
  for (int g : gens)
    for (int f : faces_of(g)) all.insert(f);
  std::vector<int> out(all.begin(), all.end());
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    return cells[a].dim != cells[b].dim ? cells[a].dim < cells[b].dim : a < b;
  });
  return out;
}

std::vector<int> CellComplex::cells_of_dim(int d) const {
  std::vector<int> out;
  for (std::size_t c = 0; c < cells.size(); ++c)
    if (cells[c].dim == d) out.push_back(static_cast<int>(c));
  return out;
}

int CellComplex::top_dim() const {
  int d = 0;
  for (const auto& c : cells) d = std::max(d, c.dim);
  return d;
}

// ------------------------------------------------------------------ data

namespace {

PolyForm form_from(const CarrierPtr& C, int k, int p, const RatVec& v, std::size_t off) {
  PolyForm u = zero_form(C, k, p);
  for (std::size_t i = 0; i < u.coef.size(); ++i) u.coef[i] = v[off + i];
  return u;
}

FaceData zero_data(const FESystem& sys, int cell, int k) {
  const auto& C = sys.cx->cells[cell].carrier;
  if (k > sys.n()) return {};
  const CellSpace& sp = sys.spaces[cell][k];
  if (sp.pair) return {zero_form(C, k, sp.p0), zero_form(C, k + 1, sp.p1)};
  return {zero_form(C, k, sp.p0)};
}

// basis of A^k(T) with components elevated to (q0, q1)
RatMatrix basis_at(const FESystem& sys, int cell, int k, int q0, int q1) {
  const CellSpace& sp = sys.spaces[cell][k];
  const auto& C = sys.cx->cells[cell].carrier;
  const std::size_t s0 = C->size(k, sp.p0);
  RatMatrix B0 = sp.basis.select_rows([&] {
    std::vector<std::size_t> r(s0);
    for (std::size_t i = 0; i < s0; ++i) r[i] = i;
    return r;
  }());
  if (q0 != sp.p0) B0 = elevate_map(C, k, sp.p0, q0)->apply(B0);
  if (!sp.pair) return B0;
  const std::size_t s1 = C->size(k + 1, sp.p1);
  std::vector<std::size_t> r(s1);
  for (std::size_t i = 0; i < s1; ++i) r[i] = s0 + i;
  RatMatrix B1 = sp.basis.select_rows(r);
  if (q1 != sp.p1) B1 = elevate_map(C, k + 1, sp.p1, q1)->apply(B1);
  return B0.vstack(B1);
}

}  // namespace

FaceData FESystem::data_of(int cell, int k, const RatVec& c) const {
  const CellSpace& sp = spaces[cell][k];
  const auto& C = cx->cells[cell].carrier;
  const std::size_t len = C->size(k, sp.p0) + (sp.pair ? C->size(k + 1, sp.p1) : 0);
  RatVec v = sp.dim() == 0 ? RatVec(len, Rational(0)) : sp.basis * c;
  FaceData out{form_from(C, k, sp.p0, v, 0)};
  if (sp.pair) out.push_back(form_from(C, k + 1, sp.p1, v, C->size(k, sp.p0)));
  return out;
}

std::optional<RatVec> FESystem::try_coords_of(int cell, int k, const FaceData& data) const {
  auto M = try_coords_of_many(cell, k, {data});
  if (!M) return std::nullopt;
  return M->col(0);
}

std::optional<RatMatrix> FESystem::try_coords_of_many(int cell, int k, const std::vector<FaceData>& data) const {
  const CellSpace& sp = spaces[cell][k];
  int q0 = sp.p0, q1 = sp.p1;
  for (const auto& d : data) {
    if (d.size() != (sp.pair ? 2u : 1u)) throw FESError("coords_of: data shape does not match the cell space");
    q0 = std::max(q0, d[0].p);
    if (sp.pair) q1 = std::max(q1, d[1].p);
  }
  std::vector<RatVec> cols;
  for (const auto& d : data) {
    RatVec rhs = elevate(d[0], q0).coef;
    if (sp.pair) {
      RatVec r1 = elevate(d[1], q1).coef;
      rhs.insert(rhs.end(), r1.begin(), r1.end());
    }
    cols.push_back(std::move(rhs));
  }
  if (data.empty()) return RatMatrix(sp.dim(), 0);
  RatMatrix B = RatMatrix::from_columns(cols, cols[0].size());
  if (sp.dim() == 0) {
    if (B.is_zero()) return RatMatrix(0, data.size());
    return std::nullopt;
  }
  return solve(basis_at(*this, cell, k, q0, q1), B);
}

RatVec FESystem::coords_of(int cell, int k, const FaceData& data) const {
  auto c = try_coords_of(cell, k, data);
  if (!c) {
    std::ostringstream os;
    os << "data is not in A^" << k << " of cell " << cell;
    throw FESError(os.str());
  }
  return *c;
}

FaceData FESystem::restrict_data(int from, int to, int k, const FaceData& data) const {
  if (from == to) return data;
  const RestrictionKind K = kinds[k];
  if (K == RestrictionKind::Interior) return zero_data(*this, to, k);
  const auto& Ct = cx->cells[to].carrier;
  const bool top_to = is_top(to);
  if (top_to) throw FESError("restriction onto a top cell");
  // a form on `from` (top, or a single-form lower cell, or the first component of a pair)
  const PolyForm& u = data[0];
  switch (K) {
    case RestrictionKind::DoubleTrace:
      if (data.size() == 2) return {trace(u, Ct), trace(data[1], Ct)};
      return {trace(u, Ct), trace(exterior_derivative(u), Ct)};
    case RestrictionKind::Trace:
      return {trace(u, Ct)};
    case RestrictionKind::Pullback:
      return {pullback(u, Ct)};
    default:
      break;
  }
  return zero_data(*this, to, k);
}

FaceData FESystem::d_data(int cell, int k, const FaceData& data) const {
  if (k >= n()) return {};
  if (is_top(cell)) return {exterior_derivative(data[0])};
  const RestrictionKind K = kinds[k], K1 = kinds[k + 1];
  if (K1 == RestrictionKind::Interior || K == RestrictionKind::Interior) return zero_data(*this, cell, k + 1);
  const auto& C = cx->cells[cell].carrier;
  using RK = RestrictionKind;
  if (K == RK::DoubleTrace) {
    const PolyForm& v1 = data.at(1);
    if (K1 == RK::DoubleTrace) return {v1, zero_form(C, k + 2, 0)};
    if (K1 == RK::Trace) return {v1};
    return {pullback(v1)};
  }
  if (K == RK::Trace && K1 == RK::Pullback) return {exterior_derivative(pullback(data[0]))};
  if (K == RK::Pullback && K1 == RK::Pullback) return {exterior_derivative(data[0])};
  throw FESError("no differential from " + to_string(K) + " to " + to_string(K1) + " restrictions");
}

Rational FESystem::pair_data(const FaceData& a, const FaceData& b) const {
  if (a.size() != b.size()) throw FESError("pair_data: shape mismatch");
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += pairing(a[i], b[i]);
  return s;
}

Rational FESystem::integrate_data(int cell, const FaceData& data) const {
  (void)cell;
  return integrate(data.at(0));
}

const RatMatrix& FESystem::restriction(int to, int from, int k) const {
  auto it = R_.find({to, from, k});
  if (it == R_.end()) throw FESError("restriction not available (finalize first, or not a face)");
  return it->second;
}

const RatMatrix& FESystem::differential(int cell, int k) const { return D_.at(cell).at(k); }

void FESystem::finalize(bool verify) {
  const int N = n();
  const std::size_t nc = cx->cells.size();
  if (spaces.size() != nc) throw FESError("finalize: one space list per cell expected");
  for (std::size_t c = 0; c < nc; ++c)
    if (spaces[c].size() != static_cast<std::size_t>(N + 1)) throw FESError("finalize: spaces for every degree expected");
  if (kinds.size() != static_cast<std::size_t>(N + 1)) throw FESError("finalize: one restriction kind per degree expected");

  std::vector<std::vector<std::string>> errs(nc);
  std::vector<std::map<std::tuple<int, int, int>, RatMatrix>> Rs(nc);
  D_.assign(nc, {});
  constants_.assign(nc, {});
  evals_.assign(nc, {});

  parallel_for(nc, [&](std::size_t ci) {
    const int T = static_cast<int>(ci);
    const auto& cell = cx->cells[ci];
    auto unit = [](std::size_t d, std::size_t j) {
      RatVec e(d, Rational(0));
      e[j] = 1;
      return e;
    };
    for (int k = 0; k <= N; ++k) {
      const std::size_t dk = dim(T, k);
      std::vector<FaceData> cols;
      for (std::size_t j = 0; j < dk; ++j) cols.push_back(data_of(T, k, unit(dk, j)));
      for (int F : cx->boundary_of(T)) {
        RatMatrix M(dim(F, k), dk);
        try {
          std::vector<FaceData> rd;
          for (const auto& c : cols) rd.push_back(restrict_data(T, F, k, c));
          auto X = try_coords_of_many(F, k, rd);
          if (X) {
            M = *X;
          } else {
            std::ostringstream os;
            os << "restriction of A^" << k << "(cell " << T << ") does not land in A^" << k << "(cell " << F << ")";
            errs[ci].push_back(os.str());
          }
        } catch (const std::exception& e) {
          errs[ci].push_back(std::string("restriction: ") + e.what());
        }
        Rs[ci][{F, T, k}] = M;
      }
      if (k < N) {
        RatMatrix D(dim(T, k + 1), dk);
        try {
          std::vector<FaceData> dd;
          for (const auto& c : cols) dd.push_back(d_data(T, k, c));
          auto X = try_coords_of_many(T, k + 1, dd);
          if (X) {
            D = *X;
          } else {
            std::ostringstream os;
            os << "d does not map A^" << k << "(cell " << T << ") into A^" << k + 1;
            errs[ci].push_back(os.str());
          }
        } catch (const std::exception& e) {
          errs[ci].push_back(std::string("differential: ") + e.what());
        }
        D_[ci].push_back(D);
      }
      if (k == cell.dim) {
        RatVec e(dk);
        for (std::size_t j = 0; j < dk; ++j) e[j] = integrate_data(T, cols[j]);
        evals_[ci] = e;
      }
    }
    // constants
    if (dim(T, 0) > 0) {
      const auto& C = cell.carrier;
      FaceData one{constant_form(C, 0, RatVec{Rational(1)}, 0)};
      if (spaces[ci][0].pair) one.push_back(zero_form(C, 1, 0));
      auto c = try_coords_of(T, 0, one);
      if (!c) {
        errs[ci].push_back("constants are not in A^0(cell " + std::to_string(T) + ")");
        constants_[ci] = RatVec(dim(T, 0), Rational(0));
      } else {
        constants_[ci] = *c;
      }
    }
  });
  R_.clear();
  for (auto& m : Rs) R_.merge(m);
  for (std::size_t c = 0; c < nc; ++c)
    for (int k = 0; k <= N; ++k) R_[{static_cast<int>(c), static_cast<int>(c), k}] = RatMatrix::identity(dim(static_cast<int>(c), k));
  finalized_ = true;

  if (verify) {
    parallel_for(nc, [&](std::size_t ci) {
      const int T = static_cast<int>(ci);
      const auto& cell = cx->cells[ci];
      auto fail = [&](const std::string& s) { errs[ci].push_back(s + " (cell " + std::to_string(T) + ")"); };
      for (auto [F, o] : cx->facets[ci]) {
        for (int k = 0; k < N; ++k)
          if (!(restriction(F, T, k + 1) * differential(T, k) == differential(F, k) * restriction(F, T, k)))
            fail("restriction does not commute with d at degree " + std::to_string(k));
        for (auto [G, o2] : cx->facets[F])
          for (int k = 0; k <= N; ++k)
            if (!(restriction(G, F, k) * restriction(F, T, k) == restriction(G, T, k)))
              fail("restrictions do not compose at degree " + std::to_string(k));
        if (dim(T, 0) > 0 && dim(F, 0) > 0 && !(restriction(F, T, 0) * constant(T) == constant(F)))
          fail("restriction does not preserve constants");
      }
      if (N > 0 && dim(T, 0) > 0) {
        RatVec dc = differential(T, 0) * constant(T);
        if (!std::all_of(dc.begin(), dc.end(), [](const Rational& q) { return sgn(q) == 0; }))
          fail("d of a constant is not zero");
      }
      if (cell.dim >= 1) {
        const int k = cell.dim - 1;
        const std::size_t dk = dim(T, k);
        RatVec lhs(dk, Rational(0)), rhs(dk, Rational(0));
        if (dim(T, k + 1) > 0) {
          const RatMatrix& D = differential(T, k);
          for (std::size_t j = 0; j < dk; ++j)
            for (std::size_t i = 0; i < D.rows(); ++i) lhs[j] += evaluation(T)[i] * D(i, j);
        }
        for (auto [F, o] : cx->facets[ci]) {
          if (dim(F, k) == 0) continue;
          const RatMatrix& M = restriction(F, T, k);
          for (std::size_t j = 0; j < dk; ++j)
            for (std::size_t i = 0; i < M.rows(); ++i) rhs[j] += o * evaluation(F)[i] * M(i, j);
        }
        if (lhs != rhs) fail("Stokes identity fails");
      }
    });
  }
  std::vector<std::string> all;
  for (auto& e : errs) all.insert(all.end(), e.begin(), e.end());
  if (!all.empty()) {
    std::ostringstream os;
    os << name << ": " << all.size() << " axiom violation(s)";
    std::size_t shown = 12;
    if (const char* e = std::getenv("FESC_MAX_REPORT")) shown = std::strtoul(e, nullptr, 10);
    for (std::size_t i = 0; i < std::min(all.size(), shown); ++i) os << "\n  " << all[i];
    throw FESError(os.str());
  }
}

// ------------------------------------------------------------------ global spaces

RatVec InverseLimit::local(int cell, std::size_t j, std::size_t len) const {
  RatVec v(len);
  const std::size_t off = offset.at(cell);
  for (std::size_t i = 0; i < len; ++i) v[i] = basis(off + i, j);
  return v;
}

InverseLimit inverse_limit_space(const FESystem& sys, const std::vector<int>& sub, int k) {
  InverseLimit L;
  L.cells = sub;
  std::sort(L.cells.begin(), L.cells.end());
  for (int c : L.cells) {
    L.offset[c] = L.total;
    L.total += sys.dim(c, k);
  }
  RatMatrix A(0, L.total);
  for (int T : L.cells)
    for (auto [F, o] : sys.cx->facets[T]) {
      if (!L.offset.count(F)) throw FESError("inverse_limit_space: subcomplex not closed");
      const RatMatrix& M = sys.restriction(F, T, k);
      for (std::size_t i = 0; i < M.rows(); ++i) {
        RatVec row(L.total, Rational(0));
        row[L.offset[F] + i] = 1;
        for (std::size_t j = 0; j < M.cols(); ++j) row[L.offset[T] + j] -= M(i, j);
        A.push_row(row);
      }
    }
  L.basis = A.rows() == 0 ? RatMatrix::identity(L.total) : nullspace(A);
  return L;
}

RatMatrix boundary_restriction(const FESystem& sys, int T, int k) {
  RatMatrix S(0, sys.dim(T, k));
  for (int F : sys.cx->boundary_of(T)) {
    const RatMatrix& M = sys.restriction(F, T, k);
    for (std::size_t i = 0; i < M.rows(); ++i) S.push_row(M.row(i));
  }
  return S;
}

RatMatrix zero_boundary_subspace(const FESystem& sys, int T, int k) {
  const std::size_t d = sys.dim(T, k);
  RatMatrix S(0, d);
  for (auto [F, o] : sys.cx->facets[T]) {
    const RatMatrix& M = sys.restriction(F, T, k);
    for (std::size_t i = 0; i < M.rows(); ++i) S.push_row(M.row(i));
  }
  if (S.rows() == 0 || d == 0) return RatMatrix::identity(d);
  return nullspace(S);
}

bool check_extensions(const FESystem& sys, int T, int k) {
  auto bd = sys.cx->boundary_of(T);
  if (bd.empty()) return true;
  auto L = inverse_limit_space(sys, bd, k);
  return rank(boundary_restriction(sys, T, k)) == L.dim();
}

std::vector<int> check_local_exactness(const FESystem& sys, int T) {
  const int N = sys.n();
  std::vector<std::size_t> r(static_cast<std::size_t>(N + 1), 0);
  for (int k = 0; k < N; ++k) r[k] = rank(sys.differential(T, k));
  std::vector<int> h(static_cast<std::size_t>(N + 1));
  const RatVec& c = sys.dim(T, 0) ? sys.constant(T) : RatVec{};
  int rc = std::any_of(c.begin(), c.end(), [](const Rational& q) { return sgn(q) != 0; }) ? 1 : 0;
  for (int k = 0; k <= N; ++k) {
    long v = static_cast<long>(sys.dim(T, k)) - static_cast<long>(r[k]);
    v -= k == 0 ? rc : static_cast<long>(r[k - 1]);
    h[k] = static_cast<int>(v);
  }
  return h;
}

ZeroCohomology zero_cohomology(const FESystem& sys, int T) {
  const int N = sys.n();
  const int dT = sys.cx->cells[T].dim;
  std::vector<RatMatrix> Z(static_cast<std::size_t>(N + 1));
  for (int k = 0; k <= N; ++k) Z[k] = zero_boundary_subspace(sys, T, k);
  std::vector<std::size_t> r(static_cast<std::size_t>(N + 1), 0);
  std::vector<RatMatrix> DZ(static_cast<std::size_t>(N + 1));
  for (int k = 0; k < N; ++k) {
    if (Z[k].cols() == 0 || sys.dim(T, k + 1) == 0) continue;
    DZ[k] = sys.differential(T, k) * Z[k];
    r[k] = rank(DZ[k]);
  }
  ZeroCohomology out;
  for (int k = 0; k <= N; ++k)
    out.dims.push_back(static_cast<int>(Z[k].cols()) - static_cast<int>(r[k]) - (k ? static_cast<int>(r[k - 1]) : 0));
  // the integral must be nonzero on closed elements, i.e. not vanish on ker d
  if (dT <= N && Z[dT].cols() > 0) {
    RatMatrix K = (dT < N && DZ[dT].rows() > 0) ? Z[dT] * nullspace(DZ[dT]) : Z[dT];
    const RatVec& e = sys.evaluation(T);
    for (std::size_t j = 0; j < K.cols() && !out.evaluation_iso; ++j) {
      Rational s = 0;
      for (std::size_t i = 0; i < K.rows(); ++i) s += e[i] * K(i, j);
      if (sgn(s) != 0) out.evaluation_iso = true;
    }
  }
  return out;
}

AuditRow dimension_audit(const FESystem& sys, int k) {
  std::vector<int> all(sys.cx->cells.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  AuditRow a;
  a.k = k;
  a.lhs = inverse_limit_space(sys, all, k).dim();
  for (int c : all) a.rhs += zero_boundary_subspace(sys, c, k).cols();
  a.equal = a.lhs == a.rhs;
  return a;
}

CompatibilityReport check_compatibility(const FESystem& sys) {
  const int N = sys.n();
  CompatibilityReport rep;
  rep.cells.resize(sys.cx->cells.size());
  parallel_for(rep.cells.size(), [&](std::size_t ci) {
    const int T = static_cast<int>(ci);
    CellReport& c = rep.cells[ci];
    c.cell = T;
    c.dim = sys.cx->cells[ci].dim;
    c.verts = sys.cx->cells[ci].verts;
    for (int k = 0; k <= N; ++k) {
      c.dims.push_back(sys.dim(T, k));
      c.zero_dims.push_back(zero_boundary_subspace(sys, T, k).cols());
      c.extensions.push_back(check_extensions(sys, T, k));
    }
    c.cohomology = check_local_exactness(sys, T);
    c.zero = zero_cohomology(sys, T);
    c.theorem_ok = c.zero.evaluation_iso;
    for (int k = 0; k <= N; ++k)
      if (c.zero.dims[k] != (k == c.dim ? 1 : 0)) c.theorem_ok = false;
  });
  rep.compatible = true;
  for (const auto& c : rep.cells) {
    for (bool e : c.extensions) rep.compatible = rep.compatible && e;
    for (int h : c.cohomology) rep.compatible = rep.compatible && h == 0;
  }
  for (int k = 0; k <= N; ++k) rep.audit.push_back(dimension_audit(sys, k));
  return rep;
}

nlohmann::json to_json(const CompatibilityReport& r) {
  nlohmann::json j;
  j["compatible"] = r.compatible;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json x;
    x["cell"] = c.cell;
    x["dim"] = c.dim;
    x["vertices"] = c.verts;
    x["dims"] = c.dims;
    x["zero_dims"] = c.zero_dims;
    x["extensions"] = c.extensions;
    x["local_cohomology"] = c.cohomology;
    x["zero_cohomology"] = c.zero.dims;
    x["integral_iso"] = c.zero.evaluation_iso;
    x["theorem_ok"] = c.theorem_ok;
    j["cells"].push_back(x);
  }
  j["audit"] = nlohmann::json::array();
  for (const auto& a : r.audit) j["audit"].push_back({{"k", a.k}, {"lhs", a.lhs}, {"rhs", a.rhs}, {"equal", a.equal}});
  return j;
}

std::vector<int> global_cohomology(const FESystem& sys) {
  const int N = sys.n();
  std::vector<int> all(sys.cx->cells.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  std::vector<InverseLimit> L;
  for (int k = 0; k <= N; ++k) L.push_back(inverse_limit_space(sys, all, k));
  std::vector<std::size_t> r(static_cast<std::size_t>(N + 1), 0);
  for (int k = 0; k < N; ++k) {
    RatMatrix img(L[k + 1].total, L[k].dim());
    for (int c : all) {
      if (sys.dim(c, k) == 0 || sys.dim(c, k + 1) == 0) continue;
      const RatMatrix& D = sys.differential(c, k);
      const std::size_t o0 = L[k].offset[c], o1 = L[k + 1].offset[c];
      for (std::size_t j = 0; j < L[k].dim(); ++j)
        for (std::size_t i = 0; i < D.rows(); ++i) {
          Rational s = 0;
          for (std::size_t l = 0; l < D.cols(); ++l)
            if (sgn(D(i, l)) != 0) s += D(i, l) * L[k].basis(o0 + l, j);
          img(o1 + i, j) = s;
        }
    }
    r[k] = rank(img);
  }
  std::vector<int> h;
  for (int k = 0; k <= N; ++k)
    h.push_back(static_cast<int>(L[k].dim()) - static_cast<int>(r[k]) - (k ? static_cast<int>(r[k - 1]) : 0));
  return h;
}

// ------------------------------------------------------------------ degrees of freedom

Rational apply_functional(const FESystem& sys, const Functional& f, const FaceData& data) {
  switch (f.type) {
    case Functional::Type::Pair: return sys.pair_data(data, f.weight);
    case Functional::Type::DPair: return sys.pair_data(sys.d_data(f.cell, f.k, data), f.weight);
    case Functional::Type::Integral: return sys.integrate_data(f.cell, data);
  }
  return 0;
}

DofSet harmonic_dofs(const FESystem& sys) {
  const int N = sys.n();
  const std::size_t nc = sys.cx->cells.size();
  DofSet out;
  out.functionals.assign(nc, std::vector<std::vector<Functional>>(static_cast<std::size_t>(N + 1)));
  std::vector<std::vector<std::string>> warn(nc);
  parallel_for(nc, [&](std::size_t ci) {
    const int F = static_cast<int>(ci);
    const int dF = sys.cx->cells[ci].dim;
    std::vector<RatMatrix> Z;
    for (int k = 0; k <= N; ++k) Z.push_back(zero_boundary_subspace(sys, F, k));
    auto image = [&](int k) -> RatMatrix {  // d A_0^k in coordinates of A^{k+1}(F)
      if (k < 0 || k >= N || Z[k].cols() == 0 || sys.dim(F, k + 1) == 0) return RatMatrix(0, 0);
      return column_basis(sys.differential(F, k) * Z[k]);
    };
    for (int k = 0; k <= N; ++k) {
      auto& fs = out.functionals[ci][k];
      RatMatrix V = image(k - 1);
      for (std::size_t j = 0; j < V.cols(); ++j)
        fs.push_back({F, k, Functional::Type::Pair, sys.data_of(F, k, V.col(j))});
      if (k == dF && Z[k].cols() > 0) fs.push_back({F, k, Functional::Type::Integral, {}});
      RatMatrix W = image(k);
      for (std::size_t j = 0; j < W.cols(); ++j)
        fs.push_back({F, k, Functional::Type::DPair, sys.data_of(F, k + 1, W.col(j))});
      if (fs.size() != Z[k].cols()) {
        std::ostringstream os;
        os << "cell " << F << " degree " << k << ": " << fs.size() << " functionals for a "
           << Z[k].cols() << "-dimensional zero-trace space";
        warn[ci].push_back(os.str());
      }
    }
  });
  for (auto& w : warn) out.warnings.insert(out.warnings.end(), w.begin(), w.end());
  return out;
}

RatMatrix dof_matrix(const FESystem& sys, const DofSet& dofs, int T, int k) {
  const std::size_t dT = sys.dim(T, k);
  RatMatrix Phi(0, dT);
  for (int F : sys.cx->faces_of(T)) {
    const auto& fs = dofs.functionals[F][k];
    if (fs.empty()) continue;
    const std::size_t dF = sys.dim(F, k);
    RatMatrix rows(fs.size(), dF);
    for (std::size_t j = 0; j < dF; ++j) {
      RatVec e(dF, Rational(0));
      e[j] = 1;
      FaceData d = sys.data_of(F, k, e);
      for (std::size_t i = 0; i < fs.size(); ++i) rows(i, j) = apply_functional(sys, fs[i], d);
    }
    RatMatrix P = rows * sys.restriction(F, T, k);
    for (std::size_t i = 0; i < P.rows(); ++i) Phi.push_row(P.row(i));
  }
  return Phi;
}

RatVec dof_values(const FESystem& sys, const DofSet& dofs, int T, int k, const FaceData& data) {
  RatVec v;
  for (int F : sys.cx->faces_of(T)) {
    const auto& fs = dofs.functionals[F][k];
    if (fs.empty()) continue;
    FaceData d = sys.restrict_data(T, F, k, data);
    for (const auto& f : fs) v.push_back(apply_functional(sys, f, d));
  }
  return v;
}

RatVec interpolate(const FESystem& sys, const DofSet& dofs, int T, int k, const FaceData& data) {
  RatMatrix Phi = dof_matrix(sys, dofs, T, k);
  if (Phi.rows() != Phi.cols() || rank(Phi) != Phi.cols())
    throw FESError("interpolate: degrees of freedom are not unisolvent on cell " + std::to_string(T));
  auto c = solve(Phi, dof_values(sys, dofs, T, k, data));
  if (!c) throw FESError("interpolate: inconsistent system");
  return *c;
}

RatVec extend(const FESystem& sys, int T, int k, const InverseLimit& boundary, const RatVec& v,
              const FaceExtender& ext) {
  const std::size_t dT = sys.dim(T, k);
  RatVec full = boundary.basis * v;
  RatVec u(dT, Rational(0));
  const int dim = sys.cx->cells[T].dim;
  std::vector<int> done;
  for (int l = 0; l < dim; ++l) {
    std::vector<int> layer;
    for (int F : boundary.cells)
      if (sys.cx->cells[F].dim == l) layer.push_back(F);
    for (int F : layer) done.push_back(F);
    for (int F : layer) {
      const std::size_t dF = sys.dim(F, k);
      if (dF == 0) continue;
      const RatMatrix& M = sys.restriction(F, T, k);
      RatVec r(dF);
      RatVec cur = M * u;
      bool zero = true;
      for (std::size_t i = 0; i < dF; ++i) {
        r[i] = full[boundary.offset.at(F) + i] - cur[i];
        zero = zero && sgn(r[i]) == 0;
      }
      if (zero) continue;
      std::optional<RatVec> w;
      if (ext) w = ext(T, F, k, r);
      if (!w) {
        // minimal-norm element with restriction r on F, zero on the other swept faces
        RatMatrix S(0, dT);
        RatVec rhs;
        for (int G : done) {
          const RatMatrix& MG = sys.restriction(G, T, k);
          for (std::size_t i = 0; i < MG.rows(); ++i) {
            S.push_row(MG.row(i));
            rhs.push_back(G == F ? r[i] : Rational(0));
          }
        }
        w = min_norm_solution(S, rhs);
      }
      if (!w) throw FESError("extend: no extension from face " + std::to_string(F) + " into cell " + std::to_string(T));
      for (std::size_t i = 0; i < dT; ++i) u[i] += (*w)[i];
    }
  }
  // final check against all the data
  for (int F : boundary.cells) {
    RatVec got = sys.restriction(F, T, k) * u;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i] != full[boundary.offset.at(F) + i])
        throw FESError("extend: boundary data has no extension into cell " + std::to_string(T));
  }
  return u;
}

}  // namespace fesc
