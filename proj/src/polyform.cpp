#include "fesc/polyform.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fesc {

// ------------------------------------------------------------------ alt

namespace {

std::mutex g_tables_mu;

void combos(int n, int k, int start, AltMask cur, std::vector<AltMask>& out) {
  if (k == 0) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i <= n - k; ++i) combos(n, k - 1, i + 1, cur | (1u << i), out);
}

std::string point_key(const Point& W) {
  std::string s;
  for (const auto& x : W) s += x.get_str() + ";";
  return s;
}

}  // namespace

namespace {

constexpr int kMaxAmbient = 6;

struct AltTables {
  std::vector<AltMask> masks[kMaxAmbient + 1][kMaxAmbient + 1];
  std::vector<int> index[kMaxAmbient + 1];  // by mask
  AltTables() {
    for (int n = 0; n <= kMaxAmbient; ++n) {
      index[n].assign(1u << n, -1);
      for (int k = 0; k <= n; ++k) {
        combos(n, k, 0, 0u, masks[n][k]);
        for (std::size_t i = 0; i < masks[n][k].size(); ++i) index[n][masks[n][k][i]] = static_cast<int>(i);
      }
    }
  }
};

const AltTables& alt_tables() {
  static const AltTables t;
  return t;
}

}  // namespace

const std::vector<AltMask>& alt_masks(int n, int k) {
  static const std::vector<AltMask> empty;
  if (n < 0 || n > kMaxAmbient) throw std::invalid_argument("alt_masks: ambient dimension out of range");
  if (k < 0 || k > n) return empty;
  return alt_tables().masks[n][k];
}

int alt_index(int n, AltMask m) {
  if (n < 0 || n > kMaxAmbient || m >= (1u << n)) return -1;
  return alt_tables().index[n][m];
}

std::size_t alt_dim(int n, int k) { return alt_masks(n, k).size(); }

std::vector<int> mask_axes(AltMask m) {
  std::vector<int> r;
  for (int i = 0; m; ++i, m >>= 1)
    if (m & 1u) r.push_back(i);
  return r;
}

int wedge_sign(AltMask a, AltMask b) {
  if (a & b) return 0;
  int inv = 0;
  for (int i : mask_axes(a)) inv += std::popcount(b & ((1u << i) - 1u));
  return (inv % 2) ? -1 : 1;
}

RatMatrix alt_power(const RatMatrix& P, int k) {
  const int n = static_cast<int>(P.rows());
  const auto& ms = alt_masks(n, k);
  RatMatrix A(ms.size(), ms.size());
  for (std::size_t J = 0; J < ms.size(); ++J) {
    auto jj = mask_axes(ms[J]);
    for (std::size_t I = 0; I < ms.size(); ++I) {
      auto ii = mask_axes(ms[I]);
      RatMatrix S(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) S(a, b) = P(ii[a], jj[b]);
      A(J, I) = k == 0 ? Rational(1) : determinant(S);
    }
  }
  return A;
}

// ------------------------------------------------------------------ monomials

namespace {

struct MonoTable {
  std::vector<std::vector<int>> list;
  std::map<std::vector<int>, int> index;
};

void gen_monos(int nv, int p, int i, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (i == nv - 1) {
    cur[i] = p;
    out.push_back(cur);
    return;
  }
  for (int a = p; a >= 0; --a) {
    cur[i] = a;
    gen_monos(nv, p - a, i + 1, cur, out);
  }
}

const MonoTable& mono_table(int nv, int p) {
  static std::map<std::pair<int, int>, MonoTable> tab;
  std::lock_guard<std::mutex> lk(g_tables_mu);
  auto it = tab.find({nv, p});
  if (it != tab.end()) return it->second;
  MonoTable t;
  if (p >= 0 && nv > 0) {
    std::vector<int> cur(static_cast<std::size_t>(nv));
    gen_monos(nv, p, 0, cur, t.list);
  }
  for (std::size_t i = 0; i < t.list.size(); ++i) t.index[t.list[i]] = static_cast<int>(i);
  return tab.emplace(std::make_pair(nv, p), std::move(t)).first->second;
}

Rational multinomial_inv(const std::vector<int>& a) {
  // prod a_i!
  Rational r = 1;
  for (int x : a) r *= factorial(x);
  return r;
}

}  // namespace

const std::vector<std::vector<int>>& monomials(int nvars, int p) { return mono_table(nvars, p).list; }

int monomial_index(int nvars, const std::vector<int>& alpha) {
  int p = std::accumulate(alpha.begin(), alpha.end(), 0);
  const auto& t = mono_table(nvars, p);
  auto it = t.index.find(alpha);
  return it == t.index.end() ? -1 : it->second;
}

// ------------------------------------------------------------------ SparsePoly

SparsePoly SparsePoly::constant(int nv, const Rational& c) {
  SparsePoly s(nv);
  if (sgn(c) != 0) s.terms[std::vector<int>(static_cast<std::size_t>(nv), 0)] = c;
  return s;
}

SparsePoly SparsePoly::variable(int nv, int i, const Rational& c) {
  SparsePoly s(nv);
  std::vector<int> e(static_cast<std::size_t>(nv), 0);
  e[static_cast<std::size_t>(i)] = 1;
  if (sgn(c) != 0) s.terms[e] = c;
  return s;
}

SparsePoly& SparsePoly::operator+=(const SparsePoly& o) {
  if (nvars == 0) nvars = o.nvars;
  for (const auto& [e, c] : o.terms) {
    auto& t = terms[e];
    t += c;
    if (sgn(t) == 0) terms.erase(e);
  }
  return *this;
}

SparsePoly SparsePoly::operator*(const SparsePoly& o) const {
  SparsePoly r(std::max(nvars, o.nvars));
  for (const auto& [e1, c1] : terms)
    for (const auto& [e2, c2] : o.terms) {
      std::vector<int> e(e1.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = e1[i] + e2[i];
      r.terms[e] += c1 * c2;
    }
  r.prune();
  return r;
}

SparsePoly SparsePoly::scaled(const Rational& c) const {
  SparsePoly r(nvars);
  if (sgn(c) == 0) return r;
  for (const auto& [e, x] : terms) r.terms[e] = x * c;
  return r;
}

SparsePoly SparsePoly::pow(int e) const {
  SparsePoly r = constant(nvars, 1);
  for (int i = 0; i < e; ++i) r = r * *this;
  return r;
}

int SparsePoly::degree() const {
  int d = -1;
  for (const auto& [e, c] : terms) d = std::max(d, std::accumulate(e.begin(), e.end(), 0));
  return d;
}

void SparsePoly::prune() {
  for (auto it = terms.begin(); it != terms.end();)
    it = sgn(it->second) == 0 ? terms.erase(it) : std::next(it);
}

// ------------------------------------------------------------------ LinMap

void LinMap::add(std::size_t i, std::size_t j, const Rational& w) {
  if (sgn(w) == 0) return;
  auto& row = r_.at(i);
  for (auto& [c, x] : row)
    if (c == j) {
      x += w;
      return;
    }
  row.emplace_back(j, w);
}

RatVec LinMap::apply(const RatVec& v) const {
  if (v.size() != cols_) throw std::invalid_argument("LinMap::apply: size mismatch");
  RatVec out(rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (const auto& [c, w] : r_[i])
      if (sgn(v[c]) != 0) out[i] += w * v[c];
  return out;
}

RatMatrix LinMap::apply(const RatMatrix& B) const {
  if (B.rows() != cols_) throw std::invalid_argument("LinMap::apply: size mismatch");
  RatMatrix out(rows_, B.cols());
  for (std::size_t i = 0; i < rows_; ++i)
    for (const auto& [c, w] : r_[i])
      for (std::size_t j = 0; j < B.cols(); ++j)
        if (sgn(B(c, j)) != 0) out(i, j) += w * B(c, j);
  return out;
}

LinMap LinMap::compose(const LinMap& inner) const {
  if (inner.rows_ != cols_) throw std::invalid_argument("LinMap::compose: size mismatch");
  LinMap out(rows_, inner.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    std::map<std::size_t, Rational> acc;
    for (const auto& [c, w] : r_[i])
      for (const auto& [c2, w2] : inner.r_[c]) acc[c2] += w * w2;
    for (auto& [c, x] : acc)
      if (sgn(x) != 0) out.r_[i].emplace_back(c, x);
  }
  return out;
}

RatMatrix LinMap::dense() const {
  RatMatrix M(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (const auto& [c, w] : r_[i]) M(i, c) = w;
  return M;
}

LinMap LinMap::stack(const std::vector<const LinMap*>& maps) {
  std::size_t rows = 0, cols = maps.empty() ? 0 : maps[0]->cols_;
  for (auto* m : maps) {
    if (m->cols_ != cols) throw std::invalid_argument("LinMap::stack: column mismatch");
    rows += m->rows_;
  }
  LinMap out(rows, cols);
  std::size_t off = 0;
  for (auto* m : maps) {
    for (std::size_t i = 0; i < m->rows_; ++i) out.r_[off + i] = m->r_[i];
    off += m->rows_;
  }
  return out;
}

// ------------------------------------------------------------------ carriers

std::size_t Carrier::size(int k, int p) const {
  return pieces.size() * monomials(dim + 1, p).size() * alt_dim(n, k);
}

std::size_t Carrier::offset(std::size_t piece, int k, int p) const {
  return piece * monomials(dim + 1, p).size() * alt_dim(n, k);
}

std::vector<Point> Carrier::piece_points(std::size_t i) const {
  std::vector<Point> pts;
  for (int v : pieces.at(i)) pts.push_back(verts->at(static_cast<std::size_t>(v)));
  return pts;
}

namespace {

bool in_closed(const std::vector<Point>& simplex, const Point& x, RatVec* bary = nullptr) {
  bool hull = false;
  auto l = barycentric(simplex, x, &hull);
  if (!hull) return false;
  for (const auto& q : l)
    if (sgn(q) < 0) return false;
  if (bary) *bary = l;
  return true;
}

}  // namespace

std::size_t Carrier::locate(const Point& x) const {
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (in_closed(piece_points(i), x)) return i;
  throw std::invalid_argument("point outside the carrier");
}

CarrierPtr make_carrier(std::shared_ptr<const std::vector<Point>> verts, std::vector<Simplex> pieces,
                        std::vector<Point> cell) {
  auto C = std::make_shared<Carrier>();
  C->n = static_cast<int>(cell.at(0).size());
  C->dim = static_cast<int>(cell.size()) - 1;
  C->verts = std::move(verts);
  C->pieces = std::move(pieces);
  C->cell = std::move(cell);
  const std::size_t n = static_cast<std::size_t>(C->n), d = static_cast<std::size_t>(C->dim);
  if (d > 0) {
    RatMatrix E(n, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j) E(j, i) = C->cell[i + 1][j] - C->cell[0][j];
    C->proj = E * inverse(E.transpose() * E) * E.transpose();
  } else {
    C->proj = RatMatrix(n, n);
  }
  for (std::size_t pi = 0; pi < C->pieces.size(); ++pi) {
    auto pts = C->piece_points(pi);
    if (pts.size() != d + 1) throw std::invalid_argument("make_carrier: piece dimension mismatch");
    RatMatrix E(n, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j) E(j, i) = pts[i + 1][j] - pts[0][j];
    C->edge_mats.push_back(E);
    std::vector<RatVec> g(d + 1, RatVec(n));
    if (d > 0) {
      RatMatrix G = E * inverse(E.transpose() * E);  // n x d
      for (std::size_t i = 1; i <= d; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          g[i][j] = G(j, i - 1);
          g[0][j] -= G(j, i - 1);
        }
    }
    C->grads.push_back(g);
    RatMatrix B(d + 1, d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
      bool hull = false;
      auto l = barycentric(C->cell, pts[i], &hull);
      if (!hull) throw std::invalid_argument("make_carrier: piece leaves the cell's affine hull");
      for (std::size_t j = 0; j <= d; ++j) B(j, i) = l[j];
    }
    Rational det = determinant(B);
    if (sgn(det) == 0) throw std::invalid_argument("make_carrier: degenerate piece");
    C->orient.push_back(sgn(det));
    C->relvol.push_back(sgn(det) < 0 ? Rational(-det) : det);
  }
  return C;
}

CarrierPtr simplex_carrier(const std::vector<Point>& pts) {
  auto v = std::make_shared<std::vector<Point>>(pts);
  Simplex s(pts.size());
  std::iota(s.begin(), s.end(), 0);
  return make_carrier(v, {s}, pts);
}

CarrierPtr carrier_of(const RefinedComplex& rc, const Simplex& T) {
  auto verts = std::make_shared<std::vector<Point>>(rc.refined->vertices());
  return make_carrier(verts, rc.pieces(T), rc.base->points(T));
}

// ------------------------------------------------------------------ forms

Rational& PolyForm::at(std::size_t piece, const std::vector<int>& alpha, AltMask m) {
  const auto& C = *carrier;
  int mi = monomial_index(C.dim + 1, alpha);
  int ai = alt_index(C.n, m);
  if (mi < 0 || ai < 0) throw std::out_of_range("PolyForm::at");
  return coef.at(C.offset(piece, k, p) + static_cast<std::size_t>(mi) * alt_dim(C.n, k) + static_cast<std::size_t>(ai));
}

bool PolyForm::is_zero() const {
  return std::all_of(coef.begin(), coef.end(), [](const Rational& q) { return sgn(q) == 0; });
}

PolyForm zero_form(CarrierPtr C, int k, int p) {
  PolyForm u;
  u.k = k;
  u.p = std::max(p, 0);
  u.coef.assign(C->size(k, u.p), Rational(0));
  u.carrier = std::move(C);
  return u;
}

PolyForm constant_form(CarrierPtr C, int k, const RatVec& alt, int p) {
  PolyForm u = zero_form(C, k, 0);
  const std::size_t na = alt_dim(C->n, k);
  if (alt.size() != na) throw std::invalid_argument("constant_form: wrong Alt size");
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
    for (std::size_t a = 0; a < na; ++a) u.coef[pc * na + a] = alt[a];
  return p > 0 ? elevate(u, p) : u;
}

PolyForm cell_barycentric(CarrierPtr C, int i) {
  PolyForm u = zero_form(C, 0, 1);
  const int nv = C->dim + 1;
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
    auto pts = C->piece_points(pc);
    for (int j = 0; j < nv; ++j) {
      auto l = barycentric(C->cell, pts[static_cast<std::size_t>(j)]);
      std::vector<int> a(static_cast<std::size_t>(nv), 0);
      a[static_cast<std::size_t>(j)] = 1;
      u.at(pc, a, 0) = l.at(static_cast<std::size_t>(i));
    }
  }
  return u;
}

namespace {

// S^r with S = sum of the variables
SparsePoly sum_power(int nv, int r) {
  SparsePoly s(nv);
  for (int i = 0; i < nv; ++i) s += SparsePoly::variable(nv, i);
  return s.pow(r);
}

// write a polynomial in the piece barycentrics (possibly inhomogeneous) at degree p
void deposit(const SparsePoly& f, int p, std::size_t base, std::size_t na, std::size_t alt, int nv, RatVec& coef,
             const Rational& scale = 1) {
  std::map<int, SparsePoly> by_deg;
  for (const auto& [e, c] : f.terms) {
    int r = std::accumulate(e.begin(), e.end(), 0);
    if (r > p) throw std::invalid_argument("deposit: degree exceeds the target");
    by_deg[r].terms[e] = c;
    by_deg[r].nvars = nv;
  }
  for (auto& [r, g] : by_deg) {
    SparsePoly h = r < p ? g * sum_power(nv, p - r) : g;
    for (const auto& [e, c] : h.terms)
      coef[base + static_cast<std::size_t>(monomial_index(nv, e)) * na + alt] += c * scale;
  }
}

}  // namespace

PolyForm from_cartesian(CarrierPtr C, int k, const std::vector<SparsePoly>& comps, int p) {
  const std::size_t na = alt_dim(C->n, k);
  if (comps.size() != na) throw std::invalid_argument("from_cartesian: one polynomial per Alt component");
  int deg = 0;
  for (const auto& c : comps) deg = std::max(deg, c.degree());
  if (p < 0) p = deg;
  PolyForm u = zero_form(C, k, p);
  const int nv = C->dim + 1;
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
    auto pts = C->piece_points(pc);
    std::vector<SparsePoly> x(static_cast<std::size_t>(C->n), SparsePoly(nv));
    for (int l = 0; l < C->n; ++l)
      for (int i = 0; i < nv; ++i) x[l] += SparsePoly::variable(nv, i, pts[static_cast<std::size_t>(i)][l]);
    for (std::size_t a = 0; a < na; ++a) {
      SparsePoly f(nv);
      for (const auto& [e, c] : comps[a].terms) {
        SparsePoly t = SparsePoly::constant(nv, c);
        for (int l = 0; l < C->n; ++l)
          if (e[l]) t = t * x[l].pow(e[l]);
        f += t;
      }
      deposit(f, p, C->offset(pc, k, p), na, a, nv, u.coef);
    }
  }
  return u;
}

RatVec evaluate_on_piece(const PolyForm& u, std::size_t piece, const Point& x) {
  const auto& C = *u.carrier;
  const std::size_t na = alt_dim(C.n, u.k);
  auto l = barycentric(C.piece_points(piece), x);
  RatVec out(na);
  const auto& ms = monomials(C.dim + 1, u.p);
  std::size_t off = C.offset(piece, u.k, u.p);
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    Rational v = 1;
    for (std::size_t i = 0; i < ms[mi].size(); ++i)
      for (int e = 0; e < ms[mi][i]; ++e) v *= l[i];
    if (sgn(v) == 0) continue;
    for (std::size_t a = 0; a < na; ++a) out[a] += v * u.coef[off + mi * na + a];
  }
  return out;
}

RatVec evaluate(const PolyForm& u, const Point& x) { return evaluate_on_piece(u, u.carrier->locate(x), x); }

namespace {

void same_carrier(const PolyForm& a, const PolyForm& b) {
  if (a.carrier != b.carrier) throw std::invalid_argument("forms live on different carriers");
  if (a.k != b.k) throw std::invalid_argument("form degrees differ");
}

}  // namespace

PolyForm operator+(const PolyForm& a, const PolyForm& b) {
  same_carrier(a, b);
  int q = std::max(a.p, b.p);
  PolyForm x = elevate(a, q), y = elevate(b, q);
  for (std::size_t i = 0; i < x.coef.size(); ++i) x.coef[i] += y.coef[i];
  return x;
}

PolyForm operator-(const PolyForm& a, const PolyForm& b) { return a + Rational(-1) * b; }

PolyForm operator*(const Rational& c, const PolyForm& a) {
  PolyForm r = a;
  for (auto& x : r.coef) x *= c;
  return r;
}

bool operator==(const PolyForm& a, const PolyForm& b) {
  if (a.carrier != b.carrier || a.k != b.k) return false;
  int q = std::max(a.p, b.p);
  return elevate(a, q).coef == elevate(b, q).coef;
}

// ------------------------------------------------------------------ maps

namespace {

std::shared_ptr<const LinMap> cached(const CarrierPtr& C, const std::string& key,
                                     const std::function<LinMap()>& build) {
  {
    std::lock_guard<std::mutex> lk(C->mu);
    auto it = C->cache.find(key);
    if (it != C->cache.end()) return it->second;
  }
  auto m = std::make_shared<const LinMap>(build());
  std::lock_guard<std::mutex> lk(C->mu);
  return C->cache.emplace(key, m).first->second;
}

// contraction of dx_I by e_l (first slot): sign and resulting mask, sign 0 if l not in I
std::pair<int, AltMask> contract_axis(AltMask I, int l) {
  if (!(I & (1u << l))) return {0, 0};
  int pos = std::popcount(I & ((1u << l) - 1u));
  return {(pos % 2) ? -1 : 1, I & ~(1u << l)};
}

}  // namespace

std::shared_ptr<const LinMap> d_map(const CarrierPtr& C, int k, int p) {
  return cached(C, "d" + std::to_string(k) + "," + std::to_string(p), [&] {
    const int nv = C->dim + 1, n = C->n;
    const int q = std::max(p - 1, 0);
    LinMap M(C->size(k + 1, q), C->size(k, p));
    if (p == 0 || k + 1 > n) return M;
    const auto& ms = monomials(nv, p);
    const auto& ain = alt_masks(n, k);
    const std::size_t na = ain.size(), nb = alt_dim(n, k + 1);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
      const auto& g = C->grads[pc];
      for (std::size_t mi = 0; mi < ms.size(); ++mi)
        for (int i = 0; i < nv; ++i) {
          if (ms[mi][static_cast<std::size_t>(i)] == 0) continue;
          auto b = ms[mi];
          b[static_cast<std::size_t>(i)] -= 1;
          std::size_t row0 = C->offset(pc, k + 1, q) + static_cast<std::size_t>(monomial_index(nv, b)) * nb;
          for (std::size_t a = 0; a < na; ++a)
            for (int j = 0; j < n; ++j) {
              const Rational& gij = g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
              if (sgn(gij) == 0) continue;
              int s = wedge_sign(1u << j, ain[a]);
              if (!s) continue;
              int out = alt_index(n, ain[a] | (1u << j));
              M.add(row0 + static_cast<std::size_t>(out), C->offset(pc, k, p) + mi * na + a,
                    Rational(ms[mi][static_cast<std::size_t>(i)] * s) * gij);
            }
        }
    }
    return M;
  });
}

std::shared_ptr<const LinMap> elevate_map(const CarrierPtr& C, int k, int p, int q) {
  if (q < p) throw std::invalid_argument("elevate: target degree below source");
  return cached(C, "e" + std::to_string(k) + "," + std::to_string(p) + "," + std::to_string(q), [&] {
    const int nv = C->dim + 1;
    const std::size_t na = alt_dim(C->n, k);
    LinMap M(C->size(k, q), C->size(k, p));
    const auto& ms = monomials(nv, p);
    const auto& bs = monomials(nv, q - p);
    const Rational rf = factorial(q - p);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
      for (std::size_t mi = 0; mi < ms.size(); ++mi)
        for (const auto& b : bs) {
          std::vector<int> s(b.size());
          for (std::size_t i = 0; i < b.size(); ++i) s[i] = ms[mi][i] + b[i];
          Rational w = rf / multinomial_inv(b);
          std::size_t row = C->offset(pc, k, q) + static_cast<std::size_t>(monomial_index(nv, s)) * na;
          for (std::size_t a = 0; a < na; ++a) M.add(row + a, C->offset(pc, k, p) + mi * na + a, w);
        }
    return M;
  });
}

std::shared_ptr<const LinMap> koszul_map(const CarrierPtr& C, const Point& W, int k, int p) {
  return cached(C, "k" + std::to_string(k) + "," + std::to_string(p) + "@" + point_key(W), [&] {
    const int nv = C->dim + 1, n = C->n;
    const int ko = std::max(k - 1, 0);
    LinMap M(C->size(ko, p + 1), C->size(k, p));
    if (k == 0) return M;
    const auto& ms = monomials(nv, p);
    const auto& ain = alt_masks(n, k);
    const std::size_t na = ain.size(), nb = alt_dim(n, ko);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
      auto pts = C->piece_points(pc);
      for (std::size_t mi = 0; mi < ms.size(); ++mi)
        for (int i = 0; i < nv; ++i) {
          auto b = ms[mi];
          b[static_cast<std::size_t>(i)] += 1;
          std::size_t row0 = C->offset(pc, ko, p + 1) + static_cast<std::size_t>(monomial_index(nv, b)) * nb;
          for (std::size_t a = 0; a < na; ++a)
            for (int l = 0; l < n; ++l) {
              Rational xl = pts[static_cast<std::size_t>(i)][l] - W[l];
              if (sgn(xl) == 0) continue;
              auto [s, m] = contract_axis(ain[a], l);
              if (!s) continue;
              M.add(row0 + static_cast<std::size_t>(alt_index(n, m)), C->offset(pc, k, p) + mi * na + a, xl * s);
            }
        }
    }
    return M;
  });
}

std::shared_ptr<const LinMap> poincare_map(const CarrierPtr& C, const Point& W, int k, int p) {
  return cached(C, "p" + std::to_string(k) + "," + std::to_string(p) + "@" + point_key(W), [&] {
    const int nv = C->dim + 1, n = C->n;
    const int ko = std::max(k - 1, 0);
    LinMap M(C->size(ko, p + 1), C->size(k, p));
    if (k == 0) return M;
    const auto& ms = monomials(nv, p);
    const auto& ain = alt_masks(n, k);
    const std::size_t na = ain.size(), nb = alt_dim(n, ko);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
      auto pts = C->piece_points(pc);
      RatVec beta;
      if (!in_closed(pts, W, &beta))
        throw std::invalid_argument("poincare: the center is not in every closed piece of the carrier");
      // y_i = lambda_i - beta_i S vanishes at W and sums to zero
      std::vector<SparsePoly> y;
      SparsePoly S(nv);
      for (int i = 0; i < nv; ++i) S += SparsePoly::variable(nv, i);
      for (int i = 0; i < nv; ++i) {
        SparsePoly yi = SparsePoly::variable(nv, i);
        yi += S.scaled(-beta[static_cast<std::size_t>(i)]);
        y.push_back(yi);
      }
      std::vector<SparsePoly> X(static_cast<std::size_t>(n), SparsePoly(nv));
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < nv; ++i) X[l] += y[static_cast<std::size_t>(i)].scaled(pts[static_cast<std::size_t>(i)][l]);
      for (std::size_t mi = 0; mi < ms.size(); ++mi) {
        // expand prod_i (beta_i + t y_i)^{alpha_i} by powers of t
        std::vector<SparsePoly> T{SparsePoly::constant(nv, 1)};
        for (int i = 0; i < nv; ++i)
          for (int e = 0; e < ms[mi][static_cast<std::size_t>(i)]; ++e) {
            std::vector<SparsePoly> N(T.size() + 1, SparsePoly(nv));
            for (std::size_t r = 0; r < T.size(); ++r) {
              N[r] += T[r].scaled(beta[static_cast<std::size_t>(i)]);
              N[r + 1] += T[r] * y[static_cast<std::size_t>(i)];
            }
            T = std::move(N);
          }
        for (std::size_t r = 0; r < T.size(); ++r) {
          if (T[r].is_zero()) continue;
          Rational w = Rational(1) / Rational(k + static_cast<int>(r));
          for (int l = 0; l < n; ++l) {
            if (X[l].is_zero()) continue;
            SparsePoly f = T[r] * X[l];
            SparsePoly h = f * sum_power(nv, p - static_cast<int>(r));
            for (std::size_t a = 0; a < na; ++a) {
              auto [s, m] = contract_axis(ain[a], l);
              if (!s) continue;
              std::size_t out = static_cast<std::size_t>(alt_index(n, m));
              for (const auto& [e, c] : h.terms)
                M.add(C->offset(pc, ko, p + 1) + static_cast<std::size_t>(monomial_index(nv, e)) * nb + out,
                      C->offset(pc, k, p) + mi * na + a, c * w * s);
            }
          }
        }
      }
    }
    return M;
  });
}

std::shared_ptr<const LinMap> pullback_map(const CarrierPtr& C, int k, int p) {
  return cached(C, "pb" + std::to_string(k) + "," + std::to_string(p), [&] {
    RatMatrix A = alt_power(C->proj, k);
    const std::size_t na = A.rows();
    const std::size_t blocks = C->size(k, p) / std::max<std::size_t>(na, 1);
    LinMap M(C->size(k, p), C->size(k, p));
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t J = 0; J < na; ++J)
        for (std::size_t I = 0; I < na; ++I) M.add(b * na + J, b * na + I, A(J, I));
    return M;
  });
}

std::shared_ptr<const LinMap> partial_map(const CarrierPtr& C, int j, int k, int p) {
  return cached(C, "dx" + std::to_string(j) + "," + std::to_string(k) + "," + std::to_string(p), [&] {
    const int nv = C->dim + 1;
    const int q = std::max(p - 1, 0);
    const std::size_t na = alt_dim(C->n, k);
    LinMap M(C->size(k, q), C->size(k, p));
    if (p == 0) return M;
    const auto& ms = monomials(nv, p);
    for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
      for (std::size_t mi = 0; mi < ms.size(); ++mi)
        for (int i = 0; i < nv; ++i) {
          const Rational& g = C->grads[pc][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          if (ms[mi][static_cast<std::size_t>(i)] == 0 || sgn(g) == 0) continue;
          auto b = ms[mi];
          b[static_cast<std::size_t>(i)] -= 1;
          std::size_t row = C->offset(pc, k, q) + static_cast<std::size_t>(monomial_index(nv, b)) * na;
          for (std::size_t a = 0; a < na; ++a)
            M.add(row + a, C->offset(pc, k, p) + mi * na + a, g * ms[mi][static_cast<std::size_t>(i)]);
        }
    return M;
  });
}

LinMap wedge_map(const PolyForm& A, int k, int p) {
  const auto& C = A.carrier;
  const int nv = C->dim + 1, n = C->n;
  const int ko = A.k + k, po = A.p + p;
  LinMap M(C->size(ko, po), C->size(k, p));
  if (ko > n) return M;
  const auto& ma = monomials(nv, A.p);
  const auto& mb = monomials(nv, p);
  const auto& aa = alt_masks(n, A.k);
  const auto& ab = alt_masks(n, k);
  const std::size_t nb = ab.size(), no = alt_dim(n, ko);
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
    for (std::size_t i = 0; i < ma.size(); ++i)
      for (std::size_t I = 0; I < aa.size(); ++I) {
        const Rational& c = A.coef[C->offset(pc, A.k, A.p) + i * aa.size() + I];
        if (sgn(c) == 0) continue;
        for (std::size_t j = 0; j < mb.size(); ++j) {
          std::vector<int> s(ma[i].size());
          for (std::size_t t = 0; t < s.size(); ++t) s[t] = ma[i][t] + mb[j][t];
          std::size_t row0 = C->offset(pc, ko, po) + static_cast<std::size_t>(monomial_index(nv, s)) * no;
          for (std::size_t J = 0; J < nb; ++J) {
            int sg = wedge_sign(aa[I], ab[J]);
            if (!sg) continue;
            M.add(row0 + static_cast<std::size_t>(alt_index(n, aa[I] | ab[J])), C->offset(pc, k, p) + j * nb + J,
                  c * sg);
          }
        }
      }
  return M;
}

LinMap contract_map(const CarrierPtr& C, const RatVec& e, int k, int p) {
  const int n = C->n;
  const int ko = std::max(k - 1, 0);
  LinMap M(C->size(ko, p), C->size(k, p));
  if (k == 0) return M;
  const auto& ain = alt_masks(n, k);
  const std::size_t na = ain.size(), nb = alt_dim(n, ko);
  const std::size_t blocks = C->size(k, p) / na;
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t a = 0; a < na; ++a)
      for (int l = 0; l < n; ++l) {
        if (sgn(e[l]) == 0) continue;
        auto [s, m] = contract_axis(ain[a], l);
        if (s) M.add(b * nb + static_cast<std::size_t>(alt_index(n, m)), b * na + a, e[l] * s);
      }
  return M;
}

namespace {

// source pieces whose closure contains target piece t, in order
std::vector<std::size_t> containing_pieces(const Carrier& src, const std::vector<Point>& tp) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < src.pieces.size(); ++s) {
    auto sp = src.piece_points(s);
    bool ok = true;
    for (const auto& x : tp)
      if (!in_closed(sp, x)) {
        ok = false;
        break;
      }
    if (ok) out.push_back(s);
  }
  return out;
}

// rows of the restriction from source piece s to target piece t
void add_substitution(const Carrier& src, std::size_t s, const Carrier& tgt, std::size_t t, int k, int p,
                      LinMap& M) {
  const int ns = src.dim + 1, nt = tgt.dim + 1;
  const std::size_t na = alt_dim(src.n, k);
  auto sp = src.piece_points(s);
  auto tp = tgt.piece_points(t);
  // B(i, j) = lambda^s_i at target vertex j
  std::vector<RatVec> B(static_cast<std::size_t>(ns), RatVec(static_cast<std::size_t>(nt)));
  for (int j = 0; j < nt; ++j) {
    auto l = barycentric(sp, tp[static_cast<std::size_t>(j)]);
    for (int i = 0; i < ns; ++i) B[i][j] = l[i];
  }
  std::vector<std::vector<SparsePoly>> pw(static_cast<std::size_t>(ns));
  for (int i = 0; i < ns; ++i) {
    SparsePoly L(nt);
    for (int j = 0; j < nt; ++j) L += SparsePoly::variable(nt, j, B[i][j]);
    pw[i].push_back(SparsePoly::constant(nt, 1));
    for (int e = 1; e <= p; ++e) pw[i].push_back(pw[i].back() * L);
  }
  const auto& ms = monomials(ns, p);
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    SparsePoly f = SparsePoly::constant(nt, 1);
    for (int i = 0; i < ns; ++i)
      if (ms[mi][i]) f = f * pw[i][static_cast<std::size_t>(ms[mi][i])];
    for (const auto& [e, c] : f.terms) {
      std::size_t row = tgt.offset(t, k, p) + static_cast<std::size_t>(monomial_index(nt, e)) * na;
      for (std::size_t a = 0; a < na; ++a) M.add(row + a, src.offset(s, k, p) + mi * na + a, c);
    }
  }
}

std::shared_ptr<const LinMap> trace_map_alt(const CarrierPtr& src, const CarrierPtr& tgt, int k, int p,
                                            std::size_t which, std::size_t* max_alts = nullptr) {
  if (src->n != tgt->n) throw std::invalid_argument("trace: ambient dimensions differ");
  std::string key = std::to_string(k) + "," + std::to_string(p) + "," + std::to_string(which);
  {
    std::lock_guard<std::mutex> lk(src->mu);
    auto it = src->tcache.find({tgt.get(), key});
    if (it != src->tcache.end() && !max_alts) return it->second.second;
  }
  LinMap M(tgt->size(k, p), src->size(k, p));
  std::size_t mx = 0;
  for (std::size_t t = 0; t < tgt->pieces.size(); ++t) {
    auto cs = containing_pieces(*src, tgt->piece_points(t));
    if (cs.empty()) throw std::invalid_argument("trace: target piece not inside the source carrier");
    mx = std::max(mx, cs.size());
    add_substitution(*src, cs[std::min(which, cs.size() - 1)], *tgt, t, k, p, M);
  }
  if (max_alts) *max_alts = mx;
  auto m = std::make_shared<const LinMap>(std::move(M));
  std::lock_guard<std::mutex> lk(src->mu);
  src->tcache[{tgt.get(), key}] = {tgt, m};
  return m;
}

}  // namespace

std::shared_ptr<const LinMap> trace_map(const CarrierPtr& src, const CarrierPtr& tgt, int k, int p) {
  return trace_map_alt(src, tgt, k, p, 0);
}

LinMap jump_map(const CarrierPtr& C, int k, int p) {
  const int nv = C->dim + 1;
  const std::size_t na = alt_dim(C->n, k);
  // interior codimension-1 faces, deterministic order
  std::map<Simplex, std::vector<std::size_t>> faces;
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
    for (const auto& f : subcells(C->pieces[pc], C->dim - 1)) faces[f].push_back(pc);
  const auto& fm = monomials(nv - 1, p);
  std::size_t nrows = 0;
  for (const auto& [f, ps] : faces)
    if (ps.size() == 2) nrows += fm.size() * na;
  LinMap M(nrows, C->size(k, p));
  std::size_t row = 0;
  for (const auto& [f, ps] : faces) {
    if (ps.size() != 2) continue;
    for (std::size_t fi = 0; fi < fm.size(); ++fi) {
      for (int side = 0; side < 2; ++side) {
        const Simplex& s = C->pieces[ps[static_cast<std::size_t>(side)]];
        std::vector<int> a(static_cast<std::size_t>(nv), 0);
        for (std::size_t t = 0, u = 0; t < s.size(); ++t)
          if (u < f.size() && f[u] == s[t]) a[t] = fm[fi][u++];
        std::size_t col = C->offset(ps[static_cast<std::size_t>(side)], k, p) +
                          static_cast<std::size_t>(monomial_index(nv, a)) * na;
        for (std::size_t x = 0; x < na; ++x) M.add(row + x, col + x, side == 0 ? 1 : -1);
      }
      row += na;
    }
  }
  return M;
}

LinMap integrate_row(const CarrierPtr& C, int k, int p) {
  if (k != C->dim) throw std::invalid_argument("integrate: form degree must equal the carrier dimension");
  const int nv = C->dim + 1, n = C->n;
  const auto& ms = monomials(nv, p);
  const auto& am = alt_masks(n, k);
  LinMap M(1, C->size(k, p));
  const Rational den = factorial(p + k);
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc) {
    const RatMatrix& E = C->edge_mats[pc];
    for (std::size_t a = 0; a < am.size(); ++a) {
      auto ax = mask_axes(am[a]);
      RatMatrix S(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) S(i, j) = E(ax[i], j);
      Rational w = k == 0 ? Rational(1) : determinant(S);
      if (sgn(w) == 0) continue;
      w *= C->orient[pc];
      for (std::size_t mi = 0; mi < ms.size(); ++mi)
        M.add(0, C->offset(pc, k, p) + mi * am.size() + a, w * multinomial_inv(ms[mi]) / den);
    }
  }
  return M;
}

RatMatrix gram_matrix(const CarrierPtr& C, int k, int p, int q) {
  const int nv = C->dim + 1, d = C->dim;
  const std::size_t na = alt_dim(C->n, k);
  const auto& mp = monomials(nv, p);
  const auto& mq = monomials(nv, q);
  RatMatrix G(C->size(k, p), C->size(k, q));
  const Rational den = factorial(p + q + d);
  const Rational df = factorial(d);
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
    for (std::size_t i = 0; i < mp.size(); ++i)
      for (std::size_t j = 0; j < mq.size(); ++j) {
        std::vector<int> s(mp[i].size());
        for (std::size_t t = 0; t < s.size(); ++t) s[t] = mp[i][t] + mq[j][t];
        Rational w = C->relvol[pc] * df * multinomial_inv(s) / den;
        for (std::size_t a = 0; a < na; ++a) G(C->offset(pc, k, p) + i * na + a, C->offset(pc, k, q) + j * na + a) = w;
      }
  return G;
}

// ------------------------------------------------------------------ form operations

namespace {

PolyForm apply_map(const LinMap& M, const PolyForm& u, int k, int p) {
  PolyForm r;
  r.carrier = u.carrier;
  r.k = k;
  r.p = p;
  r.coef = M.apply(u.coef);
  return r;
}

}  // namespace

PolyForm elevate(const PolyForm& u, int q) {
  if (q == u.p) return u;
  return apply_map(*elevate_map(u.carrier, u.k, u.p, q), u, u.k, q);
}

PolyForm exterior_derivative(const PolyForm& u) {
  return apply_map(*d_map(u.carrier, u.k, u.p), u, u.k + 1, std::max(u.p - 1, 0));
}

PolyForm wedge(const PolyForm& a, const PolyForm& b) {
  if (a.carrier != b.carrier) throw std::invalid_argument("wedge: different carriers");
  return apply_map(wedge_map(a, b.k, b.p), b, a.k + b.k, a.p + b.p);
}

PolyForm contract(const PolyForm& u, const RatVec& e) {
  if (u.k == 0) return zero_form(u.carrier, 0, u.p);
  return apply_map(contract_map(u.carrier, e, u.k, u.p), u, u.k - 1, u.p);
}

PolyForm koszul(const PolyForm& u, const Point& W) {
  if (u.k == 0) return zero_form(u.carrier, 0, u.p + 1);
  return apply_map(*koszul_map(u.carrier, W, u.k, u.p), u, u.k - 1, u.p + 1);
}

PolyForm poincare(const PolyForm& u, const Point& W) {
  if (u.k == 0) return zero_form(u.carrier, 0, u.p + 1);
  return apply_map(*poincare_map(u.carrier, W, u.k, u.p), u, u.k - 1, u.p + 1);
}

PolyForm pullback(const PolyForm& u) { return apply_map(*pullback_map(u.carrier, u.k, u.p), u, u.k, u.p); }

bool single_valued_on(const PolyForm& u, CarrierPtr target, std::string* why) {
  std::size_t alts = 0;
  auto m0 = trace_map_alt(u.carrier, target, u.k, u.p, 0, &alts);
  RatVec v0 = m0->apply(u.coef);
  for (std::size_t w = 1; w < alts; ++w) {
    RatVec vw = trace_map_alt(u.carrier, target, u.k, u.p, w)->apply(u.coef);
    if (vw != v0) {
      if (why) {
        // name the first target piece where the sides disagree
        const std::size_t blk = target->size(u.k, u.p) / target->pieces.size();
        for (std::size_t t = 0; t < target->pieces.size(); ++t)
          if (!std::equal(v0.begin() + static_cast<long>(t * blk), v0.begin() + static_cast<long>((t + 1) * blk),
                          vw.begin() + static_cast<long>(t * blk))) {
            auto cs = containing_pieces(*u.carrier, target->piece_points(t));
            std::ostringstream os;
            os << "multi-valued between top cells";
            for (auto c : cs) {
              os << " [";
              for (std::size_t i = 0; i < u.carrier->pieces[c].size(); ++i)
                os << (i ? "," : "") << u.carrier->pieces[c][i];
              os << "]";
            }
            *why = os.str();
            break;
          }
      }
      return false;
    }
  }
  return true;
}

PolyForm trace(const PolyForm& u, CarrierPtr target) {
  std::string why;
  if (!single_valued_on(u, target, &why)) throw std::invalid_argument("trace: " + why);
  PolyForm r;
  r.carrier = target;
  r.k = u.k;
  r.p = u.p;
  r.coef = trace_map(u.carrier, target, u.k, u.p)->apply(u.coef);
  return r;
}

PolyForm refine_to(const PolyForm& u, CarrierPtr target) { return trace(u, std::move(target)); }

PolyForm pullback(const PolyForm& u, CarrierPtr target) { return pullback(trace(u, std::move(target))); }

std::pair<PolyForm, PolyForm> double_trace(const PolyForm& u, CarrierPtr target) {
  return {trace(u, target), trace(exterior_derivative(u), target)};
}

bool is_admissible(const PolyForm& v0, const PolyForm& v1) {
  if (v0.carrier != v1.carrier || v1.k != v0.k + 1) return false;
  return exterior_derivative(pullback(v0)) == pullback(v1);
}

AdmissiblePair admissible_differential(const AdmissiblePair& a) {
  if (!is_admissible(a.v0, a.v1)) throw std::invalid_argument("admissible_differential: input not admissible");
  return {a.v1, zero_form(a.v1.carrier, a.v1.k + 1, 0)};
}

Rational integrate(const PolyForm& u) { return integrate_row(u.carrier, u.k, u.p).apply(u.coef)[0]; }

Rational pairing(const PolyForm& u, const PolyForm& v) {
  same_carrier(u, v);
  RatMatrix G = gram_matrix(u.carrier, u.k, u.p, v.p);
  Rational s = 0;
  for (std::size_t i = 0; i < u.coef.size(); ++i) {
    if (sgn(u.coef[i]) == 0) continue;
    for (std::size_t j = 0; j < v.coef.size(); ++j)
      if (sgn(G(i, j)) != 0) s += u.coef[i] * G(i, j) * v.coef[j];
  }
  return s;
}

// ------------------------------------------------------------------ spaces

PolyForm FormSpace::element(std::size_t j) const {
  PolyForm u;
  u.carrier = carrier;
  u.k = k;
  u.p = p;
  u.coef = basis.col(j);
  return u;
}

PolyForm FormSpace::combine(const RatVec& c) const {
  PolyForm u;
  u.carrier = carrier;
  u.k = k;
  u.p = p;
  u.coef = basis * c;
  return u;
}

bool FormSpace::contains(const PolyForm& u) const {
  if (u.carrier != carrier || u.k != k || u.p > p) return false;
  PolyForm v = elevate(u, p);
  RatMatrix M = basis.hstack(RatMatrix::from_columns({v.coef}, v.coef.size()));
  return rank(M) == rank(basis);
}

std::string to_string(Continuity c) {
  switch (c) {
    case Continuity::None: return "none";
    case Continuity::C0: return "C0";
    case Continuity::C1: return "C1";
    case Continuity::C0d: return "C0d";
  }
  return "?";
}

FormSpace broken_space(CarrierPtr C, int k, int p) {
  FormSpace V;
  V.carrier = C;
  V.k = k;
  V.p = p;
  V.basis = RatMatrix::identity(C->size(k, p));
  V.tag = "P" + std::to_string(p) + "L" + std::to_string(k);
  return V;
}

FormSpace c0_space(CarrierPtr C, int k, int p) {
  const int nv = C->dim + 1;
  const std::size_t na = alt_dim(C->n, k);
  const auto& ms = monomials(nv, p);
  std::map<std::vector<int>, std::vector<std::size_t>> points;  // domain point -> coefficient blocks
  for (std::size_t pc = 0; pc < C->pieces.size(); ++pc)
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
      std::vector<int> key;
      for (std::size_t i = 0; i < ms[mi].size(); ++i)
        for (int e = 0; e < ms[mi][i]; ++e) key.push_back(C->pieces[pc][i]);
      points[key].push_back(C->offset(pc, k, p) + mi * na);
    }
  FormSpace V;
  V.carrier = C;
  V.k = k;
  V.p = p;
  V.basis = RatMatrix(C->size(k, p), points.size() * na);
  std::size_t j = 0;
  for (const auto& [key, blocks] : points)
    for (std::size_t a = 0; a < na; ++a, ++j)
      for (auto b : blocks) V.basis(b + a, j) = 1;
  V.tag = "C0P" + std::to_string(p) + "L" + std::to_string(k);
  return V;
}

FormSpace restrict_space(const FormSpace& V, const RatMatrix& A, const std::string& tag) {
  FormSpace R = V;
  if (A.rows() == 0) {
    if (!tag.empty()) R.tag = tag;
    return R;
  }
  RatMatrix N = nullspace(A);
  R.basis = V.basis * N;
  if (!tag.empty()) R.tag = tag;
  return R;
}

FormSpace restrict_space(const FormSpace& V, const LinMap& M, const std::string& tag) {
  return restrict_space(V, M.apply(V.basis), tag);
}

FormSpace constrained_space(CarrierPtr C, int p, int k, Continuity c) {
  if (p < 0) throw std::invalid_argument("constrained_space: negative degree");
  if (c == Continuity::None) return broken_space(C, k, p);
  FormSpace V = c0_space(C, k, p);
  if (c == Continuity::C0) return V;
  std::string tag = (c == Continuity::C1 ? "C1P" : "C0dP") + std::to_string(p) + "L" + std::to_string(k);
  if (p == 0) {
    V.tag = tag;
    return V;
  }
  LinMap J = jump_map(C, c == Continuity::C1 ? k : k + 1, p - 1);
  std::vector<LinMap> parts;
  if (c == Continuity::C1) {
    for (int j = 0; j < C->n; ++j) parts.push_back(J.compose(*partial_map(C, j, k, p)));
  } else {
    parts.push_back(J.compose(*d_map(C, k, p)));
  }
  std::vector<const LinMap*> ptrs;
  for (auto& m : parts) ptrs.push_back(&m);
  return restrict_space(V, LinMap::stack(ptrs), tag);
}

FormSpace global_space(CarrierPtr C, int k, int q, int p) {
  auto S = simplex_carrier(C->cell);
  RatMatrix B = trace_map(S, C, k, p)->apply(elevate_map(S, k, q, p)->dense());
  FormSpace V;
  V.carrier = C;
  V.k = k;
  V.p = p;
  V.basis = column_basis(B);
  V.tag = "P" + std::to_string(q) + "L" + std::to_string(k) + "(T)";
  return V;
}

FormSpace map_space(const FormSpace& V, const LinMap& M, int k, int p, const std::string& tag) {
  FormSpace R;
  R.carrier = V.carrier;
  R.k = k;
  R.p = p;
  R.basis = column_basis(M.apply(V.basis));
  R.tag = tag;
  return R;
}

FormSpace elevate(const FormSpace& V, int q) {
  if (q == V.p) return V;
  FormSpace R = V;
  R.p = q;
  R.basis = elevate_map(V.carrier, V.k, V.p, q)->apply(V.basis);
  return R;
}

FormSpace sum(const FormSpace& a, const FormSpace& b, const std::string& tag) {
  if (a.carrier != b.carrier || a.k != b.k) throw std::invalid_argument("sum: incompatible spaces");
  int q = std::max(a.p, b.p);
  FormSpace R;
  R.carrier = a.carrier;
  R.k = a.k;
  R.p = q;
  R.basis = column_basis(elevate(a, q).basis.hstack(elevate(b, q).basis));
  R.tag = tag.empty() ? a.tag + "+" + b.tag : tag;
  return R;
}

FormSpace d_space(const FormSpace& V) {
  return map_space(V, *d_map(V.carrier, V.k, V.p), V.k + 1, std::max(V.p - 1, 0), "d(" + V.tag + ")");
}

FormSpace poincare_space(const FormSpace& V, const Point& W) {
  return map_space(V, *poincare_map(V.carrier, W, V.k, V.p), std::max(V.k - 1, 0), V.p + 1, "p(" + V.tag + ")");
}

RatMatrix membership_rows(const FormSpace& V) { return annihilator(V.basis); }

Augmented augment(const FormSpace& Vk, const FormSpace& Vk1, const Point& W) {
  Augmented out;
  FormSpace pV = poincare_space(Vk1, W);
  out.W = sum(Vk, pV, "aug(" + Vk.tag + ")");
  out.direct = out.W.dim() == Vk.dim() + pV.dim() || rank(Vk.basis) + pV.dim() == out.W.dim();
  // W = d p W (+) p d W, checked by rank
  if (out.W.k >= 1) {
    FormSpace a = d_space(poincare_space(out.W, W));
    FormSpace b = poincare_space(d_space(out.W), W);
    int q = std::max({a.p, b.p, out.W.p});
    RatMatrix A = elevate(a, q).basis, B = elevate(b, q).basis, Wb = elevate(out.W, q).basis;
    std::size_t ra = rank(A), rb = rank(B), rab = rank(A.hstack(B));
    out.decomposition = ra + rb == rab && rab == out.W.dim() && rank(Wb.hstack(A).hstack(B)) == out.W.dim();
  } else {
    out.decomposition = true;
  }
  return out;
}

nlohmann::json to_json(const PolyForm& u) {
  const auto& C = *u.carrier;
  nlohmann::json j;
  j["degree"] = u.k;
  j["poly_degree"] = u.p;
  j["ambient"] = C.n;
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& s : C.pieces) pieces.push_back(s);
  j["pieces"] = pieces;
  nlohmann::json terms = nlohmann::json::array();
  const auto& ms = monomials(C.dim + 1, u.p);
  const auto& am = alt_masks(C.n, u.k);
  for (std::size_t pc = 0; pc < C.pieces.size(); ++pc)
    for (std::size_t mi = 0; mi < ms.size(); ++mi)
      for (std::size_t a = 0; a < am.size(); ++a) {
        const Rational& c = u.coef[C.offset(pc, u.k, u.p) + mi * am.size() + a];
        if (sgn(c) == 0) continue;
        terms.push_back({{"piece", pc}, {"alpha", ms[mi]}, {"alt", mask_axes(am[a])}, {"value", c.get_str()}});
      }
  j["coefficients"] = terms;
  return j;
}

}  // namespace fesc
