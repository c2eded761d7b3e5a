#include "fesc/splits.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace fesc {

namespace {

std::string sstr(const Simplex& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
  return r + "]";
}

bool strictly_interior(const std::vector<Point>& pts, const Point& x) {
  bool hull = false;
  auto l = barycentric(pts, x, &hull);
  return hull && std::all_of(l.begin(), l.end(), [](const Rational& q) { return sgn(q) > 0; });
}

// affine dimension of a point set
std::size_t affine_rank(const std::vector<Point>& pts) {
  if (pts.size() < 2) return 0;
  RatMatrix M(pts.size() - 1, pts[0].size());
  for (std::size_t i = 1; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[0].size(); ++j) M(i - 1, j) = pts[i][j] - pts[0][j];
  return rank(M);
}

std::vector<Simplex> maximal_simplices(const SimplicialComplex& K) {
  std::vector<Simplex> out;
  for (int k = K.dim(); k >= 0; --k)
    for (const auto& s : K.simplices(k)) {
      bool covered = false;
      for (const auto& t : out)
        if (std::includes(t.begin(), t.end(), s.begin(), s.end())) {
          covered = true;
          break;
        }
      if (!covered) out.push_back(s);
    }
  return out;
}

}  // namespace

std::string to_string(InpointStrategy s) {
  switch (s) {
    case InpointStrategy::Isobarycenter: return "isobarycenter";
    case InpointStrategy::Circumcenter: return "circumcenter";
    case InpointStrategy::Explicit: return "explicit";
  }
  return "?";
}

const Point& InpointAssignment::at(const Simplex& s) const {
  auto it = points.find(s);
  if (it == points.end()) throw std::out_of_range("no inpoint for simplex " + sstr(s));
  return it->second;
}

Point isobarycenter(const std::vector<Point>& pts) {
  Point c(pts.at(0).size());
  for (const auto& p : pts)
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += p[j];
  for (auto& x : c) x /= static_cast<long>(pts.size());
  return c;
}

Point circumcenter(const std::vector<Point>& pts) {
  const std::size_t d = pts.size() - 1, n = pts[0].size();
  if (d == 0) return pts[0];
  RatMatrix E(n, d);
  RatVec rhs(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      E(j, i) = pts[i + 1][j] - pts[0][j];
      rhs[i] += E(j, i) * E(j, i);
    }
    rhs[i] /= 2;
  }
  auto y = solve(E.transpose() * E, rhs);
  if (!y) throw std::runtime_error("circumcenter: degenerate simplex");
  Point c = pts[0];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j] += E(j, i) * (*y)[i];
  return c;
}

bool strictly_acute(const std::vector<Point>& pts) {
  Simplex all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back(static_cast<int>(i));
  for (int k = 2; k < static_cast<int>(pts.size()); ++k)
    for (const auto& f : subcells(all, k)) {
      std::vector<Point> fp;
      for (int i : f) fp.push_back(pts[static_cast<std::size_t>(i)]);
      if (!strictly_interior(fp, circumcenter(fp))) return false;
    }
  return true;
}

InpointAssignment isobarycenter_inpoints(const SimplicialComplex& K, int min_dim) {
  InpointAssignment a;
  a.strategy = InpointStrategy::Isobarycenter;
  for (int k = std::max(1, min_dim); k <= K.dim(); ++k)
    for (const auto& s : K.simplices(k)) a.points[s] = isobarycenter(K.points(s));
  return a;
}

InpointAssignment worsey_farin_inpoints(const SimplicialComplex& K, const InpointAssignment& cells) {
  const int n = K.ambient_dim();
  if (n != 3 || K.dim() != 3) throw std::invalid_argument("worsey_farin_inpoints: 3D mesh required");
  InpointAssignment a = isobarycenter_inpoints(K);
  a.strategy = InpointStrategy::Explicit;
  for (const auto& s : K.simplices(3)) {
    const Point& w = cells.at(s);
    if (!strictly_interior(K.points(s), w)) throw std::invalid_argument("cell inpoint outside simplex " + sstr(s));
    a.points[s] = w;
  }
  for (const auto& f : K.simplices(2)) {
    auto ts = K.cofaces(f, 3);
    if (ts.size() != 2) continue;
    const Point &a0 = a.points[ts[0]], &a1 = a.points[ts[1]];
    // plane of f: normal via the 3x3 cofactor trick; solve for t with
    // normal . (a0 + t (a1 - a0) - f0) = 0
    auto fp = K.points(f);
    Point u(3), v(3), nrm(3);
    for (int j = 0; j < 3; ++j) {
      u[j] = fp[1][j] - fp[0][j];
      v[j] = fp[2][j] - fp[0][j];
    }
    nrm[0] = u[1] * v[2] - u[2] * v[1];
    nrm[1] = u[2] * v[0] - u[0] * v[2];
    nrm[2] = u[0] * v[1] - u[1] * v[0];
    Rational num = 0, den = 0;
    for (int j = 0; j < 3; ++j) {
      num += nrm[j] * (fp[0][j] - a0[j]);
      den += nrm[j] * (a1[j] - a0[j]);
    }
    if (sgn(den) == 0) throw std::invalid_argument("Worsey-Farin: segment parallel to face " + sstr(f));
    Rational t = num / den;
    Point x(3);
    for (int j = 0; j < 3; ++j) x[j] = a0[j] + t * (a1[j] - a0[j]);
    if (sgn(t) <= 0 || t >= 1 || !strictly_interior(fp, x))
      throw std::invalid_argument("Worsey-Farin: segment between cell inpoints misses the open face " + sstr(f));
    a.points[f] = x;
  }
  return a;
}

InpointAssignment worsey_farin_inpoints(const SimplicialComplex& K) {
  return worsey_farin_inpoints(K, isobarycenter_inpoints(K, 3));
}

InpointAssignment worsey_piper_inpoints(const SimplicialComplex& K) {
  if (K.ambient_dim() != 3 || K.dim() != 3) throw std::invalid_argument("worsey_piper_inpoints: 3D mesh required");
  InpointAssignment a;
  a.strategy = InpointStrategy::Circumcenter;
  for (int k = 1; k <= 3; ++k)
    for (const auto& s : K.simplices(k)) {
      auto pts = K.points(s);
      if (k >= 2 && !strictly_acute(pts)) throw std::invalid_argument("simplex " + sstr(s) + " is not strictly acute");
      a.points[s] = circumcenter(pts);
    }
  // face inpoints on the segment joining adjacent cell inpoints
  for (const auto& f : K.simplices(2)) {
    auto ts = K.cofaces(f, 3);
    if (ts.size() == 2 && affine_rank({a.points[ts[0]], a.points[ts[1]], a.points[f]}) > 1)
      throw std::invalid_argument("Worsey-Piper: face inpoint off the connecting line at " + sstr(f));
  }
  // edge coplanarity
  for (const auto& e : K.simplices(1)) {
    std::vector<Point> pts{a.points[e]};
    for (int k = 2; k <= 3; ++k)
      for (const auto& s : K.cofaces(e, k)) pts.push_back(a.points[s]);
    if (affine_rank(pts) > 2) throw std::invalid_argument("Worsey-Piper: inpoints around edge " + sstr(e) + " not coplanar");
  }
  return a;
}

Simplex RefinedComplex::parent(const Simplex& s) const {
  std::set<int> u;
  for (int v : s)
    for (int b : vertex_origin.at(static_cast<std::size_t>(v))) u.insert(b);
  return Simplex(u.begin(), u.end());
}

std::vector<Simplex> RefinedComplex::pieces(const Simplex& T) const {
  std::vector<Simplex> out;
  for (const auto& s : refined->simplices(static_cast<int>(T.size()) - 1)) {
    Simplex p = parent(s);
    if (std::includes(T.begin(), T.end(), p.begin(), p.end())) out.push_back(s);
  }
  return out;
}

int RefinedComplex::vertex_of(const Simplex& T) const {
  for (std::size_t v = 0; v < vertex_origin.size(); ++v)
    if (vertex_origin[v] == T) return static_cast<int>(v);
  return -1;
}

RefinedComplex refine(std::shared_ptr<const SimplicialComplex> mesh, int m, const InpointAssignment& inpoints) {
  const SimplicialComplex& K = *mesh;
  if (m < 0 || m > K.ambient_dim()) throw std::invalid_argument("refine: m out of range");
  RefinedComplex rc;
  rc.base = mesh;
  rc.m = m;
  rc.inpoints = inpoints;
  std::vector<Point> verts = K.vertices();
  std::map<Simplex, int> vid;
  for (std::size_t v = 0; v < K.num_vertices(); ++v) {
    rc.vertex_origin.push_back({static_cast<int>(v)});
    vid[{static_cast<int>(v)}] = static_cast<int>(v);
  }
  for (int k = m + 1; k <= K.dim(); ++k)
    for (const auto& s : K.simplices(k)) {
      if (!inpoints.has(s)) throw std::invalid_argument("refine: missing inpoint for simplex " + sstr(s));
      const Point& w = inpoints.at(s);
      if (!strictly_interior(K.points(s), w))
        throw std::invalid_argument("refine: inpoint outside the open interior of simplex " + sstr(s));
      vid[s] = static_cast<int>(verts.size());
      verts.push_back(w);
      rc.vertex_origin.push_back(s);
    }
  rc.inpoints.points.clear();
  for (int k = m + 1; k <= K.dim(); ++k)
    for (const auto& s : K.simplices(k)) rc.inpoints.points[s] = inpoints.at(s);

  std::vector<Simplex> tops;
  for (const auto& S : maximal_simplices(K)) {
    const int dS = static_cast<int>(S.size()) - 1;
    if (dS <= m) {
      tops.push_back(S);
      continue;
    }
    // maximal chains T' < T_0 < ... < S with dim T' = m and dimensions increasing by one
    std::vector<std::vector<Simplex>> chains;
    for (const auto& Tp : subcells(S, m)) chains.push_back({Tp});
    for (int d = m + 1; d <= dS; ++d) {
      std::vector<std::vector<Simplex>> next;
      for (const auto& ch : chains)
        for (const auto& U : subcells(S, d))
          if (std::includes(U.begin(), U.end(), ch.back().begin(), ch.back().end())) {
            auto c2 = ch;
            c2.push_back(U);
            next.push_back(c2);
          }
      chains = std::move(next);
    }
    for (const auto& ch : chains) {
      Simplex t = ch[0];
      for (std::size_t i = 1; i < ch.size(); ++i) t.push_back(vid.at(ch[i]));
      std::sort(t.begin(), t.end());
      tops.push_back(t);
    }
  }
  rc.refined = std::make_shared<SimplicialComplex>(K.ambient_dim(), verts, tops, false);
  return rc;
}

RefinedComplex refine(std::shared_ptr<const SimplicialComplex> mesh, int m) {
  auto ip = isobarycenter_inpoints(*mesh, m + 1);
  return refine(std::move(mesh), m, ip);
}

bool SplitReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const SplitCheck& c) { return c.pass; });
}

SplitReport validate_split(const RefinedComplex& rc) {
  SplitReport rep;
  const SimplicialComplex& B = *rc.base;
  const SimplicialComplex& R = *rc.refined;
  {
    SplitCheck c{"skeleton", true, ""};
    for (int k = 0; k <= std::min(rc.m, B.dim()); ++k)
      for (const auto& s : B.simplices(k)) {
        auto pc = rc.pieces(s);
        if (!R.contains(s) || pc.size() != 1 || pc[0] != s) {
          c.pass = false;
          c.detail = "base simplex " + sstr(s) + " is refined";
        }
      }
    rep.checks.push_back(c);
  }
  {
    SplitCheck c{"volume", true, ""};
    for (int k = 1; k <= B.dim(); ++k)
      for (const auto& S : B.simplices(k)) {
        auto sp = B.points(S);
        Rational tot = 0;
        std::vector<RatVec> bar;
        for (const auto& t : rc.pieces(S)) {
          // relative volume: determinant of barycentric coordinates of the piece vertices
          RatMatrix M(t.size(), t.size());
          for (std::size_t i = 0; i < t.size(); ++i) {
            auto l = barycentric(sp, R.vertex(t[i]));
            for (std::size_t j = 0; j < t.size(); ++j) M(j, i) = l[j];
          }
          Rational d = determinant(M);
          tot += d < 0 ? Rational(-d) : d;
        }
        if (tot != 1) {
          c.pass = false;
          c.detail = "pieces of " + sstr(S) + " cover relative volume " + to_string(tot);
        }
      }
    rep.checks.push_back(c);
  }
  {
    SplitCheck c{"parent", true, ""};
    for (int k = 0; k <= R.dim(); ++k)
      for (const auto& s : R.simplices(k)) {
        Simplex p = rc.parent(s);
        if (!B.contains(p) || static_cast<int>(p.size()) - 1 < k) {
          c.pass = false;
          c.detail = "bad parent for " + sstr(s);
          continue;
        }
        auto pp = B.points(p);
        for (int v : s) {
          bool hull = false;
          auto l = barycentric(pp, R.vertex(v), &hull);
          if (!hull || std::any_of(l.begin(), l.end(), [](const Rational& q) { return sgn(q) < 0; })) {
            c.pass = false;
            c.detail = "vertex " + std::to_string(v) + " outside parent " + sstr(p);
          }
        }
      }
    rep.checks.push_back(c);
  }
  return rep;
}

bool edge_inpoints_aligned(const RefinedComplex& rc, std::string* why) {
  const SimplicialComplex& B = *rc.base;
  for (const auto& e : B.simplices(1)) {
    if (!rc.inpoints.has(e)) continue;
    std::vector<Point> pts{rc.inpoints.at(e)};
    for (int k = 2; k <= B.dim(); ++k)
      for (const auto& s : B.cofaces(e, k)) pts.push_back(rc.inpoints.at(s));
    if (affine_rank(pts) > static_cast<std::size_t>(B.ambient_dim() - 1)) {
      if (why) *why = "inpoints around edge " + sstr(e) + " are not aligned";
      return false;
    }
  }
  return true;
}

int global_simplex_id(const SimplicialComplex& K, const Simplex& s) {
  int off = 0;
  for (int k = 0; k + 1 < static_cast<int>(s.size()); ++k) off += static_cast<int>(K.count(k));
  int i = K.index_of(s);
  if (i < 0) throw std::out_of_range("simplex not in complex: " + sstr(s));
  return off + i;
}

std::vector<std::pair<int, int>> parent_annotations(const RefinedComplex& rc) {
  std::vector<std::pair<int, int>> out;
  const auto& tops = rc.refined->simplices(rc.refined->dim());
  for (std::size_t i = 0; i < tops.size(); ++i)
    out.emplace_back(static_cast<int>(i), global_simplex_id(*rc.base, rc.parent(tops[i])));
  return out;
}

}  // namespace fesc
