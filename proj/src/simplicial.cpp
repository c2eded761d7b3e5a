#include "fesc/simplicial.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fesc {

namespace {

void all_faces(const Simplex& s, std::set<Simplex>& out) {
  const std::size_t m = s.size();
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    Simplex f;
    for (std::size_t i = 0; i < m; ++i)
      if (mask & (1u << i)) f.push_back(s[i]);
    out.insert(f);
  }
}

std::string simplex_str(const Simplex& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
  return r + "]";
}

}  // namespace

SimplicialComplex::SimplicialComplex(int ambient, std::vector<Point> vertices, const std::vector<Simplex>& tops,
                                     bool check_geometry)
    : n_(ambient), verts_(std::move(vertices)) {
  for (const auto& v : verts_)
    if (static_cast<int>(v.size()) != n_) throw std::invalid_argument("vertex dimension mismatch");
  std::set<Simplex> all;
  for (Simplex t : tops) {
    std::sort(t.begin(), t.end());
    if (std::adjacent_find(t.begin(), t.end()) != t.end()) throw std::invalid_argument("repeated vertex in simplex");
    for (int v : t)
      if (v < 0 || static_cast<std::size_t>(v) >= verts_.size())
        throw std::invalid_argument("vertex index out of range in " + simplex_str(t));
    all_faces(t, all);
  }
  std::size_t maxd = 0;
  for (const auto& s : all) maxd = std::max(maxd, s.size());
  by_dim_.resize(maxd);
  index_.resize(maxd);
  for (const auto& s : all) {  // std::set order is lexicographic, so each dimension list is sorted
    auto k = s.size() - 1;
    index_[k][s] = static_cast<int>(by_dim_[k].size());
    by_dim_[k].push_back(s);
  }
  if (!check_geometry || dim() != n_ || n_ == 0) return;
  const auto& T = by_dim_[static_cast<std::size_t>(n_)];
  for (const auto& t : T)
    if (sgn(signed_volume(points(t))) == 0) throw std::invalid_argument("degenerate simplex " + simplex_str(t));
  // facets: at most two tops, opposite vertices strictly on opposite sides
  std::map<Simplex, std::vector<int>> facet_tops;
  for (std::size_t i = 0; i < T.size(); ++i)
    for (std::size_t j = 0; j < T[i].size(); ++j) {
      Simplex f = T[i];
      f.erase(f.begin() + static_cast<long>(j));
      facet_tops[f].push_back(static_cast<int>(i));
    }
  for (const auto& [f, ts] : facet_tops) {
    if (ts.size() > 2) throw std::invalid_argument("facet " + simplex_str(f) + " shared by more than two simplices");
    if (ts.size() == 2) {
      auto opp = [&](int ti) {
        for (int v : T[static_cast<std::size_t>(ti)])
          if (!std::binary_search(f.begin(), f.end(), v)) return v;
        return -1;
      };
      auto side = [&](int v) {
        auto pts = points(f);
        pts.push_back(vertex(v));
        return sgn(signed_volume(pts));
      };
      if (side(opp(ts[0])) * side(opp(ts[1])) >= 0)
        throw std::invalid_argument("overlapping simplices across facet " + simplex_str(f));
    }
  }
  // desk-scale pairwise test: no vertex or top barycenter strictly inside a foreign top
  for (std::size_t i = 0; i < T.size(); ++i) {
    auto pts = points(T[i]);
    auto strictly_inside = [&](const Point& x) {
      auto l = barycentric(pts, x);
      return std::all_of(l.begin(), l.end(), [](const Rational& q) { return sgn(q) > 0; });
    };
    for (std::size_t v = 0; v < verts_.size(); ++v)
      if (!std::binary_search(T[i].begin(), T[i].end(), static_cast<int>(v)) && strictly_inside(verts_[v]))
        throw std::invalid_argument("vertex " + std::to_string(v) + " inside simplex " + simplex_str(T[i]));
    for (std::size_t j = 0; j < T.size(); ++j) {
      if (i == j) continue;
      Point c(static_cast<std::size_t>(n_));
      for (int v : T[j])
        for (int d = 0; d < n_; ++d) c[static_cast<std::size_t>(d)] += vertex(v)[static_cast<std::size_t>(d)];
      for (auto& x : c) x /= static_cast<long>(T[j].size());
      if (strictly_inside(c))
        throw std::invalid_argument("simplices " + simplex_str(T[i]) + " and " + simplex_str(T[j]) + " overlap");
    }
  }
}

const std::vector<Simplex>& SimplicialComplex::simplices(int k) const {
  static const std::vector<Simplex> empty;
  if (k < 0 || k > dim()) return empty;
  return by_dim_[static_cast<std::size_t>(k)];
}

int SimplicialComplex::index_of(const Simplex& s) const {
  if (s.empty() || static_cast<int>(s.size()) - 1 > dim()) return -1;
  const auto& m = index_[s.size() - 1];
  auto it = m.find(s);
  return it == m.end() ? -1 : it->second;
}

std::vector<Point> SimplicialComplex::points(const Simplex& s) const {
  std::vector<Point> p;
  for (int v : s) p.push_back(vertex(v));
  return p;
}

std::vector<Simplex> SimplicialComplex::cofaces(const Simplex& s, int k) const {
  std::vector<Simplex> out;
  for (const auto& t : simplices(k))
    if (std::includes(t.begin(), t.end(), s.begin(), s.end())) out.push_back(t);
  return out;
}

SimplicialComplex SimplicialComplex::closure_of(const std::vector<Simplex>& gens) const {
  return SimplicialComplex(n_, verts_, gens, false);
}

std::vector<Simplex> subcells(const Simplex& T, int k) {
  std::vector<Simplex> out;
  const int m = static_cast<int>(T.size());
  if (k < 0 || k >= m) return out;
  std::vector<int> idx(static_cast<std::size_t>(k + 1));
  for (int i = 0; i <= k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    Simplex s;
    for (int i : idx) s.push_back(T[static_cast<std::size_t>(i)]);
    out.push_back(s);
    int i = k;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - k - 1 + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j <= k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

int relative_orientation(const Simplex& T, const Simplex& Tp) {
  if (Tp.size() + 1 != T.size()) return 0;
  if (!std::includes(T.begin(), T.end(), Tp.begin(), Tp.end())) return 0;
  for (std::size_t i = 0; i < T.size(); ++i)
    if (!std::binary_search(Tp.begin(), Tp.end(), T[i])) return (i % 2 == 0) ? 1 : -1;
  return 0;
}

std::vector<Simplex> boundary_cells(const Simplex& T) {
  std::vector<Simplex> out;
  for (int k = 0; k + 1 < static_cast<int>(T.size()); ++k) {
    auto s = subcells(T, k);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

RatMatrix coboundary_matrix(const SimplicialComplex& K, int k) {
  const auto& lo = K.simplices(k);
  const auto& hi = K.simplices(k + 1);
  RatMatrix D(hi.size(), lo.size());
  for (std::size_t i = 0; i < hi.size(); ++i)
    for (std::size_t j = 0; j < hi[i].size(); ++j) {
      Simplex f = hi[i];
      f.erase(f.begin() + static_cast<long>(j));
      D(i, static_cast<std::size_t>(K.index_of(f))) = (j % 2 == 0) ? 1 : -1;
    }
  return D;
}

Cochain coboundary(const SimplicialComplex& K, const Cochain& c) {
  if (c.values.size() != K.count(c.degree)) throw std::invalid_argument("cochain length mismatch");
  return Cochain{c.degree + 1, coboundary_matrix(K, c.degree) * c.values};
}

std::vector<int> cellular_cohomology(const SimplicialComplex& K) {
  std::vector<int> h;
  std::size_t prev_rank = 0;
  for (int k = 0; k <= K.dim(); ++k) {
    std::size_t r = k < K.dim() ? rank(coboundary_matrix(K, k)) : 0;
    h.push_back(static_cast<int>(K.count(k) - r - prev_rank));
    prev_rank = r;
  }
  return h;
}

RatVec barycentric(const std::vector<Point>& s, const Point& x, bool* in_hull) {
  const std::size_t d = s.size() - 1, n = x.size();
  RatVec lam(s.size());
  if (d == 0) {
    lam[0] = 1;
    if (in_hull) *in_hull = (x == s[0]);
    return lam;
  }
  RatMatrix E(n, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) E(j, i) = s[i + 1][j] - s[0][j];
  RatVec r(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = x[j] - s[0][j];
  RatMatrix ET = E.transpose();
  auto y = solve(ET * E, ET * r);
  if (!y) throw std::runtime_error("barycentric: degenerate simplex");
  lam[0] = 1;
  for (std::size_t i = 0; i < d; ++i) {
    lam[i + 1] = (*y)[i];
    lam[0] -= (*y)[i];
  }
  if (in_hull) *in_hull = (E * *y == r);
  return lam;
}

MeshFile parse_mesh(std::istream& in) {
  MeshFile mf;
  std::string line;
  bool have_dim = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    auto err = [&](const std::string& m) {
      return std::runtime_error("mesh line " + std::to_string(lineno) + ": " + m);
    };
    if (tag == "dim") {
      if (!(ls >> mf.dim) || mf.dim < 1) throw err("bad dim");
      have_dim = true;
    } else if (tag == "v") {
      if (!have_dim) throw err("vertex before dim");
      Point p;
      std::string tok;
      while (ls >> tok) p.push_back(parse_rational(tok));
      if (static_cast<int>(p.size()) != mf.dim) throw err("vertex has wrong number of coordinates");
      mf.vertices.push_back(p);
    } else if (tag == "s") {
      if (!have_dim) throw err("simplex before dim");
      Simplex s;
      int i;
      while (ls >> i) s.push_back(i);
      if (static_cast<int>(s.size()) != mf.dim + 1) throw err("simplex has wrong number of vertices");
      mf.tops.push_back(s);
    } else if (tag == "p") {
      int a, b;
      if (!(ls >> a >> b)) throw err("bad parent line");
      mf.parents.emplace_back(a, b);
    } else {
      throw err("unknown tag '" + tag + "'");
    }
  }
  if (!have_dim) throw std::runtime_error("mesh: missing dim line");
  return mf;
}

MeshFile read_mesh_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open mesh file " + path);
  return parse_mesh(f);
}

SimplicialComplex to_complex(const MeshFile& mf, bool check_geometry) {
  return SimplicialComplex(mf.dim, mf.vertices, mf.tops, check_geometry);
}

void write_mesh(std::ostream& out, const SimplicialComplex& K, const std::vector<std::pair<int, int>>& parents) {
  out << "dim " << K.ambient_dim() << "\n";
  for (const auto& v : K.vertices()) {
    out << "v";
    for (const auto& c : v) out << " " << to_string(c);
    out << "\n";
  }
  for (const auto& s : K.simplices(K.dim())) {
    out << "s";
    for (int i : s) out << " " << i;
    out << "\n";
  }
  for (const auto& [c, b] : parents) out << "p " << c << " " << b << "\n";
}

}  // namespace fesc
