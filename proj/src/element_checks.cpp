#include "fesc/elements.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace fesc {

namespace {

using Functional1 = std::function<RatVec(const PolyForm&)>;  // a block of scalar functionals

struct DofBlock {
  std::string what;
  Functional1 f;
};

RatVec midpoint(const std::vector<Point>& pts) {
  RatVec m(pts[0].size(), Rational(0));
  for (const auto& p : pts)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += p[i];
  for (auto& x : m) x /= static_cast<long>(pts.size());
  return m;
}

Rational dot(const RatVec& a, const RatVec& b) {
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

DofCheck run(const std::string& name, int k, const FormSpace& V, const std::vector<DofBlock>& blocks) {
  std::vector<RatVec> rows;
  for (std::size_t j = 0; j < V.dim(); ++j) {
    PolyForm u = V.element(j);
    RatVec col;
    for (const auto& b : blocks) {
      RatVec v = b.f(u);
      col.insert(col.end(), v.begin(), v.end());
    }
    rows.push_back(col);  // transposed below
  }
  DofCheck c;
  c.name = name;
  c.k = k;
  c.cols = V.dim();
  RatMatrix M = V.dim() == 0 ? RatMatrix(0, 0) : RatMatrix::from_columns(rows, rows[0].size());
  c.rows = M.rows();
  c.rank = rank(M);
  c.square = c.rows == c.cols;
  c.injective = c.rank == c.cols;
  return c;
}

FormSpace top_space(const Element& el, int T, int k) {
  const auto& sp = el.sys.spaces[T][k];
  FormSpace V;
  V.carrier = el.sys.cx->cells[T].carrier;
  V.k = k;
  V.p = sp.p0;
  V.basis = sp.basis;
  V.tag = sp.tag;
  return V;
}

}  // namespace

std::vector<DofCheck> unisolvence_tests(const Element& el, int T) {
  const auto& sys = el.sys;
  const auto& cx = *sys.cx;
  if (cx.cells[T].dim != sys.n()) throw std::invalid_argument("unisolvence_tests: T must be a top cell");
  const int n = sys.n();
  const auto& name = el.spec.name;
  const Simplex& tv = cx.cells[T].verts;
  const auto& C = cx.cells[T].carrier;

  auto faces = [&](int d) {
    std::vector<int> out;
    for (const auto& F : subcells(tv, d)) out.push_back(cx.find(F));
    return out;
  };
  auto vertex_values = [&](bool of_d) {
    return DofBlock{of_d ? "vertex values of d" : "vertex values", [&, of_d](const PolyForm& u) {
                      RatVec out;
                      PolyForm w = of_d ? exterior_derivative(u) : u;
                      for (const auto& V : C->cell) {
                        RatVec v = evaluate(w, V);
                        out.insert(out.end(), v.begin(), v.end());
                      }
                      return out;
                    }};
  };
  auto face_integrals = [&](int d) {
    return DofBlock{std::to_string(d) + "-face integrals", [&, d](const PolyForm& u) {
                      RatVec out;
                      if (d == n) {
                        out.push_back(integrate(u));
                        return out;
                      }
                      for (int F : faces(d)) out.push_back(integrate(pullback(u, cx.cells[F].carrier)));
                      return out;
                    }};
  };
  // transverse value at the edge midpoint (of u, or of du when of_d)
  auto mu_E = [&](bool of_d) {
    return DofBlock{of_d ? "mu_E(du)" : "mu_E(u)", [&, of_d](const PolyForm& u) {
                      RatVec out;
                      PolyForm w = of_d ? exterior_derivative(u) : u;
                      for (int E : faces(1)) {
                        const auto& CE = cx.cells[E].carrier;
                        out.push_back(dot(evaluate(w, midpoint(CE->cell)), edge_normal(CE)));
                      }
                      return out;
                    }};
  };

  std::vector<DofCheck> out;
  if (name == "ct-full" || (name == "ct-highorder" && el.spec.p == 3)) {
    out.push_back(run(name + " A0", 0, top_space(el, T, 0), {vertex_values(false), vertex_values(true), mu_E(true)}));
    out.push_back(run(name + " A1", 1, top_space(el, T, 1),
                      {vertex_values(false), vertex_values(true), mu_E(false), face_integrals(1)}));
    out.push_back(run(name + " A2", 2, top_space(el, T, 2), {vertex_values(false), face_integrals(2)}));
  } else if (name == "ct-minimal") {
    out.push_back(run(name + " A0", 0, top_space(el, T, 0), {vertex_values(false), vertex_values(true)}));
    out.push_back(run(name + " A1", 1, top_space(el, T, 1), {vertex_values(false), vertex_values(true), face_integrals(1)}));
    out.push_back(run(name + " A2", 2, top_space(el, T, 2), {vertex_values(false), face_integrals(2)}));
  } else if (name == "ct-dg-minimal") {
    out.push_back(run(name + " A0", 0, top_space(el, T, 0), {vertex_values(false), vertex_values(true)}));
    out.push_back(run(name + " A1", 1, top_space(el, T, 1), {vertex_values(false), face_integrals(1)}));
    out.push_back(run(name + " A2", 2, top_space(el, T, 2), {face_integrals(2)}));
  } else if (name == "ct-dg") {
    // only the C1 space has a settled DoF set
    out.push_back(run(name + " A0", 0, top_space(el, T, 0), {vertex_values(false), vertex_values(true), mu_E(true)}));
  } else if (name == "ps3d" || name == "ps3d-branch") {
    const int ell = name == "ps3d" ? n : el.spec.ell;
    for (int k = 0; k <= n; ++k) {
      std::vector<DofBlock> b;
      if (k < ell) {
        b = {vertex_values(false), vertex_values(true)};
        if (k >= 1) b.push_back(face_integrals(k));
      } else if (k == ell) {
        b = {vertex_values(false)};
        if (k >= 1) b.push_back(face_integrals(k));
      } else {
        b = {face_integrals(k)};
      }
      out.push_back(run(name + " A" + std::to_string(k), k, top_space(el, T, k), b));
    }
  }
  return out;
}

DofCheck duconst_check(const SplitContext& ctx, const Simplex& S, int k) {
  auto C = ctx.carrier(k, S);
  FormSpace V = c0_space(C, k, 1);
  if (k < C->n) {
    // du constant on S: every piecewise constant component equal across pieces
    FormSpace consts = global_space(C, k + 1, 0, 0);
    RatMatrix D = d_map(C, k, 1)->dense();
    V = restrict_space(V, membership_rows(consts) * D * V.basis);
  }
  std::vector<RatVec> cols;
  for (std::size_t j = 0; j < V.dim(); ++j) {
    PolyForm u = V.element(j);
    RatVec col;
    for (const auto& P : C->cell) {
      RatVec v = evaluate(u, P);
      col.insert(col.end(), v.begin(), v.end());
    }
    cols.push_back(col);
  }
  DofCheck c;
  c.name = "vertex values on C0P1L" + std::to_string(k) + "(R_" + std::to_string(k) + ") with constant d";
  c.k = k;
  c.cols = V.dim();
  RatMatrix M = cols.empty() ? RatMatrix(0, 0) : RatMatrix::from_columns(cols, cols[0].size());
  c.rows = M.rows();
  c.rank = rank(M);
  c.square = c.rows == c.cols;
  c.injective = c.rank == c.cols;
  return c;
}

FourSector four_sector(const std::vector<Point>& rays0) {
  std::vector<Point> rays = rays0;
  if (rays.empty())
    rays = {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}, {Rational(-1), Rational(0)}, {Rational(0), Rational(-1)}};
  if (rays.size() != 4) throw std::invalid_argument("four_sector: four rays expected (counterclockwise)");
  auto verts = std::make_shared<std::vector<Point>>();
  verts->push_back({Rational(0), Rational(0)});
  Rational M = 0;
  for (const auto& r : rays) {
    verts->push_back(r);
    for (const auto& x : r) M = std::max(M, Rational(abs(x)));
  }
  // every piece sits inside a frame triangle, which only fixes the barycentric frame
  std::vector<Point> frame{{-2 * M, -2 * M}, {6 * M, -2 * M}, {-2 * M, 6 * M}};
  std::vector<Simplex> pieces{{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 1, 4}};
  FourSector fs;
  fs.carrier = make_carrier(verts, pieces, frame);
  const auto& C = fs.carrier;
  fs.A0 = constrained_space(C, 2, 0, Continuity::C1);
  fs.A1 = constrained_space(C, 1, 1, Continuity::C0);
  fs.A2 = broken_space(C, 2, 0);
  // u(++) - u(-+) + u(--) - u(+-): alternating over the sectors in counterclockwise order
  fs.end_map.assign(fs.A2.dim(), Rational(0));
  for (std::size_t j = 0; j < fs.A2.dim(); ++j) {
    PolyForm u = fs.A2.element(j);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto pts = C->piece_points(i);
      Rational v = evaluate_on_piece(u, i, midpoint(pts))[0];
      // value on the frame (e1, e2) of the sector's rays: u(r_i, r_{i+1}) / det(r_i, r_{i+1})
      fs.end_map[j] += (i % 2 == 0 ? 1 : -1) * v;
    }
  }
  RatMatrix D0 = d_map(C, 0, 2)->dense() * fs.A0.basis;
  RatMatrix D1 = d_map(C, 1, 1)->dense() * fs.A1.basis;
  const long r0 = static_cast<long>(rank(D0)), r1 = static_cast<long>(rank(D1));
  bool end_nonzero = std::any_of(fs.end_map.begin(), fs.end_map.end(), [](const Rational& q) { return q != 0; });
  const long re = end_nonzero ? 1 : 0;
  fs.d_image = static_cast<std::size_t>(r1);
  fs.end_kernel = fs.A2.dim() - static_cast<std::size_t>(re);
  fs.end_surjective = re == 1;
  fs.cohomology = {static_cast<int>(static_cast<long>(fs.A0.dim()) - r0 - 1),
                   static_cast<int>(static_cast<long>(fs.A1.dim()) - r1 - r0),
                   static_cast<int>(static_cast<long>(fs.A2.dim()) - re - r1), static_cast<int>(1 - re)};
  return fs;
}

nlohmann::json element_descriptor(const Element& el) {
  nlohmann::json j;
  const auto& sys = el.sys;
  const int n = sys.n();
  j["name"] = el.spec.name;
  j["n"] = n;
  j["p"] = el.spec.p;
  if (el.spec.name == "ps3d-branch") j["ell"] = el.spec.ell;
  j["pressure"] = pressure_continuity(el.spec);
  j["carrier_refinement"] = el.carrier_level;
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : sys.kinds) kinds.push_back(to_string(k));
  j["restriction_kinds"] = kinds;
  nlohmann::json faces = nlohmann::json::array();
  for (int d = 0; d <= n; ++d) {
    auto cs = sys.cx->cells_of_dim(d);
    if (cs.empty()) continue;
    const int c = cs.front();
    nlohmann::json f;
    f["dim"] = d;
    std::vector<std::size_t> dims, zd;
    std::vector<std::string> tags;
    for (int k = 0; k <= n; ++k) {
      dims.push_back(sys.dim(c, k));
      zd.push_back(zero_boundary_subspace(sys, c, k).cols());
      tags.push_back(sys.spaces[c][k].tag);
    }
    f["dims"] = dims;
    f["zero_dims"] = zd;
    f["spaces"] = tags;
    faces.push_back(f);
  }
  j["faces"] = faces;
  nlohmann::json exp = nlohmann::json::array();
  for (const auto& e : expected_dims(el.spec)) exp.push_back({{"what", e.what}, {"expected", e.expected}, {"source", e.source}});
  j["expected"] = exp;
  j["notes"] = el.notes;
  return j;
}

nlohmann::json element_descriptor(const Element& el, const DofSet& dofs) {
  nlohmann::json j = element_descriptor(el);
  const auto& sys = el.sys;
  nlohmann::json schema = nlohmann::json::array();
  for (int d = 0; d <= sys.n(); ++d) {
    auto cs = sys.cx->cells_of_dim(d);
    if (cs.empty()) continue;
    for (int k = 0; k <= sys.n(); ++k) {
      nlohmann::json s;
      s["face_dim"] = d;
      s["k"] = k;
      s["count"] = dofs.count(cs.front(), k);
      nlohmann::json types = nlohmann::json::array();
      for (const auto& f : dofs.functionals[cs.front()][k])
        types.push_back(f.type == Functional::Type::Pair ? "pair" : f.type == Functional::Type::DPair ? "d-pair" : "integral");
      s["types"] = types;
      schema.push_back(s);
    }
  }
  j["dof_schema"] = schema;
  j["dof_warnings"] = dofs.warnings;
  return j;
}

}  // namespace fesc
