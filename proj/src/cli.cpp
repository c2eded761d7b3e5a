#include "fesc/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fesc {

std::shared_ptr<const SimplicialComplex> named_fixture(const std::string& name) {
  if (name == "triangle") return reference_triangle();
  if (name == "square") return unit_square();
  if (name == "annulus") return annulus_mesh();
  if (name == "tet") return reference_tet();
  if (name == "tet-pair") return tet_pair();
  if (name == "cube") return cube_mesh();
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

std::shared_ptr<const SimplicialComplex> default_fixture(const ElementSpec& s) {
  if (s.n == 3) return reference_tet();
  if (s.name == "ps3d-branch" && s.n == 2) return reference_simplex(2);
  return reference_triangle();
}

namespace {

nlohmann::json dof_check_json(const DofCheck& c) {
  return {{"name", c.name}, {"k", c.k}, {"rows", c.rows}, {"cols", c.cols}, {"rank", c.rank},
          {"square", c.square}, {"injective", c.injective}};
}

// the computed value behind one expected-dimension label
std::optional<long> computed_dim(const Element& el, const std::string& what) {
  const auto& sys = el.sys;
  const int n = sys.n();
  const int T = sys.cx->cells_of_dim(n).front();
  const Simplex& tv = sys.cx->cells[T].verts;
  auto k_of = [](const std::string& s, std::size_t at) { return s[at] - '0'; };
  if (what.size() == 2 && what[0] == 'A') return static_cast<long>(sys.dim(T, k_of(what, 1)));
  if (what.size() == 2 && what[0] == 'K') {
    auto it = el.aux.find(what);
    if (it == el.aux.end()) return std::nullopt;
    return static_cast<long>(it->second.at(T).dim());
  }
  if (what.rfind("edge A", 0) == 0) {
    const int E = sys.cx->cells_of_dim(1).front();
    const int k = k_of(what, 6);
    if (what.size() > 7) return static_cast<long>(zero_boundary_subspace(sys, E, k).cols());
    return static_cast<long>(sys.dim(E, k));
  }
  if (what == "C0P1L1(R0)") return static_cast<long>(c0_space(el.ctx->carrier(0, tv), 1, 1).dim());
  if (what == "C0P1L2(R1)") return static_cast<long>(c0_space(el.ctx->carrier(1, tv), 2, 1).dim());
  return std::nullopt;
}

void emit(std::ostream& out, const nlohmann::json& j, const std::string& format) {
  if (format == "text") {
    for (const auto& [k, v] : j.items()) out << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  } else {
    out << j.dump(2) << "\n";
  }
}

void emit_to(const std::string& path, std::ostream& out, const nlohmann::json& j, const std::string& format) {
  if (path.empty()) {
    emit(out, j, format);
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  emit(f, j, format);
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ElementSpec read_element_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read element file " + path);
  nlohmann::json j = nlohmann::json::parse(f);  // throws on corrupt input
  ElementSpec s;
  s.name = j.at("name").get<std::string>();
  if (j.contains("n")) s.n = j.at("n").get<int>();
  if (j.contains("p")) s.p = j.at("p").get<int>();
  if (j.contains("ell")) s.ell = j.at("ell").get<int>();
  return validate(s);
}

std::shared_ptr<const SimplicialComplex> load_mesh(const std::string& path) {
  return std::make_shared<SimplicialComplex>(to_complex(read_mesh_file(path)));
}

}  // namespace

nlohmann::json verify_report(const ElementSpec& spec0, std::shared_ptr<const SimplicialComplex> mesh, bool* ok) {
  ElementSpec spec = validate(spec0);
  if (!mesh) mesh = default_fixture(spec);
  nlohmann::json j;
  bool pass = true;
  auto el = build(spec, mesh);
  auto dofs = harmonic_dofs(el->sys);
  j["element"] = element_descriptor(*el, dofs);

  nlohmann::json dims = nlohmann::json::array();
  for (const auto& e : expected_dims(spec)) {
    auto c = computed_dim(*el, e.what);
    nlohmann::json d{{"space", e.what}, {"expected", e.expected}, {"provenance", e.source}};
    if (c) {
      d["computed"] = *c;
      d["ok"] = *c == e.expected;
      pass = pass && *c == e.expected;
    }
    dims.push_back(d);
  }
  j["dims"] = dims;

  auto rep = check_compatibility(el->sys);
  j["compatibility"] = to_json(rep);
  pass = pass && rep.compatible;

  const int n = el->sys.n();
  const int T = el->sys.cx->cells_of_dim(n).front();
  nlohmann::json uni = nlohmann::json::array();
  for (const auto& c : unisolvence_tests(*el, T)) {
    uni.push_back(dof_check_json(c));
    pass = pass && c.injective && c.square;
  }
  j["unisolvence"] = uni;
  if (spec.name == "ps3d") {
    nlohmann::json dc = nlohmann::json::array();
    for (int k = 0; k <= n; ++k) {
      auto c = duconst_check(*el->ctx, el->sys.cx->cells[T].verts, k);
      dc.push_back(dof_check_json(c));
      pass = pass && c.injective;
    }
    j["constant_differential"] = dc;
  }
  std::vector<std::size_t> top;
  for (int k = 0; k <= n; ++k) top.push_back(el->sys.dim(T, k));
  j["known_discrepancies"] = formula_discrepancies(spec, top);
  j["status"] = pass ? "pass" : "fail";
  if (ok) *ok = pass;
  return j;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fesc: composite finite element de Rham complexes"};
  app.require_subcommand(1);
  std::string format = "json", out_path;

  // verify
  auto* verify = app.add_subcommand("verify", "build an element on its fixture and check every property");
  std::string v_name, v_mesh;
  int v_p = 0, v_ell = -1, v_n = 0;
  verify->add_option("element", v_name, "catalog name")->required();
  verify->add_option("--p", v_p, "polynomial degree (ct-highorder)");
  verify->add_option("--ell", v_ell, "branch index (ps3d-branch)");
  verify->add_option("--n", v_n, "dimension (ps3d-branch)");
  verify->add_option("--mesh", v_mesh, "mesh file instead of the reference fixture");

  // cohomology
  auto* cohom = app.add_subcommand("cohomology", "global cohomology against the cellular one");
  std::string c_name, c_file, c_mesh, c_fixture = "square";
  int c_p = 0, c_ell = -1;
  auto* c_el = cohom->add_option("--element", c_name, "catalog name");
  auto* c_ef = cohom->add_option("--element-file", c_file, "element JSON (name, p, ell, n)");
  c_el->excludes(c_ef);
  cohom->add_option("--p", c_p);
  cohom->add_option("--ell", c_ell);
  cohom->add_option("--mesh", c_mesh, "mesh file");
  cohom->add_option("--fixture", c_fixture, "triangle | square | annulus | tet | tet-pair | cube");

  // stokes
  auto* stokes = app.add_subcommand("stokes", "solve Stokes on a refinement series");
  std::string s_name = "ct-dg-minimal", s_case = "manufactured", s_mesh, s_table;
  int s_levels = 3;
  stokes->add_option("--element", s_name);
  stokes->add_option("--case", s_case, "manufactured | enclosed")->check(CLI::IsMember({"manufactured", "enclosed"}));
  stokes->add_option("--levels", s_levels)->check(CLI::Range(1, 6));
  stokes->add_option("--mesh", s_mesh, "coarse mesh (default: unit square, first level refined once)");
  stokes->add_option("--table", s_table, "sampled-field table of the finest level");

  // infsup
  auto* infsup = app.add_subcommand("infsup", "inf-sup series over uniform refinements");
  std::string i_name = "ct-dg-minimal", i_mesh;
  int i_levels = 3;
  bool i_broken = false;
  infsup->add_option("--element", i_name);
  infsup->add_option("--levels", i_levels)->check(CLI::Range(1, 6));
  infsup->add_option("--mesh", i_mesh);
  infsup->add_flag("--broken", i_broken, "also the P1/P0 pair on the same meshes");

  // mesh
  auto* mesh = app.add_subcommand("mesh", "mesh utilities");
  mesh->require_subcommand(1);
  std::string m_in, m_strategy = "isobarycenter";
  int m_m = 1, m_levels = 1, m_sq_levels = 0;
  auto* m_refine = mesh->add_subcommand("refine", "uniform midpoint refinement (2D)");
  m_refine->add_option("input", m_in)->required()->check(CLI::ExistingFile);
  m_refine->add_option("--levels", m_levels)->check(CLI::Range(0, 6));
  auto* m_split = mesh->add_subcommand("split", "R_m refinement");
  m_split->add_option("input", m_in)->required()->check(CLI::ExistingFile);
  m_split->add_option("--m", m_m);
  m_split->add_option("--strategy", m_strategy, "isobarycenter | worsey-farin | worsey-piper")
      ->check(CLI::IsMember({"isobarycenter", "worsey-farin", "worsey-piper"}));
  auto* m_annulus = mesh->add_subcommand("annulus", "8-triangle ring");
  auto* m_cube = mesh->add_subcommand("cube", "unit cube, 6 tetrahedra");
  auto* m_square = mesh->add_subcommand("square", "unit square, 2 triangles, refined");
  m_square->add_option("--levels", m_sq_levels)->check(CLI::Range(0, 6));

  for (auto* sc : {verify, cohom, stokes, infsup}) {
    sc->add_option("--format", format)->check(CLI::IsMember({"json", "text"}));
    sc->add_option("--out", out_path, "write the report here");
  }
  for (auto* sc : {m_refine, m_split, m_annulus, m_cube, m_square}) sc->add_option("--out", out_path);

  std::vector<std::string> argv_s{"fesc"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_s) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  // usage problems found after parsing (invalid specs) exit 1; failures exit 2
  try {
    if (verify->parsed()) {
      ElementSpec s{v_name, v_n, v_p, v_ell};
      try {
        s = validate(s);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      bool ok = false;
      nlohmann::json rep;
      try {
        rep = verify_report(s, v_mesh.empty() ? nullptr : load_mesh(v_mesh), &ok);
      } catch (const FESError& e) {
        rep = {{"element", s.name}, {"status", "fail"}, {"error", e.what()}};
      }
      emit_to(out_path, out, rep, format);
      return ok ? kExitOk : kExitFailure;
    }
    if (cohom->parsed()) {
      ElementSpec s;
      if (!c_file.empty()) {
        try {
          s = read_element_file(c_file);
        } catch (const std::exception& e) {
          err << "element file: " << e.what() << "\n";
          return kExitFailure;
        }
      } else {
        if (c_name.empty()) throw UsageError("--element or --element-file required");
        try {
          s = validate(ElementSpec{c_name, 0, c_p, c_ell});
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      auto m = c_mesh.empty() ? named_fixture(c_fixture) : load_mesh(c_mesh);
      auto r = de_rham_check(m, s);
      nlohmann::json j = to_json(r);
      j["element"] = s.name;
      emit_to(out_path, out, j, format);
      return r.matches ? kExitOk : kExitFailure;
    }
    if (stokes->parsed() || infsup->parsed()) {
      const bool is_stokes = stokes->parsed();
      const std::string name = is_stokes ? s_name : i_name;
      const std::string mpath = is_stokes ? s_mesh : i_mesh;
      const int levels = is_stokes ? s_levels : i_levels;
      ElementSpec s;
      try {
        s = validate(ElementSpec{name});
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::shared_ptr<const SimplicialComplex> m = mpath.empty() ? unit_square(1) : load_mesh(mpath);
      nlohmann::json rows = nlohmann::json::array();
      std::vector<double> series;
      for (int l = 0; l < levels; ++l) {
        nlohmann::json row{{"level", l}, {"cells", m->count(m->dim())}};
        if (is_stokes) {
          auto prob = s_case == "manufactured" ? manufactured_problem() : enclosed_flow_problem(m->ambient_dim());
          auto sol = stokes_solve(m, s, prob);
          row["velocity_dofs"] = sol.V->dim;
          row["pressure_dofs"] = sol.Q->dim;
          row["max_div"] = sol.max_div;
          row["momentum_residual"] = sol.momentum_residual;
          row["mass_residual"] = sol.mass_residual;
          if (sol.velocity_error) {
            row["velocity_l2_error"] = *sol.velocity_error;
            series.push_back(*sol.velocity_error);
          }
          if (l + 1 == levels && !s_table.empty()) {
            std::ofstream f(s_table);
            if (!f) throw std::runtime_error("cannot write " + s_table);
            write_field_table(f, sol);
          }
        } else {
          const double b = inf_sup(m, s);
          row["inf_sup"] = b;
          series.push_back(b);
          if (i_broken) row["p1p0_inf_sup"] = p1p0_inf_sup(*m);
        }
        rows.push_back(row);
        if (l + 1 < levels) m = red_refine(*m);
      }
      nlohmann::json j{{"element", s.name}, {"levels", rows}};
      if (is_stokes) {
        j["case"] = s_case;
        bool dec = series.size() == static_cast<std::size_t>(levels);
        for (std::size_t i = 1; i < series.size(); ++i) dec = dec && series[i] < series[i - 1];
        if (s_case == "manufactured") j["error_decreasing"] = dec;
      } else {
        const double lo = *std::min_element(series.begin(), series.end());
        const double hi = *std::max_element(series.begin(), series.end());
        j["positive"] = lo > 0;
        j["relative_spread"] = hi > 0 ? (hi - lo) / hi : 0.0;
      }
      emit_to(out_path, out, j, format);
      return kExitOk;
    }
    if (mesh->parsed()) {
      std::shared_ptr<const SimplicialComplex> K;
      std::vector<std::pair<int, int>> parents;
      if (m_refine->parsed()) {
        K = load_mesh(m_in);
        for (int l = 0; l < m_levels; ++l) K = red_refine(*K);
      } else if (m_split->parsed()) {
        auto base = load_mesh(m_in);
        InpointAssignment ip = m_strategy == "worsey-farin"   ? worsey_farin_inpoints(*base)
                               : m_strategy == "worsey-piper" ? worsey_piper_inpoints(*base)
                                                              : isobarycenter_inpoints(*base, m_m + 1);
        auto rc = refine(base, m_m, ip);
        K = rc.refined;
        parents = parent_annotations(rc);
      } else if (m_annulus->parsed()) {
        K = annulus_mesh();
      } else if (m_cube->parsed()) {
        K = cube_mesh();
      } else {
        K = unit_square(m_sq_levels);
      }
      if (out_path.empty()) {
        write_mesh(out, *K, parents);
      } else {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write " + out_path);
        write_mesh(f, *K, parents);
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace fesc
