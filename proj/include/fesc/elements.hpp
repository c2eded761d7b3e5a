#pragma once

#include "fesc/fes.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace fesc {

struct ElementSpec {
  std::string name;  // ct-full | ct-minimal | ct-dg | ct-dg-minimal | ct-highorder | ps3d | ps3d-branch
  int n = 0;     // 0: the family default
  int p = 0;     // 0: the family default (3); free only for ct-highorder
  int ell = -1;  // ps3d-branch only
};

// throws std::invalid_argument on an inconsistent spec; fills defaults (n for ps3d, ...)
ElementSpec validate(ElementSpec s);
std::vector<std::string> catalog_names();
// "continuous" or "discontinuous" pressure (last space of the complex)
std::string pressure_continuity(const ElementSpec& s);

// All refinements of one mesh, with one inpoint assignment, and cached carriers.
class SplitContext {
 public:
  SplitContext(std::shared_ptr<const SimplicialComplex> mesh, InpointAssignment inpoints);

  std::shared_ptr<const SimplicialComplex> mesh;
  InpointAssignment inpoints;
  int n() const { return mesh->ambient_dim(); }

  const RefinedComplex& refinement(int m) const;  // m clamped to [0, n]
  // carrier of base simplex T in R_m (m < 0 means R_0)
  CarrierPtr carrier(int m, const Simplex& T) const;
  // inpoint of T (the vertex itself for a vertex)
  Point W(const Simplex& T) const;

 private:
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<RefinedComplex>> R_;
  mutable std::map<std::pair<int, Simplex>, CarrierPtr> C_;
};

// default inpoints for a family: isobarycenters for the Clough-Tocher family and
// single cells, circumcenters (Worsey-Piper/Powell-Sabin) for multi-cell 3D meshes
InpointAssignment default_inpoints(const ElementSpec& s, const SimplicialComplex& mesh);

struct Element {
  ElementSpec spec;
  std::shared_ptr<SplitContext> ctx;
  int carrier_level = 0;  // refinement carrying every cell
  FESystem sys;
  // auxiliary spaces on top cells, e.g. "K1" for the Powell-Sabin family
  std::map<std::string, std::map<int, FormSpace>> aux;  // name -> top cell -> space
  std::vector<std::string> notes;
};

std::shared_ptr<Element> build(const ElementSpec& spec, std::shared_ptr<const SimplicialComplex> mesh,
                               bool verify = true);
std::shared_ptr<Element> build(const ElementSpec& spec, std::shared_ptr<SplitContext> ctx, bool verify = true);

// reference fixtures
std::shared_ptr<const SimplicialComplex> reference_triangle();
std::shared_ptr<const SimplicialComplex> reference_tet();  // regular, strictly acute
std::shared_ptr<const SimplicialComplex> tet_pair();       // regular tet and its mirror image through a face
std::shared_ptr<const SimplicialComplex> reference_simplex(int n);

// ---- generic pieces ----
CellSpace single_space(const FormSpace& V);
CellSpace tangential_space(const FormSpace& V);
CellSpace zero_space(const CarrierPtr& C, int k);
// Whitney forms on the carrier's cell (tangential on lower cells), at degree 1
FormSpace whitney_space(const CarrierPtr& C, int k);
// span{W_S - W_U : T <= U <= S}; throws when cells disagree or W_T + vect T != V
RatMatrix wt_span(const SplitContext& ctx, const Simplex& T);
// transverse direction of an edge in 2D: (t_y, -t_x)
RatVec edge_normal(const CarrierPtr& E);

// ---- Powell-Sabin family ----
// K^k(S) on the carrier R_0(S), degree 1
FormSpace ps_K(const SplitContext& ctx, const Simplex& S, int k);
// expected closed forms
struct ExpectedDim {
  std::string what;
  long expected = 0;
  std::string source;  // "stated" (a claimed closed form) or "derived" (computed oracle)
};
std::vector<ExpectedDim> expected_dims(const ElementSpec& s);
// stated closed forms that disagree with the computed dimensions (ct-highorder)
nlohmann::json formula_discrepancies(const ElementSpec& s, const std::vector<std::size_t>& top_dims);

// ---- Clough-Tocher bespoke extensions ----
// (u0, u1) on C with double trace (v0, v1) at vertex V of the cell and zero on
// the opposite face
AdmissiblePair vertex_jet_extension(const CarrierPtr& C, int vertex, int k, const RatVec& v0, const RatVec& v1);
// lambda_a lambda_b d lambda_c (a, b on the edge) realized as an element of the
// ct-highorder space on the top cell
PolyForm edge_bubble_phi(const Element& el, int T, int a, int b, int c);
PolyForm edge_bubble_psi(const Element& el, int T, int a, int b, int c);
// extension of r in A^k_0(E) (coordinates of A^k(E)) into A^k(T)
RatVec edge_extension(const Element& el, int T, int E, int k, const RatVec& r);
FaceExtender ct_extender(const Element& el);

// ---- classical degrees of freedom ----
struct DofCheck {
  std::string name;
  int k = 0;
  std::size_t rows = 0, cols = 0, rank = 0;
  bool square = false;
  bool injective = false;  // full column rank
};
// applies to the top cell T
std::vector<DofCheck> unisolvence_tests(const Element& el, int T);
// u in C0P1L^k(R_k(S)) with constant du and zero vertex values vanishes
DofCheck duconst_check(const SplitContext& ctx, const Simplex& S, int k);

// ---- four-sector fixture ----
struct FourSector {
  CarrierPtr carrier;
  FormSpace A0, A1, A2;
  RatVec end_map;  // on coordinates of A2
  std::vector<int> cohomology;  // of 0 -> R -> A0 -> A1 -> A2 -> R -> 0, at A0, A1, A2, R
  bool end_surjective = false;
  std::size_t end_kernel = 0, d_image = 0;
};
// directions of the four rays; aligned by default (+-e1, +-e2)
FourSector four_sector(const std::vector<Point>& rays = {});

nlohmann::json element_descriptor(const Element& el);
nlohmann::json element_descriptor(const Element& el, const DofSet& dofs);

}  // namespace fesc
