#pragma once

#include "fesc/elements.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fesc {

// ---- mesh fixtures ----
// unit square cut along (0,0)-(1,1), then `levels` uniform (red) refinements
std::shared_ptr<const SimplicialComplex> unit_square(int levels = 0);
// square ring between [-2,2]^2 and [-1,1]^2, 8 triangles
std::shared_ptr<const SimplicialComplex> annulus_mesh();
// unit cube split into 6 tetrahedra around the main diagonal
std::shared_ptr<const SimplicialComplex> cube_mesh();
// midpoint refinement of a triangle mesh, 4 children per triangle (2D only)
std::shared_ptr<const SimplicialComplex> red_refine(const SimplicialComplex& mesh);

// ---- vector proxies ----
// 2D: (v1, v2) <-> -v2 dx + v1 dy, scalar r <-> r dx^dy
// 3D: (v1, v2, v3) <-> v1 dy^dz - v2 dx^dz + v3 dx^dy, scalar r <-> r dx^dy^dz
// so that d of the velocity form is div v times the volume form.
std::vector<SparsePoly> velocity_form(const std::vector<SparsePoly>& v);
RatVec velocity_of_form(int n, const RatVec& alt);
SparsePoly partial(const SparsePoly& f, int axis);

// ---- global spaces ----
// DoF-identified global space of degree k: one block of harmonic DoFs per mesh
// face; the local basis of A^k(T) is dual to the DoFs of the faces of T.
struct GlobalSpace {
  std::shared_ptr<const Element> el;
  std::shared_ptr<const DofSet> dofs;
  int k = 0;
  std::vector<std::size_t> offset;  // per system cell: first global DoF
  std::size_t dim = 0;
  std::vector<int> tops;                          // top cells
  std::vector<RatMatrix> local;                   // per top: coords of the dual basis in A^k(T)
  std::vector<std::vector<std::size_t>> indices;  // per top: global DoFs, dof_matrix row order
  std::vector<bool> on_boundary;                  // per global DoF

  const FESystem& sys() const { return el->sys; }
  // coordinates in A^k(T) of the global element c on the i-th top cell
  RatVec local_coords(std::size_t i, const RatVec& c) const;
  std::vector<double> local_coords(std::size_t i, const std::vector<double>& c) const;
};

GlobalSpace global_space(std::shared_ptr<const Element> el, std::shared_ptr<const DofSet> dofs, int k);
GlobalSpace global_space(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec, int k);

// cell form of a global field (called per top cell with its carrier)
using CellForm = std::function<PolyForm(const CarrierPtr&)>;
// global interpolant: DoFs of the restrictions of the field to every face
RatVec interpolate_global(const GlobalSpace& G, const CellForm& u);
// d : global A^k -> global A^{k+1}, exact
RatMatrix global_differential(const GlobalSpace& Gk, const GlobalSpace& Gk1);

struct DeRhamReport {
  std::vector<std::size_t> dims, ranks;  // ranks of d_k
  std::vector<int> cohomology, cellular;
  bool matches = false;
};
DeRhamReport de_rham_check(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec);
nlohmann::json to_json(const DeRhamReport& r);

// I(du) = d(Iu) for every component of the given Cartesian forms of degree k
bool commuting_interpolation_check(const GlobalSpace& Gk, const GlobalSpace& Gk1,
                                   const std::vector<std::vector<SparsePoly>>& forms);

// d of the global velocity space lies in the global pressure space (exact);
// `image_rank` receives the rank of d on the velocity space
bool divergence_inclusion_check(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec,
                                std::size_t* image_rank = nullptr);

// ---- Stokes ----
struct StokesProblem {
  std::vector<SparsePoly> force;                    // body force, Cartesian components
  std::optional<std::vector<SparsePoly>> boundary;  // Dirichlet velocity (zero when absent)
  std::optional<std::vector<SparsePoly>> exact_velocity;
  std::optional<SparsePoly> exact_pressure;
};
// u = curl(x^2 (1-x)^2 y^2 (1-y)^2), p = x^3 - 1/4 on the unit square
StokesProblem manufactured_problem();
// enclosed flow: zero boundary data, rotational force
StokesProblem enclosed_flow_problem(int n = 2);

struct StokesSolution {
  std::shared_ptr<const GlobalSpace> V, Q;
  std::vector<double> velocity, pressure;  // global coefficients
  double momentum_residual = 0, mass_residual = 0;  // relative
  double max_div = 0;  // max of |div u_h| over the sample points of every piece
  std::size_t pressure_kernel = 0;  // pressure modes invisible to the velocity (1: the constant)
  std::optional<double> velocity_error;  // L2 error against the exact velocity
  std::optional<double> velocity_norm;
};

StokesSolution stokes_solve(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec,
                            const StokesProblem& prob);
nlohmann::json to_json(const StokesSolution& s);
// `x y [z] u1 u2 [u3] p div` at the vertices and centroid of every piece
void write_field_table(std::ostream& out, const StokesSolution& s);

// smallest generalized singular value of the divergence pairing without the
// constant pressure mode. Discontinuous pressure: H1-seminorm velocity, L2
// pressure. Continuous pressure: velocity norm |v|_1^2 + |div v|_1^2, pressure
// in the full H1 norm, pairing (div v, q)_{H1}.
double inf_sup(std::shared_ptr<const SimplicialComplex> mesh, const ElementSpec& spec);
// P1 vector velocity / P0 pressure on the unsplit mesh, same norms
double p1p0_inf_sup(const SimplicialComplex& mesh);

}  // namespace fesc
