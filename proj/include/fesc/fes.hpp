#pragma once

#include "fesc/polyform.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fesc {

// How a k-form is handed down to lower cells. Interior: the family lives on
// top cells only (lower cells carry the zero space), as for broken pressures.
enum class RestrictionKind { Pullback, Trace, DoubleTrace, Interior };
std::string to_string(RestrictionKind k);

struct Cell {
  int dim = 0;
  Simplex verts;  // base vertex ids (ascending for simplices)
  CarrierPtr carrier;
};

class CellComplex {
 public:
  int n = 0;
  std::vector<Cell> cells;
  // per cell: codimension-one faces with their relative orientation
  std::vector<std::vector<std::pair<int, int>>> facets;

  // simplicial cells carried by the pieces of a refinement
  static CellComplex from_refinement(const RefinedComplex& rc);
  // a subset of the base simplices (closed under faces)
  static CellComplex from_refinement(const RefinedComplex& rc, const std::vector<Simplex>& keep);

  int add_cell(int dim, Simplex verts, CarrierPtr C, std::vector<std::pair<int, int>> facets = {});
  // facets by vertex inclusion, orientation from relative_orientation
  void wire_simplicial_facets();

  int find(const Simplex& verts) const;  // -1 if absent
  std::vector<int> faces_of(int c) const;           // all faces, c included, sorted
  std::vector<int> boundary_of(int c) const;        // proper faces
  std::vector<int> closure(const std::vector<int>& gens) const;
  std::vector<int> cells_of_dim(int d) const;
  int top_dim() const;

 private:
  std::map<Simplex, int> index_;
};

// A^k(T): either a single form u (top cells and single-trace kinds) or a pair
// (v0, v1) of a k-form and a (k+1)-form (double traces on lower cells).
struct CellSpace {
  int k = 0;
  int p0 = 0, p1 = 0;
  bool pair = false;
  RatMatrix basis;  // rows: coefficients of v0 (then v1); columns: basis
  std::string tag;
  std::size_t dim() const { return basis.cols(); }
};

// restriction data on a cell: one or two forms on the cell's carrier
using FaceData = std::vector<PolyForm>;

struct FESError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class FESystem {
 public:
  std::string name;
  std::shared_ptr<const CellComplex> cx;
  std::vector<RestrictionKind> kinds;          // per degree 0..n
  std::vector<std::vector<CellSpace>> spaces;  // [cell][k]

  int n() const { return cx->n; }
  std::size_t dim(int cell, int k) const { return spaces[cell][k].dim(); }
  bool is_top(int cell) const { return cx->cells[cell].dim == cx->n; }

  // Computes restriction matrices, differentials, constants and evaluation
  // maps, and checks the axioms exactly. Throws FESError listing violations.
  void finalize(bool verify = true);

  // element data <-> coordinates
  FaceData data_of(int cell, int k, const RatVec& coords) const;
  RatVec coords_of(int cell, int k, const FaceData& data) const;  // throws if not in A^k(T)
  std::optional<RatVec> try_coords_of(int cell, int k, const FaceData& data) const;
  std::optional<RatMatrix> try_coords_of_many(int cell, int k, const std::vector<FaceData>& data) const;
  // restriction of arbitrary data on `from` to its face `to`
  FaceData restrict_data(int from, int to, int k, const FaceData& data) const;
  // differential on data, following the kinds of degrees k and k+1
  FaceData d_data(int cell, int k, const FaceData& data) const;
  Rational pair_data(const FaceData& a, const FaceData& b) const;
  Rational integrate_data(int cell, const FaceData& data) const;

  const RatMatrix& restriction(int to, int from, int k) const;  // dim A(to) x dim A(from)
  const RatMatrix& differential(int cell, int k) const;         // dim A^{k+1} x dim A^k
  const RatVec& constant(int cell) const { return constants_.at(static_cast<std::size_t>(cell)); }
  const RatVec& evaluation(int cell) const { return evals_.at(static_cast<std::size_t>(cell)); }

 private:
  std::map<std::tuple<int, int, int>, RatMatrix> R_;
  std::vector<std::vector<RatMatrix>> D_;
  std::vector<RatVec> constants_;
  std::vector<RatVec> evals_;
  bool finalized_ = false;
};

// ---- global spaces ----
struct InverseLimit {
  std::vector<int> cells;                  // cells of the subcomplex
  std::map<int, std::size_t> offset;       // cell -> offset in the concatenated coordinates
  std::size_t total = 0;
  RatMatrix basis;                         // columns: single-valued families
  std::size_t dim() const { return basis.cols(); }
  RatVec local(int cell, std::size_t j, std::size_t len) const;
};

InverseLimit inverse_limit_space(const FESystem& sys, const std::vector<int>& sub, int k);
// the restriction r^k : A^k(T) -> product over proper faces
RatMatrix boundary_restriction(const FESystem& sys, int T, int k);
// A^k_0(T) as columns in the coordinates of A^k(T)
RatMatrix zero_boundary_subspace(const FESystem& sys, int T, int k);
bool check_extensions(const FESystem& sys, int T, int k);
// cohomology of R -> A^0(T) -> ... -> A^n(T) -> 0
std::vector<int> check_local_exactness(const FESystem& sys, int T);
// cohomology of A^0_0(T) -> ... -> A^n_0(T), and whether the integral is nonzero
// on closed elements at k = dim T
struct ZeroCohomology {
  std::vector<int> dims;
  bool evaluation_iso = false;
};
ZeroCohomology zero_cohomology(const FESystem& sys, int T);

struct CellReport {
  int cell = 0;
  int dim = 0;
  Simplex verts;
  std::vector<std::size_t> dims, zero_dims;
  std::vector<bool> extensions;
  std::vector<int> cohomology;
  ZeroCohomology zero;
  bool theorem_ok = false;
};
struct AuditRow {
  int k = 0;
  std::size_t lhs = 0, rhs = 0;
  bool equal = false;
};
struct CompatibilityReport {
  bool compatible = false;
  std::vector<CellReport> cells;
  std::vector<AuditRow> audit;
};
CompatibilityReport check_compatibility(const FESystem& sys);
AuditRow dimension_audit(const FESystem& sys, int k);
nlohmann::json to_json(const CompatibilityReport& r);

// cohomology of the global complex of single-valued families
std::vector<int> global_cohomology(const FESystem& sys);

// ---- harmonic degrees of freedom ----
struct Functional {
  enum class Type { Pair, DPair, Integral };
  int cell = 0;
  int k = 0;
  Type type = Type::Pair;
  FaceData weight;  // for Pair / DPair
};

struct DofSet {
  // functionals[cell][k], one list per cell and degree
  std::vector<std::vector<std::vector<Functional>>> functionals;
  std::vector<std::string> warnings;
  std::size_t count(int cell, int k) const { return functionals[cell][k].size(); }
};

DofSet harmonic_dofs(const FESystem& sys);
Rational apply_functional(const FESystem& sys, const Functional& f, const FaceData& data);
// DoF matrix on A^k(T): rows = functionals of all faces of T (faces in
// ascending order, then functional order), columns = basis of A^k(T)
RatMatrix dof_matrix(const FESystem& sys, const DofSet& dofs, int T, int k);
// DoF values of arbitrary data given on T
RatVec dof_values(const FESystem& sys, const DofSet& dofs, int T, int k, const FaceData& data);
// interpolant in A^k(T); throws when the DoF matrix is singular
RatVec interpolate(const FESystem& sys, const DofSet& dofs, int T, int k, const FaceData& data);

// Single-face extender: given r in A^k_0(F) (coordinates of A^k(F)), an element of
// A^k(T) restricting to r on F and to zero on the other faces of dimension <= dim F.
// nullopt: not handled, the minimal-norm lift is used instead.
using FaceExtender = std::function<std::optional<RatVec>(int T, int F, int k, const RatVec& r)>;

// extension of boundary data (coordinates of the inverse limit on the boundary
// of T) to A^k(T): faces are swept by increasing dimension, each residual is
// extended on its own; throws when the restriction is not onto
RatVec extend(const FESystem& sys, int T, int k, const InverseLimit& boundary, const RatVec& v,
              const FaceExtender& ext = nullptr);

// thread count from FESC_THREADS (default: hardware concurrency, at least 1)
unsigned fesc_threads();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fesc
