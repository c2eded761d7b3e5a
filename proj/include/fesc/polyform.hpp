#pragma once

#include "fesc/linalg.hpp"
#include "fesc/simplicial.hpp"
#include "fesc/splits.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace fesc {

// ---- alternating algebra on R^n, basis dx_I with I strictly increasing ----
// An index set is a bitmask over the axes; masks of popcount k are listed in
// lexicographic order of their index tuples.
using AltMask = unsigned;

const std::vector<AltMask>& alt_masks(int n, int k);
int alt_index(int n, AltMask m);
std::size_t alt_dim(int n, int k);
std::vector<int> mask_axes(AltMask m);
// sign of dx_a ^ dx_b written as +- dx_{a|b}; 0 when they overlap
int wedge_sign(AltMask a, AltMask b);
// Alt^k of a linear map given by the n x n matrix P acting on vectors:
// (P^* w)_J = sum_I w_I det P[I, J]
RatMatrix alt_power(const RatMatrix& P, int k);

// ---- homogeneous monomials in nvars barycentric variables ----
const std::vector<std::vector<int>>& monomials(int nvars, int p);
int monomial_index(int nvars, const std::vector<int>& alpha);

// Small sparse polynomial used for substitutions.
struct SparsePoly {
  int nvars = 0;
  std::map<std::vector<int>, Rational> terms;

  SparsePoly() = default;
  explicit SparsePoly(int nv) : nvars(nv) {}
  static SparsePoly constant(int nv, const Rational& c);
  static SparsePoly variable(int nv, int i, const Rational& c = 1);
  SparsePoly& operator+=(const SparsePoly& o);
  SparsePoly operator*(const SparsePoly& o) const;
  SparsePoly scaled(const Rational& c) const;
  SparsePoly pow(int e) const;
  int degree() const;
  bool is_zero() const { return terms.empty(); }
  void prune();
};

// ---- sparse linear maps between coefficient spaces ----
class LinMap {
 public:
  LinMap() = default;
  LinMap(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), r_(rows) {}
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  void add(std::size_t i, std::size_t j, const Rational& w);
  RatVec apply(const RatVec& v) const;
  RatMatrix apply(const RatMatrix& B) const;
  LinMap compose(const LinMap& inner) const;  // this * inner
  RatMatrix dense() const;
  // stacks the rows of several maps with equal column count
  static LinMap stack(const std::vector<const LinMap*>& maps);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::vector<std::pair<std::size_t, Rational>>> r_;
};

// ---- carriers: a flat simplex split into pieces ----
struct Carrier {
  int n = 0;    // ambient dimension
  int dim = 0;  // dimension of the cell and of every piece
  std::shared_ptr<const std::vector<Point>> verts;
  std::vector<Simplex> pieces;       // ascending vertex ids into verts
  std::vector<Point> cell;           // cell vertices, in orientation order
  RatMatrix proj;                    // orthogonal projector onto the tangent space
  std::vector<std::vector<RatVec>> grads;  // per piece, tangential gradient of each barycentric
  std::vector<Rational> relvol;      // |piece| / |cell|
  std::vector<int> orient;           // orientation of the piece against the cell
  std::vector<RatMatrix> edge_mats;  // per piece, n x dim matrix of edge vectors v_i - v_0

  std::size_t size(int k, int p) const;  // coefficient count
  std::size_t offset(std::size_t piece, int k, int p) const;
  std::vector<Point> piece_points(std::size_t i) const;
  // first piece whose closure holds x (throws when none)
  std::size_t locate(const Point& x) const;
  bool single_piece() const { return pieces.size() == 1; }

  // operator caches; keyed by the parameters, guarded by the mutex
  mutable std::mutex mu;
  mutable std::map<std::string, std::shared_ptr<const LinMap>> cache;
  mutable std::map<std::pair<const Carrier*, std::string>,
                   std::pair<std::shared_ptr<const Carrier>, std::shared_ptr<const LinMap>>>
      tcache;
};
using CarrierPtr = std::shared_ptr<const Carrier>;

CarrierPtr make_carrier(std::shared_ptr<const std::vector<Point>> verts, std::vector<Simplex> pieces,
                        std::vector<Point> cell);
CarrierPtr simplex_carrier(const std::vector<Point>& pts);
// pieces of base simplex T inside the refinement
CarrierPtr carrier_of(const RefinedComplex& rc, const Simplex& T);

// ---- forms ----
struct PolyForm {
  CarrierPtr carrier;
  int k = 0;
  int p = 0;
  RatVec coef;  // [piece][monomial][alt]

  Rational& at(std::size_t piece, const std::vector<int>& alpha, AltMask m);
  bool is_zero() const;
};

PolyForm zero_form(CarrierPtr C, int k, int p);
// constant k-form (coefficients in the Alt^k basis) at degree p
PolyForm constant_form(CarrierPtr C, int k, const RatVec& alt, int p = 0);
// barycentric coordinate i of the cell, as a degree-1 scalar
PolyForm cell_barycentric(CarrierPtr C, int i);
// polynomial in Cartesian coordinates per Alt component, homogenized to degree p
// (p < 0: the smallest degree that fits)
PolyForm from_cartesian(CarrierPtr C, int k, const std::vector<SparsePoly>& comps, int p = -1);
// Alt^k coefficients at x
RatVec evaluate(const PolyForm& u, const Point& x);
RatVec evaluate_on_piece(const PolyForm& u, std::size_t piece, const Point& x);

PolyForm operator+(const PolyForm& a, const PolyForm& b);
PolyForm operator-(const PolyForm& a, const PolyForm& b);
PolyForm operator*(const Rational& c, const PolyForm& a);
bool operator==(const PolyForm& a, const PolyForm& b);

PolyForm elevate(const PolyForm& u, int q);
PolyForm exterior_derivative(const PolyForm& u);
PolyForm wedge(const PolyForm& a, const PolyForm& b);
// contraction by a constant vector field (first slot)
PolyForm contract(const PolyForm& u, const RatVec& e);
// contraction by x - W
PolyForm koszul(const PolyForm& u, const Point& W);
// homotopy operator through straight segments to W; W must lie in every closed piece
PolyForm poincare(const PolyForm& u, const Point& W);
// tangential part on the carrier itself
PolyForm pullback(const PolyForm& u);
// restriction to a carrier geometrically inside u's carrier (a face, or a
// refinement). Throws if u takes different values from different pieces.
PolyForm trace(const PolyForm& u, CarrierPtr target);
PolyForm pullback(const PolyForm& u, CarrierPtr target);
std::pair<PolyForm, PolyForm> double_trace(const PolyForm& u, CarrierPtr target);
PolyForm refine_to(const PolyForm& u, CarrierPtr target);
bool single_valued_on(const PolyForm& u, CarrierPtr target, std::string* why = nullptr);

struct AdmissiblePair {
  PolyForm v0, v1;
};
bool is_admissible(const PolyForm& v0, const PolyForm& v1);
AdmissiblePair admissible_differential(const AdmissiblePair& a);

// integral of a k-form over its k-dimensional carrier, oriented by the cell
Rational integrate(const PolyForm& u);
// L2 pairing, Euclidean metric on Alt, measure normalized so the cell has measure 1
Rational pairing(const PolyForm& u, const PolyForm& v);

// ---- linear maps on coefficient vectors, cached per carrier ----
std::shared_ptr<const LinMap> d_map(const CarrierPtr& C, int k, int p);
std::shared_ptr<const LinMap> elevate_map(const CarrierPtr& C, int k, int p, int q);
std::shared_ptr<const LinMap> koszul_map(const CarrierPtr& C, const Point& W, int k, int p);
std::shared_ptr<const LinMap> poincare_map(const CarrierPtr& C, const Point& W, int k, int p);
std::shared_ptr<const LinMap> pullback_map(const CarrierPtr& C, int k, int p);
// partial derivative along axis j of every component
std::shared_ptr<const LinMap> partial_map(const CarrierPtr& C, int j, int k, int p);
// wedge with a fixed form on the left: v -> a ^ v
LinMap wedge_map(const PolyForm& a, int k, int p);
// contraction with a constant vector
LinMap contract_map(const CarrierPtr& C, const RatVec& e, int k, int p);
// restriction; `which` selects among the source pieces containing each target piece
// (0 = first); used by single-valuedness checks
std::shared_ptr<const LinMap> trace_map(const CarrierPtr& src, const CarrierPtr& tgt, int k, int p);
// differences of one-sided traces across every interior codimension-1 face
LinMap jump_map(const CarrierPtr& C, int k, int p);
LinMap integrate_row(const CarrierPtr& C, int k, int p);    // 1 x size
RatMatrix gram_matrix(const CarrierPtr& C, int k, int p, int q);  // pairing between degrees p and q

// ---- spaces ----
struct FormSpace {
  CarrierPtr carrier;
  int k = 0;
  int p = 0;
  RatMatrix basis;  // columns: coefficient vectors
  std::string tag;

  std::size_t dim() const { return basis.cols(); }
  PolyForm element(std::size_t j) const;
  PolyForm combine(const RatVec& c) const;
  bool contains(const PolyForm& u) const;
};

enum class Continuity { None, C0, C1, C0d };
std::string to_string(Continuity c);

// continuous piecewise P^p k-forms (all Alt components), one generator per domain point
FormSpace c0_space(CarrierPtr C, int k, int p);
FormSpace broken_space(CarrierPtr C, int k, int p);
FormSpace constrained_space(CarrierPtr C, int p, int k, Continuity c);
// global polynomials P^q on the cell, represented at degree p >= q
FormSpace global_space(CarrierPtr C, int k, int q, int p);

// keeps the elements of V annihilated by the map (V -> ker(M) within V)
FormSpace restrict_space(const FormSpace& V, const LinMap& M, const std::string& tag = "");
FormSpace restrict_space(const FormSpace& V, const RatMatrix& M, const std::string& tag = "");
// image of V under a map, column-reduced
FormSpace map_space(const FormSpace& V, const LinMap& M, int k, int p, const std::string& tag = "");
FormSpace elevate(const FormSpace& V, int q);
FormSpace sum(const FormSpace& a, const FormSpace& b, const std::string& tag = "");
FormSpace d_space(const FormSpace& V);
FormSpace poincare_space(const FormSpace& V, const Point& W);
// rows whose kernel is exactly span(V)
RatMatrix membership_rows(const FormSpace& V);

struct Augmented {
  FormSpace W;
  bool direct = false;   // dim W = dim V + dim p V'
  bool decomposition = false;  // W = dW' + p W'' with trivial intersection
};
Augmented augment(const FormSpace& Vk, const FormSpace& Vk1, const Point& W);

nlohmann::json to_json(const PolyForm& u);

}  // namespace fesc
