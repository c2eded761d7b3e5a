#pragma once

#include "fesc/simplicial.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace fesc {

enum class InpointStrategy { Isobarycenter, Circumcenter, Explicit };

std::string to_string(InpointStrategy s);

struct InpointAssignment {
  std::map<Simplex, Point> points;
  InpointStrategy strategy = InpointStrategy::Isobarycenter;

  const Point& at(const Simplex& s) const;
  bool has(const Simplex& s) const { return points.count(s) > 0; }
};

Point isobarycenter(const std::vector<Point>& pts);
// Circumcenter within the affine hull of the simplex.
Point circumcenter(const std::vector<Point>& pts);
// Strictly acute: every dihedral angle below pi/2, tested exactly through the
// Gram matrix of the facet normals (equivalently, circumcenters of the simplex
// and all its faces lie in their open interiors).
bool strictly_acute(const std::vector<Point>& pts);

// every simplex of dimension >= min_dim gets its isobarycenter
InpointAssignment isobarycenter_inpoints(const SimplicialComplex& K, int min_dim = 1);
InpointAssignment worsey_farin_inpoints(const SimplicialComplex& K, const InpointAssignment& cells);
InpointAssignment worsey_farin_inpoints(const SimplicialComplex& K);
InpointAssignment worsey_piper_inpoints(const SimplicialComplex& K);

struct RefinedComplex {
  std::shared_ptr<const SimplicialComplex> base;
  int m = 0;
  std::shared_ptr<const SimplicialComplex> refined;
  InpointAssignment inpoints;
  // refined vertex id -> base simplex it comes from (a base vertex, or the
  // simplex whose inpoint it is)
  std::vector<Simplex> vertex_origin;

  // smallest base simplex containing the refined simplex s
  Simplex parent(const Simplex& s) const;
  // refined simplices of dimension dim T lying in base simplex T
  std::vector<Simplex> pieces(const Simplex& T) const;
  // refined vertex that is the inpoint of base simplex T (or the vertex itself)
  int vertex_of(const Simplex& T) const;
};

RefinedComplex refine(std::shared_ptr<const SimplicialComplex> mesh, int m, const InpointAssignment& inpoints);
RefinedComplex refine(std::shared_ptr<const SimplicialComplex> mesh, int m);

struct SplitCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};
struct SplitReport {
  std::vector<SplitCheck> checks;
  bool all_pass() const;
};

SplitReport validate_split(const RefinedComplex& rc);

// Worsey-Piper / Powell-Sabin alignment: for every edge E, the inpoints of E and
// of all simplices containing E lie in one hyperplane (3D) or on one line (2D).
bool edge_inpoints_aligned(const RefinedComplex& rc, std::string* why = nullptr);

// global simplex id used in the `p` block: simplices numbered by dimension, then index
int global_simplex_id(const SimplicialComplex& K, const Simplex& s);
std::vector<std::pair<int, int>> parent_annotations(const RefinedComplex& rc);

}  // namespace fesc
