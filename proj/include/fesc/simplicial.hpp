#pragma once

#include "fesc/linalg.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fesc {

using Point = RatVec;
using Simplex = std::vector<int>;  // ascending vertex ids

// Values per k-simplex, in the order of SimplicialComplex::simplices(k).
struct Cochain {
  int degree = 0;
  RatVec values;
};

class SimplicialComplex {
 public:
  SimplicialComplex() = default;
  // Tops may be of any dimension; all faces are generated. With check_geometry the
  // desk-scale disjointness test runs (full-dimensional tops only).
  SimplicialComplex(int ambient, std::vector<Point> vertices, const std::vector<Simplex>& tops,
                    bool check_geometry = true);

  int ambient_dim() const { return n_; }
  int dim() const { return static_cast<int>(by_dim_.size()) - 1; }
  std::size_t num_vertices() const { return verts_.size(); }
  const Point& vertex(int i) const { return verts_.at(static_cast<std::size_t>(i)); }
  const std::vector<Point>& vertices() const { return verts_; }

  const std::vector<Simplex>& simplices(int k) const;
  std::size_t count(int k) const { return simplices(k).size(); }
  int index_of(const Simplex& s) const;  // -1 when absent
  bool contains(const Simplex& s) const { return index_of(s) >= 0; }

  std::vector<Point> points(const Simplex& s) const;

  // simplices having s as a face (including s), by dimension k
  std::vector<Simplex> cofaces(const Simplex& s, int k) const;

  // subcomplex generated by the given simplices
  SimplicialComplex closure_of(const std::vector<Simplex>& gens) const;

 private:
  int n_ = 0;
  std::vector<Point> verts_;
  std::vector<std::vector<Simplex>> by_dim_;
  std::vector<std::map<Simplex, int>> index_;
};

std::vector<Simplex> subcells(const Simplex& T, int k);
int relative_orientation(const Simplex& T, const Simplex& Tp);

RatMatrix coboundary_matrix(const SimplicialComplex& K, int k);
Cochain coboundary(const SimplicialComplex& K, const Cochain& c);
std::vector<int> cellular_cohomology(const SimplicialComplex& K);

// Boundary complex of a simplex; empty for a vertex.
std::vector<Simplex> boundary_cells(const Simplex& T);

// Barycentric coordinates of x w.r.t. the simplex with the given vertices.
// Works for lower-dimensional simplices (x is projected orthogonally onto the
// affine hull); `in_hull` reports whether x lies in that hull.
RatVec barycentric(const std::vector<Point>& simplex, const Point& x, bool* in_hull = nullptr);

// Mesh text format.
struct MeshFile {
  int dim = 0;
  std::vector<Point> vertices;
  std::vector<Simplex> tops;
  std::vector<std::pair<int, int>> parents;  // optional `p child base` block
};
MeshFile parse_mesh(std::istream& in);
MeshFile read_mesh_file(const std::string& path);
SimplicialComplex to_complex(const MeshFile& mf, bool check_geometry = true);
void write_mesh(std::ostream& out, const SimplicialComplex& K, const std::vector<std::pair<int, int>>& parents = {});

}  // namespace fesc
