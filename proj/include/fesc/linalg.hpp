#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fesc {

// GMP keeps mpq_class canonical (lowest terms, positive denominator) after
// every arithmetic operation, which is the invariant we rely on everywhere.
using Rational = mpq_class;
using RatVec = std::vector<Rational>;

// mpq_class(a, b) does not reduce; always build fractions through this
inline Rational frac(long num, long den) {
  Rational q(num, den);
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q);
Rational parse_rational(const std::string& s);

class RatMatrix {
 public:
  RatMatrix() = default;
  RatMatrix(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols) {}

  static RatMatrix identity(std::size_t n);
  static RatMatrix from_columns(const std::vector<RatVec>& cols, std::size_t rows);
  static RatMatrix from_rows(const std::vector<RatVec>& rows, std::size_t cols);

  std::size_t rows() const { return r_; }
  std::size_t cols() const { return c_; }

  Rational& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
  const Rational& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

  RatVec col(std::size_t j) const;
  RatVec row(std::size_t i) const;
  void set_col(std::size_t j, const RatVec& v);

  RatMatrix transpose() const;
  RatMatrix select_cols(const std::vector<std::size_t>& idx) const;
  RatMatrix select_rows(const std::vector<std::size_t>& idx) const;
  RatMatrix hstack(const RatMatrix& o) const;
  RatMatrix vstack(const RatMatrix& o) const;
  bool is_zero() const;

  // appends a row; cols must match (or matrix empty with cols 0)
  void push_row(const RatVec& v);

  friend RatMatrix operator*(const RatMatrix& a, const RatMatrix& b);
  friend RatVec operator*(const RatMatrix& a, const RatVec& v);
  friend RatMatrix operator+(const RatMatrix& a, const RatMatrix& b);
  friend RatMatrix operator-(const RatMatrix& a, const RatMatrix& b);
  friend bool operator==(const RatMatrix& a, const RatMatrix& b);

 private:
  std::size_t r_ = 0, c_ = 0;
  std::vector<Rational> a_;
};

struct Echelon {
  RatMatrix R;                      // reduced row echelon form
  std::vector<std::size_t> pivots;  // pivot column per nonzero row
};

// Gauss-Jordan with first-nonzero pivoting in row order.
Echelon rref(RatMatrix M);

// Fraction-free (Bareiss) forward elimination on an integer copy.
std::size_t rank(const RatMatrix& M);

// Reduced echelon kernel basis, one column per free variable.
RatMatrix nullspace(const RatMatrix& M);

// Pivot columns of M (a deterministic column basis of the span).
std::vector<std::size_t> independent_columns(const RatMatrix& M);
RatMatrix column_basis(const RatMatrix& M);

// Left null space: rows y with y^T M = 0, returned as the rows of a matrix.
RatMatrix annihilator(const RatMatrix& M);

// Some solution X of A X = B, or nullopt if inconsistent.
std::optional<RatMatrix> solve(const RatMatrix& A, const RatMatrix& B);
std::optional<RatVec> solve(const RatMatrix& A, const RatVec& b);

// Inverse of a square nonsingular matrix; throws if singular.
RatMatrix inverse(const RatMatrix& A);

// Minimal Euclidean-norm solution of A x = b, exact; nullopt if inconsistent.
std::optional<RatVec> min_norm_solution(const RatMatrix& A, const RatVec& b);

Rational factorial(int n);

// |T| (dim T)! prod(alpha_i!) / (|alpha| + dim T)!, with |T| the signed
// volume of a full-dimensional simplex given by its vertices (ascending order
// of the tuple fixes the sign).
Rational integrate_monomial(const std::vector<int>& alpha, const std::vector<RatVec>& vertices);

// Same closed form with a given (signed) measure of the simplex.
Rational integrate_monomial(const std::vector<int>& alpha, const Rational& measure, int dim);

// Signed volume of a full-dimensional simplex (n+1 points in R^n).
Rational signed_volume(const std::vector<RatVec>& vertices);

Rational determinant(RatMatrix A);

// Floating point side, used by the Stokes harness only.
struct DenseF {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;
  DenseF() = default;
  DenseF(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

DenseF to_float(const RatMatrix& M);

// Generalized singular values of B (m x n) with A (n x n, SPD) on the domain and
// M (m x m, SPD) on the codomain: sigma^2 are the eigenvalues of
// M^{-1} B A^{-1} B^T. Values below rel_tol * max are treated as zero.
std::vector<double> generalized_singular_values(const DenseF& A, const DenseF& B, const DenseF& M);

// Smallest nonzero generalized singular value (0 if all vanish). When skip > 0
// the `skip` smallest values are discarded instead of the numerically zero ones,
// so a known kernel can be removed while spurious zeros stay visible.
double smallest_generalized_singular_value(const DenseF& A, const DenseF& B, const DenseF& M,
                                           int skip = -1, double rel_tol = 1e-10);

}  // namespace fesc
