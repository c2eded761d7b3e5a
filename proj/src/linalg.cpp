#include "fesc/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fesc {

std::string to_string(const Rational& q) { return q.get_str(); }

Rational parse_rational(const std::string& s) {
  Rational q;
  if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad rational: " + s);
  if (q.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  q.canonicalize();
  return q;
}

RatMatrix RatMatrix::identity(std::size_t n) {
  RatMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1;
  return I;
}

RatMatrix RatMatrix::from_columns(const std::vector<RatVec>& cols, std::size_t rows) {
  RatMatrix M(rows, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != rows) throw std::invalid_argument("from_columns: length mismatch");
    for (std::size_t i = 0; i < rows; ++i) M(i, j) = cols[j][i];
  }
  return M;
}

RatMatrix RatMatrix::from_rows(const std::vector<RatVec>& rows, std::size_t cols) {
  RatMatrix M(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw std::invalid_argument("from_rows: length mismatch");
    for (std::size_t j = 0; j < cols; ++j) M(i, j) = rows[i][j];
  }
  return M;
}

RatVec RatMatrix::col(std::size_t j) const {
  RatVec v(r_);
  for (std::size_t i = 0; i < r_; ++i) v[i] = (*this)(i, j);
  return v;
}

RatVec RatMatrix::row(std::size_t i) const {
  return RatVec(a_.begin() + static_cast<long>(i * c_), a_.begin() + static_cast<long>((i + 1) * c_));
}

void RatMatrix::set_col(std::size_t j, const RatVec& v) {
  for (std::size_t i = 0; i < r_; ++i) (*this)(i, j) = v[i];
}

RatMatrix RatMatrix::transpose() const {
  RatMatrix T(c_, r_);
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < c_; ++j) T(j, i) = (*this)(i, j);
  return T;
}

RatMatrix RatMatrix::select_cols(const std::vector<std::size_t>& idx) const {
  RatMatrix S(r_, idx.size());
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) S(i, j) = (*this)(i, idx[j]);
  return S;
}

RatMatrix RatMatrix::select_rows(const std::vector<std::size_t>& idx) const {
  RatMatrix S(idx.size(), c_);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < c_; ++j) S(i, j) = (*this)(idx[i], j);
  return S;
}

RatMatrix RatMatrix::hstack(const RatMatrix& o) const {
  if (c_ == 0 && r_ == 0) return o;
  if (o.c_ == 0 && o.r_ == 0) return *this;
  if (o.r_ != r_) throw std::invalid_argument("hstack: row mismatch");
  RatMatrix S(r_, c_ + o.c_);
  for (std::size_t i = 0; i < r_; ++i) {
    for (std::size_t j = 0; j < c_; ++j) S(i, j) = (*this)(i, j);
    for (std::size_t j = 0; j < o.c_; ++j) S(i, c_ + j) = o(i, j);
  }
  return S;
}

RatMatrix RatMatrix::vstack(const RatMatrix& o) const {
  if (c_ == 0 && r_ == 0) return o;
  if (o.c_ == 0 && o.r_ == 0) return *this;
  if (o.c_ != c_) throw std::invalid_argument("vstack: col mismatch");
  RatMatrix S(r_ + o.r_, c_);
  std::copy(a_.begin(), a_.end(), S.a_.begin());
  std::copy(o.a_.begin(), o.a_.end(), S.a_.begin() + static_cast<long>(a_.size()));
  return S;
}

bool RatMatrix::is_zero() const {
  return std::all_of(a_.begin(), a_.end(), [](const Rational& q) { return sgn(q) == 0; });
}

void RatMatrix::push_row(const RatVec& v) {
  if (r_ == 0 && c_ == 0) c_ = v.size();
  if (v.size() != c_) throw std::invalid_argument("push_row: length mismatch");
  a_.insert(a_.end(), v.begin(), v.end());
  ++r_;
}

RatMatrix operator*(const RatMatrix& a, const RatMatrix& b) {
  if (a.c_ != b.r_) throw std::invalid_argument("matmul: shape mismatch");
  RatMatrix P(a.r_, b.c_);
  Rational t;
  for (std::size_t i = 0; i < a.r_; ++i)
    for (std::size_t l = 0; l < a.c_; ++l) {
      const Rational& x = a(i, l);
      if (sgn(x) == 0) continue;
      for (std::size_t j = 0; j < b.c_; ++j) {
        const Rational& y = b(l, j);
        if (sgn(y) == 0) continue;
        mpq_mul(t.get_mpq_t(), x.get_mpq_t(), y.get_mpq_t());
        P(i, j) += t;
      }
    }
  return P;
}

RatVec operator*(const RatMatrix& a, const RatVec& v) {
  if (a.c_ != v.size()) throw std::invalid_argument("matvec: shape mismatch");
  RatVec out(a.r_);
  Rational t;
  for (std::size_t i = 0; i < a.r_; ++i)
    for (std::size_t j = 0; j < a.c_; ++j) {
      if (sgn(a(i, j)) == 0 || sgn(v[j]) == 0) continue;
      mpq_mul(t.get_mpq_t(), a(i, j).get_mpq_t(), v[j].get_mpq_t());
      out[i] += t;
    }
  return out;
}

RatMatrix operator+(const RatMatrix& a, const RatMatrix& b) {
  if (a.r_ != b.r_ || a.c_ != b.c_) throw std::invalid_argument("add: shape mismatch");
  RatMatrix s = a;
  for (std::size_t i = 0; i < s.a_.size(); ++i) s.a_[i] += b.a_[i];
  return s;
}

RatMatrix operator-(const RatMatrix& a, const RatMatrix& b) {
  if (a.r_ != b.r_ || a.c_ != b.c_) throw std::invalid_argument("sub: shape mismatch");
  RatMatrix s = a;
  for (std::size_t i = 0; i < s.a_.size(); ++i) s.a_[i] -= b.a_[i];
  return s;
}

bool operator==(const RatMatrix& a, const RatMatrix& b) {
  return a.r_ == b.r_ && a.c_ == b.c_ && a.a_ == b.a_;
}

Echelon rref(RatMatrix M) {
  const std::size_t R = M.rows(), C = M.cols();
  Echelon e;
  std::size_t r = 0;
  Rational f, t;
  for (std::size_t c = 0; c < C && r < R; ++c) {
    std::size_t p = R;
    for (std::size_t i = r; i < R; ++i)
      if (sgn(M(i, c)) != 0) {
        p = i;
        break;
      }
    if (p == R) continue;
    if (p != r)
      for (std::size_t j = c; j < C; ++j) std::swap(M(p, j), M(r, j));
    f = 1 / M(r, c);
    for (std::size_t j = c; j < C; ++j)
      if (sgn(M(r, j)) != 0) M(r, j) *= f;
    for (std::size_t i = 0; i < R; ++i) {
      if (i == r || sgn(M(i, c)) == 0) continue;
      f = M(i, c);
      for (std::size_t j = c; j < C; ++j) {
        if (sgn(M(r, j)) == 0) continue;
        mpq_mul(t.get_mpq_t(), f.get_mpq_t(), M(r, j).get_mpq_t());
        M(i, j) -= t;
      }
    }
    e.pivots.push_back(c);
    ++r;
  }
  e.R = std::move(M);
  return e;
}

std::size_t rank(const RatMatrix& M) {
  const std::size_t R = M.rows(), C = M.cols();
  if (R == 0 || C == 0) return 0;
  // integer rows: scale each row by the lcm of its denominators
  std::vector<mpz_class> a(R * C);
  for (std::size_t i = 0; i < R; ++i) {
    mpz_class l = 1;
    for (std::size_t j = 0; j < C; ++j) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), M(i, j).get_den_mpz_t());
    for (std::size_t j = 0; j < C; ++j) a[i * C + j] = M(i, j).get_num() * (l / M(i, j).get_den());
  }
  std::size_t r = 0;
  mpz_class prev = 1, t1, t2;
  for (std::size_t c = 0; c < C && r < R; ++c) {
    std::size_t p = R;
    for (std::size_t i = r; i < R; ++i)
      if (sgn(a[i * C + c]) != 0) {
        p = i;
        break;
      }
    if (p == R) continue;
    if (p != r)
      for (std::size_t j = 0; j < C; ++j) std::swap(a[p * C + j], a[r * C + j]);
    const mpz_class piv = a[r * C + c];
    for (std::size_t i = r + 1; i < R; ++i) {
      const mpz_class f = a[i * C + c];
      for (std::size_t j = c + 1; j < C; ++j) {
        // Bareiss step: (piv*a_ij - f*a_rj) / prev, exact division
        t1 = piv * a[i * C + j];
        t2 = f * a[r * C + j];
        t1 -= t2;
        mpz_divexact(a[i * C + j].get_mpz_t(), t1.get_mpz_t(), prev.get_mpz_t());
      }
      a[i * C + c] = 0;
    }
    // rows past the pivot block that were not touched in columns < c stay valid
    prev = piv;
    ++r;
  }
  return r;
}

RatMatrix nullspace(const RatMatrix& M) {
  const std::size_t C = M.cols();
  Echelon e = rref(M);
  std::vector<bool> is_pivot(C, false);
  for (auto c : e.pivots) is_pivot[c] = true;
  std::vector<std::size_t> free;
  for (std::size_t c = 0; c < C; ++c)
    if (!is_pivot[c]) free.push_back(c);
  RatMatrix N(C, free.size());
  for (std::size_t f = 0; f < free.size(); ++f) {
    N(free[f], f) = 1;
    for (std::size_t i = 0; i < e.pivots.size(); ++i) N(e.pivots[i], f) = -e.R(i, free[f]);
  }
  return N;
}

std::vector<std::size_t> independent_columns(const RatMatrix& M) {
  // forward elimination only; pivot columns are the answer
  const std::size_t R = M.rows(), C = M.cols();
  RatMatrix A = M;
  std::vector<std::size_t> piv;
  std::size_t r = 0;
  Rational f, t;
  for (std::size_t c = 0; c < C && r < R; ++c) {
    std::size_t p = R;
    for (std::size_t i = r; i < R; ++i)
      if (sgn(A(i, c)) != 0) {
        p = i;
        break;
      }
    if (p == R) continue;
    if (p != r)
      for (std::size_t j = c; j < C; ++j) std::swap(A(p, j), A(r, j));
    for (std::size_t i = r + 1; i < R; ++i) {
      if (sgn(A(i, c)) == 0) continue;
      f = A(i, c) / A(r, c);
      for (std::size_t j = c; j < C; ++j) {
        if (sgn(A(r, j)) == 0) continue;
        mpq_mul(t.get_mpq_t(), f.get_mpq_t(), A(r, j).get_mpq_t());
        A(i, j) -= t;
      }
    }
    piv.push_back(c);
    ++r;
  }
  return piv;
}

RatMatrix column_basis(const RatMatrix& M) { return M.select_cols(independent_columns(M)); }

RatMatrix annihilator(const RatMatrix& M) { return nullspace(M.transpose()).transpose(); }

std::optional<RatMatrix> solve(const RatMatrix& A, const RatMatrix& B) {
  if (A.rows() != B.rows()) throw std::invalid_argument("solve: row mismatch");
  const std::size_t n = A.cols(), m = B.cols();
  Echelon e = rref(A.hstack(B));
  RatMatrix X(n, m);
  for (std::size_t i = 0; i < e.pivots.size(); ++i) {
    if (e.pivots[i] >= n) return std::nullopt;
    for (std::size_t j = 0; j < m; ++j) X(e.pivots[i], j) = e.R(i, n + j);
  }
  return X;
}

std::optional<RatVec> solve(const RatMatrix& A, const RatVec& b) {
  RatMatrix B(b.size(), 1);
  B.set_col(0, b);
  auto X = solve(A, B);
  if (!X) return std::nullopt;
  return X->col(0);
}

RatMatrix inverse(const RatMatrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("inverse: not square");
  Echelon e = rref(A.hstack(RatMatrix::identity(A.rows())));
  const std::size_t n = A.rows();
  if (e.pivots.size() < n || (n > 0 && e.pivots[n - 1] >= n)) throw std::runtime_error("inverse: singular matrix");
  RatMatrix X(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) X(i, j) = e.R(i, n + j);
  return X;
}

std::optional<RatVec> min_norm_solution(const RatMatrix& A, const RatVec& b) {
  // x = A^T y with A A^T y = b; any y works since A^T y is unique
  RatMatrix AT = A.transpose();
  auto y = solve(A * AT, b);
  if (!y) return std::nullopt;
  RatVec x = AT * *y;
  if (A * x != b) return std::nullopt;
  return x;
}

Rational factorial(int n) {
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(n));
  return Rational(f);
}

Rational determinant(RatMatrix A) {
  const std::size_t n = A.rows();
  if (n != A.cols()) throw std::invalid_argument("determinant: not square");
  Rational det = 1, f;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = n;
    for (std::size_t i = c; i < n; ++i)
      if (sgn(A(i, c)) != 0) {
        p = i;
        break;
      }
    if (p == n) return 0;
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(p, j), A(c, j));
      det = -det;
    }
    det *= A(c, c);
    for (std::size_t i = c + 1; i < n; ++i) {
      if (sgn(A(i, c)) == 0) continue;
      f = A(i, c) / A(c, c);
      for (std::size_t j = c; j < n; ++j) A(i, j) -= f * A(c, j);
    }
  }
  return det;
}

Rational signed_volume(const std::vector<RatVec>& v) {
  if (v.empty()) throw std::invalid_argument("signed_volume: empty simplex");
  const std::size_t n = v.size() - 1;
  if (n == 0) return 1;
  if (v[0].size() != n) throw std::invalid_argument("signed_volume: simplex is not full-dimensional");
  RatMatrix E(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) E(j, i) = v[i + 1][j] - v[0][j];
  return determinant(E) / factorial(static_cast<int>(n));
}

Rational integrate_monomial(const std::vector<int>& alpha, const Rational& measure, int dim) {
  Rational num = factorial(dim);
  int tot = 0;
  for (int a : alpha) {
    num *= factorial(a);
    tot += a;
  }
  return measure * num / factorial(tot + dim);
}

Rational integrate_monomial(const std::vector<int>& alpha, const std::vector<RatVec>& vertices) {
  if (alpha.size() != vertices.size()) throw std::invalid_argument("integrate_monomial: alpha length must equal vertex count");
  Rational vol = signed_volume(vertices);
  if (sgn(vol) == 0) throw std::runtime_error("integrate_monomial: degenerate simplex");
  return integrate_monomial(alpha, vol, static_cast<int>(vertices.size()) - 1);
}

DenseF to_float(const RatMatrix& M) {
  DenseF F(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) F(i, j) = M(i, j).get_d();
  return F;
}

namespace {
Eigen::MatrixXd to_eigen(const DenseF& F) {
  Eigen::MatrixXd E(F.rows, F.cols);
  for (std::size_t i = 0; i < F.rows; ++i)
    for (std::size_t j = 0; j < F.cols; ++j) E(static_cast<long>(i), static_cast<long>(j)) = F(i, j);
  return E;
}
}  // namespace

std::vector<double> generalized_singular_values(const DenseF& A, const DenseF& B, const DenseF& M) {
  if (B.cols != A.rows || A.rows != A.cols || M.rows != M.cols || M.rows != B.rows)
    throw std::invalid_argument("generalized_singular_values: shape mismatch");
  if (B.rows == 0) return {};
  Eigen::MatrixXd Ae = to_eigen(A), Be = to_eigen(B), Me = to_eigen(M);
  Eigen::LLT<Eigen::MatrixXd> llt(Ae);
  if (llt.info() != Eigen::Success) throw std::runtime_error("generalized_singular_values: A not positive definite");
  Eigen::MatrixXd S = Be * llt.solve(Be.transpose());
  S = 0.5 * (S + S.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Me);
  if (es.info() != Eigen::Success) throw std::runtime_error("generalized_singular_values: eigensolver failed");
  std::vector<double> out;
  for (long i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
  std::sort(out.begin(), out.end());
  return out;
}

double smallest_generalized_singular_value(const DenseF& A, const DenseF& B, const DenseF& M, int skip,
                                           double rel_tol) {
  auto s = generalized_singular_values(A, B, M);
  if (s.empty()) return 0.0;
  if (skip >= 0) {
    if (static_cast<std::size_t>(skip) >= s.size()) return 0.0;
    return s[static_cast<std::size_t>(skip)];
  }
  const double mx = s.back();
  if (mx == 0.0) return 0.0;
  for (double v : s)
    if (v > rel_tol * mx) return v;
  return 0.0;
}

}  // namespace fesc
