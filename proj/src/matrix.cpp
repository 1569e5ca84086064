#include "hdf/matrix.hpp"

#include <climits>
#include <sstream>

#include "hdf/errors.hpp"

namespace hdf {

// ---------------------------------------------------------------- SMat

SMat SMat::identity(const Ring& R, int n) {
  SMat I(R, n, n);
  for (int i = 0; i < n; ++i) I(i, i) = 1;
  return I;
}

SMat SMat::operator+(const SMat& o) const {
  SMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = R_->add(a_[k], o.a_[k]);
  return r;
}

SMat SMat::operator-(const SMat& o) const {
  SMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = R_->sub(a_[k], o.a_[k]);
  return r;
}

SMat SMat::operator*(const SMat& o) const {
  if (c_ != o.r_) throw ContractViolation("SMat dimension mismatch");
  SMat r(*R_, r_, o.c_);
  for (int i = 0; i < r_; ++i)
    for (int k = 0; k < c_; ++k) {
      i64 x = (*this)(i, k);
      if (!x) continue;
      for (int j = 0; j < o.c_; ++j) r(i, j) = R_->add(r(i, j), R_->mul(x, o(k, j)));
    }
  return r;
}

std::vector<i64> SMat::apply(const std::vector<i64>& x) const {
  std::vector<i64> y(r_, 0);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < c_; ++j) y[i] = R_->add(y[i], R_->mul((*this)(i, j), x[j]));
  return y;
}

SMat SMat::transpose() const {
  SMat t(*R_, c_, r_);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool SMat::is_zero() const {
  for (auto x : a_)
    if (x) return false;
  return true;
}

std::string SMat::str() const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < r_; ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < c_; ++j) os << (j ? ", " : "") << (*this)(i, j);
    os << "]";
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------- PMat

PMat::PMat(const Ring& R, int rows, int cols)
    : R_(&R), r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, LPoly(R)) {}

PMat PMat::identity(const Ring& R, int n) {
  PMat I(R, n, n);
  for (int i = 0; i < n; ++i) I(i, i) = LPoly::constant(R, 1);
  return I;
}

PMat PMat::from_scalar(const SMat& S) {
  PMat M(S.ring(), S.rows(), S.cols());
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j) M(i, j) = LPoly::constant(S.ring(), S(i, j));
  return M;
}

PMat PMat::diag(const std::vector<LPoly>& d) {
  if (d.empty()) throw ContractViolation("empty diagonal");
  PMat M(d[0].ring(), static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) M(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return M;
}

PMat PMat::blockdiag(const Ring& R, const std::vector<PMat>& blocks) {
  int nr = 0, nc = 0;
  for (auto& b : blocks) {
    nr += b.rows();
    nc += b.cols();
  }
  PMat M(R, nr, nc);
  int r0 = 0, c0 = 0;
  for (auto& b : blocks) {
    M.set_block(r0, c0, b);
    r0 += b.rows();
    c0 += b.cols();
  }
  return M;
}

PMat PMat::operator+(const PMat& o) const {
  if (r_ != o.r_ || c_ != o.c_) throw ContractViolation("PMat dimension mismatch in +");
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] + o.a_[k];
  return r;
}

PMat PMat::operator-(const PMat& o) const {
  if (r_ != o.r_ || c_ != o.c_) throw ContractViolation("PMat dimension mismatch in -");
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] - o.a_[k];
  return r;
}

PMat PMat::operator-() const {
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = -a_[k];
  return r;
}

PMat PMat::operator*(const PMat& o) const {
  if (c_ != o.r_) throw ContractViolation("PMat dimension mismatch in *");
  PMat r(*R_, r_, o.c_);
  for (int i = 0; i < r_; ++i)
    for (int k = 0; k < c_; ++k) {
      const LPoly& x = (*this)(i, k);
      if (x.is_zero()) continue;
      for (int j = 0; j < o.c_; ++j) {
        const LPoly& y = o(k, j);
        if (y.is_zero()) continue;
        r(i, j) += x * y;
      }
    }
  return r;
}

PMat PMat::scale(const LPoly& f) const {
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] * f;
  return r;
}

PMat PMat::scale(i64 c) const {
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k].scale(c);
  return r;
}

bool PMat::operator==(const PMat& o) const {
  return R_ == o.R_ && r_ == o.r_ && c_ == o.c_ && a_ == o.a_;
}

PMat PMat::transpose() const {
  PMat t(*R_, c_, r_);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

PMat PMat::block(int r0, int c0, int nr, int nc) const {
  if (r0 < 0 || c0 < 0 || r0 + nr > r_ || c0 + nc > c_) throw ContractViolation("block out of range");
  PMat b(*R_, nr, nc);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
  return b;
}

void PMat::set_block(int r0, int c0, const PMat& B) {
  if (r0 + B.r_ > r_ || c0 + B.c_ > c_) throw ContractViolation("set_block out of range");
  for (int i = 0; i < B.r_; ++i)
    for (int j = 0; j < B.c_; ++j) (*this)(r0 + i, c0 + j) = B(i, j);
}

PMat PMat::select_cols(const std::vector<int>& idx) const {
  PMat b(*R_, r_, static_cast<int>(idx.size()));
  for (int i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) b(i, static_cast<int>(j)) = (*this)(i, idx[j]);
  return b;
}

PMat PMat::select_rows(const std::vector<int>& idx) const {
  PMat b(*R_, static_cast<int>(idx.size()), c_);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < c_; ++j) b(static_cast<int>(i), j) = (*this)(idx[i], j);
  return b;
}

PMat PMat::hcat(const PMat& A, const PMat& B) {
  if (A.r_ != B.r_) throw ContractViolation("hcat row mismatch");
  PMat M(*A.R_, A.r_, A.c_ + B.c_);
  M.set_block(0, 0, A);
  M.set_block(0, A.c_, B);
  return M;
}

PMat PMat::vcat(const PMat& A, const PMat& B) {
  if (A.c_ != B.c_) throw ContractViolation("vcat column mismatch");
  PMat M(*A.R_, A.r_ + B.r_, A.c_);
  M.set_block(0, 0, A);
  M.set_block(A.r_, 0, B);
  return M;
}

PMat PMat::derivative() const {
  return map([](const LPoly& x) { return x.derivative(); });
}

PMat PMat::subst_power(int k) const {
  return map([k](const LPoly& x) { return x.subst_power(k); });
}

PMat PMat::to_ring(const Ring& S) const {
  PMat r(S, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k].to_ring(S);
  return r;
}

PMat PMat::map(const std::function<LPoly(const LPoly&)>& fn) const {
  PMat r(*R_, r_, c_);
  for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = fn(a_[k]);
  return r;
}

bool PMat::is_zero() const {
  for (auto& x : a_)
    if (!x.is_zero()) return false;
  return true;
}

bool PMat::is_polynomial() const {
  for (auto& x : a_)
    if (!x.is_polynomial()) return false;
  return true;
}

bool PMat::is_copolynomial() const {
  for (auto& x : a_)
    if (!x.is_copolynomial()) return false;
  return true;
}

bool PMat::is_constant() const {
  for (auto& x : a_)
    if (!x.is_constant()) return false;
  return true;
}

int PMat::max_deg() const {
  int d = INT_MIN;
  for (auto& x : a_)
    if (!x.is_zero()) d = std::max(d, x.hi());
  return d;
}

int PMat::min_lo() const {
  int d = INT_MAX;
  for (auto& x : a_)
    if (!x.is_zero()) d = std::min(d, x.lo());
  return d;
}

int PMat::min_val() const {
  int v = R_->m();
  for (auto& x : a_) v = std::min(v, x.min_val());
  return v;
}

SMat PMat::coeff_matrix(int e) const {
  SMat S(*R_, r_, c_);
  for (int i = 0; i < r_; ++i)
    for (int j = 0; j < c_; ++j) S(i, j) = (*this)(i, j).coeff(e);
  return S;
}

std::string PMat::str(const std::string& var) const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < r_; ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < c_; ++j) os << (j ? ", " : "") << (*this)(i, j).str(var);
    os << "]";
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------- determinants

LPoly laurent_exact_div(const LPoly& a, const LPoly& b) {
  if (b.is_zero()) throw NotDivisible("division by zero");
  if (a.is_zero()) return a;
  LPoly a0 = a.shift(-a.lo()), b0 = b.shift(-b.lo());
  LPoly q(a.ring()), r(a.ring());
  poly_divmod(a0, b0, q, r);
  if (!r.is_zero()) throw NotDivisible("inexact Laurent division");
  return q.shift(a.lo() - b.lo());
}

namespace {

LPoly det_laplace(const PMat& M) {
  const int n = M.rows();
  const Ring& R = M.ring();
  if (n == 0) return LPoly::constant(R, 1);
  if (n == 1) return M(0, 0);
  if (n == 2) return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  LPoly d(R);
  std::vector<int> rest(n - 1);
  for (int j = 0; j < n; ++j) {
    if (M(0, j).is_zero()) continue;
    int k = 0;
    for (int c = 0; c < n; ++c)
      if (c != j) rest[k++] = c;
    std::vector<int> rows(n - 1);
    for (int i = 1; i < n; ++i) rows[i - 1] = i;
    LPoly minor = det_laplace(M.select_rows(rows).select_cols(rest));
    LPoly term = M(0, j) * minor;
    d = (j % 2 == 0) ? d + term : d - term;
  }
  return d;
}

LPoly det_bareiss(PMat M) {
  const int n = M.rows();
  const Ring& R = M.ring();
  if (n == 0) return LPoly::constant(R, 1);
  bool neg = false;
  LPoly prev = LPoly::constant(R, 1);
  for (int k = 0; k < n - 1; ++k) {
    if (M(k, k).is_zero()) {
      int piv = -1;
      for (int i = k + 1; i < n; ++i)
        if (!M(i, k).is_zero()) {
          piv = i;
          break;
        }
      if (piv < 0) return LPoly(R);
      for (int j = 0; j < n; ++j) std::swap(M(k, j), M(piv, j));
      neg = !neg;
    }
    for (int i = k + 1; i < n; ++i) {
      for (int j = k + 1; j < n; ++j)
        M(i, j) = laurent_exact_div(M(i, j) * M(k, k) - M(i, k) * M(k, j), prev);
      M(i, k) = LPoly(R);
    }
    prev = M(k, k);
  }
  return neg ? -M(n - 1, n - 1) : M(n - 1, n - 1);
}

}  // namespace

LPoly det(const PMat& M) {
  if (M.rows() != M.cols()) throw ContractViolation("det of non-square matrix");
  if (M.rows() == 0) return LPoly::constant(M.ring(), 1);
  if (M.ring().is_field() && M.rows() > 3) return det_bareiss(M);
  if (M.rows() > 8) throw ContractViolation("determinant over a non-field limited to size 8");
  return det_laplace(M);
}

i64 det(const SMat& M) {
  PMat P = PMat::from_scalar(M);
  LPoly d = det(P);
  return d.coeff(0);
}

bool is_invertible_laurent(const PMat& M) {
  const Ring& R = M.ring();
  if (R.is_field()) return det(M).is_unit_monomial();
  // unit in (Z/p^m)[t,1/t]: reduction mod p is a unit monomial
  const Ring& Fp = Ring::zmod(R.p(), 1);
  return det(M.to_ring(Fp)).is_unit_monomial();
}

bool is_invertible_poly(const PMat& M) {
  if (!M.is_polynomial()) return false;
  const Ring& R = M.ring();
  const Ring& F = R.is_field() ? R : Ring::zmod(R.p(), 1);
  LPoly d = det(M.to_ring(F));
  return d.is_unit_monomial() && d.lo() == 0;
}

bool is_invertible_copoly(const PMat& M) {
  if (!M.is_copolynomial()) return false;
  return is_invertible_poly(M.swap_var());
}

namespace {

PMat inverse_field(const PMat& M) {
  const int n = M.rows();
  const Ring& R = M.ring();
  LPoly d = det(M);
  if (!d.is_unit_monomial()) throw NonInvertible("determinant " + d.str() + " is not a unit monomial");
  LPoly dinv = d.pow(-1);
  if (n == 1) {
    PMat r(R, 1, 1);
    r(0, 0) = dinv;
    return r;
  }
  PMat inv(R, n, n);
  std::vector<int> rows(n - 1), cols(n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      int a = 0, b = 0;
      for (int k = 0; k < n; ++k) {
        if (k != j) rows[a++] = k;
        if (k != i) cols[b++] = k;
      }
      LPoly c = det(M.select_rows(rows).select_cols(cols)) * dinv;
      inv(i, j) = ((i + j) % 2 == 0) ? c : -c;
    }
  }
  return inv;
}

}  // namespace

PMat inverse(const PMat& M) {
  if (M.rows() != M.cols()) throw ContractViolation("inverse of non-square matrix");
  if (M.rows() == 0) return M;
  const Ring& R = M.ring();
  if (R.is_field()) return inverse_field(M);
  const Ring& Fp = Ring::zmod(R.p(), 1);
  PMat X = inverse_field(M.to_ring(Fp)).to_ring(R);
  const PMat I = PMat::identity(R, M.rows());
  for (int prec = 1; prec < R.m(); prec *= 2) X = X * (I.scale(2) - M * X);
  if (M * X != I) throw NonInvertible("Newton lifting of the inverse failed");
  return X;
}

SMat inverse(const SMat& M) {
  PMat X = inverse(PMat::from_scalar(M));
  SMat S(M.ring(), M.rows(), M.cols());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) {
      if (!X(i, j).is_constant()) throw NonInvertible("scalar inverse not constant");
      S(i, j) = X(i, j).coeff(0);
    }
  return S;
}

// ---------------------------------------------------------------- field echelon forms

SMat rref(const SMat& M, std::vector<int>* pivots) {
  const Ring& R = M.ring();
  if (!R.is_field()) throw ContractViolation("rref needs a field");
  SMat A = M;
  std::vector<int> piv;
  int row = 0;
  for (int c = 0; c < A.cols() && row < A.rows(); ++c) {
    int p = -1;
    for (int i = row; i < A.rows(); ++i)
      if (A(i, c)) {
        p = i;
        break;
      }
    if (p < 0) continue;
    for (int j = 0; j < A.cols(); ++j) std::swap(A(row, j), A(p, j));
    i64 inv = R.inv(A(row, c));
    for (int j = 0; j < A.cols(); ++j) A(row, j) = R.mul(A(row, j), inv);
    for (int i = 0; i < A.rows(); ++i) {
      if (i == row || !A(i, c)) continue;
      i64 f = A(i, c);
      for (int j = 0; j < A.cols(); ++j) A(i, j) = R.sub(A(i, j), R.mul(f, A(row, j)));
    }
    piv.push_back(c);
    ++row;
  }
  if (pivots) *pivots = piv;
  return A;
}

int rank(const SMat& M) {
  std::vector<int> piv;
  rref(M, &piv);
  return static_cast<int>(piv.size());
}

std::vector<std::vector<i64>> kernel_basis_field(const SMat& M) {
  const Ring& R = M.ring();
  std::vector<int> piv;
  SMat A = rref(M, &piv);
  std::vector<bool> is_piv(M.cols(), false);
  for (int c : piv) is_piv[c] = true;
  std::vector<std::vector<i64>> basis;
  for (int f = 0; f < M.cols(); ++f) {
    if (is_piv[f]) continue;
    std::vector<i64> v(M.cols(), 0);
    v[f] = 1;
    for (std::size_t k = 0; k < piv.size(); ++k) v[piv[k]] = R.neg(A(static_cast<int>(k), f));
    basis.push_back(v);
  }
  if (basis.empty()) return basis;
  // reduce the basis itself so that pivot coordinates increase
  SMat B(R, static_cast<int>(basis.size()), M.cols());
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (int j = 0; j < M.cols(); ++j) B(static_cast<int>(i), j) = basis[i][j];
  SMat Br = rref(B);
  std::vector<std::vector<i64>> out;
  for (int i = 0; i < Br.rows(); ++i) {
    std::vector<i64> v(M.cols());
    bool nz = false;
    for (int j = 0; j < M.cols(); ++j) {
      v[j] = Br(i, j);
      nz |= v[j] != 0;
    }
    if (nz) out.push_back(v);
  }
  return out;
}

}  // namespace hdf
