#pragma once

#include <string>
#include <vector>

#include "hdf/poly.hpp"

namespace hdf {

// Dense matrix with entries in a Ring.
class SMat {
 public:
  SMat(const Ring& R, int rows, int cols) : R_(&R), r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, 0) {}
  static SMat identity(const Ring& R, int n);

  const Ring& ring() const { return *R_; }
  int rows() const { return r_; }
  int cols() const { return c_; }
  i64& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  i64 operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * c_ + j]; }

  SMat operator+(const SMat& o) const;
  SMat operator-(const SMat& o) const;
  SMat operator*(const SMat& o) const;
  bool operator==(const SMat& o) const { return R_ == o.R_ && r_ == o.r_ && c_ == o.c_ && a_ == o.a_; }
  bool operator!=(const SMat& o) const { return !(*this == o); }
  std::vector<i64> apply(const std::vector<i64>& x) const;
  SMat transpose() const;
  bool is_zero() const;
  std::string str() const;

 private:
  const Ring* R_;
  int r_, c_;
  std::vector<i64> a_;
};

// Matrix of Laurent polynomials over a Ring.
class PMat {
 public:
  PMat(const Ring& R, int rows, int cols);
  static PMat identity(const Ring& R, int n);
  static PMat from_scalar(const SMat& S);
  static PMat diag(const std::vector<LPoly>& d);
  static PMat blockdiag(const Ring& R, const std::vector<PMat>& blocks);

  const Ring& ring() const { return *R_; }
  int rows() const { return r_; }
  int cols() const { return c_; }
  LPoly& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  const LPoly& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * c_ + j]; }

  PMat operator+(const PMat& o) const;
  PMat operator-(const PMat& o) const;
  PMat operator-() const;
  PMat operator*(const PMat& o) const;
  PMat scale(const LPoly& f) const;
  PMat scale(i64 c) const;
  bool operator==(const PMat& o) const;
  bool operator!=(const PMat& o) const { return !(*this == o); }

  PMat transpose() const;
  PMat block(int r0, int c0, int nr, int nc) const;
  void set_block(int r0, int c0, const PMat& B);
  PMat cols_range(int c0, int nc) const { return block(0, c0, r_, nc); }
  PMat rows_range(int r0, int nr) const { return block(r0, 0, nr, c_); }
  PMat select_cols(const std::vector<int>& idx) const;
  PMat select_rows(const std::vector<int>& idx) const;
  static PMat hcat(const PMat& A, const PMat& B);
  static PMat vcat(const PMat& A, const PMat& B);

  PMat derivative() const;
  PMat subst_power(int k) const;
  PMat swap_var() const { return subst_power(-1); }
  PMat to_ring(const Ring& S) const;
  PMat map(const std::function<LPoly(const LPoly&)>& fn) const;

  bool is_zero() const;
  bool is_polynomial() const;
  bool is_copolynomial() const;
  bool is_constant() const;
  int max_deg() const;  // max hi over nonzero entries (INT_MIN if zero)
  int min_lo() const;   // min lo over nonzero entries (INT_MAX if zero)
  int min_val() const;  // min p-adic valuation of all coefficients
  SMat coeff_matrix(int e) const;  // matrix of t^e coefficients
  std::string str(const std::string& var = "t") const;

 private:
  const Ring* R_;
  int r_, c_;
  std::vector<LPoly> a_;
};

// Exact division in the Laurent ring over a field; throws NotDivisible.
LPoly laurent_exact_div(const LPoly& a, const LPoly& b);

LPoly det(const PMat& M);
i64 det(const SMat& M);

// Inverse of a matrix invertible over the Laurent ring (det a unit monomial).
// Fields use adjugate/determinant; Z/p^m uses a mod-p inverse and Newton lifting.
PMat inverse(const PMat& M);
SMat inverse(const SMat& M);

bool is_invertible_laurent(const PMat& M);    // det is a unit monomial
bool is_invertible_poly(const PMat& M);       // det reduces to a nonzero constant mod p
bool is_invertible_copoly(const PMat& M);     // entries in k[1/t], det a unit constant

// Rank and reduced row echelon form over a field.
int rank(const SMat& M);
SMat rref(const SMat& M, std::vector<int>* pivots = nullptr);
// Basis of the right kernel over a field, returned as rows in reduced echelon
// form (pivot coordinates increasing).
std::vector<std::vector<i64>> kernel_basis_field(const SMat& M);

}  // namespace hdf
