#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hdf/ring.hpp"

namespace hdf {

// Laurent polynomial in one variable over a Ring, dense between lo() and hi().
// Canonical form: no zero coefficient at either end; the zero polynomial has
// an empty coefficient vector and lo() == 0.
class LPoly {
 public:
  explicit LPoly(const Ring& R) : R_(&R) {}
  LPoly(const Ring& R, int lo, std::vector<i64> coeffs);

  static LPoly constant(const Ring& R, i64 c);
  static LPoly monomial(const Ring& R, i64 c, int e);
  static LPoly from_map(const Ring& R, const std::map<int, i64>& terms);

  const Ring& ring() const { return *R_; }
  bool is_zero() const { return c_.empty(); }
  int lo() const { return lo_; }  // valuation (0 for zero)
  int hi() const { return lo_ + static_cast<int>(c_.size()) - 1; }  // degree (-1+lo for zero)
  i64 coeff(int e) const;
  i64 lead() const { return c_.empty() ? 0 : c_.back(); }
  i64 trail() const { return c_.empty() ? 0 : c_.front(); }
  const std::vector<i64>& coeffs() const { return c_; }
  std::map<int, i64> terms() const;

  bool is_polynomial() const { return is_zero() || lo_ >= 0; }
  // polynomial in 1/t (all exponents <= 0)
  bool is_copolynomial() const { return is_zero() || hi() <= 0; }
  bool is_constant() const { return is_zero() || (lo_ == 0 && c_.size() == 1); }
  // c * t^k with c a unit
  bool is_unit_monomial() const { return c_.size() == 1 && R_->is_unit(c_[0]); }

  LPoly operator+(const LPoly& o) const;
  LPoly operator-(const LPoly& o) const;
  LPoly operator-() const;
  LPoly operator*(const LPoly& o) const;
  LPoly scale(i64 c) const;
  LPoly shift(int k) const;  // multiply by t^k
  LPoly& operator+=(const LPoly& o) { return *this = *this + o; }
  LPoly& operator-=(const LPoly& o) { return *this = *this - o; }
  LPoly& operator*=(const LPoly& o) { return *this = *this * o; }
  bool operator==(const LPoly& o) const { return R_ == o.R_ && lo_ == o.lo_ && c_ == o.c_; }
  bool operator!=(const LPoly& o) const { return !(*this == o); }
  bool operator<(const LPoly& o) const;

  LPoly derivative() const;
  LPoly pow(int e) const;
  // t -> t^k (k may be negative)
  LPoly subst_power(int k) const;
  // t -> 1/t
  LPoly swap_var() const { return subst_power(-1); }
  // coefficientwise map
  LPoly map(const std::function<i64(i64)>& fn) const;
  // change of coefficient ring: reduction to smaller p-power, least-residue
  // lift to a larger one, or F_p into F_{p^f}
  LPoly to_ring(const Ring& S) const;
  // f(g) for a polynomial f (lo >= 0) and arbitrary g
  LPoly compose(const LPoly& g) const;
  // exact division by p^k of every coefficient
  LPoly div_p_pow(int k) const;
  // truncation: keep terms with exponent in [a, b]
  LPoly window(int a, int b) const;
  int min_val() const;  // minimal p-adic valuation of coefficients

  std::string str(const std::string& var = "t") const;

 private:
  void normalize();
  const Ring* R_;
  int lo_ = 0;
  std::vector<i64> c_;
};

// Polynomial division over a field (or by a divisor with unit leading coefficient).
// Both arguments must be polynomials (lo >= 0).
void poly_divmod(const LPoly& a, const LPoly& b, LPoly& q, LPoly& r);
LPoly poly_gcd(const LPoly& a, const LPoly& b);  // monic, field only
LPoly make_monic(const LPoly& a);

}  // namespace hdf
