#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hdf {

using i64 = std::int64_t;

// A finite coefficient ring: either Z/p^m or the field F_{p^f}.
// Elements are plain integer codes in [0, size()). For Z/p^m the code is the
// least nonnegative residue; for F_{p^f} it is the base-p digit string of the
// coefficient vector in the power basis of the modulus (digit i = coeff of x^i),
// so the prime field sits inside as the codes 0..p-1.
//
// Instances are interned: two rings are equal iff their addresses are.
class Ring {
 public:
  static const Ring& zmod(i64 p, int m);
  static const Ring& gf(i64 p, int f);
  static const Ring& gf(i64 p, int f, const std::vector<i64>& modulus);

  i64 p() const { return p_; }
  int m() const { return m_; }
  int f() const { return f_; }
  i64 size() const { return q_; }
  bool is_field() const { return m_ == 1; }
  bool is_galois() const { return f_ > 1; }
  // low-to-high coefficients of the monic modulus (degree f); {0,1} for f = 1
  const std::vector<i64>& modulus() const { return modulus_; }
  std::string name() const;

  i64 from_int(i64 x) const;  // image of an integer
  i64 add(i64 a, i64 b) const;
  i64 sub(i64 a, i64 b) const;
  i64 neg(i64 a) const;
  i64 mul(i64 a, i64 b) const;
  i64 pow(i64 a, std::uint64_t e) const;
  bool is_unit(i64 a) const;
  i64 inv(i64 a) const;  // throws NonInvertible
  // p-adic valuation (m for zero); 0 or 1 in a field
  int val(i64 a) const;
  // a / p^k for a divisible by p^k, result as least residue (only Z/p^m)
  i64 div_p_pow(i64 a, int k) const;
  i64 p_pow(int k) const;  // p^k as an element
  i64 frobenius(i64 a) const { return pow(a, static_cast<std::uint64_t>(p_)); }
  // Z/p^m -> Z/p^k for k <= m (reduction); for fields the identity on codes
  i64 reduce_to(i64 a, const Ring& target) const;
  // a multiplicative generator (fields only)
  i64 primitive_element() const;

 private:
  Ring(i64 p, int m, int f, std::vector<i64> modulus);
  i64 gf_mul_slow(i64 a, i64 b) const;

  i64 p_;
  int m_;
  int f_;
  i64 q_;
  std::vector<i64> modulus_;
  std::vector<i64> pp_;  // powers of p
  std::vector<i64> log_, exp_;
  i64 gen_ = 0;

  friend struct RingRegistry;
};

// x^{p^j}; j may be negative, period f.
i64 gf_conjugate(const Ring& F, i64 x, i64 j);

// Irreducibility of a monic polynomial over F_p (coefficients low-to-high).
bool is_irreducible_mod_p(const std::vector<i64>& poly, i64 p);

bool is_prime(i64 n);

}  // namespace hdf
