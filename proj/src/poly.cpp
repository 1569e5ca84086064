#include "hdf/poly.hpp"

#include <algorithm>
#include <sstream>

#include "hdf/errors.hpp"

namespace hdf {

LPoly::LPoly(const Ring& R, int lo, std::vector<i64> coeffs) : R_(&R), lo_(lo), c_(std::move(coeffs)) {
  normalize();
}

void LPoly::normalize() {
  std::size_t b = 0;
  while (b < c_.size() && c_[b] == 0) ++b;
  if (b == c_.size()) {
    c_.clear();
    lo_ = 0;
    return;
  }
  std::size_t e = c_.size();
  while (c_[e - 1] == 0) --e;
  if (b > 0 || e < c_.size()) c_ = std::vector<i64>(c_.begin() + b, c_.begin() + e);
  lo_ += static_cast<int>(b);
}

namespace {
// element codes pass through; anything else is read as an integer
i64 as_elem(const Ring& R, i64 c) { return (c >= 0 && c < R.size()) ? c : R.from_int(c); }
}  // namespace

LPoly LPoly::constant(const Ring& R, i64 c) { return LPoly(R, 0, {as_elem(R, c)}); }

LPoly LPoly::monomial(const Ring& R, i64 c, int e) { return LPoly(R, e, {as_elem(R, c)}); }

LPoly LPoly::from_map(const Ring& R, const std::map<int, i64>& terms) {
  if (terms.empty()) return LPoly(R);
  int lo = terms.begin()->first, hi = terms.rbegin()->first;
  std::vector<i64> c(static_cast<std::size_t>(hi - lo + 1), 0);
  for (auto& [e, v] : terms) c[e - lo] = R.add(c[e - lo], as_elem(R, v));
  return LPoly(R, lo, std::move(c));
}

i64 LPoly::coeff(int e) const {
  if (c_.empty() || e < lo_ || e > hi()) return 0;
  return c_[e - lo_];
}

std::map<int, i64> LPoly::terms() const {
  std::map<int, i64> t;
  for (std::size_t i = 0; i < c_.size(); ++i)
    if (c_[i] != 0) t[lo_ + static_cast<int>(i)] = c_[i];
  return t;
}

LPoly LPoly::operator+(const LPoly& o) const {
  if (R_ != o.R_) throw WrongModulus("adding polynomials over " + R_->name() + " and " + o.R_->name());
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  int lo = std::min(lo_, o.lo_), hi_ = std::max(hi(), o.hi());
  std::vector<i64> c(static_cast<std::size_t>(hi_ - lo + 1), 0);
  for (std::size_t i = 0; i < c_.size(); ++i) c[lo_ - lo + i] = c_[i];
  for (std::size_t i = 0; i < o.c_.size(); ++i) {
    auto& x = c[o.lo_ - lo + i];
    x = R_->add(x, o.c_[i]);
  }
  return LPoly(*R_, lo, std::move(c));
}

LPoly LPoly::operator-() const {
  LPoly r(*this);
  for (auto& x : r.c_) x = R_->neg(x);
  return r;
}

LPoly LPoly::operator-(const LPoly& o) const { return *this + (-o); }

LPoly LPoly::operator*(const LPoly& o) const {
  if (R_ != o.R_) throw WrongModulus("multiplying polynomials over " + R_->name() + " and " + o.R_->name());
  if (is_zero() || o.is_zero()) return LPoly(*R_);
  std::vector<i64> c(c_.size() + o.c_.size() - 1, 0);
  const Ring& R = *R_;
  if (!R.is_galois()) {
    // accumulate in 128 bits, reduce once per output slot
    const i64 q = R.size();
    std::vector<__int128> acc(c.size(), 0);
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i] == 0) continue;
      for (std::size_t j = 0; j < o.c_.size(); ++j) acc[i + j] += static_cast<__int128>(c_[i]) * o.c_[j];
    }
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = static_cast<i64>(acc[k] % q);
  } else {
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i] == 0) continue;
      for (std::size_t j = 0; j < o.c_.size(); ++j) c[i + j] = R.add(c[i + j], R.mul(c_[i], o.c_[j]));
    }
  }
  return LPoly(R, lo_ + o.lo_, std::move(c));
}

LPoly LPoly::scale(i64 c) const {
  LPoly r(*this);
  for (auto& x : r.c_) x = R_->mul(x, c);
  r.normalize();
  return r;
}

LPoly LPoly::shift(int k) const {
  LPoly r(*this);
  if (!r.is_zero()) r.lo_ += k;
  return r;
}

bool LPoly::operator<(const LPoly& o) const {
  if (lo_ != o.lo_) return lo_ < o.lo_;
  return c_ < o.c_;
}

LPoly LPoly::derivative() const {
  std::vector<i64> c(c_.size(), 0);
  for (std::size_t i = 0; i < c_.size(); ++i) c[i] = R_->mul(c_[i], R_->from_int(lo_ + static_cast<int>(i)));
  return LPoly(*R_, lo_ - 1, std::move(c));
}

LPoly LPoly::pow(int e) const {
  if (e < 0) {
    if (!is_unit_monomial()) throw NonInvertible("negative power of a non-monomial");
    return LPoly(*R_, lo_ * e, {R_->pow(R_->inv(c_[0]), static_cast<std::uint64_t>(-e))});
  }
  LPoly r = constant(*R_, 1), b = *this;
  while (e) {
    if (e & 1) r = r * b;
    e >>= 1;
    if (e) b = b * b;
  }
  return r;
}

LPoly LPoly::subst_power(int k) const {
  if (is_zero()) return *this;
  if (k == 0) {
    i64 s = 0;
    for (auto x : c_) s = R_->add(s, x);
    return constant(*R_, s);
  }
  std::map<int, i64> t;
  for (std::size_t i = 0; i < c_.size(); ++i)
    if (c_[i]) t[(lo_ + static_cast<int>(i)) * k] = c_[i];
  return from_map(*R_, t);
}

LPoly LPoly::map(const std::function<i64(i64)>& fn) const {
  LPoly r(*this);
  for (auto& x : r.c_) x = fn(x);
  r.normalize();
  return r;
}

LPoly LPoly::to_ring(const Ring& S) const {
  if (&S == R_) return *this;
  const Ring& R = *R_;
  if (R.p() != S.p()) throw WrongModulus("characteristic mismatch");
  std::vector<i64> c(c_.size());
  if (S.is_galois() || R.is_galois()) {
    if (!(R.m() == 1 && !R.is_galois())) throw WrongModulus("cannot map " + R.name() + " to " + S.name());
    c = c_;
  } else if (S.m() <= R.m()) {
    for (std::size_t i = 0; i < c_.size(); ++i) c[i] = c_[i] % S.size();
  } else {
    c = c_;
  }
  return LPoly(S, lo_, std::move(c));
}

LPoly LPoly::compose(const LPoly& g) const {
  if (is_zero()) return LPoly(g.ring());
  if (lo_ < 0) throw ContractViolation("compose needs a polynomial outer function");
  // Horner
  LPoly r(*R_);
  for (int e = hi(); e >= 0; --e) r = r * g + constant(*R_, coeff(e));
  return r;
}

LPoly LPoly::div_p_pow(int k) const {
  LPoly r(*this);
  for (auto& x : r.c_) x = R_->div_p_pow(x, k);
  r.normalize();
  return r;
}

LPoly LPoly::window(int a, int b) const {
  std::map<int, i64> t;
  for (auto& [e, v] : terms())
    if (e >= a && e <= b) t[e] = v;
  return from_map(*R_, t);
}

int LPoly::min_val() const {
  int v = R_->m();
  for (auto x : c_) v = std::min(v, R_->val(x));
  return v;
}

std::string LPoly::str(const std::string& var) const {
  if (is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int e = hi(); e >= lo_; --e) {
    i64 c = coeff(e);
    if (!c) continue;
    if (!first) os << " + ";
    first = false;
    if (e == 0) {
      os << c;
      continue;
    }
    if (c != 1) os << c << "*";
    os << var;
    if (e != 1) os << "^" << e;
  }
  return os.str();
}

void poly_divmod(const LPoly& a, const LPoly& b, LPoly& q, LPoly& r) {
  const Ring& R = a.ring();
  if (b.is_zero()) throw NotDivisible("division by zero polynomial");
  if (!a.is_polynomial() || !b.is_polynomial()) throw ContractViolation("poly_divmod needs polynomials");
  i64 li = R.inv(b.lead());
  std::vector<i64> rem(static_cast<std::size_t>(std::max(a.hi() + 1, 0)), 0);
  for (int e = a.lo(); e <= a.hi(); ++e) rem[e] = a.coeff(e);
  const int db = b.hi();
  std::vector<i64> qc(rem.size() > static_cast<std::size_t>(db) ? rem.size() - db : 0, 0);
  for (int e = static_cast<int>(rem.size()) - 1; e >= db; --e) {
    i64 c = rem[e];
    if (!c) continue;
    i64 f = R.mul(c, li);
    qc[e - db] = f;
    for (int j = b.lo(); j <= db; ++j) rem[e - db + j] = R.sub(rem[e - db + j], R.mul(f, b.coeff(j)));
  }
  q = LPoly(R, 0, std::move(qc));
  r = LPoly(R, 0, std::move(rem));
}

LPoly make_monic(const LPoly& a) {
  if (a.is_zero()) return a;
  return a.scale(a.ring().inv(a.lead()));
}

LPoly poly_gcd(const LPoly& a, const LPoly& b) {
  LPoly x = a, y = b, q(a.ring()), r(a.ring());
  while (!y.is_zero()) {
    poly_divmod(x, y, q, r);
    x = y;
    y = r;
  }
  return make_monic(x);
}

}  // namespace hdf
