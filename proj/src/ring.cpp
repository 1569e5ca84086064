#include "hdf/ring.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "hdf/errors.hpp"

namespace hdf {

bool is_prime(i64 n) {
  if (n < 2) return false;
  for (i64 d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

namespace {

using Poly = std::vector<i64>;

void trim(Poly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

// remainder of a modulo monic b over F_p
Poly poly_mod(Poly a, const Poly& b, i64 p) {
  trim(a);
  const std::size_t db = b.size() - 1;
  while (a.size() > db) {
    i64 c = a.back();
    std::size_t shift = a.size() - 1 - db;
    for (std::size_t i = 0; i <= db; ++i) a[shift + i] = ((a[shift + i] - c * b[i]) % p + p) % p;
    trim(a);
  }
  return a;
}

}  // namespace

bool is_irreducible_mod_p(const std::vector<i64>& poly, i64 p) {
  Poly f = poly;
  trim(f);
  const int deg = static_cast<int>(f.size()) - 1;
  if (deg < 1 || f.back() != 1) return false;
  if (deg == 1) return true;
  // trial division by every monic polynomial of degree 1..deg/2
  for (int d = 1; 2 * d <= deg; ++d) {
    i64 count = 1;
    for (int i = 0; i < d; ++i) count *= p;
    for (i64 code = 0; code < count; ++code) {
      Poly g(d + 1, 0);
      i64 c = code;
      for (int i = 0; i < d; ++i) {
        g[i] = c % p;
        c /= p;
      }
      g[d] = 1;
      if (poly_mod(f, g, p).empty()) return false;
    }
  }
  return true;
}

struct RingRegistry {
  std::mutex mu;
  std::map<std::tuple<i64, int, std::vector<i64>>, std::unique_ptr<Ring>> rings;

  static RingRegistry& get() {
    static RingRegistry r;
    return r;
  }

  const Ring& intern(i64 p, int m, int f, const std::vector<i64>& modulus) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(p, m, modulus);
    auto it = rings.find(key);
    if (it != rings.end()) return *it->second;
    auto r = std::unique_ptr<Ring>(new Ring(p, m, f, modulus));
    const Ring& ref = *r;
    rings.emplace(key, std::move(r));
    return ref;
  }
};

Ring::Ring(i64 p, int m, int f, std::vector<i64> modulus)
    : p_(p), m_(m), f_(f), modulus_(std::move(modulus)) {
  pp_.assign(static_cast<std::size_t>(std::max(m, f)) + 2, 1);
  for (std::size_t i = 1; i < pp_.size(); ++i) pp_[i] = pp_[i - 1] * p;
  q_ = (f == 1) ? pp_[m] : pp_[f];
  if (f > 1) {
    // log/exp tables from a generator found by brute force
    for (i64 g = 2; g < q_; ++g) {
      i64 x = 1, order = 0;
      do {
        x = gf_mul_slow(x, g);
        ++order;
      } while (x != 1 && order < q_);
      if (order == q_ - 1) {
        gen_ = g;
        break;
      }
    }
    exp_.assign(static_cast<std::size_t>(q_ - 1), 0);
    log_.assign(static_cast<std::size_t>(q_), -1);
    i64 x = 1;
    for (i64 k = 0; k < q_ - 1; ++k) {
      exp_[k] = x;
      log_[x] = k;
      x = gf_mul_slow(x, gen_);
    }
  } else if (m == 1) {
    for (i64 g = 1; g < p; ++g) {
      i64 x = 1, order = 0;
      do {
        x = x * g % p;
        ++order;
      } while (x != 1);
      if (order == p - 1) {
        gen_ = g;
        break;
      }
    }
  }
}

const Ring& Ring::zmod(i64 p, int m) {
  if (!is_prime(p) || p == 2) throw ContractViolation("modulus prime must be an odd prime, got " + std::to_string(p));
  if (m < 1 || m > 12) throw ContractViolation("exponent m out of range");
  return RingRegistry::get().intern(p, m, 1, {0, 1});
}

const Ring& Ring::gf(i64 p, int f) {
  if (f == 1) return zmod(p, 1);
  if (!is_prime(p) || p == 2) throw ContractViolation("field characteristic must be an odd prime");
  // first irreducible monic in lexicographic order of (c_0, ..., c_{f-1})
  i64 count = 1;
  for (int i = 0; i < f; ++i) count *= p;
  for (i64 code = 0; code < count; ++code) {
    std::vector<i64> mod(f + 1, 0);
    i64 c = code;
    for (int i = 0; i < f; ++i) {
      mod[i] = c % p;
      c /= p;
    }
    mod[f] = 1;
    if (is_irreducible_mod_p(mod, p)) return gf(p, f, mod);
  }
  throw ContractViolation("no irreducible polynomial found");
}

const Ring& Ring::gf(i64 p, int f, const std::vector<i64>& modulus) {
  if (f == 1) return zmod(p, 1);
  if (!is_prime(p) || p == 2) throw ContractViolation("field characteristic must be an odd prime");
  if (static_cast<int>(modulus.size()) != f + 1 || modulus.back() != 1)
    throw ContractViolation("modulus must be monic of degree f");
  i64 q = 1;
  for (int i = 0; i < f; ++i) q *= p;
  if (q > (1 << 20)) throw ContractViolation("field too large for table arithmetic");
  if (!is_irreducible_mod_p(modulus, p)) throw ContractViolation("modulus is reducible");
  return RingRegistry::get().intern(p, 1, f, modulus);
}

std::string Ring::name() const {
  if (f_ > 1) return "GF(" + std::to_string(p_) + "^" + std::to_string(f_) + ")";
  if (m_ == 1) return "GF(" + std::to_string(p_) + ")";
  return "Z/" + std::to_string(p_) + "^" + std::to_string(m_);
}

i64 Ring::from_int(i64 x) const {
  i64 n = (f_ > 1) ? p_ : q_;
  x %= n;
  if (x < 0) x += n;
  return x;
}

i64 Ring::add(i64 a, i64 b) const {
  if (f_ == 1) {
    i64 s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  i64 r = 0;
  for (int i = 0; i < f_; ++i) {
    i64 d = (a % p_ + b % p_) % p_;
    r += d * pp_[i];
    a /= p_;
    b /= p_;
  }
  return r;
}

i64 Ring::neg(i64 a) const {
  if (f_ == 1) return a == 0 ? 0 : q_ - a;
  i64 r = 0;
  for (int i = 0; i < f_; ++i) {
    i64 d = a % p_;
    r += ((p_ - d) % p_) * pp_[i];
    a /= p_;
  }
  return r;
}

i64 Ring::sub(i64 a, i64 b) const { return add(a, neg(b)); }

i64 Ring::gf_mul_slow(i64 a, i64 b) const {
  std::vector<i64> x(f_, 0), y(f_, 0);
  for (int i = 0; i < f_; ++i) {
    x[i] = a % p_;
    a /= p_;
    y[i] = b % p_;
    b /= p_;
  }
  std::vector<i64> prod(2 * f_, 0);
  for (int i = 0; i < f_; ++i)
    for (int j = 0; j < f_; ++j) prod[i + j] = (prod[i + j] + x[i] * y[j]) % p_;
  auto r = poly_mod(prod, modulus_, p_);
  i64 code = 0;
  for (std::size_t i = 0; i < r.size(); ++i) code += r[i] * pp_[i];
  return code;
}

i64 Ring::mul(i64 a, i64 b) const {
  if (f_ == 1) return static_cast<i64>((static_cast<__int128>(a) * b) % q_);
  if (a == 0 || b == 0) return 0;
  i64 k = log_[a] + log_[b];
  if (k >= q_ - 1) k -= q_ - 1;
  return exp_[k];
}

i64 Ring::pow(i64 a, std::uint64_t e) const {
  i64 r = 1 % q_;
  if (q_ == 1) return 0;
  while (e) {
    if (e & 1) r = mul(r, a);
    a = mul(a, a);
    e >>= 1;
  }
  return r;
}

bool Ring::is_unit(i64 a) const {
  if (f_ > 1) return a != 0;
  return a % p_ != 0;
}

i64 Ring::inv(i64 a) const {
  if (!is_unit(a)) throw NonInvertible("element " + std::to_string(a) + " is not a unit in " + name());
  if (f_ > 1) {
    i64 k = log_[a];
    return exp_[(q_ - 1 - k) % (q_ - 1)];
  }
  // extended Euclid on integers
  i64 r0 = q_, r1 = a, s0 = 0, s1 = 1;
  while (r1 != 0) {
    i64 qq = r0 / r1;
    i64 t = r0 - qq * r1;
    r0 = r1;
    r1 = t;
    t = s0 - qq * s1;
    s0 = s1;
    s1 = t;
  }
  return from_int(s0);
}

int Ring::val(i64 a) const {
  if (f_ > 1) return a == 0 ? 1 : 0;
  if (a == 0) return m_;
  int v = 0;
  while (a % p_ == 0) {
    a /= p_;
    ++v;
  }
  return v;
}

i64 Ring::div_p_pow(i64 a, int k) const {
  if (f_ > 1 || k > m_) throw ContractViolation("div_p_pow needs Z/p^m");
  if (k == 0) return a;
  if (val(a) < k) throw NotDivisible(std::to_string(a) + " not divisible by p^" + std::to_string(k));
  return a / pp_[k];
}

i64 Ring::p_pow(int k) const {
  if (f_ > 1) return k == 0 ? 1 : 0;
  if (k >= m_) return 0;
  return pp_[k] % q_;
}

i64 Ring::reduce_to(i64 a, const Ring& target) const {
  if (target.p_ != p_) throw WrongModulus("characteristic mismatch");
  if (f_ > 1 || target.f_ > 1) {
    if (target.f_ > 1 && f_ == 1 && m_ == 1) return a;  // F_p into F_{p^f}
    if (&target == this) return a;
    throw WrongModulus("cannot map " + name() + " to " + target.name());
  }
  return a % target.q_;
}

i64 Ring::primitive_element() const {
  if (!is_field()) throw ContractViolation("primitive element requested in a non-field");
  return gen_;
}

i64 gf_conjugate(const Ring& F, i64 x, i64 j) {
  i64 f = F.f();
  j %= f;
  if (j < 0) j += f;
  for (i64 k = 0; k < j; ++k) x = F.frobenius(x);
  return x;
}

}  // namespace hdf
