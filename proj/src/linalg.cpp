#include "hdf/linalg.hpp"

#include <algorithm>
#include <numeric>

#include "hdf/errors.hpp"

namespace hdf {

LinearSolution solve_linear_mod(const SMat& A0, const std::vector<i64>& b0) {
  const Ring& R = A0.ring();
  if (static_cast<int>(b0.size()) != A0.rows()) throw ContractViolation("solve_linear_mod: rhs size mismatch");
  const int nr = A0.rows(), nc = A0.cols();
  const int m = R.is_field() ? 1 : R.m();
  SMat A = A0;
  std::vector<i64> b = b0;
  SMat V = SMat::identity(R, nc);
  std::vector<int> vals;
  int k = 0;
  for (; k < std::min(nr, nc); ++k) {
    int bi = -1, bj = -1, bv = m;
    for (int i = k; i < nr; ++i)
      for (int j = k; j < nc; ++j) {
        if (!A(i, j)) continue;
        int v = R.val(A(i, j));
        if (bi < 0 || v < bv) {
          bi = i;
          bj = j;
          bv = v;
        }
      }
    if (bi < 0) break;
    if (bi != k) {
      for (int j = 0; j < nc; ++j) std::swap(A(k, j), A(bi, j));
      std::swap(b[k], b[bi]);
    }
    if (bj != k) {
      for (int i = 0; i < nr; ++i) std::swap(A(i, k), A(i, bj));
      for (int i = 0; i < nc; ++i) std::swap(V(i, k), V(i, bj));
    }
    // pivot = p^v * u; normalize to p^v
    i64 piv = A(k, k);
    i64 u = R.is_field() ? piv : R.div_p_pow(piv, bv);
    i64 uinv = R.inv(u);
    for (int j = 0; j < nc; ++j) A(k, j) = R.mul(A(k, j), uinv);
    b[k] = R.mul(b[k], uinv);
    // clear column below / above
    for (int i = 0; i < nr; ++i) {
      if (i == k || !A(i, k)) continue;
      i64 f = R.is_field() ? A(i, k) : R.div_p_pow(A(i, k), bv);
      for (int j = 0; j < nc; ++j) A(i, j) = R.sub(A(i, j), R.mul(f, A(k, j)));
      b[i] = R.sub(b[i], R.mul(f, b[k]));
    }
    // clear row to the right with column operations
    for (int j = k + 1; j < nc; ++j) {
      if (!A(k, j)) continue;
      i64 f = R.is_field() ? A(k, j) : R.div_p_pow(A(k, j), bv);
      for (int i = 0; i < nr; ++i) A(i, j) = R.sub(A(i, j), R.mul(f, A(i, k)));
      for (int i = 0; i < nc; ++i) V(i, j) = R.sub(V(i, j), R.mul(f, V(i, k)));
    }
    vals.push_back(bv);
  }
  const int rk = k;
  std::vector<i64> y(nc, 0);
  for (int i = 0; i < rk; ++i) {
    int v = vals[i];
    if (R.is_field()) {
      y[i] = b[i];
      continue;
    }
    if (R.val(b[i]) < v) throw NoSolution("inconsistent system (valuation obstruction at pivot " + std::to_string(i) + ")");
    y[i] = R.div_p_pow(b[i], v);
  }
  for (int i = rk; i < nr; ++i)
    if (b[i]) throw NoSolution("inconsistent system (nonzero residual row " + std::to_string(i) + ")");
  LinearSolution sol;
  sol.particular = V.apply(y);
  for (int i = 0; i < nc; ++i) {
    std::vector<i64> e(nc, 0);
    if (i < rk) {
      if (vals[i] == 0) continue;
      e[i] = R.p_pow(m - vals[i]);
    } else {
      e[i] = 1;
    }
    sol.kernel.push_back(V.apply(e));
  }
  return sol;
}

HermiteResult hermite_rows(const PMat& M, bool reduce_above) {
  const Ring& R = M.ring();
  if (!R.is_field()) throw ContractViolation("hermite_rows needs a field");
  if (!M.is_polynomial()) throw ContractViolation("hermite_rows needs polynomial entries");
  const int nr = M.rows(), nc = M.cols();
  HermiteResult res{M, PMat::identity(R, nr), PMat::identity(R, nr), {}, 0};
  PMat& H = res.H;
  PMat& U = res.U;
  PMat& Ui = res.Uinv;
  auto swap_rows = [&](int a, int b) {
    if (a == b) return;
    for (int j = 0; j < nc; ++j) std::swap(H(a, j), H(b, j));
    for (int j = 0; j < nr; ++j) std::swap(U(a, j), U(b, j));
    for (int i = 0; i < nr; ++i) std::swap(Ui(i, a), Ui(i, b));
  };
  // row_i -= q * row_r
  auto axpy = [&](int i, int r, const LPoly& q) {
    if (q.is_zero()) return;
    for (int j = 0; j < nc; ++j)
      if (!H(r, j).is_zero()) H(i, j) -= q * H(r, j);
    for (int j = 0; j < nr; ++j)
      if (!U(r, j).is_zero()) U(i, j) -= q * U(r, j);
    for (int a = 0; a < nr; ++a)
      if (!Ui(a, i).is_zero()) Ui(a, r) += q * Ui(a, i);
  };
  int row = 0;
  for (int c = 0; c < nc && row < nr; ++c) {
    for (;;) {
      int best = -1;
      for (int i = row; i < nr; ++i)
        if (!H(i, c).is_zero() && (best < 0 || H(i, c).hi() < H(best, c).hi())) best = i;
      if (best < 0) break;
      swap_rows(row, best);
      bool clean = true;
      for (int i = row + 1; i < nr; ++i) {
        if (H(i, c).is_zero()) continue;
        LPoly q(R), r(R);
        poly_divmod(H(i, c), H(row, c), q, r);
        axpy(i, row, q);
        if (!H(i, c).is_zero()) clean = false;
      }
      if (clean) break;
    }
    if (H(row, c).is_zero()) continue;
    i64 lc = H(row, c).lead();
    if (lc != 1) {
      i64 li = R.inv(lc);
      for (int j = 0; j < nc; ++j) H(row, j) = H(row, j).scale(li);
      for (int j = 0; j < nr; ++j) U(row, j) = U(row, j).scale(li);
      for (int a = 0; a < nr; ++a) Ui(a, row) = Ui(a, row).scale(lc);
    }
    if (reduce_above) {
      for (int i = 0; i < row; ++i) {
        if (H(i, c).is_zero()) continue;
        LPoly q(R), r(R);
        poly_divmod(H(i, c), H(row, c), q, r);
        axpy(i, row, q);
      }
    }
    res.pivot_cols.push_back(c);
    ++row;
  }
  res.rank = row;
  return res;
}

BirkhoffResult birkhoff_factorize(const PMat& G) {
  const Ring& R = G.ring();
  if (!R.is_field()) throw WrongModulus("birkhoff_factorize needs coefficients in a field");
  const int r = G.rows();
  if (G.cols() != r) throw ContractViolation("birkhoff_factorize needs a square matrix");
  if (!det(G).is_unit_monomial()) throw NonInvertible("transition determinant is not a unit monomial");
  const int lo = G.min_lo();
  const int N = std::max(0, -lo);
  PMat A = G.map([N](const LPoly& x) { return x.shift(N); });
  PMat Winv = PMat::identity(R, r);
  auto col_deg = [&](int j) {
    int d = -1;
    for (int i = 0; i < r; ++i)
      if (!A(i, j).is_zero()) d = std::max(d, A(i, j).hi());
    return d;
  };
  for (int guard = 0;; ++guard) {
    if (guard > 100000) throw ContractViolation("birkhoff column reduction did not terminate");
    std::vector<int> d(r);
    for (int j = 0; j < r; ++j) d[j] = col_deg(j);
    SMat Lc(R, r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) Lc(i, j) = A(i, j).coeff(d[j]);
    auto ker = kernel_basis_field(Lc);
    if (ker.empty()) break;
    const auto& c = ker.front();
    int js = -1;
    for (int j = 0; j < r; ++j)
      if (c[j] && (js < 0 || d[j] > d[js])) js = j;
    i64 cinv = R.inv(c[js]);
    for (int j = 0; j < r; ++j) {
      if (j == js || !c[j]) continue;
      LPoly f = LPoly::monomial(R, R.mul(c[j], cinv), d[js] - d[j]);
      for (int i = 0; i < r; ++i)
        if (!A(i, j).is_zero()) A(i, js) += f * A(i, j);
      for (int k = 0; k < r; ++k)
        if (!Winv(js, k).is_zero()) Winv(j, k) -= f * Winv(js, k);
    }
  }
  std::vector<int> d(r), a(r);
  for (int j = 0; j < r; ++j) {
    d[j] = col_deg(j);
    a[j] = N - d[j];
  }
  PMat L(R, r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) L(i, j) = A(i, j).shift(-d[j]);
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a[x] > a[y]; });
  BirkhoffResult res{Winv.select_rows(order), {}, L.select_cols(order)};
  for (int j : order) res.a.push_back(a[j]);
  return res;
}

}  // namespace hdf
