#pragma once

#include <vector>

#include "hdf/matrix.hpp"

namespace hdf {

struct LinearSolution {
  std::vector<i64> particular;
  std::vector<std::vector<i64>> kernel;  // generators of the kernel as a module
};

// Solves A x = b over Z/p^m or F_{p^f}; throws NoSolution.
LinearSolution solve_linear_mod(const SMat& A, const std::vector<i64>& b);

// Row reduction over k[t] (k a field) by unimodular row operations:
// U * M = H with H in row echelon form, pivots monic; with reduce_above the
// entries above each pivot are reduced modulo it (Hermite normal form).
struct HermiteResult {
  PMat H, U, Uinv;
  std::vector<int> pivot_cols;
  int rank = 0;
};
HermiteResult hermite_rows(const PMat& M, bool reduce_above = true);

// Birkhoff factorization G = Q * diag(t^{-a_1}, ..., t^{-a_r}) * P with
// P in GL_r(k[t]), Q in GL_r(k[1/t]) and a_1 >= ... >= a_r.
// For a bundle with transition G (v1 = G v0) the frames w0 = P v0, w1 = Q^{-1} v1
// split it as O(a_1) + ... + O(a_r).
struct BirkhoffResult {
  PMat P;
  std::vector<int> a;
  PMat Q;
};
BirkhoffResult birkhoff_factorize(const PMat& G);

}  // namespace hdf
