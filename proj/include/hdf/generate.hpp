#pragma once

#include <random>
#include <vector>

#include "hdf/bundle.hpp"

namespace hdf {

using Rng = std::mt19937_64;

i64 random_elem(Rng& g, const Ring& R);
i64 random_unit(Rng& g, const Ring& R);
LPoly random_poly(Rng& g, const Ring& R, int lo, int hi);

// Random unimodular matrix over the polynomial ring (entries of degree <= deg).
PMat random_unimodular(Rng& g, const Ring& R, int n, int steps, int deg);

// Graded Higgs bundle on P^1 whose pieces are the split bundles with the given
// exponents; every admissible theta coefficient is random (density in [0,1]).
GradedHiggsBundle random_split_graded(Rng& g, const Curve& C, const std::vector<std::vector<int>>& exps,
                                      double density = 1.0, int affine_degree = 2);

// Random block-diagonal frame change (keeps the grading, hides the splitting).
GradedHiggsBundle scramble(Rng& g, const GradedHiggsBundle& G, int steps = 3, int deg = 1);

struct CorpusParams {
  int p = 3;
  int rank = 2;
  int weight = 1;
  int max_exp = 2;
  bool degree_zero = false;
  double density = 1.0;
};
// validated random graded Higgs bundle on P^1 over F_p
GradedHiggsBundle random_graded(Rng& g, const CorpusParams& P);

}  // namespace hdf
