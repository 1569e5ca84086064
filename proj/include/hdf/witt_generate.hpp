#pragma once

#include <vector>

#include "hdf/generate.hpp"
#include "hdf/witt.hpp"

namespace hdf {

// Random instances for the witt-lift suites.
std::vector<int> random_ranks(Rng& g, int p, int max_rank);
std::vector<int> grades_of(const std::vector<int>& ranks);
// one-chart tuple over Z/p^n written directly in a filtered frame
LiftingInputTuple random_chart_tuple(Rng& g, i64 p, int n, CurveKind kind, int max_rank = 3);
// random filtered unipotent frame change over Z/p^{n-1}
std::vector<PMat> random_unipotent(Rng& g, const LiftingInputTuple& T);
// P^1 tuple over Z/p^2: Hbar = C^{-1}(G) with the grade-induced filtration, E a lift of its grading
LiftingInputTuple random_p1_tuple(Rng& g, int p, int max_rank = 3);
LiftingAtlas random_atlas(Rng& g, const Curve& C, int deg = 2);
PMat random_section(Rng& g, const Ring& R, int r, int lo, int hi);

}  // namespace hdf
