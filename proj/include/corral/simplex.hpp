#pragma once

#include "corral/core.hpp"

namespace corral {

struct FlooredStep {
  Vec w;
  double multiplier = 0.0;  // nu in the KKT system
  double residual = 0.0;    // |sum w - 1| after polishing
  int iterations = 0;
};

// Solves
//   argmin_{w in simplex, w >= floors}  <w, z> + sum_j (1/k_j) (w_j ln(w_j/prev_j) - w_j + prev_j)
// where k_j = rates[j] > 0. The KKT system gives w_j = max(f_j, prev_j exp(-k_j (z_j + nu)))
// for one scalar nu, found by Newton on the monotone map nu -> sum_j w_j(nu) with a
// bisection bracket. z = 0 with prev feasible returns prev unchanged.
//
// Shared by the clipped Exp3 step (uniform rates and floors) and the weighted-entropy
// meta update of the unconstrained learner.
FlooredStep floored_mirror_step(const Vec& prev, const Vec& z, const Vec& rates,
                                const Vec& floors);

// Largest KKT violation of w as a solution of the problem above. The multiplier is
// re-estimated from w itself, so this does not trust the solver's nu.
double floored_kkt_residual(const Vec& w, const Vec& prev, const Vec& z, const Vec& rates,
                            const Vec& floors);

}  // namespace corral
