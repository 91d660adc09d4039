#pragma once

// Bound families evaluated by the trajectory verifier. The five channels are
// ordered: initial state, process disturbance, output disturbance, input,
// output.

#include "ioss/comparison.hpp"

namespace ioss {

// Max-form estimate: |x(t) - chi(t)| <= max{ beta(|x0-chi0|, t),
//   max_{1<=tau<=t} { gamma(|w_d(t-tau)|, tau), delta(|v_d(t-tau)|, tau),
//                     epsilon(|u_d(t-tau)|, tau), phi(|y_d(t-tau)|, tau) } }.
struct MaxBoundFamily {
  KLFn beta, gamma, delta, epsilon, phi;
};

// Sum-form estimate: alpha1(|x(t) - chi(t)|) <= beta(|x0-chi0|, t)
//   + sum_{tau=1}^{t} ( gamma(...) + delta(...) + epsilon(...) + phi(...) ).
struct SumBoundFamily {
  ScalarFn alpha1;
  KLFn beta, gamma, delta, epsilon, phi;
};

}  // namespace ioss
