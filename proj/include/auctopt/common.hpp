#pragma once
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace auctopt {

/** Central numeric tolerances.  Modules read these defaults instead of
    hard-coding private epsilons; tests pin them where a contract depends on
    the exact value. */
struct Tolerances {
  double feas = 1e-7;          // LP feasibility (primal and dual)
  double gap_rel = 1e-6;       // relative duality-gap acceptance
  double mass_balance = 1e-8;  // measure mass-balance checks
  double adjoint = 1e-10;      // gradient/divergence adjointness identity
  double order_slack = 1e-8;   // coupling marginal / barycenter slack
};

inline const Tolerances& default_tol() {
  static Tolerances t;
  return t;
}

// Cascade summation over a fixed index range: result is independent of how
// worker threads chunked the range, and more accurate than a running sum.
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace auctopt
