#pragma once
#include <json.hpp>

#include <functional>
#include <vector>

#include "auctopt/common.hpp"

namespace auctopt {

/** Convex piecewise-linear function on [0, +inf) with phi(0) = at0 (usually 0)
    and nondecreasing slopes.  slope[i] applies on [bp[i], bp[i+1]); the last
    slope extends beyond the final breakpoint.  Conjugation is exact, which is
    what makes the primal and flow forms of the dual agree to LP tolerance. */
struct PwlConvex {
  std::vector<double> bp;     // breakpoints, bp[0] == 0, strictly increasing
  std::vector<double> slope;  // one per breakpoint, nondecreasing
  double at0 = 0;

  void validate() const;
  double eval(double t) const;
  /// subdifferential [lo,hi] at t >= 0 (at 0 the lower end is -inf, clamped)
  std::pair<double, double> subdiff(double t) const;
  /// Legendre conjugate sup_{t>=0} (s t - phi(t)); +inf past the top slope
  double conj(double s) const;
  /// a maximizer t attaining conj(s)
  double conj_argmax(double s) const;
  /** The conjugate as a function of its own: breakpoints at this function's
      slopes, slopes at its breakpoints.  The +inf region past the top slope
      is closed off by a steep wall segment so LP epigraphs stay finite. */
  PwlConvex conj_function(double wall_slope = 1e6) const;
  double max_slope() const { return slope.back(); }
  /// exact integral of phi(t^(m-1)) over t in [0,1], m >= 1
  double integral_power(int m) const;

  /// phi(s) = int_0^s psi, psi nondecreasing sampled at segment midpoints of
  /// the given breakpoint ladder
  static PwlConvex from_slope_profile(
      const std::vector<double>& breakpoints,
      const std::function<double(double)>& psi);
  /// hinge M*(t-knee)_+ ; conjugate is s -> s*knee on [0,M]
  static PwlConvex hinge(double knee, double big_slope);
  /// chord interpolation of a convex function on the given ladder (lies above
  /// the function, so admissibility is preserved)
  static PwlConvex interpolate(const std::vector<double>& breakpoints,
                               const std::function<double(double)>& f);

  nlohmann::json to_json() const;
  static PwlConvex from_json(const nlohmann::json& j);
};

}  // namespace auctopt
