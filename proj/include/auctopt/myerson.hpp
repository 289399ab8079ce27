#pragma once
#include <vector>

#include "auctopt/density.hpp"
#include "auctopt/grid.hpp"
#include "auctopt/pwl.hpp"

namespace auctopt {

/// V(x) = x - (1 - CDF(x)) / pdf(x)
double virtual_value(const Density1D& rho, double x);

/** Ironed virtual valuation.  Work in quantile space: f(q) is the upper tail
    integral of the virtual value, G its concave envelope flattened left of
    its argmax; the ironed value is the negated left-derivative -G'(q).  It is
    nondecreasing and nonnegative by construction, with V̄ = max(V,0) exactly
    when the raw virtual value is already monotone. */
struct IronedValuation {
  Density1D rho;
  std::vector<double> q;    // quantile samples, 0..1, kink-aligned
  std::vector<double> t;    // matching type values P^{-1}(q)
  std::vector<double> vq;   // raw virtual value at samples
  std::vector<double> f;    // upper tail integral of vq in quantile space
  std::vector<int> hull;    // envelope vertex indices (after flattening,
                            // hull.front() is the argmax vertex)
  double q_star = 0;        // no-sale quantile: V̄ = 0 on [0, q_star]
  bool regular = false;     // raw virtual value nondecreasing within 1e-9

  double vbar_at_q(double qq) const;  // left-derivative convention at kinks
  double vbar(double x) const;        // at a type
  /// exact integral of vbar over a quantile band [qa, qb]
  double vbar_integral(double qa, double qb) const;
  double reserve() const;             // P^{-1}(q_star)
  double tie_mass() const { return q_star; }
  /// ironed intervals (qa, qb) where the envelope sits strictly above f
  std::vector<std::pair<double, double>> flat_intervals() const;
};

IronedValuation iron(const Density1D& rho, int grid_n = 4097);

/** One-item optimum for m symmetric bidders: allocation by highest ironed
    virtual value when positive, utilities from the quantile-averaged gradient
    q^(m-1) (conditional mean on ironed intervals, zero below the reserve). */
struct MyersonSolution {
  IronedValuation ironed;
  int m = 1;
  double revenue = 0;
  double reserve = 0;
  double tie_mass = 0;

  double uprime(double x) const;
  double u(double x) const;  // integral of uprime from the reserve
  /// sampled utility + gradient on a 1D grid, for cross-module comparisons
  UtilityGrid sample_u(const Grid& grid) const;

 private:
  friend MyersonSolution myerson_solve(const Density1D&, int, int);
  std::vector<double> u_at_sample_;  // cumulative utility at ironed.t
};

MyersonSolution myerson_solve(const Density1D& rho, int m, int grid_n = 4097);
double optimal_revenue_1item(const Density1D& rho, int m);

/** One-dimensional dual certificate: a convex cost phi whose derivative
    transports the gradient law onto the ironed valuation, paired with the
    flow c = V̄.  dual_value majorizes the optimal revenue; the gap is
    discretization-only. */
struct Certificate1D {
  PwlConvex phi;
  int m = 1;
  double dual_value = 0;
  double vbar_term = 0;   // integral of phi*(V̄) rho dx
  double power_term = 0;  // integral of phi(t^(m-1)) dt
};

Certificate1D dual_certificate_1d(const MyersonSolution& sol);

}  // namespace auctopt
