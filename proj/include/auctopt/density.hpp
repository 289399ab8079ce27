#pragma once
#include <json.hpp>

#include <vector>

#include "auctopt/common.hpp"
#include "auctopt/rng.hpp"

namespace auctopt {

/** Piecewise-linear probability density on [0,1], strictly positive.
    CDF is piecewise quadratic and inverted exactly per segment, which keeps
    inverse-CDF sampling deterministic and bias-free. */
struct Density1D {
  std::vector<double> x;  // nodes, x.front()=0, x.back()=1, strictly increasing
  std::vector<double> v;  // density values at nodes, all > 0 after normalize()

  void normalize();        // scale v so the integral is exactly 1
  void validate() const;   // shape + strict positivity
  double pdf(double t) const;
  double cdf(double t) const;
  double inv_cdf(double q) const;  // q in [0,1]
  /// d/dx pdf at t (one-sided at kinks; used for the transform measure)
  double pdf_deriv(double t) const;

  nlohmann::json to_json() const;
  static Density1D from_json(const nlohmann::json& j);
};

Density1D uniform_density();
/// rho(t) proportional to max(a + b t, floor); exact for linear densities
Density1D linear_density(double a, double b, double floor = 0.0);
/// symmetric triangle on [lo,hi], zero outside (callers add a floor for positivity)
Density1D triangle_density(double lo, double hi);
/// w1*tri(0,0.4) + w2*tri(0.6,1) + floor, renormalized; the ironing stress case
Density1D bimodal_density(double w1 = 0.8, double w2 = 0.2, double floor = 0.02);
/// values sampled on an even grid, linearly interpolated
Density1D tabulated_density(const std::vector<double>& values);
/// pointwise convex combination  sum_i w[i]*parts[i]  plus a constant floor
Density1D mix_densities(const std::vector<Density1D>& parts,
                        const std::vector<double>& w, double floor = 0.0);

/** Type distribution on [0,1]^n.  Product of 1D marginals (the analytic path:
    exact CDFs, exact sampling) or a tabulated density on the lattice
    (multilinear interpolation, finite-difference gradient; no sampler). */
struct DistributionSpec {
  enum class Kind { uniform, product, tabulated };
  Kind kind = Kind::uniform;
  int dim = 1;
  std::vector<Density1D> axes;  // product
  std::vector<double> table;    // tabulated, row-major on a k^dim lattice
  int table_k = 0;

  void validate() const;
  double pdf(const double* pt) const;
  /// gradient of the density; analytic for product kinds, finite differences
  /// for tabulated (the adjointness checks flag when that is too rough)
  void pdf_grad(const double* pt, double* out) const;
  bool can_sample() const { return kind != Kind::tabulated; }
  /// inverse-CDF draw addressed by (stream, counter); fills pt[0..dim)
  void sample(const CounterRng& rng, std::uint64_t stream,
              std::uint64_t counter, double* pt) const;

  nlohmann::json to_json() const;
  static DistributionSpec from_json(const nlohmann::json& j);

  static DistributionSpec uniform(int dim);
  static DistributionSpec product(std::vector<Density1D> axes);
  static DistributionSpec tabulated(int dim, int k, std::vector<double> values);
};

}  // namespace auctopt
