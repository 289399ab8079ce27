#pragma once
#include <json.hpp>

#include <tuple>
#include <vector>

#include "auctopt/grid.hpp"
#include "auctopt/lp.hpp"

namespace auctopt {

/** Finitely supported distribution on the line: sorted support + positive
    weights.  Stop-loss transforms of these are exact piecewise-linear
    functions, so dominance checks reduce to finitely many evaluations. */
struct Distribution1D {
  std::vector<double> x;
  std::vector<double> p;

  static Distribution1D from_samples(std::vector<double> values,
                                     std::vector<double> weights,
                                     double merge_tol = 1e-12);
  double total() const;
  double mean() const;
  void normalize();
};

/// E (Z - alpha)_+
double stop_loss(const Distribution1D& d, double alpha);
/// E (xi^{m-1} - alpha)_+ for xi uniform on [0,1]; closed form, all alpha
double stop_loss_power(int m, double alpha);

struct IcxCheck {
  bool dominated = false;
  double worst_violation = 0;  // max over alpha of SL_a - SL_b
  double worst_alpha = 0;
};

/// increasing-convex dominance a <= b via stop-loss at every kink
IcxCheck dominated_icx_1d(const Distribution1D& a, const Distribution1D& b,
                          double tol);
/// a <= law of xi^(m-1); checks kinks plus per-segment stationary points of
/// the smooth right-hand side
IcxCheck dominated_icx_power(const Distribution1D& a, int m, double tol);

/// law of one gradient component under the density's quadrature weights
Distribution1D law_of_gradient(const UtilityGrid& u,
                               const DistributionSpec& rho, int axis);

enum class CouplingMode { submartingale, martingale };

/** Support-point view of a nonnegative GridMeasure (nodes with mass plus
    atoms), the index space coupling plans live in. */
struct DiscreteMeasureNd {
  int dim = 1;
  std::vector<std::vector<double>> pts;
  std::vector<double> w;

  static DiscreteMeasureNd from_grid_measure(const GridMeasure& mu,
                                             double drop_tol = 0.0);
  double total() const;
};

struct CouplingWitness {
  bool feasible = false;
  DiscreteMeasureNd a, b;  // after the equal-mass normalization
  /// coupling (ia, ib, mass): rows sum to a, columns to b, and conditional
  /// barycenters lie above (submartingale) or at (martingale) the source
  std::vector<std::tuple<int, int, double>> plan;
  /// infeasibility certificate: max of affine pieces val + <grad, z - at>;
  /// submartingale mode yields nonnegative grads (monotone convex function)
  struct Piece {
    std::vector<double> at;
    std::vector<double> grad;
    double val = 0;
  };
  std::vector<Piece> separating;
  double sep_gap = 0;  // integral against a minus integral against b

  double eval_separating(const double* z) const;
  nlohmann::json plan_to_json() const;
};

/** Does b dominate a (a ⪯ b)?  Feasibility of the coupling LP; on failure the
    LP's infeasibility multipliers are folded into a separating function. */
CouplingWitness dominance_witness_nd(const GridMeasure& a,
                                     const GridMeasure& b, CouplingMode mode,
                                     const SolverConfig& cfg = {});
CouplingWitness dominance_witness_nd(const DiscreteMeasureNd& a,
                                     const DiscreteMeasureNd& b,
                                     CouplingMode mode,
                                     const SolverConfig& cfg = {});

}  // namespace auctopt
