#pragma once
#include <optional>
#include <vector>

#include "auctopt/grid.hpp"
#include "auctopt/lp.hpp"
#include "auctopt/orders.hpp"
#include "auctopt/pwl.hpp"

namespace auctopt {

enum class ConvexityEncoding {
  exact_pairwise,  // supporting-plane rows for every ordered node pair
  axis_stencil     // neighbor rows only: exact in 1D, a relaxation in 2D
};

/** Reduced-form auction design problem:
    maximize  m * integral (<x, g> - u) rho dx  over convex nondecreasing u
    with u(0) = 0, g the certified subgradient field, g in [0,1]^dim, and the
    law of each gradient component increasing-convex dominated by the law of
    xi^(m-1), xi uniform (encoded as stop-loss rows on an alpha ladder). */
struct ReducedProblem {
  Grid grid;
  DistributionSpec rho;
  int m = 1;
  ConvexityEncoding encoding = ConvexityEncoding::exact_pairwise;
  int alpha_points = 33;
  /// demo hook: marginal-value box shifted to [offset, offset+1]^dim
  double domain_offset = 0.0;
  /// optional per-axis convex production cost subtracted from the objective
  std::optional<PwlConvex> axis_cost;

  std::vector<double> alpha_ladder() const;  // uniform + power breakpoints
};

struct ReducedSolution {
  LpStatus status = LpStatus::stalled;
  UtilityGrid u;     // carries the certified subgradient field
  double value = 0;  // LP objective
  /// same functional evaluated independently through integrate()
  double value_quadrature = 0;
  bool encoding_relaxed = false;  // axis_stencil in dim >= 2
  std::int64_t lp_rows = 0;
  std::int64_t lp_iterations = 0;
  std::int64_t rows_activated = 0;
  double lp_max_violation = 0;
  double lp_dual_gap = 0;
  /// worst stop-loss residual of the gradient law at the solved alpha ladder
  double dominance_grid_max = 0;
  /// stop-loss residuals of the gradient law on a 2x finer alpha ladder
  /// (positive = violated beyond the solved ladder; reported, not hidden)
  double dominance_refined_max = 0;
  /// chord gap of the ladder's right-hand side between adjacent alphas: an
  /// a-priori cap on how far the refined residual can exceed the solved one
  double dominance_refined_bound = 0;
};

LinearProgram build_lp(const ReducedProblem& p);
ReducedSolution solve_reduced(const ReducedProblem& p,
                              const SolverConfig& cfg = {});

/// 0 = no-trade (u = 0), 1 = affine piece (degenerate discrete Hessian),
/// 2 = strictly convex
std::vector<std::uint8_t> classify_regions(const UtilityGrid& u, double tol);

/// scan utility for the pairwise encoding: worst violation of the
/// supporting-plane family at (u, g); parallel flag for the OpenMP kernel
double pairwise_convexity_violation(const UtilityGrid& u, bool parallel);

}  // namespace auctopt
