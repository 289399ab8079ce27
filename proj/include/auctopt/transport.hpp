#pragma once
#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "auctopt/density.hpp"
#include "auctopt/grid.hpp"
#include "auctopt/lp.hpp"
#include "auctopt/orders.hpp"
#include "auctopt/pwl.hpp"
#include "auctopt/reduced.hpp"

namespace auctopt {

/** Sparse coupling between two lattices: (source node, target node, mass)
    triplets.  Marginals are plain GridMeasures so downstream checks reuse the
    measure toolkit. */
struct TransportPlan {
  Grid source, target;
  std::vector<std::tuple<std::size_t, std::size_t, double>> mass;

  double total_mass() const;
  GridMeasure first_marginal() const;
  GridMeasure second_marginal() const;
  double cost_l1() const;
  void to_csv(std::ostream& os) const;  // x_index,y_index,mass
};

/** Signed measure obtained by moving the revenue functional's derivatives
    onto the density: face mass where a coordinate tops out, a negative
    interior part, and a unit atom at the origin, all scaled by the bidder
    count.  Assembled from exact per-cell integrals so the total vanishes at
    every resolution, not just in the limit. */
GridMeasure transform_measure(const DistributionSpec& rho, int m,
                              const Grid& grid);

struct WeakDualResult {
  LpStatus status = LpStatus::stalled;
  TransportPlan plan;
  double value = 0;
  std::int64_t lp_iterations = 0;
};

/** Cheapest l1 relocation of the measure's positive part onto its negative
    part, where the positive part may first drift upward (conditional means
    ≥ the source).  Solved as a min-cost flow on the lattice plus explicit
    drift variables; the plan is recovered by path decomposition. */
WeakDualResult solve_weak_dual(const GridMeasure& mu,
                               const SolverConfig& cfg = {});

struct SlacknessReport {
  double total_mass = 0;
  double violating_mass = 0;
  double fraction = 0;  // violating / total
  double worst_gap = 0;
};

/// mass fraction of the plan where |u(x) - u(y) - ||x-y||_1| exceeds tol
SlacknessReport complementary_slackness_report(const UtilityGrid& u,
                                               const TransportPlan& plan,
                                               double tol);

struct BeckmannResult {
  LpStatus status = LpStatus::stalled;
  FlowField flow;
  double value = 0;
};

/** Minimal conjugate-cost flow draining pi: minimize the edge-weighted sum of
    phi_conj(c) rho subject to discrete_divergence(c rho) = -pi.  Conjugates
    of nonnegative nondecreasing costs vanish on (-inf, 0], so negative flow
    components are free; the epigraph rows encode exactly that extension. */
BeckmannResult beckmann_value(const GridMeasure& pi,
                              const std::vector<PwlConvex>& phi_conj,
                              const DistributionSpec& rho,
                              const SolverConfig& cfg = {});

/** Upper bound on the auction value: per-axis convex costs phi, a flow c with
    c(x) in the subdifferential of phi at g(x), and pi = -div(c rho) that must
    dominate the transform measure in the increasing convex order. */
struct DualCertificate {
  std::vector<PwlConvex> phi;  // one per axis
  FlowField flow;
  GridMeasure pi;
  double dual_value = 0;
  double beck_term = 0;   // sum of phi*(c) rho weights
  double power_term = 0;  // sum of exact integrals of phi(t^{m-1})
  /// edge-law value sum of phi(du) rho weights; beck_term + gradient_phi_term
  /// equals the pairing of u against m^{-1} pi exactly, so the reported dual
  /// overstates that pairing by exactly power_term - gradient_phi_term
  double gradient_phi_term = 0;
  /// measure-side primal m * integral of u against the transform measure;
  /// the pairing the certificate actually bounds
  double primal_measure_value = 0;
  double gap_vs_primal = 0;  // dual_value - primal_measure_value
  bool valid = false;
  /// smallest uniform scaling (1+lambda) of (phi, c) needed before the
  /// dominance witness accepted pi; 0 when none was needed
  double lambda_slack = 0;
  std::vector<CouplingWitness::Piece> separating;  // when invalid
  double sep_gap = 0;
  std::string notes;

  nlohmann::json to_json() const;
};

/** Build a certificate from a solved utility: each phi_i is the convex
    function whose subdifferential rearranges the law of g_i onto the ironed
    valuation of the i-th marginal, c_i reads that rearrangement off node by
    node, and pi is the flow's divergence.  Auction objective only. */
DualCertificate certify_reduced_solution(const UtilityGrid& u,
                                         const ReducedProblem& p,
                                         const SolverConfig& cfg = {});

/// marginal of the type distribution along one axis (exact for product kinds,
/// trapezoid projection of the table otherwise)
Density1D axis_marginal(const DistributionSpec& rho, int axis);

}  // namespace auctopt
