#pragma once
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>

#include "auctopt/density.hpp"
#include "auctopt/grid.hpp"

namespace auctopt {

enum class MechKind { argmax_lift, second_price_1d, custom };

std::string to_string(MechKind k);

/** Full auction rule on profiles (x_1..x_m), each type in [0,1]^n.
    apply() fills the allocation P (bidder-major, m*n entries, P[j*n+i] the
    share of item i won by bidder j) and transfers T (m entries).  Evaluation
    is pure and permutation-equivariant, which the tests check literally. */
struct MechanismRule {
  int n = 1;
  int m = 1;
  MechKind kind = MechKind::custom;
  UtilityGrid u;                     // argmax_lift payload
  double reserve = 0;                // second_price_1d payload
  std::function<void(const double*, double*, double*)> custom_fn;

  void apply(const double* x, double* P, double* T) const;

  nlohmann::json to_json() const;  // custom rules are not serializable
  static MechanismRule from_json(const nlohmann::json& j);
};

/** Lift a reduced solution: item i goes to the bidder whose interpolated
    gradient component g_i is strictly largest (equal split on ties, nothing
    when every gradient vanishes).  Winners pay their threshold types: the
    own-coordinate levels at which their share would step up, which reproduces
    the second-price-with-reserve rule in one dimension and keeps utilities
    nonnegative pathwise. */
MechanismRule lift_argmax(const UtilityGrid& u, int m);

/// highest type above the monopoly reserve wins and pays the larger of the
/// runner-up and the reserve; regular densities only
MechanismRule second_price_1d(const Density1D& rho, int m);

struct RevenueEstimate {
  double mean = 0;
  double se = 0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  nlohmann::json to_json() const;
};

/// Monte Carlo revenue over i.i.d. profiles; chunked counter-based sampling,
/// so the estimate is bit-identical with and without threads
RevenueEstimate estimate_revenue(const MechanismRule& mech,
                                 const DistributionSpec& rho,
                                 std::int64_t samples, std::uint64_t seed,
                                 bool parallel = true);

struct ConsistencyReport {
  int bins = 0;
  std::int64_t samples = 0;
  /// sup over bins of |E(P_1|bin) - E(g|bin)| and the matching worst-case SE
  double alloc_sup_dev = 0;
  double alloc_se = 0;
  double transfer_sup_dev = 0;
  double transfer_se = 0;
  bool alloc_flag = false;     // deviation beyond 3 SE
  bool transfer_flag = false;
  nlohmann::json to_json() const;
};

/** Binned Monte Carlo check that the lifted rule's conditional expectations
    reproduce the reduced pair: E(P_1 | x_1) against the interpolated g and
    E(T_1 | x_1) against <x,g> - u, computed from the same draws. */
ConsistencyReport check_reduced_consistency(const MechanismRule& mech,
                                            const UtilityGrid& u,
                                            const DistributionSpec& rho,
                                            std::int64_t samples,
                                            std::uint64_t seed, int bins = 32);

struct IcIrReport {
  std::int64_t samples = 0;
  std::int64_t ir_violations = 0;  // ex-post, pathwise
  double ir_worst = 0;
  std::int64_t feas_violations = 0;  // sum of shares above one
  double feas_worst = 0;
  std::int64_t ic_violations = 0;  // reduced-form, across report bins
  double ic_worst = 0;
  nlohmann::json to_json() const;
};

/// pathwise IR and feasibility plus a binned reduced-form IC probe: truthful
/// binned utility must beat every misreport bin within ic_tol
IcIrReport verify_ic_ir(const MechanismRule& mech, const DistributionSpec& rho,
                        std::int64_t probes, std::uint64_t seed, int bins = 24,
                        double ic_tol = 2e-2);

}  // namespace auctopt
