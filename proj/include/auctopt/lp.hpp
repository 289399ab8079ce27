#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "auctopt/common.hpp"

namespace auctopt {

enum class RowSense { le, eq, ge };
enum class LpStatus { optimal, infeasible, unbounded, stalled };

std::string to_string(LpStatus s);

struct SolverConfig {
  double feas_tol = 1e-7;   // primal feasibility (rows and bounds)
  double opt_tol = 1e-9;    // reduced-cost (dual feasibility) tolerance
  std::int64_t max_iters = -1;  // <0: scaled from problem size
  int refactor_every = 96;  // basis refactorization cadence (eta file length)
  // Row-dominant problems are solved by cutting-plane activation: solve on an
  // active subset, scan the rest for violations, warm-restart.  Deterministic.
  bool allow_lazy_rows = true;
  std::size_t lazy_row_threshold = 20000;
  std::size_t lazy_max_add_per_round = 20000;
  int verbosity = 0;
};

/** Sparse LP:  optimize  obj.x  subject to row senses and variable bounds.
    Bounds may be +-infinity.  Row/variable order is part of the problem
    identity: solves are deterministic functions of the serialized bytes. */
struct LinearProgram {
  bool maximize = false;
  std::vector<double> lb, ub, obj;
  struct Row {
    RowSense sense = RowSense::le;
    double rhs = 0;
    std::vector<std::pair<int, double>> coef;
  };
  std::vector<Row> rows;
  /// rows the lazy driver should activate from the start (builders that know
  /// which inequalities are likely to bind record them here; plain solves and
  /// problems below the lazy threshold ignore the hint)
  std::vector<std::size_t> lazy_hint_rows;

  int n_vars() const { return int(lb.size()); }
  int add_var(double lo, double hi, double c);
  int add_row(RowSense s, double rhs, std::vector<std::pair<int, double>> coef);

  void dump(std::ostream& os) const;  // plain text, one line per nonzero
  static LinearProgram restore(std::istream& is);
};

struct LPSolution {
  LpStatus status = LpStatus::stalled;
  double objective = 0;
  std::vector<double> x;
  /// shadow prices d(objective)/d(rhs) in the problem's own orientation
  std::vector<double> dual;
  std::vector<double> reduced_cost;
  /// row multipliers certifying infeasibility (empty otherwise): y with
  /// y.A determining a bound-separating hyperplane; see orders for its use
  std::vector<double> farkas;
  std::int64_t iterations = 0;
  std::int64_t rows_activated = 0;  // lazy path: rows ever made active
  double max_violation = 0;  // residual primal violation at the returned point
  double dual_gap = 0;       // |primal - dual objective| when optimal
};

LPSolution lp_solve(const LinearProgram& lp, const SolverConfig& cfg = {});

/// violation scan used by the lazy path; exposed for the parallel/serial
/// comparison tests.  Returns per-row violations (>=0) at the point x.
std::vector<double> row_violations(const LinearProgram& lp,
                                   const std::vector<double>& x,
                                   bool parallel);

}  // namespace auctopt
