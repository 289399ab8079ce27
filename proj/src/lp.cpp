#include "auctopt/lp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auctopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::stalled: return "stalled";
  }
  return "?";
}

int LinearProgram::add_var(double lo, double hi, double c) {
  require(!(lo > hi), "lp: variable with lb > ub");
  lb.push_back(lo);
  ub.push_back(hi);
  obj.push_back(c);
  return int(lb.size()) - 1;
}

int LinearProgram::add_row(RowSense s, double rhs,
                           std::vector<std::pair<int, double>> coef) {
  rows.push_back(Row{s, rhs, std::move(coef)});
  return int(rows.size()) - 1;
}

void LinearProgram::dump(std::ostream& os) const {
  char buf[128];
  os << "lpdump 1\n";
  os << "sense " << (maximize ? "max" : "min") << "\n";
  os << "vars " << n_vars() << "\n";
  os << "rows " << rows.size() << "\n";
  auto num = [&](double v) -> std::string {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (int j = 0; j < n_vars(); ++j)
    os << "v " << j << ' ' << num(lb[j]) << ' ' << num(ub[j]) << ' '
       << num(obj[j]) << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const char* s = rows[i].sense == RowSense::le   ? "le"
                    : rows[i].sense == RowSense::eq ? "eq"
                                                    : "ge";
    os << "r " << i << ' ' << s << ' ' << num(rows[i].rhs) << "\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [j, a] : rows[i].coef)
      os << "a " << i << ' ' << j << ' ' << num(a) << "\n";
  os << "end\n";
}

LinearProgram LinearProgram::restore(std::istream& is) {
  LinearProgram lp;
  std::string tok;
  is >> tok;
  require(tok == "lpdump", "lp restore: bad magic");
  int version;
  is >> version;
  require(version == 1, "lp restore: bad version");
  auto num = [&]() -> double {
    std::string s;
    is >> s;
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::stod(s);
  };
  int nv = 0;
  std::size_t nr = 0;
  while (is >> tok) {
    if (tok == "end") break;
    if (tok == "sense") {
      is >> tok;
      lp.maximize = (tok == "max");
    } else if (tok == "vars") {
      is >> nv;
      lp.lb.assign(nv, 0);
      lp.ub.assign(nv, 0);
      lp.obj.assign(nv, 0);
    } else if (tok == "rows") {
      is >> nr;
      lp.rows.resize(nr);
    } else if (tok == "v") {
      int j;
      is >> j;
      lp.lb[j] = num();
      lp.ub[j] = num();
      lp.obj[j] = num();
    } else if (tok == "r") {
      std::size_t i;
      is >> i >> tok;
      lp.rows[i].sense = tok == "le"   ? RowSense::le
                         : tok == "eq" ? RowSense::eq
                                       : RowSense::ge;
      lp.rows[i].rhs = num();
    } else if (tok == "a") {
      std::size_t i;
      int j;
      is >> i >> j;
      lp.rows[i].coef.emplace_back(j, num());
    } else {
      fail("lp restore: unknown token '" + tok + "'");
    }
  }
  return lp;
}

std::vector<double> row_violations(const LinearProgram& lp,
                                   const std::vector<double>& x,
                                   bool parallel) {
  std::vector<double> out(lp.rows.size(), 0.0);
  auto body = [&](std::int64_t i) {
    const auto& row = lp.rows[i];
    double ax = 0;
    for (const auto& [j, a] : row.coef) ax += a * x[j];
    double v = 0;
    switch (row.sense) {
      case RowSense::le: v = ax - row.rhs; break;
      case RowSense::ge: v = row.rhs - ax; break;
      case RowSense::eq: v = std::abs(ax - row.rhs); break;
    }
    out[i] = std::max(0.0, v);
  };
  std::int64_t n = std::int64_t(lp.rows.size());
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// revised simplex with bounded variables, sparse LU basis + product-form
// updates, composite phase 1, Bland fallback after degenerate runs
// ---------------------------------------------------------------------------

namespace {

enum VarState : std::uint8_t { AT_LOWER, AT_UPPER, BASIC, FREE_ZERO };

struct Internal {
  int n_struct = 0, m = 0, n_total = 0;
  bool flipped = false;  // original was maximize
  std::vector<double> lb, ub, cost, b;
  // CSC over structural columns; slack j >= n_struct is the unit column
  // e_{j - n_struct}
  std::vector<std::int64_t> col_start;
  std::vector<int> row_idx;
  std::vector<double> cval;

  void gather(int j, std::vector<double>& dense,
              std::vector<int>& touched) const {
    if (j >= n_struct) {
      dense[j - n_struct] = 1.0;
      touched.push_back(j - n_struct);
      return;
    }
    for (std::int64_t p = col_start[j]; p < col_start[j + 1]; ++p) {
      dense[row_idx[p]] = cval[p];
      touched.push_back(row_idx[p]);
    }
  }
  double col_dot(int j, const std::vector<double>& y) const {
    if (j >= n_struct) return y[j - n_struct];
    double s = 0;
    for (std::int64_t p = col_start[j]; p < col_start[j + 1]; ++p)
      s += cval[p] * y[row_idx[p]];
    return s;
  }
};

Internal build_internal(const LinearProgram& lp) {
  Internal in;
  in.n_struct = lp.n_vars();
  in.m = int(lp.rows.size());
  in.n_total = in.n_struct + in.m;
  in.flipped = lp.maximize;
  in.lb = lp.lb;
  in.ub = lp.ub;
  in.lb.resize(std::size_t(in.n_total), 0.0);
  in.ub.resize(std::size_t(in.n_total), 0.0);
  in.cost.resize(in.n_total, 0.0);
  for (int j = 0; j < in.n_struct; ++j)
    in.cost[j] = lp.maximize ? -lp.obj[j] : lp.obj[j];
  in.b.resize(in.m);
  std::vector<std::int64_t> cnt(in.n_struct + 1, 0);
  for (const auto& row : lp.rows)
    for (const auto& [j, a] : row.coef) {
      require(j >= 0 && j < in.n_struct, "lp: column index out of range");
      (void)a;
      ++cnt[j + 1];
    }
  in.col_start.assign(in.n_struct + 1, 0);
  for (int j = 0; j < in.n_struct; ++j)
    in.col_start[j + 1] = in.col_start[j] + cnt[j + 1];
  in.row_idx.resize(std::size_t(in.col_start[in.n_struct]));
  in.cval.resize(in.row_idx.size());
  std::vector<std::int64_t> fill(in.col_start.begin(), in.col_start.end() - 1);
  for (int i = 0; i < in.m; ++i) {
    const auto& row = lp.rows[i];
    in.b[i] = row.rhs;
    for (const auto& [j, a] : row.coef) {
      in.row_idx[std::size_t(fill[j])] = i;
      in.cval[std::size_t(fill[j])] = a;
      ++fill[j];
    }
  }
  for (int i = 0; i < in.m; ++i) {
    int sj = in.n_struct + i;
    switch (lp.rows[i].sense) {
      case RowSense::le:
        in.lb[sj] = 0;
        in.ub[sj] = kInf;
        break;
      case RowSense::ge:
        in.lb[sj] = -kInf;
        in.ub[sj] = 0;
        break;
      case RowSense::eq:
        in.lb[sj] = 0;
        in.ub[sj] = 0;
        break;
    }
  }
  in.cost.resize(in.n_total, 0.0);
  return in;
}

struct Eta {
  int r;
  double wr;
  std::vector<std::pair<int, double>> w;  // nonzeros excluding r
};

struct CoreResult {
  LpStatus status = LpStatus::stalled;
  std::int64_t iterations = 0;
  std::vector<double> x;       // n_total values
  std::vector<double> y;       // m duals (min orientation)
  std::vector<double> dj;      // n_total reduced costs (min orientation)
  std::vector<double> farkas;  // m, infeasible only
  std::vector<double> ray;     // n_total direction, unbounded only
  double infeas_sum = 0;
  std::vector<int> warm_basic;
  std::vector<std::uint8_t> warm_state;
};

struct Warm {
  std::vector<int> basic;
  std::vector<std::uint8_t> state;  // n_total
};

class Simplex {
 public:
  Simplex(const Internal& in, const SolverConfig& cfg) : in_(in), cfg_(cfg) {}

  CoreResult run(const Warm* warm, std::int64_t iter_budget) {
    init(warm);
    CoreResult res;
    std::int64_t max_iters = iter_budget;
    if (max_iters < 0)
      max_iters = std::max<std::int64_t>(
          50000, 40 * (std::int64_t(in_.m) + in_.n_total));
    bool bland = false;
    int degen_run = 0;
    int restores = 0;
    int hard_resets = 0;
    const int bland_after = std::max(500, in_.m / 2);
    // beyond-tol violation budget: promotion wants an essentially clean
    // point, demotion tolerates an accumulated sum before re-fixing
    const double inf_enter = cfg_.feas_tol;
    const double inf_exit = in_.m * cfg_.feas_tol;
    int phase = 1;
    // a failed refactorization rebuilds from the all-slack basis; a few such
    // resets are survivable, endless ones are not
    auto recover = [&]() {
      slack_reset();
      phase = 1;
      bland = false;
      degen_run = 0;
      if (++hard_resets <= 5) return true;
      if (cfg_.verbosity >= 1)
        std::fprintf(stderr, "[lp] stalled: slack-basis resets exhausted\n");
      return false;
    };
    for (std::int64_t it = 0;; ++it) {
      if (it >= max_iters) {
        if (cfg_.verbosity >= 1)
          std::fprintf(stderr, "[lp] stalled: iteration budget %lld\n",
                       (long long)max_iters);
        res.status = LpStatus::stalled;
        finish(res, it);
        return res;
      }
      double inf_now = infeas_sum();
      if (cfg_.verbosity >= 2 && (it % 20000) == 0) {
        double obj = 0;
        for (int p = 0; p < in_.m; ++p)
          obj += in_.cost[basic_[std::size_t(p)]] * xval_[basic_[std::size_t(p)]];
        for (int j = 0; j < in_.n_total; ++j)
          if (state_[j] != BASIC) obj += in_.cost[j] * xval_[j];
        std::fprintf(stderr,
                     "[lp] it=%lld phase=%d inf=%.3e obj=%.9f bland=%d "
                     "degen=%d restores=%d etas=%zu\n",
                     (long long)it, phase, inf_now, obj, int(bland), degen_run,
                     restores, etas_.size());
      }
      if (phase == 1 && inf_now <= inf_enter) phase = 2;
      // phase 2 can lose feasibility through tolerance-stretched ratio steps
      // and eta roundoff; send it back to phase 1 instead of optimizing an
      // infeasible point
      if (phase == 2 && inf_now > inf_exit && restores <= 40) {
        if (!etas_.empty() && !refactorize() && !recover()) {
          res.status = LpStatus::stalled;
          finish(res, it);
          return res;
        }
        if (infeas_sum() > inf_exit) {
          ++restores;
          phase = 1;
        }
      }

      // duals for the current phase objective
      fill_cb(phase);
      btran(cb_);
      const std::vector<double>& y = cb_;

      int enter = -1, dir = 0;
      double best = cfg_.opt_tol;
      for (int j = 0; j < in_.n_total; ++j) {
        if (state_[j] == BASIC) continue;
        if (banned_[std::size_t(j)]) continue;  // numerically null direction
        if (in_.lb[j] == in_.ub[j]) continue;  // fixed, never enters
        double cj = phase == 2 ? in_.cost[j] : 0.0;
        double d = cj - in_.col_dot(j, y);
        int cand_dir = 0;
        double score = 0;
        if (state_[j] == AT_LOWER || state_[j] == FREE_ZERO) {
          if (d < -best) {
            cand_dir = +1;
            score = -d;
          }
        }
        if (cand_dir == 0 &&
            (state_[j] == AT_UPPER || state_[j] == FREE_ZERO)) {
          if (d > best) {
            cand_dir = -1;
            score = d;
          }
        }
        if (cand_dir != 0) {
          enter = j;
          dir = cand_dir;
          if (bland) break;  // lowest index wins outright
          best = score;      // Dantzig: strictly larger score wins
        }
      }

      if (enter < 0) {
        // never declare a terminal status off the eta file: refactorize,
        // recompute the basics exactly, and reprice once more
        if (!etas_.empty()) {
          if (!refactorize() && !recover()) {
            res.status = LpStatus::stalled;
            finish(res, it);
            return res;
          }
          continue;
        }
        if (phase == 1) {
          double inf = infeas_sum();
          if (inf <= inf_exit) {
            phase = 2;
            continue;
          }
          res.status = LpStatus::infeasible;
          res.infeas_sum = inf;
          res.farkas.assign(y.begin(), y.end());
          finish(res, it);
          return res;
        }
        double inf = infeas_sum();
        if (inf > inf_exit) {
          if (++restores > 40) {
            if (cfg_.verbosity >= 1)
              std::fprintf(stderr,
                           "[lp] stalled: feasibility restores exhausted "
                           "(inf=%.3e)\n", inf);
            res.status = LpStatus::stalled;
            finish(res, it);
            return res;
          }
          phase = 1;
          continue;
        }
        res.status = LpStatus::optimal;
        finish(res, it);
        return res;
      }

      // ftran the entering column
      ftran_col(enter);

      // ratio test: entering moves by t*dir >= 0, basics by -t*dir*w.
      // exact step to the first blocking bound for row position p; infeasible
      // basics block only when moving back toward the violated bound
      const double eps = 1e-11;
      auto exact_ratio = [&](int p, double& ti, int& bnd) {
        double rate = dir * w_[p];  // xB[p] decreases at this rate
        ti = kInf;
        bnd = AT_LOWER;
        if (std::abs(rate) < eps) return 0.0;
        int bj = basic_[p];
        double xb = xval_[bj];
        if (xb < in_.lb[bj] - cfg_.feas_tol) {
          if (rate < 0) {  // increasing toward the violated lower bound
            ti = (in_.lb[bj] - xb) / (-rate);
            bnd = AT_LOWER;
          }
        } else if (xb > in_.ub[bj] + cfg_.feas_tol) {
          if (rate > 0) {
            ti = (xb - in_.ub[bj]) / rate;
            bnd = AT_UPPER;
          }
        } else if (rate > 0) {
          if (std::isfinite(in_.lb[bj])) {
            ti = (xb - in_.lb[bj]) / rate;
            bnd = AT_LOWER;
          }
        } else {
          if (std::isfinite(in_.ub[bj])) {
            ti = (in_.ub[bj] - xb) / (-rate);
            bnd = AT_UPPER;
          }
        }
        return rate;
      };

      double t_best = kInf;
      int leave_pos = -1;
      int leave_bound = AT_LOWER;
      double span = in_.ub[enter] - in_.lb[enter];
      bool flip_possible = std::isfinite(span);
      if (bland) {
        // exact smallest step, lowest basic index on ties: the anti-cycling
        // rule needs the textbook test
        for (int p : w_touched_) {
          double ti;
          int bnd;
          exact_ratio(p, ti, bnd);
          if (ti == kInf) continue;
          ti = std::max(ti, 0.0);
          if (ti < t_best - 1e-12 ||
              (ti < t_best + 1e-12 && leave_pos >= 0 &&
               basic_[p] < basic_[leave_pos])) {
            t_best = ti;
            leave_pos = p;
            leave_bound = bnd;
          }
        }
      } else {
        // two-pass test: pass 1 grants every blocker a feas_tol overshoot
        // and finds the smallest stretched step; pass 2 takes the largest
        // pivot among rows whose exact step fits underneath.  Degenerate
        // problems pivot on sound elements this way at the cost of bounded,
        // recoverable bound violations.
        double t_rel = kInf;
        for (int p : w_touched_) {
          double ti;
          int bnd;
          double rate = exact_ratio(p, ti, bnd);
          if (ti == kInf) continue;
          t_rel = std::min(t_rel,
                           std::max(ti, 0.0) + cfg_.feas_tol / std::abs(rate));
        }
        double best_rate = 0;
        if (t_rel < kInf) {
          for (int p : w_touched_) {
            double ti;
            int bnd;
            double rate = exact_ratio(p, ti, bnd);
            if (ti == kInf) continue;
            ti = std::max(ti, 0.0);
            if (ti > t_rel) continue;
            if (leave_pos < 0 || std::abs(rate) > std::abs(best_rate)) {
              t_best = ti;
              leave_pos = p;
              leave_bound = bnd;
              best_rate = rate;
            }
          }
        }
      }

      // pivot-size floor: an element this small would make the next basis
      // numerically singular.  With etas in play the column may just be
      // stale; refresh and retry.  With an exact column the direction is
      // null to working precision: shelve the candidate until the basis
      // actually changes
      if (leave_pos >= 0 && !(flip_possible && span < t_best) &&
          std::abs(w_[std::size_t(leave_pos)]) < 1e-7) {
        if (!etas_.empty()) {
          if (!refactorize() && !recover()) {
            res.status = LpStatus::stalled;
            finish(res, it);
            return res;
          }
          continue;
        }
        banned_[std::size_t(enter)] = 1;
        banned_list_.push_back(enter);
        continue;
      }

      bool flip = false;
      if (flip_possible && span < t_best) {
        t_best = span;
        flip = true;
      }
      if (t_best == kInf) {
        if (!etas_.empty()) {
          if (!refactorize() && !recover()) {
            res.status = LpStatus::stalled;
            finish(res, it);
            return res;
          }
          continue;
        }
        if (phase == 1) {
          if (cfg_.verbosity >= 1)
            std::fprintf(stderr, "[lp] stalled: unblocked phase-1 ray\n");
          res.status = LpStatus::stalled;  // cannot happen with exact data
          finish(res, it);
          return res;
        }
        if (infeas_sum() > inf_exit && ++restores <= 40) {
          phase = 1;
          continue;
        }
        res.status = LpStatus::unbounded;
        res.ray.assign(std::size_t(in_.n_total), 0.0);
        res.ray[std::size_t(enter)] = dir;
        for (int p : w_touched_)
          res.ray[std::size_t(basic_[p])] = -dir * w_[p];
        finish(res, it);
        return res;
      }

      // apply the step
      if (t_best > 0) {
        for (int p : w_touched_) xval_[basic_[p]] -= t_best * dir * w_[p];
        xval_[enter] += dir * t_best;
      }
      if (flip) {
        state_[enter] = dir > 0 ? AT_UPPER : AT_LOWER;
        xval_[enter] = dir > 0 ? in_.ub[enter] : in_.lb[enter];
        clear_w();
      } else {
        int lv = basic_[leave_pos];
        state_[lv] = std::uint8_t(leave_bound);
        xval_[lv] =
            leave_bound == AT_LOWER ? in_.lb[lv] : in_.ub[lv];
        if (!std::isfinite(xval_[lv])) {  // free variable leaving: park at 0
          state_[lv] = FREE_ZERO;
          xval_[lv] = 0;
        }
        basic_[leave_pos] = enter;
        state_[enter] = BASIC;
        push_eta(leave_pos);
        for (int bj : banned_list_) banned_[std::size_t(bj)] = 0;
        banned_list_.clear();
        // a small pivot element poisons every later solve through the eta
        // file; refactorize right away instead of letting the error compound
        if ((int(etas_.size()) >= cfg_.refactor_every ||
             std::abs(etas_.back().wr) < 1e-6) &&
            !refactorize() && !recover()) {
          res.status = LpStatus::stalled;
          finish(res, it);
          return res;
        }
      }

      if (t_best <= eps) {
        if (++degen_run > bland_after) bland = true;
      } else {
        degen_run = 0;
        bland = false;
      }
      if ((it & 511) == 511) recompute_basics();
    }
  }

 private:
  const Internal& in_;
  const SolverConfig& cfg_;
  std::vector<int> basic_;
  std::vector<std::uint8_t> state_;
  std::vector<double> xval_;
  std::vector<double> w_, cb_;
  std::vector<int> w_touched_;
  std::vector<std::uint8_t> banned_;  // per-basis shelf of null directions
  std::vector<int> banned_list_;
  std::vector<Eta> etas_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Eigen::VectorXd ev_;

  void init(const Warm* warm) {
    xval_.assign(std::size_t(in_.n_total), 0.0);
    banned_.assign(std::size_t(in_.n_total), 0);
    banned_list_.clear();
    state_.assign(std::size_t(in_.n_total), AT_LOWER);
    basic_.resize(std::size_t(in_.m));
    bool ok = false;
    if (warm && int(warm->basic.size()) == in_.m &&
        int(warm->state.size()) == in_.n_total) {
      basic_ = warm->basic;
      state_ = warm->state;
      ok = try_factorize();
    }
    if (!ok) {
      for (int j = 0; j < in_.n_total; ++j) state_[j] = nonbasic_home(j);
      for (int i = 0; i < in_.m; ++i) {
        basic_[std::size_t(i)] = in_.n_struct + i;
        state_[std::size_t(in_.n_struct + i)] = BASIC;
      }
      bool ok2 = try_factorize();
      require(ok2, "lp: slack basis failed to factorize");
    }
    for (int j = 0; j < in_.n_total; ++j)
      if (state_[j] != BASIC) xval_[j] = nonbasic_value(j);
    recompute_basics();
    w_.assign(std::size_t(in_.m), 0.0);
    cb_.assign(std::size_t(in_.m), 0.0);
  }

  std::uint8_t nonbasic_home(int j) const {
    if (std::isfinite(in_.lb[j])) return AT_LOWER;
    if (std::isfinite(in_.ub[j])) return AT_UPPER;
    return FREE_ZERO;
  }
  double nonbasic_value(int j) const {
    switch (state_[j]) {
      case AT_LOWER: return in_.lb[j];
      case AT_UPPER: return in_.ub[j];
      default: return 0.0;
    }
  }

  bool try_factorize() {
    if (in_.m == 0) {  // bounds-only problem: empty basis, nothing to factor
      etas_.clear();
      return true;
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (int p = 0; p < in_.m; ++p) {
      int j = basic_[std::size_t(p)];
      if (j >= in_.n_struct) {
        trips.emplace_back(j - in_.n_struct, p, 1.0);
      } else {
        for (std::int64_t q = in_.col_start[j]; q < in_.col_start[j + 1]; ++q)
          trips.emplace_back(in_.row_idx[std::size_t(q)], p,
                             in_.cval[std::size_t(q)]);
      }
    }
    Eigen::SparseMatrix<double> B(in_.m, in_.m);
    B.setFromTriplets(trips.begin(), trips.end());
    lu_.compute(B);
    etas_.clear();
    return lu_.info() == Eigen::Success;
  }

  bool refactorize() {
    if (!try_factorize()) return false;
    recompute_basics();
    return true;
  }

  void slack_reset() {
    for (int bj : banned_list_) banned_[std::size_t(bj)] = 0;
    banned_list_.clear();
    for (int j = 0; j < in_.n_total; ++j) state_[j] = nonbasic_home(j);
    for (int i = 0; i < in_.m; ++i) {
      basic_[std::size_t(i)] = in_.n_struct + i;
      state_[std::size_t(in_.n_struct + i)] = BASIC;
    }
    bool ok = try_factorize();
    require(ok, "lp: slack basis failed to factorize");
    recompute_basics();
  }

  void recompute_basics() {
    // xB = B^{-1} (b - N xN)
    std::vector<double> r = in_.b;
    for (int j = 0; j < in_.n_total; ++j) {
      if (state_[j] == BASIC) continue;
      double v = nonbasic_value(j);
      xval_[j] = v;
      if (v == 0.0) continue;
      if (j >= in_.n_struct) {
        r[j - in_.n_struct] -= v;
      } else {
        for (std::int64_t p = in_.col_start[j]; p < in_.col_start[j + 1]; ++p)
          r[in_.row_idx[std::size_t(p)]] -= in_.cval[std::size_t(p)] * v;
      }
    }
    ftran_dense(r);
    for (int p = 0; p < in_.m; ++p) xval_[basic_[std::size_t(p)]] = r[p];
  }

  // total bound violation beyond the feasibility tolerance; within-tol slop
  // is deliberate (the ratio test trades it for sound pivots) and must not
  // read as infeasibility or the phase logic thrashes
  double infeas_sum() const {
    double s = 0;
    for (int p = 0; p < in_.m; ++p) {
      int j = basic_[std::size_t(p)];
      double v = std::max(in_.lb[j] - xval_[j], xval_[j] - in_.ub[j]);
      if (v > cfg_.feas_tol) s += v - cfg_.feas_tol;
    }
    return s;
  }

  void fill_cb(int phase) {
    cb_.assign(std::size_t(in_.m), 0.0);
    for (int p = 0; p < in_.m; ++p) {
      int j = basic_[std::size_t(p)];
      if (phase == 2) {
        cb_[std::size_t(p)] = in_.cost[j];
      } else {
        if (xval_[j] < in_.lb[j] - cfg_.feas_tol)
          cb_[std::size_t(p)] = -1.0;
        else if (xval_[j] > in_.ub[j] + cfg_.feas_tol)
          cb_[std::size_t(p)] = +1.0;
      }
    }
  }

  void ftran_dense(std::vector<double>& v) {
    if (in_.m == 0) return;
    ev_ = Eigen::Map<Eigen::VectorXd>(v.data(), in_.m);
    Eigen::VectorXd sol = lu_.solve(ev_);
    for (const Eta& e : etas_) {
      double t = sol[e.r] / e.wr;
      for (const auto& [i, wi] : e.w) sol[i] -= wi * t;
      sol[e.r] = t;
    }
    Eigen::Map<Eigen::VectorXd>(v.data(), in_.m) = sol;
  }

  void btran(std::vector<double>& v) {
    if (in_.m == 0) return;
    // v := B^{-T} v : eta transposes newest-first, then the LU transpose
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double acc = v[it->r];
      for (const auto& [i, wi] : it->w) acc -= wi * v[i];
      v[it->r] = acc / it->wr;
    }
    ev_ = Eigen::Map<Eigen::VectorXd>(v.data(), in_.m);
    Eigen::VectorXd sol = lu_.adjoint().solve(ev_);
    Eigen::Map<Eigen::VectorXd>(v.data(), in_.m) = sol;
  }

  void clear_w() {
    for (int p : w_touched_) w_[p] = 0.0;
    w_touched_.clear();
  }

  void ftran_col(int j) {
    clear_w();
    std::vector<double> dense(std::size_t(in_.m), 0.0);
    std::vector<int> touched;
    in_.gather(j, dense, touched);
    ftran_dense(dense);
    for (int i = 0; i < in_.m; ++i) {
      if (std::abs(dense[std::size_t(i)]) > 1e-13) {
        w_[std::size_t(i)] = dense[std::size_t(i)];
        w_touched_.push_back(i);
      }
    }
  }

  void push_eta(int r) {
    Eta e;
    e.r = r;
    e.wr = w_[std::size_t(r)];
    for (int i : w_touched_)
      if (i != r) e.w.emplace_back(i, w_[std::size_t(i)]);
    etas_.push_back(std::move(e));
    clear_w();
  }

  void finish(CoreResult& res, std::int64_t it) {
    res.iterations = it;
    res.x.assign(xval_.begin(), xval_.end());
    // final duals and reduced costs for the real objective
    fill_cb(2);
    btran(cb_);
    res.y.assign(cb_.begin(), cb_.end());
    res.dj.assign(std::size_t(in_.n_total), 0.0);
    for (int j = 0; j < in_.n_total; ++j)
      if (state_[j] != BASIC)
        res.dj[std::size_t(j)] = in_.cost[j] - in_.col_dot(j, res.y);
    res.warm_basic = basic_;
    res.warm_state = state_;
  }
};

// direct solve on a fully materialized internal problem
CoreResult solve_internal(const Internal& in, const SolverConfig& cfg,
                          const Warm* warm) {
  Simplex s(in, cfg);
  return s.run(warm, cfg.max_iters);
}

double primal_objective(const LinearProgram& lp, const std::vector<double>& x) {
  double s = 0;
  for (int j = 0; j < lp.n_vars(); ++j) s += lp.obj[j] * x[j];
  return s;
}

// dual objective in the problem's own orientation, for the gap report
double dual_objective(const LinearProgram& lp, const LPSolution& sol) {
  double s = 0;
  for (std::size_t i = 0; i < lp.rows.size(); ++i)
    s += sol.dual[i] * lp.rows[i].rhs;
  for (int j = 0; j < lp.n_vars(); ++j) {
    double d = sol.reduced_cost[j];
    if (d == 0) continue;
    // nonbasic at a finite bound contributes d * bound
    double v = sol.x[j];
    if (std::isfinite(lp.lb[j]) && std::abs(v - lp.lb[j]) < 1e-9)
      s += d * lp.lb[j];
    else if (std::isfinite(lp.ub[j]) && std::abs(v - lp.ub[j]) < 1e-9)
      s += d * lp.ub[j];
  }
  return s;
}

LPSolution package(const LinearProgram& lp, const Internal& in,
                   const CoreResult& core) {
  LPSolution sol;
  sol.status = core.status;
  sol.iterations = core.iterations;
  sol.x.assign(core.x.begin(), core.x.begin() + in.n_struct);
  double sign = in.flipped ? -1.0 : 1.0;
  sol.dual.resize(std::size_t(in.m));
  for (int i = 0; i < in.m; ++i) sol.dual[std::size_t(i)] = sign * core.y[std::size_t(i)];
  sol.reduced_cost.resize(std::size_t(in.n_struct));
  for (int j = 0; j < in.n_struct; ++j)
    sol.reduced_cost[std::size_t(j)] = sign * core.dj[std::size_t(j)];
  if (!core.farkas.empty()) sol.farkas = core.farkas;
  sol.objective = primal_objective(lp, sol.x);
  auto viols = row_violations(lp, sol.x, false);
  for (double v : viols) sol.max_violation = std::max(sol.max_violation, v);
  for (int j = 0; j < lp.n_vars(); ++j) {
    if (std::isfinite(lp.lb[j]))
      sol.max_violation = std::max(sol.max_violation, lp.lb[j] - sol.x[j]);
    if (std::isfinite(lp.ub[j]))
      sol.max_violation = std::max(sol.max_violation, sol.x[j] - lp.ub[j]);
  }
  if (core.status == LpStatus::optimal)
    sol.dual_gap = std::abs(sol.objective - dual_objective(lp, sol));
  return sol;
}

// Cutting-plane driver: equality rows are always active; inequality rows are
// activated as they are violated.  A solution feasible for every row with the
// inactive duals at zero is optimal for the full problem.
LPSolution solve_lazy(const LinearProgram& lp, const SolverConfig& cfg) {
  std::size_t n_rows = lp.rows.size();
  std::vector<std::size_t> active;
  std::vector<char> is_active(n_rows, 0);
  for (std::size_t i = 0; i < n_rows; ++i)
    if (lp.rows[i].sense == RowSense::eq) {
      active.push_back(i);
      is_active[i] = 1;
    }
  for (std::size_t i : lp.lazy_hint_rows)
    if (i < n_rows && !is_active[i]) {
      active.push_back(i);
      is_active[i] = 1;
    }
  // seed with rows violated at the all-at-home-bound point
  {
    std::vector<double> x0(std::size_t(lp.n_vars()), 0.0);
    for (int j = 0; j < lp.n_vars(); ++j) {
      if (std::isfinite(lp.lb[j]))
        x0[std::size_t(j)] = lp.lb[j];
      else if (std::isfinite(lp.ub[j]))
        x0[std::size_t(j)] = lp.ub[j];
    }
    auto viols = row_violations(lp, x0, true);
    for (std::size_t i = 0; i < n_rows; ++i)
      if (!is_active[i] && viols[i] > cfg.feas_tol) {
        active.push_back(i);
        is_active[i] = 1;
      }
  }

  LPSolution out;
  Warm warm;                          // state after the previous round
  std::vector<std::size_t> prev_active;  // row order of the previous round
  std::int64_t total_iters = 0;
  bool retried_cold = false;
  for (int round = 0;; ++round) {
    require(round < 200, "lp lazy: activation failed to converge");
    LinearProgram sub;
    sub.maximize = lp.maximize;
    sub.lb = lp.lb;
    sub.ub = lp.ub;
    sub.obj = lp.obj;
    sub.rows.reserve(active.size());
    for (std::size_t i : active) sub.rows.push_back(lp.rows[i]);
    Internal in = build_internal(sub);

    // Warm start: structural variables keep their states, surviving slacks
    // map by original row id, slacks of newly activated rows become basic.
    // Active rows only ever grow and keep their order, so the map is total.
    Warm mapped;
    const Warm* warm_ptr = nullptr;
    if (!prev_active.empty()) {
      int prev_struct = lp.n_vars();
      mapped.state.assign(std::size_t(in.n_total), AT_LOWER);
      for (int j = 0; j < in.n_struct; ++j) mapped.state[j] = warm.state[j];
      for (std::size_t p = 0; p < active.size(); ++p) {
        std::uint8_t st;
        if (p < prev_active.size())
          st = warm.state[std::size_t(prev_struct) + p];
        else
          st = BASIC;  // newly activated row: slack starts basic
        mapped.state[std::size_t(in.n_struct) + p] = st;
      }
      mapped.basic.reserve(std::size_t(in.m));
      for (int bj : warm.basic) {
        if (bj < prev_struct)
          mapped.basic.push_back(bj);
        else
          mapped.basic.push_back(in.n_struct + (bj - prev_struct));
      }
      for (std::size_t p = prev_active.size(); p < active.size(); ++p)
        mapped.basic.push_back(in.n_struct + int(p));
      if (int(mapped.basic.size()) == in.m) warm_ptr = &mapped;
    }

    CoreResult core = solve_internal(in, cfg, warm_ptr);
    total_iters += core.iterations;

    if (core.status == LpStatus::infeasible ||
        core.status == LpStatus::stalled) {
      out = package(sub, in, core);
      out.iterations = total_iters;
      out.rows_activated = std::int64_t(active.size());
      if (core.status == LpStatus::infeasible) {
        // expand the certificate to full row space (inactive rows get 0)
        std::vector<double> fk(n_rows, 0.0);
        for (std::size_t p = 0; p < active.size(); ++p)
          fk[active[p]] = core.farkas[p];
        out.farkas = std::move(fk);
        std::vector<double> fd(n_rows, 0.0);
        for (std::size_t p = 0; p < active.size(); ++p)
          fd[active[p]] = out.dual[p];
        out.dual = std::move(fd);
      }
      return out;
    }

    std::vector<std::size_t> to_add;
    if (core.status == LpStatus::unbounded) {
      // activate rows that cut the improving ray
      for (std::size_t i = 0; i < n_rows; ++i) {
        if (is_active[i]) continue;
        const auto& row = lp.rows[i];
        double ad = 0;
        for (const auto& [j, a] : row.coef) ad += a * core.ray[std::size_t(j)];
        bool cuts = (row.sense == RowSense::le && ad > 1e-12) ||
                    (row.sense == RowSense::ge && ad < -1e-12);
        if (cuts) to_add.push_back(i);
      }
      if (to_add.empty()) {
        out = package(sub, in, core);
        out.iterations = total_iters;
        out.rows_activated = std::int64_t(active.size());
        return out;  // genuinely unbounded
      }
    } else {
      // optimal for the sub-LP: look for violated inactive rows
      std::vector<double> x(core.x.begin(), core.x.begin() + in.n_struct);
      auto viols = row_violations(lp, x, true);
      std::vector<std::pair<double, std::size_t>> ranked;
      for (std::size_t i = 0; i < n_rows; ++i)
        if (!is_active[i] && viols[i] > cfg.feas_tol)
          ranked.emplace_back(-viols[i], i);
      if (ranked.empty()) {
        // the warm-started core occasionally returns a point in violation of
        // rows it was actually given; distrust it once and resolve cold
        double worst_active = 0;
        for (std::size_t i = 0; i < n_rows; ++i)
          if (is_active[i]) worst_active = std::max(worst_active, viols[i]);
        if (worst_active > 10 * cfg.feas_tol && !retried_cold) {
          retried_cold = true;
          warm.basic.clear();
          warm.state.clear();
          prev_active.clear();
          continue;
        }
        // optimal for the full LP; inactive rows carry zero duals
        out = package(sub, in, core);
        out.iterations = total_iters;
        out.rows_activated = std::int64_t(active.size());
        std::vector<double> fd(n_rows, 0.0);
        for (std::size_t p = 0; p < active.size(); ++p)
          fd[active[p]] = out.dual[p];
        out.dual = std::move(fd);
        for (double v : viols) out.max_violation = std::max(out.max_violation, v);
        if (worst_active > 10 * cfg.feas_tol) out.status = LpStatus::stalled;
        return out;
      }
      std::sort(ranked.begin(), ranked.end());
      std::size_t cap = std::min(ranked.size(), cfg.lazy_max_add_per_round);
      for (std::size_t q = 0; q < cap; ++q) to_add.push_back(ranked[q].second);
      std::sort(to_add.begin(), to_add.end());
    }

    // remember this round's state before appending rows (order is stable)
    warm.basic = core.warm_basic;
    warm.state = core.warm_state;
    prev_active = active;
    for (std::size_t i : to_add) {
      active.push_back(i);
      is_active[i] = 1;
    }
  }
}

}  // namespace

LPSolution lp_solve(const LinearProgram& lp, const SolverConfig& cfg) {
  require(lp.lb.size() == lp.ub.size() && lp.lb.size() == lp.obj.size(),
          "lp: inconsistent variable arrays");
  for (int j = 0; j < lp.n_vars(); ++j)
    require(lp.lb[j] <= lp.ub[j], "lp: lb > ub");
  std::size_t ineq = 0;
  for (const auto& r : lp.rows)
    if (r.sense != RowSense::eq) ++ineq;
  // builders that seed lazy_hint_rows expect row activation to pay off even
  // below the size threshold (all-pairs families are too degenerate to solve
  // whole); plain problems switch on size alone
  if (cfg.allow_lazy_rows &&
      (ineq > cfg.lazy_row_threshold || !lp.lazy_hint_rows.empty()))
    return solve_lazy(lp, cfg);
  Internal in = build_internal(lp);
  CoreResult core = solve_internal(in, cfg, nullptr);
  LPSolution sol = package(lp, in, core);
  sol.rows_activated = std::int64_t(lp.rows.size());
  return sol;
}

}  // namespace auctopt
