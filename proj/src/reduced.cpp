#include "auctopt/reduced.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auctopt {

std::vector<double> ReducedProblem::alpha_ladder() const {
  std::vector<double> a;
  if (m < 2) return a;  // one bidder: the law constraint is just g <= 1
  int A = std::max(3, alpha_points);
  for (int i = 0; i < A; ++i) a.push_back(double(i) / double(A - 1));
  for (int i = 0; i < A; ++i)
    a.push_back(std::pow(double(i) / double(A - 1), m - 1));
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end(),
                      [](double x, double y) { return y - x < 1e-12; }),
          a.end());
  return a;
}

LinearProgram build_lp(const ReducedProblem& p) {
  const Grid& grid = p.grid;
  require(p.rho.dim == grid.dim, "reduced: distribution dim mismatch");
  require(p.m >= 1, "reduced: m >= 1");
  std::vector<double> rho = density_on_grid(grid, p.rho);
  std::size_t N = grid.n_nodes;
  int dim = grid.dim;
  const double inf = std::numeric_limits<double>::infinity();

  LinearProgram lp;
  lp.maximize = true;

  // u variables first, then the gradient block, then epigraph helpers
  double u_cap = double(dim) * (1.0 + p.domain_offset);
  std::vector<double> pt(2);
  for (std::size_t f = 0; f < N; ++f) {
    double hi = (f == 0) ? 0.0 : u_cap;  // u(0) = 0 normalization
    lp.add_var(0.0, hi, 0.0);
  }
  auto uvar = [&](std::size_t f) { return int(f); };
  std::vector<int> gvar(N * std::size_t(dim));
  for (std::size_t f = 0; f < N; ++f) {
    grid.coords(f, pt.data());
    double w = rho[f] * grid.cell_weight(f) * double(p.m);
    for (int ax = 0; ax < dim; ++ax)
      gvar[f * std::size_t(dim) + std::size_t(ax)] =
          lp.add_var(0.0, 1.0, w * (pt[std::size_t(ax)] + p.domain_offset));
  }
  for (std::size_t f = 0; f < N; ++f) {
    double w = rho[f] * grid.cell_weight(f) * double(p.m);
    lp.obj[std::size_t(uvar(f))] = -w;
  }

  // optional production cost: epigraph t >= pieces of the convex axis cost
  if (p.axis_cost) {
    const PwlConvex& c = *p.axis_cost;
    for (std::size_t f = 0; f < N; ++f) {
      double w = rho[f] * grid.cell_weight(f) * double(p.m);
      for (int ax = 0; ax < dim; ++ax) {
        int tv = lp.add_var(0.0, inf, -w);
        for (std::size_t b = 0; b < c.bp.size(); ++b) {
          double s = c.slope[b];
          double icpt = c.eval(c.bp[b]) - s * c.bp[b];
          lp.add_row(RowSense::ge, icpt,
                     {{tv, 1.0}, {gvar[f * std::size_t(dim) + std::size_t(ax)], -s}});
        }
      }
    }
  }

  // convexity rows: u(y) >= u(x) + <g(x), y - x>
  int idx_x[2], idx_y[2];
  if (p.encoding == ConvexityEncoding::exact_pairwise) {
    for (std::size_t fx = 0; fx < N; ++fx) {
      grid.unflat(fx, idx_x);
      for (std::size_t fy = 0; fy < N; ++fy) {
        if (fy == fx) continue;
        grid.unflat(fy, idx_y);
        std::vector<std::pair<int, double>> coef;
        coef.reserve(std::size_t(dim) + 2);
        coef.emplace_back(uvar(fy), 1.0);
        coef.emplace_back(uvar(fx), -1.0);
        int l1 = 0;
        for (int ax = 0; ax < dim; ++ax) {
          l1 += std::abs(idx_y[ax] - idx_x[ax]);
          double d = (idx_y[ax] - idx_x[ax]) * grid.h;
          if (d != 0.0)
            coef.emplace_back(gvar[fx * std::size_t(dim) + std::size_t(ax)],
                              -d);
        }
        // nearest-neighbour rows nearly always bind; hand them to the lazy
        // driver up front so activation starts from a locally convex hull
        if (l1 == 1) lp.lazy_hint_rows.push_back(lp.rows.size());
        lp.add_row(RowSense::ge, 0.0, std::move(coef));
      }
    }
  } else {
    for (int ax = 0; ax < dim; ++ax) {
      std::size_t st = grid.stride(ax);
      for (std::size_t f = 0; f < N; ++f) {
        int gv = gvar[f * std::size_t(dim) + std::size_t(ax)];
        if (!grid.on_upper_face(f, ax)) {
          lp.lazy_hint_rows.push_back(lp.rows.size());
          lp.add_row(RowSense::ge, 0.0,
                     {{uvar(f + st), 1.0}, {uvar(f), -1.0}, {gv, -grid.h}});
        }
        grid.unflat(f, idx_x);
        if (idx_x[ax] > 0) {
          lp.lazy_hint_rows.push_back(lp.rows.size());
          lp.add_row(RowSense::ge, 0.0,
                     {{uvar(f - st), 1.0}, {uvar(f), -1.0}, {gv, grid.h}});
        }
      }
    }
    // curvature across the diagonals tightens the relaxation beyond what the
    // per-axis slope sandwich implies; unhinted, so the lazy driver only
    // activates the ones the sandwich optimum actually violates
    if (dim == 2) {
      std::size_t sx = grid.stride(0), sy = grid.stride(1);
      for (std::size_t f = 0; f < N; ++f) {
        grid.unflat(f, idx_x);
        bool ilo = idx_x[0] > 0, ihi = idx_x[0] < grid.k - 1;
        bool jlo = idx_x[1] > 0, jhi = idx_x[1] < grid.k - 1;
        if (ilo && ihi && jlo && jhi) {
          lp.add_row(RowSense::ge, 0.0,
                     {{uvar(f + sx + sy), 1.0},
                      {uvar(f), -2.0},
                      {uvar(f - sx - sy), 1.0}});
          lp.add_row(RowSense::ge, 0.0,
                     {{uvar(f + sx - sy), 1.0},
                      {uvar(f), -2.0},
                      {uvar(f - sx + sy), 1.0}});
        }
      }
    }
  }

  // gradient-law dominance: per axis, stop-loss rows on the alpha ladder via
  // epigraph variables s >= g - alpha
  std::vector<double> ladder = p.alpha_ladder();
  for (int ax = 0; ax < dim && !ladder.empty(); ++ax) {
    for (double alpha : ladder) {
      std::vector<std::pair<int, double>> sum_coef;
      sum_coef.reserve(N);
      for (std::size_t f = 0; f < N; ++f) {
        int sv = lp.add_var(0.0, inf, 0.0);
        lp.add_row(RowSense::ge, -alpha,
                   {{sv, 1.0},
                    {gvar[f * std::size_t(dim) + std::size_t(ax)], -1.0}});
        sum_coef.emplace_back(sv, rho[f] * grid.cell_weight(f));
      }
      lp.add_row(RowSense::le, stop_loss_power(p.m, alpha),
                 std::move(sum_coef));
    }
  }
  return lp;
}

ReducedSolution solve_reduced(const ReducedProblem& p,
                              const SolverConfig& cfg) {
  LinearProgram lp = build_lp(p);
  ReducedSolution sol;
  sol.lp_rows = std::int64_t(lp.rows.size());
  LPSolution ls = lp_solve(lp, cfg);
  sol.status = ls.status;
  sol.lp_iterations = ls.iterations;
  sol.rows_activated = ls.rows_activated;
  sol.lp_max_violation = ls.max_violation;
  sol.lp_dual_gap = ls.dual_gap;
  if (ls.status != LpStatus::optimal) return sol;

  const Grid& grid = p.grid;
  std::size_t N = grid.n_nodes;
  int dim = grid.dim;
  sol.u.grid = grid;
  sol.u.u.assign(ls.x.begin(), ls.x.begin() + std::ptrdiff_t(N));
  sol.u.g = std::vector<double>(ls.x.begin() + std::ptrdiff_t(N),
                                ls.x.begin() + std::ptrdiff_t(N * (1 + dim)));
  sol.value = ls.objective;
  sol.encoding_relaxed =
      (p.encoding == ConvexityEncoding::axis_stencil && dim >= 2);

  // independent evaluation of the functional through the measure interface
  std::vector<double> rho = density_on_grid(grid, p.rho);
  GridMeasure weighted;
  weighted.grid = grid;
  weighted.node_mass.resize(N);
  for (std::size_t f = 0; f < N; ++f)
    weighted.node_mass[f] = rho[f] * grid.cell_weight(f);
  std::vector<double> integrand(N);
  std::vector<double> ptv(2);
  for (std::size_t f = 0; f < N; ++f) {
    grid.coords(f, ptv.data());
    double xg = 0;
    for (int ax = 0; ax < dim; ++ax)
      xg += (ptv[std::size_t(ax)] + p.domain_offset) *
            (*sol.u.g)[f * std::size_t(dim) + std::size_t(ax)];
    integrand[f] = xg - sol.u.u[f];
    if (p.axis_cost)
      for (int ax = 0; ax < dim; ++ax)
        integrand[f] -=
            p.axis_cost->eval((*sol.u.g)[f * std::size_t(dim) + std::size_t(ax)]);
  }
  sol.value_quadrature = double(p.m) * integrate(integrand, weighted);

  // refinement sensitivity of the dominance ladder
  if (p.m >= 2) {
    ReducedProblem fine = p;
    fine.alpha_points = 2 * std::max(3, p.alpha_points) - 1;
    std::vector<double> coarse = p.alpha_ladder();
    for (int ax = 0; ax < dim; ++ax) {
      Distribution1D law = law_of_gradient(sol.u, p.rho, ax);
      for (double alpha : coarse) {
        double r = stop_loss(law, alpha) - stop_loss_power(p.m, alpha);
        sol.dominance_grid_max = std::max(sol.dominance_grid_max, r);
      }
      for (double alpha : fine.alpha_ladder()) {
        double r = stop_loss(law, alpha) - stop_loss_power(p.m, alpha);
        sol.dominance_refined_max = std::max(sol.dominance_refined_max, r);
      }
    }
    // Between ladder points the constraint binds only up to the chord gap of
    // its right-hand side: the gradient law's stop-loss is convex in alpha,
    // so it stays below the chord through the enforced values.
    for (std::size_t i = 0; i + 1 < coarse.size(); ++i) {
      double a = coarse[i], b = coarse[i + 1];
      double fa = stop_loss_power(p.m, a), fb = stop_loss_power(p.m, b);
      for (int t = 1; t < 16; ++t) {
        double s = double(t) / 16;
        double chord = (1 - s) * fa + s * fb;
        double gap = chord - stop_loss_power(p.m, a + s * (b - a));
        sol.dominance_refined_bound = std::max(sol.dominance_refined_bound, gap);
      }
    }
  }
  return sol;
}

std::vector<std::uint8_t> classify_regions(const UtilityGrid& ug, double tol) {
  const Grid& grid = ug.grid;
  std::vector<std::uint8_t> lab(grid.n_nodes, 1);
  double h2 = grid.h * grid.h;
  int idx[2];
  for (std::size_t f = 0; f < grid.n_nodes; ++f) {
    if (std::abs(ug.u[f]) <= tol) {
      lab[f] = 0;
      continue;
    }
    // discrete Hessian determinant (clamped at the boundary)
    grid.unflat(f, idx);
    double d2[2] = {0, 0};
    double cross = 0;
    for (int ax = 0; ax < grid.dim; ++ax) {
      int i = idx[ax];
      std::size_t st = grid.stride(ax);
      std::size_t fc = f;
      if (i == 0) fc = f + st;
      if (i == grid.k - 1) fc = f - st;
      d2[ax] = (ug.u[fc + st] - 2 * ug.u[fc] + ug.u[fc - st]) / h2;
    }
    if (grid.dim == 2) {
      int i = std::clamp(idx[0], 1, grid.k - 2);
      int j = std::clamp(idx[1], 1, grid.k - 2);
      auto at = [&](int a, int b) {
        int id[2] = {a, b};
        return ug.u[grid.flat(id)];
      };
      cross = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) +
               at(i - 1, j - 1)) /
              (4 * h2);
    }
    double det = grid.dim == 1 ? d2[0] : d2[0] * d2[1] - cross * cross;
    double scale = 1.0;  // Hessian entries are O(1/h); compare against tol/h
    lab[f] = std::abs(det) <= tol / (grid.h * scale) ? 1 : 2;
  }
  return lab;
}

double pairwise_convexity_violation(const UtilityGrid& ug, bool parallel) {
  const Grid& grid = ug.grid;
  require(ug.g.has_value(), "pairwise scan needs the subgradient field");
  const std::vector<double>& g = *ug.g;
  std::int64_t N = std::int64_t(grid.n_nodes);
  std::vector<double> worst(std::size_t(N), 0.0);
  auto body = [&](std::int64_t fx) {
    int ix[2], iy[2];
    grid.unflat(std::size_t(fx), ix);
    double w = 0;
    for (std::int64_t fy = 0; fy < N; ++fy) {
      if (fy == fx) continue;
      grid.unflat(std::size_t(fy), iy);
      double lhs = ug.u[std::size_t(fy)] - ug.u[std::size_t(fx)];
      for (int ax = 0; ax < grid.dim; ++ax)
        lhs -= g[std::size_t(fx) * grid.dim + std::size_t(ax)] *
               (iy[ax] - ix[ax]) * grid.h;
      w = std::max(w, -lhs);
    }
    worst[std::size_t(fx)] = w;
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t f = 0; f < N; ++f) body(f);
  } else {
    for (std::int64_t f = 0; f < N; ++f) body(f);
  }
  double m = 0;
  for (double v : worst) m = std::max(m, v);
  return m;
}

}  // namespace auctopt
