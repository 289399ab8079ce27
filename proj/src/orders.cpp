#include "auctopt/orders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace auctopt {

Distribution1D Distribution1D::from_samples(std::vector<double> values,
                                            std::vector<double> weights,
                                            double merge_tol) {
  require(values.size() == weights.size(), "distribution1d: shape");
  std::vector<std::size_t> ord(values.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  Distribution1D d;
  for (std::size_t r : ord) {
    if (weights[r] == 0.0) continue;
    require(weights[r] > 0, "distribution1d: negative weight");
    if (!d.x.empty() && values[r] - d.x.back() <= merge_tol) {
      // merge to the weight-averaged position to keep means exact
      double wsum = d.p.back() + weights[r];
      d.x.back() = (d.x.back() * d.p.back() + values[r] * weights[r]) / wsum;
      d.p.back() = wsum;
    } else {
      d.x.push_back(values[r]);
      d.p.push_back(weights[r]);
    }
  }
  return d;
}

double Distribution1D::total() const { return pairwise_sum(p); }

double Distribution1D::mean() const {
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] * p[i];
  return pairwise_sum(t);
}

void Distribution1D::normalize() {
  double t = total();
  require(t > 0, "distribution1d: zero mass");
  for (double& pi : p) pi /= t;
}

double stop_loss(const Distribution1D& d, double alpha) {
  double s = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i)
    if (d.x[i] > alpha) s += (d.x[i] - alpha) * d.p[i];
  return s;
}

double stop_loss_power(int m, double alpha) {
  require(m >= 1, "stop_loss_power: m >= 1");
  if (m == 1) return std::max(1.0 - alpha, 0.0);  // law is a point mass at 1
  if (alpha >= 1.0) return 0.0;
  double inv_m = 1.0 / double(m);
  if (alpha <= 0.0) return inv_m - alpha;
  double expo = double(m) / double(m - 1);
  return inv_m - alpha + (1.0 - inv_m) * std::pow(alpha, expo);
}

IcxCheck dominated_icx_1d(const Distribution1D& a, const Distribution1D& b,
                          double tol) {
  require(std::abs(a.total() - b.total()) <= 1e-8 * std::max(1.0, a.total()),
          "icx: measures must have equal mass");
  IcxCheck res;
  res.dominated = true;
  auto probe = [&](double alpha) {
    double v = stop_loss(a, alpha) - stop_loss(b, alpha);
    if (v > res.worst_violation) {
      res.worst_violation = v;
      res.worst_alpha = alpha;
    }
  };
  // the difference is piecewise linear with kinks at both supports
  for (double t : a.x) probe(t);
  for (double t : b.x) probe(t);
  double lo = std::min(a.x.empty() ? 0.0 : a.x.front(),
                       b.x.empty() ? 0.0 : b.x.front());
  probe(lo - 1.0);  // captures the mean comparison at alpha -> -inf
  res.dominated = res.worst_violation <= tol;
  return res;
}

IcxCheck dominated_icx_power(const Distribution1D& a, int m, double tol) {
  require(std::abs(a.total() - 1.0) <= 1e-8, "icx: need a probability law");
  IcxCheck res;
  res.dominated = true;
  auto probe = [&](double alpha) {
    double v = stop_loss(a, alpha) - stop_loss_power(m, alpha);
    if (v > res.worst_violation) {
      res.worst_violation = v;
      res.worst_alpha = alpha;
    }
  };
  probe(0.0);
  probe(1.0);
  for (double t : a.x) probe(t);
  if (m >= 2) {
    // between kinks the difference is concave; probe its stationary point
    // alpha* where the tail probabilities match: P(Z > a) = 1 - a^{1/(m-1)}
    double tail = 1.0;  // P(Z > alpha) just left of the smallest kink
    std::vector<double> kinks = a.x;
    kinks.insert(kinks.begin(), 0.0);
    kinks.push_back(1.0);
    std::sort(kinks.begin(), kinks.end());
    std::size_t ai = 0;
    for (std::size_t s = 0; s + 1 < kinks.size(); ++s) {
      while (ai < a.x.size() && a.x[ai] <= kinks[s] + 1e-15) {
        tail -= a.p[ai];
        ++ai;
      }
      double astar = std::pow(std::clamp(1.0 - tail, 0.0, 1.0), double(m - 1));
      if (astar > kinks[s] && astar < kinks[s + 1]) probe(astar);
    }
  }
  res.dominated = res.worst_violation <= tol;
  return res;
}

Distribution1D law_of_gradient(const UtilityGrid& ug,
                               const DistributionSpec& rho, int axis) {
  require(axis >= 0 && axis < ug.grid.dim, "law_of_gradient: bad axis");
  std::vector<double> g = discrete_gradient(ug);
  std::vector<double> vals(ug.grid.n_nodes), wts(ug.grid.n_nodes);
  double pt[2];
  for (std::size_t f = 0; f < ug.grid.n_nodes; ++f) {
    ug.grid.coords(f, pt);
    vals[f] = g[f * ug.grid.dim + axis];
    wts[f] = rho.pdf(pt) * ug.grid.cell_weight(f);
  }
  Distribution1D d = Distribution1D::from_samples(vals, wts);
  d.normalize();
  return d;
}

DiscreteMeasureNd DiscreteMeasureNd::from_grid_measure(const GridMeasure& mu,
                                                       double drop_tol) {
  DiscreteMeasureNd d;
  d.dim = mu.grid.dim;
  double pt[2];
  for (std::size_t f = 0; f < mu.grid.n_nodes; ++f) {
    double w = mu.node_mass[f];
    require(w >= -1e-12, "support view needs a nonnegative measure");
    if (w > drop_tol) {
      mu.grid.coords(f, pt);
      d.pts.push_back(std::vector<double>(pt, pt + mu.grid.dim));
      d.w.push_back(w);
    }
  }
  for (const auto& a : mu.atoms) {
    require(a.mass >= -1e-12, "support view needs a nonnegative measure");
    if (a.mass > drop_tol) {
      d.pts.push_back(a.pos);
      d.w.push_back(a.mass);
    }
  }
  return d;
}

double DiscreteMeasureNd::total() const { return pairwise_sum(w); }

double CouplingWitness::eval_separating(const double* z) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& pc : separating) {
    double v = pc.val;
    for (std::size_t i = 0; i < pc.grad.size(); ++i)
      v += pc.grad[i] * (z[i] - pc.at[i]);
    best = std::max(best, v);
  }
  return best;
}

nlohmann::json CouplingWitness::plan_to_json() const {
  nlohmann::json j;
  j["feasible"] = feasible;
  nlohmann::json src = nlohmann::json::array(), dst = nlohmann::json::array();
  for (const auto& p : a.pts) src.push_back(p);
  for (const auto& p : b.pts) dst.push_back(p);
  j["source_points"] = src;
  j["target_points"] = dst;
  j["source_mass"] = a.w;
  j["target_mass"] = b.w;
  nlohmann::json trip = nlohmann::json::array();
  for (const auto& [i, k, m] : plan)
    trip.push_back({{"i", i}, {"j", k}, {"mass", m}});
  j["triplets"] = trip;
  return j;
}

CouplingWitness dominance_witness_nd(const GridMeasure& a, const GridMeasure& b,
                                     CouplingMode mode,
                                     const SolverConfig& cfg) {
  return dominance_witness_nd(DiscreteMeasureNd::from_grid_measure(a),
                              DiscreteMeasureNd::from_grid_measure(b), mode,
                              cfg);
}

CouplingWitness dominance_witness_nd(const DiscreteMeasureNd& a_in,
                                     const DiscreteMeasureNd& b_in,
                                     CouplingMode mode,
                                     const SolverConfig& cfg) {
  CouplingWitness res;
  res.a = a_in;
  res.b = b_in;
  require(res.a.dim == res.b.dim, "dominance: dim mismatch");
  double ma = res.a.total(), mb = res.b.total();
  require(ma > 0 && mb > 0, "dominance: zero-mass measure");
  require(std::abs(ma - mb) <= 1e-8 * std::max(1.0, std::max(ma, mb)),
          "dominance: measures must have equal mass");
  for (double& w : res.b.w) w *= ma / mb;  // exact equal mass

  int dim = res.a.dim;
  int na = int(res.a.pts.size()), nb = int(res.b.pts.size());

  LinearProgram lp;
  // kappa(i,j) >= 0, column-major by source i
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      (void)i;
      (void)j;
      lp.add_var(0.0, std::numeric_limits<double>::infinity(), 0.0);
    }
  auto vidx = [&](int i, int j) { return i * nb + j; };
  // rows: [0, na) source marginals, [na, na+nb) target marginals,
  // [na+nb, ...) barycenter rows per (source, axis)
  for (int i = 0; i < na; ++i) {
    std::vector<std::pair<int, double>> coef;
    coef.reserve(std::size_t(nb));
    for (int j = 0; j < nb; ++j) coef.emplace_back(vidx(i, j), 1.0);
    lp.add_row(RowSense::eq, res.a.w[std::size_t(i)], std::move(coef));
  }
  for (int j = 0; j < nb; ++j) {
    std::vector<std::pair<int, double>> coef;
    coef.reserve(std::size_t(na));
    for (int i = 0; i < na; ++i) coef.emplace_back(vidx(i, j), 1.0);
    lp.add_row(RowSense::eq, res.b.w[std::size_t(j)], std::move(coef));
  }
  for (int i = 0; i < na; ++i)
    for (int ax = 0; ax < dim; ++ax) {
      std::vector<std::pair<int, double>> coef;
      for (int j = 0; j < nb; ++j) {
        double d = res.b.pts[std::size_t(j)][std::size_t(ax)] -
                   res.a.pts[std::size_t(i)][std::size_t(ax)];
        if (d != 0.0) coef.emplace_back(vidx(i, j), d);
      }
      lp.add_row(mode == CouplingMode::submartingale ? RowSense::ge
                                                     : RowSense::eq,
                 0.0, std::move(coef));
    }

  SolverConfig c = cfg;
  c.allow_lazy_rows = false;  // marginal rows are equalities anyway
  LPSolution sol = lp_solve(lp, c);

  if (sol.status == LpStatus::optimal) {
    res.feasible = true;
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j) {
        double v = sol.x[std::size_t(vidx(i, j))];
        if (v > 1e-12) res.plan.emplace_back(i, j, v);
      }
    return res;
  }
  require(sol.status == LpStatus::infeasible,
          "dominance: coupling solve " + to_string(sol.status));

  // Fold the infeasibility multipliers into a separating function
  //   F(z) = max_i [ lambda_i + <nu_i, z - a_i> ]
  // with  lambda_i + mu_j + <nu_i, b_j - a_i> <= 0  for all (i,j) and
  // sum lambda a + sum mu b > 0; then  int F da >= sum lambda a >
  // -sum mu b >= int F db.
  std::vector<double> y = sol.farkas;
  require(int(y.size()) == na + nb + na * dim, "dominance: farkas size");
  double yb = 0;
  for (std::size_t r = 0; r < lp.rows.size(); ++r) yb += y[r] * lp.rows[r].rhs;
  if (yb < 0)
    for (double& v : y) v = -v;
  for (int i = 0; i < na; ++i) {
    CouplingWitness::Piece pc;
    pc.at = res.a.pts[std::size_t(i)];
    pc.val = y[std::size_t(i)];
    pc.grad.resize(std::size_t(dim));
    for (int ax = 0; ax < dim; ++ax) {
      double nu = y[std::size_t(na + nb + i * dim + ax)];
      if (mode == CouplingMode::submartingale) nu = std::max(nu, 0.0);
      pc.grad[std::size_t(ax)] = nu;
    }
    res.separating.push_back(std::move(pc));
  }
  double ia = 0, ib = 0;
  for (int i = 0; i < na; ++i)
    ia += res.a.w[std::size_t(i)] *
          res.eval_separating(res.a.pts[std::size_t(i)].data());
  for (int j = 0; j < nb; ++j)
    ib += res.b.w[std::size_t(j)] *
          res.eval_separating(res.b.pts[std::size_t(j)].data());
  res.sep_gap = ia - ib;
  return res;
}

}  // namespace auctopt
