#include "auctopt/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "auctopt/common.hpp"
#include "auctopt/myerson.hpp"
#include "auctopt/rng.hpp"

namespace auctopt {

namespace {

constexpr int kMaxBidders = 16;
constexpr int kMaxDim = 4;
constexpr double kTieTol = 1e-12;
constexpr double kZeroTol = 1e-9;

double grad_at(const UtilityGrid& u, const std::vector<double>& g, int comp,
               const double* pt) {
  return interp_field(u.grid, g, comp, pt);
}

/** Smallest own-coordinate level at which g_item crosses `level` (weakly for
    strict=false).  The interpolated gradient of a convex utility is monotone
    along each axis, so a bisection pins the crossing; small solver noise only
    moves it by the noise amplitude. */
double own_threshold(const UtilityGrid& u, const std::vector<double>& g,
                     int item, const double* xj, double level, bool strict) {
  double pt[kMaxDim];
  for (int i = 0; i < u.grid.dim; ++i) pt[i] = xj[i];
  auto above = [&](double z) {
    pt[item] = z;
    double v = grad_at(u, g, item, pt);
    return strict ? v > level + kTieTol : v >= level - kTieTol;
  };
  if (above(0.0)) return 0.0;
  if (!above(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (above(mid) ? hi : lo) = mid;
  }
  return hi;
}

void apply_lift(const MechanismRule& mech, const std::vector<double>& g,
                const double* x, double* P, double* T) {
  const int n = mech.n, m = mech.m;
  double gv[kMaxBidders][kMaxDim];
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) gv[j][i] = grad_at(mech.u, g, i, x + j * n);
  std::fill(P, P + static_cast<std::size_t>(m) * n, 0.0);
  std::fill(T, T + m, 0.0);

  if (m == 1) {
    // single bidder: the rule is the reduced pair itself, allocation g(x) and
    // the exact transfer <x, g(x)> - u(x)
    double dot = 0;
    for (int i = 0; i < n; ++i) {
      P[i] = std::clamp(gv[0][i], 0.0, 1.0);
      dot += x[i] * P[i];
    }
    T[0] = dot - mech.u.interp(x);
    if (T[0] < 0 && T[0] > -1e-12) T[0] = 0;
    return;
  }

  for (int i = 0; i < n; ++i) {
    double mx = gv[0][i];
    for (int j = 1; j < m; ++j) mx = std::max(mx, gv[j][i]);
    if (mx <= kZeroTol) continue;  // every bidder sits in the zero region
    int winners = 0;
    for (int j = 0; j < m; ++j)
      if (gv[j][i] >= mx - kTieTol) ++winners;
    const double share = 1.0 / winners;
    for (int j = 0; j < m; ++j) {
      if (gv[j][i] < mx - kTieTol) continue;
      P[j * n + i] = share;
      // threshold payment: charge each own-type level at which the share
      // steps up, weighted by the step size; reproduces the second-price
      // payment with reserve in one dimension and keeps utility >= 0 here
      double c = -1.0;
      for (int k = 0; k < m; ++k)
        if (k != j) c = std::max(c, gv[k][i]);
      if (c <= kZeroTol) {
        T[j] += share * own_threshold(mech.u, g, i, x + j * n, kZeroTol, true);
        continue;
      }
      int rivals = 0;
      for (int k = 0; k < m; ++k)
        if (k != j && gv[k][i] >= c - kTieTol) ++rivals;
      const double s_enter = 1.0 / (rivals + 1);
      const double z_enter = own_threshold(mech.u, g, i, x + j * n, c, false);
      if (gv[j][i] > c + kTieTol) {
        const double z_exit = own_threshold(mech.u, g, i, x + j * n, c, true);
        T[j] += z_enter * s_enter + z_exit * (1.0 - s_enter);
      } else {
        T[j] += z_enter * share;
      }
    }
  }
}

void apply_second_price(const MechanismRule& mech, const double* x, double* P,
                        double* T) {
  const int m = mech.m;
  std::fill(P, P + m, 0.0);
  std::fill(T, T + m, 0.0);
  double mx = x[0];
  for (int j = 1; j < m; ++j) mx = std::max(mx, x[j]);
  if (mx <= mech.reserve) return;
  int winners = 0;
  for (int j = 0; j < m; ++j)
    if (x[j] >= mx) ++winners;
  const double share = 1.0 / winners;
  for (int j = 0; j < m; ++j) {
    if (x[j] < mx) continue;
    double runner = mech.reserve;
    for (int k = 0; k < m; ++k)
      if (k != j) runner = std::max(runner, x[k]);
    P[j] = share;
    T[j] = share * runner;
  }
}

int bin_of(const double* pt, int dim, int bins) {
  int idx = 0;
  for (int ax = 0; ax < dim; ++ax) {
    int b = std::min(bins - 1, std::max(0, (int)(pt[ax] * bins)));
    idx = idx * bins + b;
  }
  return idx;
}

}  // namespace

std::string to_string(MechKind k) {
  switch (k) {
    case MechKind::argmax_lift: return "argmax_lift";
    case MechKind::second_price_1d: return "second_price_1d";
    case MechKind::custom: return "custom";
  }
  return "custom";
}

void MechanismRule::apply(const double* x, double* P, double* T) const {
  switch (kind) {
    case MechKind::argmax_lift: {
      require(u.g.has_value(), "lift rule lost its gradient field");
      apply_lift(*this, *u.g, x, P, T);
      return;
    }
    case MechKind::second_price_1d:
      apply_second_price(*this, x, P, T);
      return;
    case MechKind::custom:
      require(static_cast<bool>(custom_fn), "custom rule has no evaluator");
      custom_fn(x, P, T);
      return;
  }
}

nlohmann::json MechanismRule::to_json() const {
  require(kind != MechKind::custom, "custom mechanisms are not serializable");
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["n"] = n;
  j["m"] = m;
  if (kind == MechKind::argmax_lift) {
    require(u.g.has_value(), "lift rule needs a gradient field");
    j["grid_dim"] = u.grid.dim;
    j["grid_k"] = u.grid.k;
    j["u"] = u.u;
    j["g"] = *u.g;
  } else {
    j["reserve"] = reserve;
  }
  return j;
}

MechanismRule MechanismRule::from_json(const nlohmann::json& j) {
  MechanismRule r;
  const std::string kind = j.at("kind").get<std::string>();
  r.n = j.at("n").get<int>();
  r.m = j.at("m").get<int>();
  if (kind == "argmax_lift") {
    r.kind = MechKind::argmax_lift;
    r.u.grid =
        make_grid(j.at("grid_dim").get<int>(), j.at("grid_k").get<int>());
    r.u.u = j.at("u").get<std::vector<double>>();
    r.u.g = j.at("g").get<std::vector<double>>();
    require(r.u.u.size() == r.u.grid.n_nodes, "utility size mismatch");
    require(r.u.g->size() == r.u.grid.n_nodes * (std::size_t)r.u.grid.dim,
            "gradient size mismatch");
    require(r.n == r.u.grid.dim, "item count disagrees with the grid");
  } else if (kind == "second_price_1d") {
    r.kind = MechKind::second_price_1d;
    r.reserve = j.at("reserve").get<double>();
    require(r.n == 1, "second-price rule is one-dimensional");
  } else {
    fail("unknown mechanism kind: " + kind);
  }
  return r;
}

MechanismRule lift_argmax(const UtilityGrid& u, int m) {
  require(m >= 1 && m <= kMaxBidders, "bidder count out of range");
  require(u.grid.dim >= 1 && u.grid.dim <= kMaxDim, "item count out of range");
  require(u.u.size() == u.grid.n_nodes, "utility values do not match grid");
  MechanismRule r;
  r.n = u.grid.dim;
  r.m = m;
  r.kind = MechKind::argmax_lift;
  r.u = u;
  if (!r.u.g) r.u.g = discrete_gradient(u);
  require(r.u.g->size() == u.grid.n_nodes * (std::size_t)u.grid.dim,
          "gradient field does not match grid");
  return r;
}

MechanismRule second_price_1d(const Density1D& rho, int m) {
  require(m >= 1 && m <= kMaxBidders, "bidder count out of range");
  MyersonSolution sol = myerson_solve(rho, m);
  require(sol.ironed.regular,
          "second_price_1d is unsupported for non-regular densities");
  MechanismRule r;
  r.n = 1;
  r.m = m;
  r.kind = MechKind::second_price_1d;
  r.reserve = sol.reserve;
  return r;
}

nlohmann::json RevenueEstimate::to_json() const {
  return nlohmann::json{{"mean", mean},
                        {"se", se},
                        {"samples", samples},
                        {"seed", seed}};
}

RevenueEstimate estimate_revenue(const MechanismRule& mech,
                                 const DistributionSpec& rho,
                                 std::int64_t samples, std::uint64_t seed,
                                 bool parallel) {
  require(samples > 0, "sample count must be positive");
  require(rho.dim == mech.n, "type dimension disagrees with the rule");
  require(rho.can_sample(), "distribution does not support sampling");
  require(mech.m <= kMaxBidders && mech.n <= kMaxDim, "profile too large");
  const CounterRng rng{seed};
  const std::int64_t chunk = 4096;
  const std::int64_t n_chunks = (samples + chunk - 1) / chunk;
  std::vector<double> csum(n_chunks), csum2(n_chunks);
#ifndef _OPENMP
  (void)parallel;
#endif
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t lo = c * chunk, hi = std::min(samples, lo + chunk);
    double x[kMaxBidders * kMaxDim];
    double P[kMaxBidders * kMaxDim];
    double T[kMaxBidders];
    std::vector<double> rev(hi - lo), rev2(hi - lo);
    for (std::int64_t s = lo; s < hi; ++s) {
      for (int j = 0; j < mech.m; ++j)
        rho.sample(rng, (std::uint64_t)j, (std::uint64_t)s, x + j * mech.n);
      mech.apply(x, P, T);
      double tot = 0;
      for (int j = 0; j < mech.m; ++j) tot += T[j];
      rev[s - lo] = tot;
      rev2[s - lo] = tot * tot;
    }
    csum[c] = pairwise_sum(rev);
    csum2[c] = pairwise_sum(rev2);
  }
  RevenueEstimate est;
  est.samples = samples;
  est.seed = seed;
  est.mean = pairwise_sum(csum) / samples;
  double second = pairwise_sum(csum2) / samples;
  double var = std::max(0.0, second - est.mean * est.mean);
  est.se = std::sqrt(var / samples);
  return est;
}

nlohmann::json ConsistencyReport::to_json() const {
  return nlohmann::json{{"bins", bins},
                        {"samples", samples},
                        {"alloc_sup_dev", alloc_sup_dev},
                        {"alloc_se", alloc_se},
                        {"transfer_sup_dev", transfer_sup_dev},
                        {"transfer_se", transfer_se},
                        {"alloc_flag", alloc_flag},
                        {"transfer_flag", transfer_flag}};
}

ConsistencyReport check_reduced_consistency(const MechanismRule& mech,
                                            const UtilityGrid& u,
                                            const DistributionSpec& rho,
                                            std::int64_t samples,
                                            std::uint64_t seed, int bins) {
  require(samples > 0 && bins >= 2, "need samples and at least two bins");
  require(rho.dim == mech.n, "type dimension disagrees with the rule");
  require(rho.can_sample(), "distribution does not support sampling");
  require(u.grid.dim == mech.n, "reduced grid dimension disagrees");
  const std::vector<double> g = discrete_gradient(u);
  const int n = mech.n;
  const std::size_t n_bins = 1;
  std::size_t cells = n_bins;
  for (int ax = 0; ax < n; ++ax) cells *= bins;

  // per bin and item: count, sum and sum of squares of (P_1i - g_i(x_1)),
  // then the same for the transfer against <x_1,g> - u
  std::vector<std::int64_t> cnt(cells, 0);
  std::vector<double> dsum(cells * n, 0.0), dsum2(cells * n, 0.0);
  std::vector<double> tsum(cells, 0.0), tsum2(cells, 0.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> gmin(cells * n, inf), gmax(cells * n, -inf);

  const CounterRng rng{seed};
  double x[kMaxBidders * kMaxDim], P[kMaxBidders * kMaxDim], T[kMaxBidders];
  for (std::int64_t s = 0; s < samples; ++s) {
    for (int j = 0; j < mech.m; ++j)
      rho.sample(rng, (std::uint64_t)j, (std::uint64_t)s, x + j * n);
    mech.apply(x, P, T);
    const int b = bin_of(x, n, bins);
    ++cnt[b];
    double dot = 0;
    for (int i = 0; i < n; ++i) {
      const double gi = grad_at(u, g, i, x);
      const double d = P[i] - gi;
      dsum[b * n + i] += d;
      dsum2[b * n + i] += d * d;
      gmin[b * n + i] = std::min(gmin[b * n + i], gi);
      gmax[b * n + i] = std::max(gmax[b * n + i], gi);
      dot += x[i] * gi;
    }
    const double dt = T[0] - (dot - u.interp(x));
    tsum[b] += dt;
    tsum2[b] += dt * dt;
  }

  ConsistencyReport rep;
  rep.bins = bins;
  rep.samples = samples;
  // the lift only matches the reduced pair up to interpolation error, so give
  // each comparison a few grid spacings of slack before raising a flag
  const double slack = 4.0 * u.grid.h + 1e-9;
  for (std::size_t b = 0; b < cells; ++b) {
    if (cnt[b] < 16) continue;
    const double inv = 1.0 / cnt[b];
    for (int i = 0; i < n; ++i) {
      const double mean = dsum[b * n + i] * inv;
      const double var =
          std::max(0.0, dsum2[b * n + i] * inv - mean * mean);
      const double se = std::sqrt(var * inv);
      if (std::abs(mean) > rep.alloc_sup_dev) {
        rep.alloc_sup_dev = std::abs(mean);
        rep.alloc_se = se;
      }
      // where g jumps inside the bin (sale boundary), the rule's exact step
      // and the interpolated g disagree over a one-cell band; widen the slack
      // by a quarter of the observed in-bin oscillation to cover it
      const double osc = std::max(0.0, gmax[b * n + i] - gmin[b * n + i]);
      if (std::abs(mean) > 3 * se + slack + 0.25 * osc) rep.alloc_flag = true;
    }
    const double tm = tsum[b] * inv;
    const double tvar = std::max(0.0, tsum2[b] * inv - tm * tm);
    const double tse = std::sqrt(tvar * inv);
    if (std::abs(tm) > rep.transfer_sup_dev) {
      rep.transfer_sup_dev = std::abs(tm);
      rep.transfer_se = tse;
    }
    if (std::abs(tm) > 3 * tse + slack) rep.transfer_flag = true;
  }
  return rep;
}

nlohmann::json IcIrReport::to_json() const {
  return nlohmann::json{{"samples", samples},
                        {"ir_violations", ir_violations},
                        {"ir_worst", ir_worst},
                        {"feas_violations", feas_violations},
                        {"feas_worst", feas_worst},
                        {"ic_violations", ic_violations},
                        {"ic_worst", ic_worst}};
}

IcIrReport verify_ic_ir(const MechanismRule& mech, const DistributionSpec& rho,
                        std::int64_t probes, std::uint64_t seed, int bins,
                        double ic_tol) {
  require(probes > 0 && bins >= 2, "need probes and at least two bins");
  require(rho.dim == mech.n, "type dimension disagrees with the rule");
  require(rho.can_sample(), "distribution does not support sampling");
  const int n = mech.n, m = mech.m;
  std::size_t cells = 1;
  for (int ax = 0; ax < n; ++ax) cells *= bins;
  std::vector<std::int64_t> cnt(cells, 0);
  std::vector<double> psum(cells * n, 0.0), tsum(cells, 0.0);

  IcIrReport rep;
  rep.samples = probes;
  const CounterRng rng{seed};
  double x[kMaxBidders * kMaxDim], P[kMaxBidders * kMaxDim], T[kMaxBidders];
  for (std::int64_t s = 0; s < probes; ++s) {
    for (int j = 0; j < m; ++j)
      rho.sample(rng, (std::uint64_t)j, (std::uint64_t)s, x + j * n);
    mech.apply(x, P, T);
    for (int i = 0; i < n; ++i) {
      double tot = 0;
      for (int j = 0; j < m; ++j) tot += P[j * n + i];
      if (tot > 1.0 + 1e-12) {
        ++rep.feas_violations;
        rep.feas_worst = std::max(rep.feas_worst, tot - 1.0);
      }
    }
    for (int j = 0; j < m; ++j) {
      double util = -T[j];
      for (int i = 0; i < n; ++i) util += P[j * n + i] * x[j * n + i];
      if (util < -1e-9) {
        ++rep.ir_violations;
        rep.ir_worst = std::max(rep.ir_worst, -util);
      }
    }
    const int b = bin_of(x, n, bins);
    ++cnt[b];
    for (int i = 0; i < n; ++i) psum[b * n + i] += P[i];
    tsum[b] += T[0];
  }

  // reduced-form IC across bins: truthful binned utility at the bin center
  // must dominate reporting any other bin's conditional rule
  std::vector<double> center(cells * n);
  for (std::size_t b = 0; b < cells; ++b) {
    std::size_t rem = b;
    for (int ax = n - 1; ax >= 0; --ax) {
      center[b * n + ax] = (rem % bins + 0.5) / bins;
      rem /= bins;
    }
  }
  for (std::size_t b = 0; b < cells; ++b) {
    if (cnt[b] < 32) continue;
    const double invb = 1.0 / cnt[b];
    double truthful = -tsum[b] * invb;
    for (int i = 0; i < n; ++i)
      truthful += psum[b * n + i] * invb * center[b * n + i];
    if (truthful < -ic_tol) {
      ++rep.ic_violations;
      rep.ic_worst = std::max(rep.ic_worst, -truthful);
    }
    for (std::size_t b2 = 0; b2 < cells; ++b2) {
      if (b2 == b || cnt[b2] < 32) continue;
      const double inv2 = 1.0 / cnt[b2];
      double misreport = -tsum[b2] * inv2;
      for (int i = 0; i < n; ++i)
        misreport += psum[b2 * n + i] * inv2 * center[b * n + i];
      if (misreport > truthful + ic_tol) {
        ++rep.ic_violations;
        rep.ic_worst = std::max(rep.ic_worst, misreport - truthful);
      }
    }
  }
  return rep;
}

}  // namespace auctopt
