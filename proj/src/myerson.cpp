#include "auctopt/myerson.hpp"

#include <algorithm>
#include <cmath>

namespace auctopt {

double virtual_value(const Density1D& rho, double x) {
  return x - (1.0 - rho.cdf(x)) / rho.pdf(x);
}

namespace {

// quantile sample ladder: uniform grid merged with the quantiles of the
// density's kinks so every integrand piece is smooth between samples
std::vector<double> quantile_ladder(const Density1D& rho, int grid_n) {
  std::vector<double> q;
  q.reserve(std::size_t(grid_n) + rho.x.size());
  for (int i = 0; i < grid_n; ++i) q.push_back(double(i) / double(grid_n - 1));
  for (double xk : rho.x) q.push_back(rho.cdf(xk));
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end(),
                      [](double a, double b) { return b - a < 1e-12; }),
          q.end());
  q.front() = 0.0;
  q.back() = 1.0;
  return q;
}

}  // namespace

IronedValuation iron(const Density1D& rho, int grid_n) {
  require(grid_n >= 3, "iron: grid too small");
  rho.validate();
  IronedValuation ir;
  ir.rho = rho;
  ir.q = quantile_ladder(rho, grid_n);
  std::size_t n = ir.q.size();
  ir.t.resize(n);
  ir.vq.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ir.t[i] = rho.inv_cdf(ir.q[i]);
    ir.vq[i] = virtual_value(rho, ir.t[i]);
  }
  // f(q) = integral_q^1 of the virtual value in quantile space (trapezoid on
  // the kink-aligned ladder)
  ir.f.assign(n, 0.0);
  for (std::size_t i = n - 1; i-- > 0;) {
    double dq = ir.q[i + 1] - ir.q[i];
    ir.f[i] = ir.f[i + 1] + 0.5 * (ir.vq[i] + ir.vq[i + 1]) * dq;
  }
  ir.regular = true;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (ir.vq[i + 1] < ir.vq[i] - 1e-9) ir.regular = false;

  // upper concave envelope by monotone chain over (q, f)
  std::vector<int> hull;
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      std::size_t a = std::size_t(hull[hull.size() - 2]);
      std::size_t b = std::size_t(hull[hull.size() - 1]);
      double cross = (ir.q[b] - ir.q[a]) * (ir.f[i] - ir.f[a]) -
                     (ir.q[i] - ir.q[a]) * (ir.f[b] - ir.f[a]);
      if (cross >= 0)  // b below the chord a-i: drop it
        hull.pop_back();
      else
        break;
    }
    hull.push_back(int(i));
  }
  // flatten left of the argmax: keep the last vertex attaining the max so the
  // envelope decreases strictly afterwards
  std::size_t best = 0;
  for (std::size_t h = 0; h < hull.size(); ++h)
    if (ir.f[std::size_t(hull[h])] >= ir.f[std::size_t(hull[best])] - 1e-15)
      best = h;
  ir.hull.assign(hull.begin() + std::ptrdiff_t(best), hull.end());
  ir.q_star = ir.q[std::size_t(ir.hull.front())];
  return ir;
}

double IronedValuation::vbar_at_q(double qq) const {
  if (qq <= q_star + 1e-15) return 0.0;
  // left derivative: the envelope segment whose right endpoint is the first
  // hull vertex with q >= qq
  std::size_t lo = 0, hi = hull.size() - 1;
  while (lo + 1 < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (q[std::size_t(hull[mid])] < qq)
      lo = mid;
    else
      hi = mid;
  }
  std::size_t a = std::size_t(hull[lo]), b = std::size_t(hull[hi]);
  double slope = (f[b] - f[a]) / (q[b] - q[a]);
  return std::max(0.0, -slope);
}

double IronedValuation::vbar(double x) const { return vbar_at_q(rho.cdf(x)); }

double IronedValuation::vbar_integral(double qa, double qb) const {
  qa = std::max(0.0, std::min(1.0, qa));
  qb = std::max(qa, std::min(1.0, qb));
  if (qb <= q_star + 1e-15) return 0.0;
  qa = std::max(qa, q_star);
  // locate the envelope segment containing qa, then walk right
  std::size_t lo = 0, hi = hull.size() - 1;
  while (lo + 1 < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (q[std::size_t(hull[mid])] < qa)
      lo = mid;
    else
      hi = mid;
  }
  if (lo > 0) --lo;  // be safe about the boundary convention
  double s = 0;
  for (std::size_t seg = lo; seg + 1 < hull.size(); ++seg) {
    std::size_t a = std::size_t(hull[seg]), b = std::size_t(hull[seg + 1]);
    double ql = q[a], qr = q[b];
    if (ql >= qb) break;
    double x0 = std::max(qa, ql), x1 = std::min(qb, qr);
    if (x1 <= x0) continue;
    double v = std::max(0.0, -(f[b] - f[a]) / (qr - ql));
    s += v * (x1 - x0);
  }
  return s;
}

double IronedValuation::reserve() const { return rho.inv_cdf(q_star); }

std::vector<std::pair<double, double>> IronedValuation::flat_intervals() const {
  std::vector<std::pair<double, double>> out;
  if (q_star > 1e-15) out.emplace_back(0.0, q_star);
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    int a = hull[h], b = hull[h + 1];
    if (b - a > 1) out.emplace_back(q[std::size_t(a)], q[std::size_t(b)]);
  }
  return out;
}

namespace {

// average of r^(m-1) over [qa, qb]
double power_mean(int m, double qa, double qb) {
  if (qb <= qa) return std::pow(qa, m - 1);
  return (std::pow(qb, m) - std::pow(qa, m)) / (double(m) * (qb - qa));
}

}  // namespace

MyersonSolution myerson_solve(const Density1D& rho, int m, int grid_n) {
  require(m >= 1, "myerson: need m >= 1");
  MyersonSolution sol;
  sol.ironed = iron(rho, grid_n);
  sol.m = m;
  sol.reserve = sol.ironed.reserve();
  sol.tie_mass = sol.ironed.tie_mass();
  const auto& ir = sol.ironed;

  // revenue = m * sum over envelope segments of V̄_seg * (qb^m - qa^m)/m;
  // on every segment the utility gradient integrates to (qb^m - qa^m)/m
  // whether or not the segment is ironed
  double rev = 0;
  for (std::size_t h = 0; h + 1 < ir.hull.size(); ++h) {
    std::size_t a = std::size_t(ir.hull[h]), b = std::size_t(ir.hull[h + 1]);
    double slope = (ir.f[b] - ir.f[a]) / (ir.q[b] - ir.q[a]);
    double vseg = std::max(0.0, -slope);
    rev += vseg * (std::pow(ir.q[b], m) - std::pow(ir.q[a], m));
  }
  sol.revenue = rev;

  // cumulative utility at the sample types
  std::size_t n = ir.q.size();
  sol.u_at_sample_.assign(n, 0.0);
  // mark per-sample-cell gradient: flat cells use the segment mean
  std::vector<double> cell_grad_left(n, 0.0), cell_grad_right(n, 0.0);
  // walk hull segments; inside [hull[h], hull[h+1]] the gradient is either
  // q^(m-1) (contact segment of unit length) or the conditional mean
  for (std::size_t h = 0; h + 1 < ir.hull.size(); ++h) {
    std::size_t a = std::size_t(ir.hull[h]), b = std::size_t(ir.hull[h + 1]);
    bool flat = (b - a) > 1;
    double gmean = power_mean(m, ir.q[a], ir.q[b]);
    for (std::size_t i = a; i < b; ++i) {
      if (flat) {
        cell_grad_left[i] = cell_grad_right[i] = gmean;
      } else {
        cell_grad_left[i] = std::pow(ir.q[i], m - 1);
        cell_grad_right[i] = std::pow(ir.q[i + 1], m - 1);
      }
    }
  }
  std::size_t i0 = std::size_t(ir.hull.front());
  for (std::size_t i = i0; i + 1 < n; ++i) {
    double dt = ir.t[i + 1] - ir.t[i];
    sol.u_at_sample_[i + 1] =
        sol.u_at_sample_[i] +
        0.5 * (cell_grad_left[i] + cell_grad_right[i]) * dt;
  }
  return sol;
}

double MyersonSolution::uprime(double x) const {
  const auto& ir = ironed;
  double qq = ir.rho.cdf(x);
  if (qq <= ir.q_star + 1e-15) return 0.0;
  // locate the envelope segment (same convention as vbar)
  std::size_t lo = 0, hi = ir.hull.size() - 1;
  while (lo + 1 < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (ir.q[std::size_t(ir.hull[mid])] < qq)
      lo = mid;
    else
      hi = mid;
  }
  std::size_t a = std::size_t(ir.hull[lo]), b = std::size_t(ir.hull[hi]);
  if (b - a > 1) return power_mean(m, ir.q[a], ir.q[b]);
  return std::pow(qq, m - 1);
}

double MyersonSolution::u(double x) const {
  const auto& ir = ironed;
  if (x <= reserve) return 0.0;
  // locate the sample cell containing x and integrate the tail piece
  auto it = std::upper_bound(ir.t.begin(), ir.t.end(), x);
  std::size_t i = std::size_t(std::max<std::ptrdiff_t>(
      0, (it - ir.t.begin()) - 1));
  i = std::min(i, ir.t.size() - 2);
  double base = u_at_sample_[i];
  double dt = x - ir.t[i];
  if (dt <= 0) return base;
  double gl = uprime(ir.t[i] + 1e-15 * (1 + std::abs(ir.t[i])));
  double gr = uprime(x);
  return base + 0.5 * (gl + gr) * dt;
}

UtilityGrid MyersonSolution::sample_u(const Grid& grid) const {
  require(grid.dim == 1, "sample_u: 1D grids only");
  UtilityGrid ug;
  ug.grid = grid;
  ug.u.resize(grid.n_nodes);
  std::vector<double> g(grid.n_nodes);
  for (std::size_t i = 0; i < grid.n_nodes; ++i) {
    double x = grid.coord_of(int(i));
    ug.u[i] = u(x);
    g[i] = uprime(x);
  }
  ug.g = std::move(g);
  return ug;
}

double optimal_revenue_1item(const Density1D& rho, int m) {
  return myerson_solve(rho, m).revenue;
}

Certificate1D dual_certificate_1d(const MyersonSolution& sol) {
  const auto& ir = sol.ironed;
  Certificate1D cert;
  cert.m = sol.m;

  double vmax = 0;
  for (std::size_t h = 0; h + 1 < ir.hull.size(); ++h) {
    std::size_t a = std::size_t(ir.hull[h]), b = std::size_t(ir.hull[h + 1]);
    vmax = std::max(vmax, -(ir.f[b] - ir.f[a]) / (ir.q[b] - ir.q[a]));
  }

  if (sol.m == 1) {
    // box cost: free up to gradient 1, steep beyond; conjugate is s -> s_+
    cert.phi = PwlConvex::hinge(1.0, vmax + 1.0);
  } else {
    // phi(s) = integral_0^s V̄ at the quantile q = r^{1/(m-1)}; slopes are
    // nondecreasing because V̄ is
    std::vector<double> sgrid;
    sgrid.reserve(ir.q.size());
    for (double qq : ir.q) sgrid.push_back(std::pow(qq, sol.m - 1));
    sgrid.erase(std::unique(sgrid.begin(), sgrid.end(),
                            [](double a, double b) { return b - a < 1e-14; }),
                sgrid.end());
    cert.phi = PwlConvex::from_slope_profile(sgrid, [&](double s) {
      return ir.vbar_at_q(std::pow(s, 1.0 / double(sol.m - 1)));
    });
  }

  // integral of phi*(V̄) rho dx in quantile space: V̄ is constant per
  // envelope segment
  double term = 0;
  for (std::size_t h = 0; h + 1 < ir.hull.size(); ++h) {
    std::size_t a = std::size_t(ir.hull[h]), b = std::size_t(ir.hull[h + 1]);
    double vseg = std::max(0.0, -(ir.f[b] - ir.f[a]) / (ir.q[b] - ir.q[a]));
    term += cert.phi.conj(vseg) * (ir.q[b] - ir.q[a]);
  }
  // segment left of the argmax: V̄ = 0, phi*(0) = 0
  cert.vbar_term = term;
  cert.power_term = cert.phi.integral_power(sol.m);
  cert.dual_value = sol.m * (cert.vbar_term + cert.power_term);
  return cert;
}

}  // namespace auctopt
