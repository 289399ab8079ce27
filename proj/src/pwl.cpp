#include "auctopt/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auctopt {

void PwlConvex::validate() const {
  require(!bp.empty() && bp.size() == slope.size(), "pwl: shape");
  require(std::abs(bp[0]) < 1e-14, "pwl: first breakpoint must be 0");
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    require(bp[i + 1] > bp[i], "pwl: breakpoints not increasing");
    require(slope[i + 1] >= slope[i] - 1e-12, "pwl: slopes not nondecreasing");
  }
}

double PwlConvex::eval(double t) const {
  require(t >= -1e-12, "pwl: negative argument");
  t = std::max(t, 0.0);
  double val = at0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    double seg_end = (i + 1 < bp.size()) ? bp[i + 1] : t;
    double upto = std::min(t, seg_end);
    if (upto > bp[i]) val += slope[i] * (upto - bp[i]);
    if (t <= seg_end) break;
  }
  return val;
}

std::pair<double, double> PwlConvex::subdiff(double t) const {
  t = std::max(t, 0.0);
  // find segment
  std::size_t i = 0;
  while (i + 1 < bp.size() && t >= bp[i + 1] - 1e-14) ++i;
  double lo = slope[i], hi = slope[i];
  // exactly on a breakpoint: the interval spans the two adjacent slopes
  if (i > 0 && std::abs(t - bp[i]) < 1e-12) lo = slope[i - 1];
  for (std::size_t j = i + 1; j < bp.size(); ++j)
    if (std::abs(t - bp[j]) < 1e-12) hi = slope[j];
  if (t < 1e-14) lo = -std::numeric_limits<double>::infinity();
  return {lo, hi};
}

double PwlConvex::conj_argmax(double s) const {
  if (s <= slope.front()) return 0.0;
  for (std::size_t i = 1; i < bp.size(); ++i)
    if (s <= slope[i]) return bp[i];
  require(s <= slope.back() + 1e-12, "pwl conj: argument beyond top slope");
  return bp.back();
}

double PwlConvex::conj(double s) const {
  double t = conj_argmax(s);
  return s * t - eval(t);
}

PwlConvex PwlConvex::conj_function(double wall_slope) const {
  validate();
  PwlConvex c;
  c.at0 = -at0;
  c.bp = {0.0};
  c.slope = {0.0};
  for (std::size_t i = 0; i < slope.size(); ++i) {
    const double s = std::max(0.0, slope[i]);
    // past this slope the maximizer jumps to the next breakpoint; past the
    // top slope the true conjugate is +inf, approximated by the wall
    const double nxt = (i + 1 < bp.size()) ? bp[i + 1] : wall_slope;
    if (s <= c.bp.back() + 1e-14)
      c.slope.back() = nxt;
    else {
      c.bp.push_back(s);
      c.slope.push_back(nxt);
    }
  }
  c.validate();
  return c;
}

double PwlConvex::integral_power(int m) const {
  require(m >= 1, "pwl: m >= 1");
  if (m == 1) return eval(1.0);  // t^0 == 1
  double p = double(m - 1);
  double total = 0;
  // integrate phi(t^p) piecewise: t ranges where t^p lies in [bp[i], bp[i+1]]
  for (std::size_t i = 0; i < bp.size(); ++i) {
    double lo_v = bp[i];
    double hi_v = (i + 1 < bp.size()) ? bp[i + 1]
                                      : std::numeric_limits<double>::infinity();
    double ta = std::pow(std::min(lo_v, 1.0), 1.0 / p);
    double tb = std::pow(std::min(hi_v, 1.0), 1.0 / p);
    if (tb <= ta) continue;
    // phi on this range: phi(bp[i]) + slope[i] (t^p - bp[i])
    double base = eval(bp[i]) - slope[i] * bp[i];
    total += base * (tb - ta) +
             slope[i] * (std::pow(tb, m) - std::pow(ta, m)) / double(m);
    if (hi_v >= 1.0) break;
  }
  return total;
}

PwlConvex PwlConvex::from_slope_profile(
    const std::vector<double>& breakpoints,
    const std::function<double(double)>& psi) {
  PwlConvex f;
  f.bp = breakpoints;
  f.slope.resize(breakpoints.size());
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    double mid = (i + 1 < breakpoints.size())
                     ? 0.5 * (breakpoints[i] + breakpoints[i + 1])
                     : breakpoints[i];
    f.slope[i] = psi(mid);
  }
  // enforce monotone slopes against profile noise
  for (std::size_t i = 1; i < f.slope.size(); ++i)
    f.slope[i] = std::max(f.slope[i], f.slope[i - 1]);
  f.validate();
  return f;
}

PwlConvex PwlConvex::hinge(double knee, double big_slope) {
  PwlConvex f;
  if (knee <= 1e-14) {
    f.bp = {0.0};
    f.slope = {big_slope};
  } else {
    f.bp = {0.0, knee};
    f.slope = {0.0, big_slope};
  }
  f.validate();
  return f;
}

PwlConvex PwlConvex::interpolate(const std::vector<double>& breakpoints,
                                 const std::function<double(double)>& f) {
  PwlConvex g;
  g.bp = breakpoints;
  g.at0 = f(0.0);
  g.slope.resize(breakpoints.size());
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    g.slope[i] = (f(breakpoints[i + 1]) - f(breakpoints[i])) /
                 (breakpoints[i + 1] - breakpoints[i]);
  if (breakpoints.size() >= 2)
    g.slope.back() = g.slope[breakpoints.size() - 2];
  else
    g.slope.back() = 0.0;
  for (std::size_t i = 1; i < g.slope.size(); ++i)
    g.slope[i] = std::max(g.slope[i], g.slope[i - 1]);
  g.validate();
  return g;
}

nlohmann::json PwlConvex::to_json() const {
  return {{"bp", bp}, {"slope", slope}, {"at0", at0}};
}

PwlConvex PwlConvex::from_json(const nlohmann::json& j) {
  PwlConvex f;
  f.bp = j.at("bp").get<std::vector<double>>();
  f.slope = j.at("slope").get<std::vector<double>>();
  f.at0 = j.value("at0", 0.0);
  f.validate();
  return f;
}

}  // namespace auctopt
