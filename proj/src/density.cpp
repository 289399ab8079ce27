#include "auctopt/density.hpp"

#include <algorithm>
#include <cmath>

namespace auctopt {

namespace {

// integral of the PL density over [x[i], x[i+1]]
double seg_mass(const Density1D& d, std::size_t i) {
  return 0.5 * (d.v[i] + d.v[i + 1]) * (d.x[i + 1] - d.x[i]);
}

std::size_t locate(const std::vector<double>& xs, double t) {
  // segment index i with xs[i] <= t <= xs[i+1]
  auto it = std::upper_bound(xs.begin(), xs.end(), t);
  std::size_t i = (it == xs.begin()) ? 0 : (it - xs.begin() - 1);
  if (i + 1 >= xs.size()) i = xs.size() - 2;
  return i;
}

}  // namespace

void Density1D::normalize() {
  require(x.size() >= 2 && x.size() == v.size(), "density: need >= 2 nodes");
  double total = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) total += seg_mass(*this, i);
  require(total > 0, "density: nonpositive total mass");
  for (double& vi : v) vi /= total;
}

void Density1D::validate() const {
  require(x.size() >= 2 && x.size() == v.size(), "density: bad shape");
  require(std::abs(x.front()) < 1e-14 && std::abs(x.back() - 1.0) < 1e-14,
          "density: support must be [0,1]");
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    require(x[i + 1] > x[i], "density: nodes not increasing");
  for (double vi : v)
    require(vi > 0, "density: must be strictly positive on [0,1]");
  double total = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) total += seg_mass(*this, i);
  require(std::abs(total - 1.0) <= 1e-10, "density: not normalized");
}

double Density1D::pdf(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  std::size_t i = locate(x, t);
  double w = (t - x[i]) / (x[i + 1] - x[i]);
  return v[i] + w * (v[i + 1] - v[i]);
}

double Density1D::pdf_deriv(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  std::size_t i = locate(x, t);
  return (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
}

double Density1D::cdf(double t) const {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  std::size_t i = locate(x, t);
  double acc = 0;
  for (std::size_t j = 0; j < i; ++j) acc += seg_mass(*this, j);
  double dt = t - x[i];
  double vt = pdf(t);
  return acc + 0.5 * (v[i] + vt) * dt;
}

double Density1D::inv_cdf(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  // walk segments; within one, solve the quadratic cdf piece exactly
  double acc = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    double m = seg_mass(*this, i);
    if (q <= acc + m || i + 2 == x.size()) {
      double r = q - acc;                      // mass to absorb in segment
      double L = x[i + 1] - x[i];
      double a = (v[i + 1] - v[i]) / L;        // density slope
      // solve v[i]*d + a*d^2/2 = r for d in [0, L]
      double d;
      if (std::abs(a) < 1e-14 * std::max(1.0, v[i])) {
        d = r / v[i];
      } else {
        double disc = v[i] * v[i] + 2 * a * r;
        d = (-v[i] + std::sqrt(std::max(0.0, disc))) / a;
      }
      return std::clamp(x[i] + d, x[i], x[i + 1]);
    }
    acc += m;
  }
  return 1.0;
}

nlohmann::json Density1D::to_json() const {
  return {{"x", x}, {"v", v}};
}

Density1D Density1D::from_json(const nlohmann::json& j) {
  Density1D d;
  d.x = j.at("x").get<std::vector<double>>();
  d.v = j.at("v").get<std::vector<double>>();
  d.validate();
  return d;
}

Density1D uniform_density() {
  Density1D d;
  d.x = {0.0, 1.0};
  d.v = {1.0, 1.0};
  return d;
}

Density1D linear_density(double a, double b, double floor) {
  // nodes at 0, 1 and at the crossing of a+bt with the floor, if interior
  std::vector<double> nodes{0.0, 1.0};
  if (std::abs(b) > 1e-14) {
    double c = (floor - a) / b;
    if (c > 1e-12 && c < 1 - 1e-12) nodes.insert(nodes.begin() + 1, c);
  }
  Density1D d;
  d.x = nodes;
  for (double t : nodes) d.v.push_back(std::max(a + b * t, floor));
  for (double vv : d.v) require(vv > 0, "linear_density: not positive");
  d.normalize();
  return d;
}

Density1D triangle_density(double lo, double hi) {
  require(0 <= lo && lo < hi && hi <= 1, "triangle: bad support");
  double mid = 0.5 * (lo + hi);
  double peak = 2.0 / (hi - lo);
  Density1D d;
  d.x = {0.0};
  d.v = {0.0};
  auto push = [&](double t, double val) {
    if (t > d.x.back() + 1e-14) {
      d.x.push_back(t);
      d.v.push_back(val);
    } else {
      d.v.back() = std::max(d.v.back(), val);
    }
  };
  push(lo, 0.0);
  push(mid, peak);
  push(hi, 0.0);
  push(1.0, 0.0);
  return d;  // not positive alone; meant as a mixture component
}

Density1D mix_densities(const std::vector<Density1D>& parts,
                        const std::vector<double>& w, double floor) {
  require(parts.size() == w.size() && !parts.empty(), "mix: shape");
  std::vector<double> nodes;
  for (const auto& p : parts) nodes.insert(nodes.end(), p.x.begin(), p.x.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(),
                          [](double a, double b) { return b - a < 1e-12; }),
              nodes.end());
  Density1D d;
  d.x = nodes;
  d.v.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double s = floor;
    for (std::size_t p = 0; p < parts.size(); ++p)
      s += w[p] * parts[p].pdf(nodes[i]);
    d.v[i] = s;
  }
  d.normalize();
  return d;
}

Density1D bimodal_density(double w1, double w2, double floor) {
  return mix_densities({triangle_density(0.0, 0.4), triangle_density(0.6, 1.0)},
                       {w1, w2}, floor);
}

Density1D tabulated_density(const std::vector<double>& values) {
  require(values.size() >= 2, "tabulated density: need >= 2 values");
  Density1D d;
  std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i)
    d.x.push_back(double(i) / double(n - 1));
  d.v = values;
  d.normalize();
  for (double vv : d.v) require(vv > 0, "tabulated density: not positive");
  return d;
}

void DistributionSpec::validate() const {
  require(dim >= 1 && dim <= 2, "distribution: dim must be 1 or 2");
  switch (kind) {
    case Kind::uniform:
      break;
    case Kind::product:
      require(int(axes.size()) == dim, "distribution: axes vs dim mismatch");
      for (const auto& a : axes) a.validate();
      break;
    case Kind::tabulated: {
      require(table_k >= 2, "distribution: table_k");
      std::size_t expect = 1;
      for (int i = 0; i < dim; ++i) expect *= std::size_t(table_k);
      require(table.size() == expect, "distribution: table size");
      for (double t : table) require(t > 0, "distribution: table positivity");
      break;
    }
  }
}

double DistributionSpec::pdf(const double* pt) const {
  switch (kind) {
    case Kind::uniform:
      return 1.0;
    case Kind::product: {
      double p = 1.0;
      for (int i = 0; i < dim; ++i) p *= axes[i].pdf(pt[i]);
      return p;
    }
    case Kind::tabulated: {
      // multilinear interpolation over the table lattice
      double h = 1.0 / (table_k - 1);
      int idx[2] = {0, 0};
      double frac[2] = {0, 0};
      for (int i = 0; i < dim; ++i) {
        double s = std::clamp(pt[i], 0.0, 1.0) / h;
        int c = std::min(int(s), table_k - 2);
        idx[i] = c;
        frac[i] = s - c;
      }
      if (dim == 1) {
        double a = table[idx[0]], b = table[idx[0] + 1];
        return a + frac[0] * (b - a);
      }
      auto at = [&](int i0, int i1) {
        return table[std::size_t(i0) * table_k + i1];
      };
      double c00 = at(idx[0], idx[1]), c01 = at(idx[0], idx[1] + 1);
      double c10 = at(idx[0] + 1, idx[1]), c11 = at(idx[0] + 1, idx[1] + 1);
      double c0 = c00 + frac[1] * (c01 - c00);
      double c1 = c10 + frac[1] * (c11 - c10);
      return c0 + frac[0] * (c1 - c0);
    }
  }
  return 1.0;
}

void DistributionSpec::pdf_grad(const double* pt, double* out) const {
  switch (kind) {
    case Kind::uniform:
      for (int i = 0; i < dim; ++i) out[i] = 0.0;
      return;
    case Kind::product:
      for (int i = 0; i < dim; ++i) {
        double g = axes[i].pdf_deriv(pt[i]);
        for (int j = 0; j < dim; ++j)
          if (j != i) g *= axes[j].pdf(pt[j]);
        out[i] = g;
      }
      return;
    case Kind::tabulated: {
      // central finite differences at table spacing
      double h = 1.0 / (table_k - 1);
      for (int i = 0; i < dim; ++i) {
        double lo[2], hi[2];
        for (int j = 0; j < dim; ++j) lo[j] = hi[j] = pt[j];
        lo[i] = std::max(0.0, pt[i] - h);
        hi[i] = std::min(1.0, pt[i] + h);
        out[i] = (pdf(hi) - pdf(lo)) / (hi[i] - lo[i]);
      }
      return;
    }
  }
}

void DistributionSpec::sample(const CounterRng& rng, std::uint64_t stream,
                              std::uint64_t counter, double* pt) const {
  require(can_sample(), "distribution: tabulated kind has no exact sampler");
  for (int i = 0; i < dim; ++i) {
    double q = rng.uniform(stream * 4 + i, counter);
    pt[i] = (kind == Kind::uniform) ? q : axes[i].inv_cdf(q);
  }
}

nlohmann::json DistributionSpec::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  switch (kind) {
    case Kind::uniform:
      j["kind"] = "uniform";
      break;
    case Kind::product: {
      j["kind"] = "product";
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& a : axes) arr.push_back(a.to_json());
      j["axes"] = arr;
      break;
    }
    case Kind::tabulated:
      j["kind"] = "tabulated";
      j["k"] = table_k;
      j["values"] = table;
      break;
  }
  return j;
}

DistributionSpec DistributionSpec::from_json(const nlohmann::json& j) {
  DistributionSpec d;
  d.dim = j.at("dim").get<int>();
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    d.kind = Kind::uniform;
  } else if (kind == "product") {
    d.kind = Kind::product;
    for (const auto& a : j.at("axes")) d.axes.push_back(Density1D::from_json(a));
  } else if (kind == "tabulated") {
    d.kind = Kind::tabulated;
    d.table_k = j.at("k").get<int>();
    d.table = j.at("values").get<std::vector<double>>();
  } else {
    fail("distribution: unknown kind '" + kind + "'");
  }
  d.validate();
  return d;
}

DistributionSpec DistributionSpec::uniform(int dim) {
  DistributionSpec d;
  d.kind = Kind::uniform;
  d.dim = dim;
  d.validate();
  return d;
}

DistributionSpec DistributionSpec::product(std::vector<Density1D> axes) {
  DistributionSpec d;
  d.kind = Kind::product;
  d.dim = int(axes.size());
  d.axes = std::move(axes);
  d.validate();
  return d;
}

DistributionSpec DistributionSpec::tabulated(int dim, int k,
                                             std::vector<double> values) {
  DistributionSpec d;
  d.kind = Kind::tabulated;
  d.dim = dim;
  d.table_k = k;
  d.table = std::move(values);
  d.validate();
  return d;
}

}  // namespace auctopt
