#include "auctopt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace auctopt {

Grid make_grid(int dim, int k) {
  require(dim >= 1 && dim <= 2, "make_grid: dim must be 1 or 2");
  require(k >= 2, "make_grid: need at least 2 nodes per axis");
  Grid g;
  g.dim = dim;
  g.k = k;
  g.h = 1.0 / (k - 1);
  g.n_nodes = 1;
  for (int i = 0; i < dim; ++i) g.n_nodes *= std::size_t(k);
  require(g.n_nodes <= kMaxGridNodes, "make_grid: node budget exceeded");
  return g;
}

std::size_t Grid::flat(const int* idx) const {
  std::size_t f = 0;
  for (int i = 0; i < dim; ++i) f = f * k + std::size_t(idx[i]);
  return f;
}

void Grid::unflat(std::size_t f, int* idx) const {
  for (int i = dim - 1; i >= 0; --i) {
    idx[i] = int(f % k);
    f /= k;
  }
}

void Grid::coords(std::size_t f, double* pt) const {
  int idx[2];
  unflat(f, idx);
  for (int i = 0; i < dim; ++i) pt[i] = idx[i] * h;
}

double Grid::cell_weight(std::size_t f) const {
  int idx[2];
  unflat(f, idx);
  double w = 1.0;
  for (int i = 0; i < dim; ++i) w *= axis_weight(idx[i]);
  return w;
}

double Grid::edge_weight(std::size_t f, int axis) const {
  int idx[2];
  unflat(f, idx);
  double w = h;  // along the edge axis
  for (int i = 0; i < dim; ++i)
    if (i != axis) w *= axis_weight(idx[i]);
  return w;
}

std::size_t Grid::stride(int axis) const {
  std::size_t s = 1;
  for (int i = dim - 1; i > axis; --i) s *= std::size_t(k);
  return s;
}

bool Grid::on_upper_face(std::size_t f, int axis) const {
  int idx[2];
  unflat(f, idx);
  return idx[axis] == k - 1;
}

double GridMeasure::total_mass() const {
  double s = pairwise_sum(node_mass);
  for (const auto& a : atoms) s += a.mass;
  return s;
}

std::pair<GridMeasure, GridMeasure> GridMeasure::jordan() const {
  GridMeasure pos, neg;
  pos.grid = neg.grid = grid;
  pos.node_mass.assign(grid.n_nodes, 0.0);
  neg.node_mass.assign(grid.n_nodes, 0.0);
  for (std::size_t i = 0; i < node_mass.size(); ++i) {
    if (node_mass[i] > 0)
      pos.node_mass[i] = node_mass[i];
    else
      neg.node_mass[i] = -node_mass[i];
  }
  // merge coinciding atoms before splitting signs
  std::map<std::vector<double>, double> merged;
  for (const auto& a : atoms) {
    auto key = a.pos;
    merged[key] += a.mass;
  }
  for (const auto& [p, m] : merged) {
    if (std::abs(m) < 1e-300) continue;
    Atom a{p, std::abs(m)};
    (m > 0 ? pos : neg).atoms.push_back(a);
  }
  return {pos, neg};
}

std::vector<double> GridMeasure::node_masses_with_atoms() const {
  std::vector<double> out = node_mass;
  out.resize(grid.n_nodes, 0.0);
  for (const auto& a : atoms) {
    require(int(a.pos.size()) == grid.dim, "measure: atom dim mismatch");
    // multilinear split across the surrounding cell corners
    int base[2] = {0, 0};
    double frac[2] = {0, 0};
    for (int i = 0; i < grid.dim; ++i) {
      double s = std::clamp(a.pos[i], 0.0, 1.0) / grid.h;
      int c = std::min(int(std::floor(s)), grid.k - 2);
      base[i] = c;
      frac[i] = s - c;
    }
    int corners = 1 << grid.dim;
    for (int c = 0; c < corners; ++c) {
      double w = 1.0;
      int idx[2];
      for (int i = 0; i < grid.dim; ++i) {
        int bit = (c >> i) & 1;
        idx[i] = base[i] + bit;
        w *= bit ? frac[i] : 1.0 - frac[i];
      }
      if (w != 0.0) out[grid.flat(idx)] += w * a.mass;
    }
  }
  return out;
}

nlohmann::json GridMeasure::to_json() const {
  nlohmann::json j;
  j["dim"] = grid.dim;
  j["k"] = grid.k;
  j["density"] = node_mass;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : atoms)
    arr.push_back({{"pos", a.pos}, {"mass", a.mass}});
  j["atoms"] = arr;
  if (!note.empty()) j["note"] = note;
  return j;
}

GridMeasure GridMeasure::from_json(const nlohmann::json& j) {
  GridMeasure m;
  m.grid = make_grid(j.at("dim").get<int>(), j.at("k").get<int>());
  m.node_mass = j.at("density").get<std::vector<double>>();
  require(m.node_mass.size() == m.grid.n_nodes, "measure: density size");
  for (const auto& a : j.value("atoms", nlohmann::json::array()))
    m.atoms.push_back({a.at("pos").get<std::vector<double>>(),
                       a.at("mass").get<double>()});
  if (j.contains("note")) m.note = j["note"].get<std::string>();
  return m;
}

double UtilityGrid::interp(const double* pt) const {
  return interp_node_values(grid, u, pt);
}

std::vector<double> discrete_gradient(const Grid& grid,
                                      const std::vector<double>& u) {
  require(u.size() == grid.n_nodes, "gradient: size mismatch");
  std::vector<double> g(grid.n_nodes * grid.dim, 0.0);
  for (int ax = 0; ax < grid.dim; ++ax) {
    std::size_t st = grid.stride(ax);
    for (std::size_t f = 0; f < grid.n_nodes; ++f) {
      double d;
      if (grid.on_upper_face(f, ax))
        d = (u[f] - u[f - st]) / grid.h;  // backward on the upper face
      else
        d = (u[f + st] - u[f]) / grid.h;
      g[f * grid.dim + ax] = d;
    }
  }
  return g;
}

std::vector<double> discrete_gradient(const UtilityGrid& ug) {
  if (ug.g) {
    require(ug.g->size() == ug.grid.n_nodes * ug.grid.dim,
            "gradient: stored field size mismatch");
    return *ug.g;
  }
  return discrete_gradient(ug.grid, ug.u);
}

double edge_pairing(const Grid& grid, const std::vector<double>& psi,
                    const std::vector<double>& c,
                    const std::vector<double>& rho) {
  require(psi.size() == grid.n_nodes && rho.size() == grid.n_nodes &&
              c.size() == grid.n_nodes * grid.dim,
          "edge_pairing: size mismatch");
  std::vector<double> terms;
  terms.reserve(grid.n_nodes * grid.dim);
  for (int ax = 0; ax < grid.dim; ++ax) {
    std::size_t st = grid.stride(ax);
    for (std::size_t f = 0; f < grid.n_nodes; ++f) {
      if (grid.on_upper_face(f, ax)) continue;
      double grad = (psi[f + st] - psi[f]) / grid.h;
      terms.push_back(grad * c[f * grid.dim + ax] * rho[f] *
                      grid.edge_weight(f, ax));
    }
  }
  return pairwise_sum(terms);
}

GridMeasure discrete_divergence(const FlowField& cf,
                                const std::vector<double>& rho) {
  const Grid& grid = cf.grid;
  require(cf.c.size() == grid.n_nodes * grid.dim && rho.size() == grid.n_nodes,
          "divergence: size mismatch");
  GridMeasure nu;
  nu.grid = grid;
  nu.node_mass.assign(grid.n_nodes, 0.0);
  // nu is minus the adjoint of the edge pairing: each edge (f, f+st) with
  // mass flux  q = c*rho*w_e/h  moves q from node f+st to node f, i.e.
  // contributes -q at f+st and +q at f after the sign flip.
  for (int ax = 0; ax < grid.dim; ++ax) {
    std::size_t st = grid.stride(ax);
    for (std::size_t f = 0; f < grid.n_nodes; ++f) {
      if (grid.on_upper_face(f, ax)) continue;
      double q = cf.c[f * grid.dim + ax] * rho[f] * grid.edge_weight(f, ax) /
                 grid.h;
      nu.node_mass[f] += q;
      nu.node_mass[f + st] -= q;
    }
  }
  for (const auto& a : cf.singular) nu.atoms.push_back(a);
  return nu;
}

double integrate(const std::vector<double>& f_nodes, const GridMeasure& mu) {
  require(f_nodes.size() == mu.grid.n_nodes, "integrate: size mismatch");
  std::vector<double> terms(mu.grid.n_nodes);
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = f_nodes[i] * mu.node_mass[i];
  double s = pairwise_sum(terms);
  for (const auto& a : mu.atoms)
    s += a.mass * interp_node_values(mu.grid, f_nodes, a.pos.data());
  return s;
}

double integrate(const std::function<double(const double*)>& f,
                 const GridMeasure& mu) {
  std::vector<double> terms(mu.grid.n_nodes);
  double pt[2];
  for (std::size_t i = 0; i < mu.grid.n_nodes; ++i) {
    mu.grid.coords(i, pt);
    terms[i] = f(pt) * mu.node_mass[i];
  }
  double s = pairwise_sum(terms);
  for (const auto& a : mu.atoms) s += a.mass * f(a.pos.data());
  return s;
}

double interp_node_values(const Grid& grid, const std::vector<double>& vals,
                          const double* pt) {
  int base[2] = {0, 0};
  double frac[2] = {0, 0};
  for (int i = 0; i < grid.dim; ++i) {
    double s = std::clamp(pt[i], 0.0, 1.0) / grid.h;
    int c = std::min(int(std::floor(s)), grid.k - 2);
    base[i] = c;
    frac[i] = s - c;
  }
  double acc = 0;
  int corners = 1 << grid.dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    int idx[2];
    for (int i = 0; i < grid.dim; ++i) {
      int bit = (c >> i) & 1;
      idx[i] = base[i] + bit;
      w *= bit ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) acc += w * vals[grid.flat(idx)];
  }
  return acc;
}

double interp_field(const Grid& grid, const std::vector<double>& field,
                    int comp, const double* pt) {
  require(field.size() == grid.n_nodes * grid.dim, "interp_field: size");
  int base[2] = {0, 0};
  double frac[2] = {0, 0};
  for (int i = 0; i < grid.dim; ++i) {
    double s = std::clamp(pt[i], 0.0, 1.0) / grid.h;
    int c = std::min(int(std::floor(s)), grid.k - 2);
    base[i] = c;
    frac[i] = s - c;
  }
  double acc = 0;
  int corners = 1 << grid.dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    int idx[2];
    for (int i = 0; i < grid.dim; ++i) {
      int bit = (c >> i) & 1;
      idx[i] = base[i] + bit;
      w *= bit ? frac[i] : 1.0 - frac[i];
    }
    if (w != 0.0) acc += w * field[grid.flat(idx) * grid.dim + comp];
  }
  return acc;
}

std::vector<double> density_on_grid(const Grid& grid,
                                    const DistributionSpec& rho) {
  require(grid.dim == rho.dim, "density_on_grid: dim mismatch");
  std::vector<double> out(grid.n_nodes);
  double pt[2];
  for (std::size_t f = 0; f < grid.n_nodes; ++f) {
    grid.coords(f, pt);
    out[f] = rho.pdf(pt);
  }
  return out;
}

}  // namespace auctopt
