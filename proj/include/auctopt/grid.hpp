#pragma once
#include <json.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "auctopt/common.hpp"
#include "auctopt/density.hpp"

namespace auctopt {

constexpr std::size_t kMaxGridNodes = 1'000'000;

/** Regular lattice on [0,1]^dim with k nodes per axis (spacing h = 1/(k-1)).
    Flat indices are row-major with axis 0 slowest.  Node quadrature weights
    are the product trapezoid rule, so they sum to 1 exactly up to rounding. */
struct Grid {
  int dim = 1;
  int k = 2;
  double h = 1.0;
  std::size_t n_nodes = 2;

  std::size_t flat(const int* idx) const;
  void unflat(std::size_t f, int* idx) const;
  void coords(std::size_t f, double* pt) const;
  double coord_of(int axis_index) const { return axis_index * h; }
  double axis_weight(int axis_index) const {
    return (axis_index == 0 || axis_index == k - 1) ? h / 2 : h;
  }
  double cell_weight(std::size_t f) const;  // product over axes
  /// quadrature weight of the edge (f, f+step(axis)): h times the trapezoid
  /// weights of the transverse axes; pairings over edges telescope exactly
  double edge_weight(std::size_t f, int axis) const;
  std::size_t stride(int axis) const;
  bool on_upper_face(std::size_t f, int axis) const;

  bool operator==(const Grid&) const = default;
};

Grid make_grid(int dim, int k);

struct Atom {
  std::vector<double> pos;
  double mass = 0;
};

/** Signed measure: a mass per lattice node plus optional off-array atoms.
    Atoms stay separate so point masses are never smeared across a cell. */
struct GridMeasure {
  Grid grid;
  std::vector<double> node_mass;  // mass carried by each node
  std::vector<Atom> atoms;
  std::string note;  // free-form provenance carried into artifacts

  double total_mass() const;
  /// positive/negative parts; atoms at coinciding positions are merged first
  std::pair<GridMeasure, GridMeasure> jordan() const;
  /// node masses with atoms folded in (multilinear split; exact on-lattice)
  std::vector<double> node_masses_with_atoms() const;

  nlohmann::json to_json() const;
  static GridMeasure from_json(const nlohmann::json& j);
};

/** Candidate utility: values at nodes, optionally with the subgradient field
    the solver certified (dim components per node, row-major by node). */
struct UtilityGrid {
  Grid grid;
  std::vector<double> u;
  std::optional<std::vector<double>> g;  // size n_nodes*dim when present

  double interp(const double* pt) const;  // multilinear
};

/** Vector field on nodes (dim components per node).  Components along axis i
    at upper-face-i nodes are ignored by the divergence (no outgoing edge). */
struct FlowField {
  Grid grid;
  std::vector<double> c;  // n_nodes*dim
  std::vector<Atom> singular;  // optional singular part, reported not derived
};

/// forward differences, backward on the upper face; returns the stored field
/// when the utility carries one
std::vector<double> discrete_gradient(const UtilityGrid& u);
std::vector<double> discrete_gradient(const Grid& grid,
                                      const std::vector<double>& u);

/// Edge pairing  sum_edges  grad_e(psi) * c(lower node) * rho(lower) * w_edge.
/// discrete_divergence returns the unique measure nu with
///   pairing(psi, c) = - sum psi d(nu)   for every psi,
/// so nu matches  div(c rho)  including its boundary concentration.
double edge_pairing(const Grid& grid, const std::vector<double>& psi,
                    const std::vector<double>& c,
                    const std::vector<double>& rho);
GridMeasure discrete_divergence(const FlowField& c,
                                const std::vector<double>& rho);

/// integral of a node function against the measure (atoms evaluated by
/// multilinear interpolation of f's node values)
double integrate(const std::vector<double>& f_nodes, const GridMeasure& mu);
double integrate(const std::function<double(const double*)>& f,
                 const GridMeasure& mu);

double interp_node_values(const Grid& grid, const std::vector<double>& vals,
                          const double* pt);
/// multilinear interpolation of one component of a node-major vector field
double interp_field(const Grid& grid, const std::vector<double>& field,
                    int comp, const double* pt);

/// density values at every node
std::vector<double> density_on_grid(const Grid& grid,
                                    const DistributionSpec& rho);

}  // namespace auctopt
