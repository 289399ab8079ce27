#pragma once
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "auctopt/density.hpp"
#include "auctopt/lp.hpp"
#include "auctopt/reduced.hpp"

namespace auctopt {

/** Everything one run needs: problem, solver knobs, output location, seed.
    Round-trips through JSON without loss; artifacts embed the resolved copy
    plus its hash so a bundle is self-describing. */
struct RunConfig {
  // problem
  int n = 1;
  int m = 1;
  int k = 33;
  DistributionSpec rho = DistributionSpec::uniform(1);
  ConvexityEncoding encoding = ConvexityEncoding::exact_pairwise;
  int alpha_points = 33;
  // solver
  SolverConfig lp;
  std::int64_t mc_samples = 200000;
  std::int64_t weak_dual_node_cap = 1200;  // skip the plan LP above this
  // output
  std::string out_dir = "out";
  bool write_csv = true;
  bool write_json = true;
  // reproducibility
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

enum class Stage : unsigned {
  reduce = 1u << 0,
  myerson = 1u << 1,  // one-dimensional report, skipped silently otherwise
  dual = 1u << 2,
  lift = 1u << 3,
  simulate = 1u << 4,
  all = (1u << 5) - 1,
};

struct PipelineResult {
  int exit_code = 0;  // 0 pass, 2 invariant failure, 3 solver stall
  std::string failed_stage;
  std::vector<std::string> files;  // paths relative to out_dir, MANIFEST last
  nlohmann::json summary;
};

/** Run the requested stages in order (reduce, myerson, dual, lift, simulate),
    write artifacts under cfg.out_dir and finish with a MANIFEST of content
    hashes.  Stops at the first failed stage; partial artifacts stay on disk
    and the MANIFEST names the failure. */
PipelineResult run_pipeline(const RunConfig& cfg, unsigned stages);
inline PipelineResult run_pipeline(const RunConfig& cfg) {
  return run_pipeline(cfg, static_cast<unsigned>(Stage::all));
}

/// re-hash every file listed in dir's MANIFEST; true when all match
bool verify_manifest(const std::string& dir);

/** Dual operations against an existing artifact directory (reduced.json must
    be present).  mode: "weak", "beckmann", "certify", or "all".  Writes the
    corresponding artifacts next to the primal ones; returns the exit code
    (0 pass, 2 invariant failure, 3 stall). */
int run_dual_on_artifacts(const std::string& dir, const std::string& mode);

/** Emit plot-ready CSV from an artifact directory.  kind is one of
    u_heatmap, region_map, plan_arrows, stoploss_curves; anything else is an
    error that lists the choices.  Returns the files written. */
std::vector<std::string> emit_plot_data(const std::string& artifact_dir,
                                        const std::string& kind);

std::string sha256_hex(const std::string& bytes);

}  // namespace auctopt
