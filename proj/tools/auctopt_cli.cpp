// Command-line front end: myerson, reduce, dual, simulate, pipeline, plotdata.
// Flags mirror the run-config fields; --config replaces the whole block.
// AUCTOPT_OUT_ROOT, when set, prefixes relative output directories.
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "auctopt/pipeline.hpp"

using namespace auctopt;

namespace {

int usage(const char* argv0) {
  std::cerr
      << "usage: " << argv0
      << " <myerson|reduce|dual|simulate|pipeline|plotdata> [options]\n"
         "\n"
         "common options (ignored when --config is given):\n"
         "  --n N            items / type dimension        (default 1)\n"
         "  --m M            bidders                        (default 1)\n"
         "  --k K            grid nodes per axis            (default 33)\n"
         "  --rho NAME       uniform | bimodal              (default uniform)\n"
         "  --encoding NAME  exact_pairwise | axis_stencil\n"
         "  --alpha N        stop-loss ladder size          (default 33)\n"
         "  --samples N      Monte Carlo samples            (default 200000)\n"
         "  --seed S         RNG seed                       (default 1)\n"
         "  --out DIR        artifact directory             (default out)\n"
         "  --config PATH    load the full run config from JSON instead\n"
         "\n"
         "dual options:      --mode weak|beckmann|certify|all (default all)\n"
         "                   --artifacts DIR  consume an existing bundle\n"
         "plotdata options:  --artifacts DIR --kind "
         "u_heatmap|region_map|plan_arrows|stoploss_curves\n"
         "\n"
         "exit codes: 0 all checks pass, 2 invariant failure, 3 solver stall\n";
  return 1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DistributionSpec rho_by_name(const std::string& name, int n) {
  if (name == "uniform") return DistributionSpec::uniform(n);
  if (name == "bimodal") {
    std::vector<Density1D> axes(std::size_t(n), bimodal_density());
    return DistributionSpec::product(axes);
  }
  throw std::runtime_error("unknown density '" + name +
                           "' (use uniform, bimodal, or a --config file)");
}

void apply_out_root(RunConfig& cfg) {
  const char* root = std::getenv("AUCTOPT_OUT_ROOT");
  if (root && *root && !std::filesystem::path(cfg.out_dir).is_absolute())
    cfg.out_dir = (std::filesystem::path(root) / cfg.out_dir).string();
}

void print_result(const PipelineResult& r) {
  if (r.exit_code == 0)
    std::cout << "ok: " << r.files.size() << " artifacts written\n";
  else
    std::cout << "failed at stage '" << r.failed_stage << "' (exit "
              << r.exit_code << ")\n";
  for (const auto& f : r.files) std::cout << "  " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage(argv[0]);
  const std::string cmd = argv[1];

  RunConfig cfg;
  std::string config_path, mode = "all", artifacts, kind, rho_name = "uniform";
  bool have_rho_flag = false;

  for (int i = 2; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) throw std::runtime_error("missing value for " + a);
      return argv[++i];
    };
    try {
      if (a == "--config")
        config_path = next();
      else if (a == "--n")
        cfg.n = std::stoi(next());
      else if (a == "--m")
        cfg.m = std::stoi(next());
      else if (a == "--k")
        cfg.k = std::stoi(next());
      else if (a == "--rho") {
        rho_name = next();
        have_rho_flag = true;
      } else if (a == "--encoding")
        cfg.encoding = next() == "axis_stencil"
                           ? ConvexityEncoding::axis_stencil
                           : ConvexityEncoding::exact_pairwise;
      else if (a == "--alpha")
        cfg.alpha_points = std::stoi(next());
      else if (a == "--samples")
        cfg.mc_samples = std::stoll(next());
      else if (a == "--seed")
        cfg.seed = std::stoull(next());
      else if (a == "--out")
        cfg.out_dir = next();
      else if (a == "--mode")
        mode = next();
      else if (a == "--artifacts")
        artifacts = next();
      else if (a == "--kind")
        kind = next();
      else {
        std::cerr << "unknown option " << a << "\n";
        return usage(argv[0]);
      }
    } catch (const std::exception& e) {
      std::cerr << "bad option " << a << ": " << e.what() << "\n";
      return 1;
    }
  }

  try {
    if (!config_path.empty())
      cfg = RunConfig::from_json(nlohmann::json::parse(slurp(config_path)));
    else
      cfg.rho = rho_by_name(rho_name, cfg.n);
    (void)have_rho_flag;
    apply_out_root(cfg);

    if (cmd == "plotdata") {
      if (kind.empty()) {
        std::cerr << "plotdata needs --kind\n";
        return usage(argv[0]);
      }
      std::string dir = artifacts.empty() ? cfg.out_dir : artifacts;
      for (const auto& f : emit_plot_data(dir, kind))
        std::cout << f << "\n";
      return 0;
    }
    if (cmd == "dual" && !artifacts.empty()) {
      int code = run_dual_on_artifacts(artifacts, mode);
      std::cout << (code == 0 ? "ok" : "failed") << " (exit " << code
                << ")\n";
      return code;
    }

    unsigned stages = 0;
    if (cmd == "myerson") {
      if (cfg.n != 1) {
        std::cerr << "myerson needs n=1\n";
        return 1;
      }
      stages = unsigned(Stage::myerson);
    } else if (cmd == "reduce")
      stages = unsigned(Stage::reduce);
    else if (cmd == "dual")
      stages = unsigned(Stage::reduce) | unsigned(Stage::dual);
    else if (cmd == "simulate")
      stages = unsigned(Stage::reduce) | unsigned(Stage::lift) |
               unsigned(Stage::simulate);
    else if (cmd == "pipeline")
      stages = unsigned(Stage::all);
    else
      return usage(argv[0]);

    PipelineResult r = run_pipeline(cfg, stages);
    print_result(r);
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::string(e.what()).find("stalled") != std::string::npos ? 3 : 2;
  }
}
