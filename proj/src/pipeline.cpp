#include "auctopt/pipeline.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "auctopt/common.hpp"
#include "auctopt/mechanism.hpp"
#include "auctopt/myerson.hpp"
#include "auctopt/orders.hpp"
#include "auctopt/transport.hpp"

namespace auctopt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config round-trip

static std::string encoding_name(ConvexityEncoding e) {
  return e == ConvexityEncoding::exact_pairwise ? "exact_pairwise"
                                                : "axis_stencil";
}

static ConvexityEncoding encoding_from(const std::string& s) {
  if (s == "exact_pairwise") return ConvexityEncoding::exact_pairwise;
  if (s == "axis_stencil") return ConvexityEncoding::axis_stencil;
  fail("unknown convexity encoding: " + s);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["problem"] = {{"n", n},
                  {"m", m},
                  {"k", k},
                  {"rho", rho.to_json()},
                  {"encoding", encoding_name(encoding)},
                  {"alpha_points", alpha_points}};
  j["solver"] = {{"feas_tol", lp.feas_tol},
                 {"opt_tol", lp.opt_tol},
                 {"max_iters", lp.max_iters},
                 {"refactor_every", lp.refactor_every},
                 {"allow_lazy_rows", lp.allow_lazy_rows},
                 {"lazy_row_threshold", lp.lazy_row_threshold},
                 {"lazy_max_add_per_round", lp.lazy_max_add_per_round},
                 {"verbosity", lp.verbosity},
                 {"mc_samples", mc_samples},
                 {"weak_dual_node_cap", weak_dual_node_cap}};
  j["output"] = {{"dir", out_dir}, {"csv", write_csv}, {"json", write_json}};
  j["seed"] = seed;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  const auto& p = j.at("problem");
  c.n = p.value("n", 1);
  c.m = p.value("m", 1);
  c.k = p.value("k", 33);
  if (p.contains("rho"))
    c.rho = DistributionSpec::from_json(p.at("rho"));
  else
    c.rho = DistributionSpec::uniform(c.n);
  c.encoding = encoding_from(p.value("encoding", std::string("exact_pairwise")));
  c.alpha_points = p.value("alpha_points", 33);
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    c.lp.feas_tol = s.value("feas_tol", c.lp.feas_tol);
    c.lp.opt_tol = s.value("opt_tol", c.lp.opt_tol);
    c.lp.max_iters = s.value("max_iters", c.lp.max_iters);
    c.lp.refactor_every = s.value("refactor_every", c.lp.refactor_every);
    c.lp.allow_lazy_rows = s.value("allow_lazy_rows", c.lp.allow_lazy_rows);
    c.lp.lazy_row_threshold =
        s.value("lazy_row_threshold", c.lp.lazy_row_threshold);
    c.lp.lazy_max_add_per_round =
        s.value("lazy_max_add_per_round", c.lp.lazy_max_add_per_round);
    c.lp.verbosity = s.value("verbosity", c.lp.verbosity);
    c.mc_samples = s.value("mc_samples", c.mc_samples);
    c.weak_dual_node_cap = s.value("weak_dual_node_cap", c.weak_dual_node_cap);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    c.out_dir = o.value("dir", c.out_dir);
    c.write_csv = o.value("csv", c.write_csv);
    c.write_json = o.value("json", c.write_json);
  }
  c.seed = j.value("seed", std::uint64_t{1});
  return c;
}

// ---------------------------------------------------------------------------
// small file helpers

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

static std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(in.good(), "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

static void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write " + p.string());
  out << body;
}

static std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

struct Ctx {
  RunConfig cfg;
  fs::path dir;
  nlohmann::json config_json;
  std::string config_hash;
  std::vector<std::string> files;
  nlohmann::json summary = nlohmann::json::object();
  bool ok = true;  // invariant checks so far

  ReducedProblem prob;
  ReducedSolution sol;
  bool have_sol = false;
  GridMeasure mu;
  bool have_mu = false;
  DualCertificate cert;
  MechanismRule mech;
  bool have_mech = false;

  void save(const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    files.push_back(name);
  }
  void save_artifact(const std::string& name, nlohmann::json payload) {
    payload["config"] = config_json;
    payload["config_sha256"] = config_hash;
    save(name, payload.dump(2) + "\n");
  }
  bool check(nlohmann::json& checks, const std::string& name, bool pass) {
    checks[name] = pass;
    if (!pass) ok = false;
    return pass;
  }
};

void write_manifest(Ctx& ctx, int exit_code, const std::string& failed_stage) {
  nlohmann::json mf;
  mf["exit_code"] = exit_code;
  mf["failed_stage"] = failed_stage;
  mf["config_sha256"] = ctx.config_hash;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& name : ctx.files) {
    std::string body = read_text(ctx.dir / name);
    files.push_back({{"path", name},
                     {"sha256", sha256_hex(body)},
                     {"bytes", body.size()}});
  }
  mf["files"] = files;
  write_text(ctx.dir / "MANIFEST.json", mf.dump(2) + "\n");
  ctx.files.push_back("MANIFEST.json");
}

PipelineResult finish(Ctx& ctx, int exit_code, const std::string& stage) {
  ctx.summary["exit_code"] = exit_code;
  ctx.summary["failed_stage"] = stage;
  ctx.save("summary.json", ctx.summary.dump(2) + "\n");
  write_manifest(ctx, exit_code, stage);
  PipelineResult out;
  out.exit_code = exit_code;
  out.failed_stage = stage;
  out.files = ctx.files;
  out.summary = ctx.summary;
  return out;
}

void stage_reduce(Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  require(cfg.rho.dim == cfg.n, "rho dimension disagrees with n");
  ctx.prob = ReducedProblem{make_grid(cfg.n, cfg.k), cfg.rho,       cfg.m,
                            cfg.encoding,            cfg.alpha_points,
                            0.0,                     std::nullopt};
  ctx.sol = solve_reduced(ctx.prob, cfg.lp);
  if (ctx.sol.status == LpStatus::stalled)
    fail("reduced LP stalled after " + std::to_string(ctx.sol.lp_iterations) +
         " iterations");
  ctx.have_sol = true;

  nlohmann::json checks;
  ctx.check(checks, "lp_optimal", ctx.sol.status == LpStatus::optimal);
  ctx.check(checks, "quadrature_match",
            std::abs(ctx.sol.value - ctx.sol.value_quadrature) <=
                1e-8 * std::max(1.0, std::abs(ctx.sol.value)));
  ctx.check(checks, "gradient_law_dominated",
            ctx.sol.dominance_grid_max <= 2 * cfg.lp.feas_tol);
  ctx.check(checks, "gradient_law_refined",
            ctx.sol.dominance_refined_max <=
                ctx.sol.dominance_refined_bound + 2 * cfg.lp.feas_tol);
  // supporting-plane family checked over every node pair, independent of the
  // row encoding the solver actually used
  double pv = pairwise_convexity_violation(ctx.sol.u, true);
  ctx.check(checks, "convexity_supported", pv <= 1e-6);

  nlohmann::json j;
  j["pairwise_violation"] = pv;
  j["status"] = to_string(ctx.sol.status);
  j["value"] = ctx.sol.value;
  j["value_quadrature"] = ctx.sol.value_quadrature;
  j["encoding_relaxed"] = ctx.sol.encoding_relaxed;
  j["lp_rows"] = ctx.sol.lp_rows;
  j["lp_iterations"] = ctx.sol.lp_iterations;
  j["rows_activated"] = ctx.sol.rows_activated;
  j["lp_max_violation"] = ctx.sol.lp_max_violation;
  j["lp_dual_gap"] = ctx.sol.lp_dual_gap;
  j["dominance_grid_max"] = ctx.sol.dominance_grid_max;
  j["dominance_refined_max"] = ctx.sol.dominance_refined_max;
  j["dominance_refined_bound"] = ctx.sol.dominance_refined_bound;
  j["grid"] = {{"dim", cfg.n}, {"k", cfg.k}};
  j["u"] = ctx.sol.u.u;
  j["g"] = *ctx.sol.u.g;
  j["checks"] = checks;
  ctx.save_artifact("reduced.json", j);
  ctx.summary["reduce"] = {{"value", ctx.sol.value},
                           {"value_quadrature", ctx.sol.value_quadrature},
                           {"iterations", ctx.sol.lp_iterations},
                           {"checks", checks}};

  if (cfg.write_csv) {
    const Grid& grid = ctx.prob.grid;
    double pt[2] = {0, 0};
    std::ostringstream uc, gc;
    for (int ax = 0; ax < grid.dim; ++ax) uc << (ax ? "," : "") << "x" << ax;
    gc << uc.str();
    uc << ",u\n";
    for (int ax = 0; ax < grid.dim; ++ax) gc << ",g" << ax;
    gc << "\n";
    for (std::size_t f = 0; f < grid.n_nodes; ++f) {
      grid.coords(f, pt);
      for (int ax = 0; ax < grid.dim; ++ax) {
        uc << (ax ? "," : "") << num(pt[ax]);
        gc << (ax ? "," : "") << num(pt[ax]);
      }
      uc << "," << num(ctx.sol.u.u[f]) << "\n";
      for (int ax = 0; ax < grid.dim; ++ax)
        gc << "," << num((*ctx.sol.u.g)[f * grid.dim + ax]);
      gc << "\n";
    }
    ctx.save("u.csv", uc.str());
    ctx.save("g.csv", gc.str());
  }
}

void stage_myerson(Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Density1D d = axis_marginal(cfg.rho, 0);
  MyersonSolution ms = myerson_solve(d, cfg.m);
  Certificate1D c1 = dual_certificate_1d(ms);

  nlohmann::json checks;
  ctx.check(checks, "certificate_matches_revenue",
            std::abs(c1.dual_value - ms.revenue) <=
                1e-6 * std::max(1.0, ms.revenue));
  ctx.check(checks, "ironed_value_nonneg", ms.ironed.vbar_at_q(1.0) >= 0);

  nlohmann::json j;
  j["reserve"] = ms.reserve;
  j["revenue"] = ms.revenue;
  j["q_star"] = ms.ironed.q_star;
  j["regular"] = ms.ironed.regular;
  j["tie_mass"] = ms.tie_mass;
  j["certificate"] = {{"dual_value", c1.dual_value},
                      {"vbar_term", c1.vbar_term},
                      {"power_term", c1.power_term},
                      {"phi", c1.phi.to_json()}};
  if (ctx.have_sol) {
    j["reduced_value"] = ctx.sol.value_quadrature;
    j["reduced_abs_gap"] = std::abs(ctx.sol.value_quadrature - ms.revenue);
  }
  j["checks"] = checks;
  ctx.save_artifact("myerson.json", j);
  ctx.summary["myerson"] = {{"reserve", ms.reserve},
                            {"revenue", ms.revenue},
                            {"checks", checks}};
}

void stage_dual(Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Grid& grid = ctx.prob.grid;
  ctx.mu = transform_measure(cfg.rho, cfg.m, grid);
  ctx.have_mu = true;
  {
    nlohmann::json checks;
    ctx.check(checks, "mass_balance",
              std::abs(ctx.mu.total_mass()) <= 1e-8 * std::max(1, cfg.m));
    nlohmann::json j;
    j["measure"] = ctx.mu.to_json();
    j["total_mass"] = ctx.mu.total_mass();
    j["checks"] = checks;
    ctx.save_artifact("transform_measure.json", j);
  }

  ctx.cert = certify_reduced_solution(ctx.sol.u, ctx.prob, cfg.lp);
  nlohmann::json checks;
  ctx.check(checks, "certificate_valid", ctx.cert.valid);
  ctx.check(checks, "weak_duality", ctx.cert.gap_vs_primal >= -1e-8);
  nlohmann::json cj = ctx.cert.to_json();
  cj["checks"] = checks;
  ctx.save_artifact("certificate.json", cj);
  ctx.summary["dual"] = {{"dual_value", ctx.cert.dual_value},
                         {"primal_measure_value", ctx.cert.primal_measure_value},
                         {"gap_vs_primal", ctx.cert.gap_vs_primal},
                         {"lambda_slack", ctx.cert.lambda_slack},
                         {"checks", checks}};

  if (std::int64_t(grid.n_nodes) <= cfg.weak_dual_node_cap) {
    WeakDualResult wd = solve_weak_dual(ctx.mu, cfg.lp);
    if (wd.status == LpStatus::stalled) fail("weak dual LP stalled");
    SlacknessReport slack =
        complementary_slackness_report(ctx.sol.u, wd.plan, 3 * grid.h);
    double plan_total = wd.plan.total_mass();
    double m1 = wd.plan.first_marginal().total_mass();
    double m2 = wd.plan.second_marginal().total_mass();
    nlohmann::json wchecks;
    ctx.check(wchecks, "marginal_totals",
              std::abs(m1 - plan_total) <= 1e-10 * std::max(1.0, plan_total) &&
                  std::abs(m2 - plan_total) <=
                      1e-10 * std::max(1.0, plan_total));
    nlohmann::json j;
    j["value"] = wd.value;
    j["lp_iterations"] = wd.lp_iterations;
    j["plan_entries"] = wd.plan.mass.size();
    j["plan_total_mass"] = plan_total;
    j["plan_cost_l1"] = wd.plan.cost_l1();
    j["primal_value"] = ctx.sol.value_quadrature;
    j["primal_measure_value"] = ctx.cert.primal_measure_value;
    j["slackness"] = {{"total_mass", slack.total_mass},
                      {"violating_mass", slack.violating_mass},
                      {"fraction", slack.fraction},
                      {"worst_gap", slack.worst_gap},
                      {"tol", 3 * grid.h}};
    j["checks"] = wchecks;
    ctx.save_artifact("weak_dual.json", j);
    if (cfg.write_csv) {
      std::ostringstream pc;
      wd.plan.to_csv(pc);
      ctx.save("plan.csv", pc.str());
    }
    ctx.summary["weak_dual"] = {{"value", wd.value},
                                {"slackness_fraction", slack.fraction},
                                {"checks", wchecks}};
  } else {
    ctx.summary["weak_dual"] = {
        {"skipped", "grid above weak_dual_node_cap"}};
  }

  // Beckmann LP cross-check: the constructed flow is feasible for it, so the
  // LP value can only improve on the slackness-identity term
  std::size_t tangents = 0;
  std::vector<PwlConvex> conj;
  for (const auto& ph : ctx.cert.phi) {
    conj.push_back(ph.conj_function());
    tangents += conj.back().bp.size();
  }
  std::size_t edge_rows = 0;
  for (int ax = 0; ax < grid.dim; ++ax)
    edge_rows += (grid.n_nodes / grid.k) * (grid.k - 1);
  if (std::int64_t(grid.n_nodes) <= cfg.weak_dual_node_cap &&
      edge_rows * (tangents / std::max<std::size_t>(1, conj.size())) <= 60000) {
    BeckmannResult bk = beckmann_value(ctx.cert.pi, conj, cfg.rho, cfg.lp);
    if (bk.status == LpStatus::stalled) fail("beckmann LP stalled");
    nlohmann::json bchecks;
    ctx.check(bchecks, "lp_below_identity",
              bk.value <=
                  ctx.cert.beck_term + 1e-6 * std::max(1.0, ctx.cert.beck_term));
    nlohmann::json j;
    j["value"] = bk.value;
    j["identity_value"] = ctx.cert.beck_term;
    j["checks"] = bchecks;
    ctx.save_artifact("beckmann.json", j);
    ctx.summary["beckmann"] = {{"value", bk.value},
                               {"identity_value", ctx.cert.beck_term},
                               {"checks", bchecks}};
  }
}

void stage_lift(Ctx& ctx) {
  ctx.mech = lift_argmax(ctx.sol.u, ctx.cfg.m);
  ctx.have_mech = true;
  nlohmann::json j;
  j["rule"] = ctx.mech.to_json();
  ctx.save_artifact("mechanism.json", j);
  ctx.summary["lift"] = {{"kind", to_string(ctx.mech.kind)},
                         {"n", ctx.mech.n},
                         {"m", ctx.mech.m}};
}

void stage_simulate(Ctx& ctx) {
  const RunConfig& cfg = ctx.cfg;
  RevenueEstimate rev =
      estimate_revenue(ctx.mech, cfg.rho, cfg.mc_samples, cfg.seed);
  ConsistencyReport cons = check_reduced_consistency(
      ctx.mech, ctx.sol.u, cfg.rho,
      std::min<std::int64_t>(cfg.mc_samples, 200000), cfg.seed + 1,
      cfg.n == 1 ? 32 : 12);
  IcIrReport icir = verify_ic_ir(
      ctx.mech, cfg.rho, std::min<std::int64_t>(cfg.mc_samples, 100000),
      cfg.seed + 2, cfg.n == 1 ? 24 : 10);

  nlohmann::json checks;
  ctx.check(checks, "revenue_consistent",
            std::abs(rev.mean - ctx.sol.value_quadrature) <=
                3 * rev.se + 2e-2);
  ctx.check(checks, "allocation_consistent", !cons.alloc_flag);
  ctx.check(checks, "transfer_consistent", !cons.transfer_flag);
  ctx.check(checks, "ir_pathwise", icir.ir_violations == 0);
  ctx.check(checks, "feasible_pathwise", icir.feas_violations == 0);
  ctx.check(checks, "ic_binned", icir.ic_violations == 0);

  nlohmann::json j;
  j["revenue"] = rev.to_json();
  j["consistency"] = cons.to_json();
  j["ic_ir"] = icir.to_json();
  j["reduced_value"] = ctx.sol.value_quadrature;
  j["checks"] = checks;
  ctx.save_artifact("simulation.json", j);
  ctx.summary["simulate"] = {{"revenue_mean", rev.mean},
                             {"revenue_se", rev.se},
                             {"checks", checks}};
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, unsigned stages) {
  Ctx ctx;
  ctx.cfg = cfg;
  ctx.dir = fs::path(cfg.out_dir);
  fs::create_directories(ctx.dir);
  ctx.config_json = cfg.to_json();
  ctx.config_hash = sha256_hex(ctx.config_json.dump(2));
  ctx.save("config.json", ctx.config_json.dump(2) + "\n");

  std::string cur = "";
  auto wants = [&](Stage s) { return (stages & unsigned(s)) != 0; };
  try {
    bool need_sol = wants(Stage::dual) || wants(Stage::lift) ||
                    wants(Stage::simulate) || wants(Stage::reduce);
    if (need_sol) {
      cur = "reduce";
      stage_reduce(ctx);
      if (!ctx.ok) return finish(ctx, 2, cur);
    }
    if (wants(Stage::myerson) && cfg.n == 1) {
      cur = "myerson";
      stage_myerson(ctx);
      if (!ctx.ok) return finish(ctx, 2, cur);
    }
    if (wants(Stage::dual)) {
      cur = "dual";
      stage_dual(ctx);
      if (!ctx.ok) return finish(ctx, 2, cur);
    }
    if (wants(Stage::lift) || wants(Stage::simulate)) {
      cur = "lift";
      stage_lift(ctx);
      if (!ctx.ok) return finish(ctx, 2, cur);
    }
    if (wants(Stage::simulate)) {
      cur = "simulate";
      stage_simulate(ctx);
      if (!ctx.ok) return finish(ctx, 2, cur);
    }
  } catch (const std::exception& e) {
    ctx.summary["error"] = e.what();
    // a stall surfaces as exit 3, anything else as an invariant failure
    bool stall = std::string(e.what()).find("stalled") != std::string::npos;
    return finish(ctx, stall ? 3 : 2, cur);
  }
  return finish(ctx, 0, "");
}

bool verify_manifest(const std::string& dir) {
  fs::path d(dir);
  nlohmann::json mf = nlohmann::json::parse(read_text(d / "MANIFEST.json"));
  for (const auto& f : mf.at("files")) {
    const std::string name = f.at("path").get<std::string>();
    if (!fs::exists(d / name)) return false;
    if (sha256_hex(read_text(d / name)) != f.at("sha256").get<std::string>())
      return false;
  }
  return true;
}

int run_dual_on_artifacts(const std::string& dir, const std::string& mode) {
  require(mode == "weak" || mode == "beckmann" || mode == "certify" ||
              mode == "all",
          "dual mode must be weak, beckmann, certify, or all");
  const fs::path d(dir);
  require(fs::exists(d / "reduced.json"),
          "no primal artifacts in " + dir + " (run reduce first)");
  const RunConfig cfg =
      RunConfig::from_json(nlohmann::json::parse(read_text(d / "config.json")));
  nlohmann::json red = nlohmann::json::parse(read_text(d / "reduced.json"));
  UtilityGrid ug;
  ug.grid = make_grid(red.at("grid").at("dim").get<int>(),
                      red.at("grid").at("k").get<int>());
  ug.u = red.at("u").get<std::vector<double>>();
  ug.g = red.at("g").get<std::vector<double>>();
  const ReducedProblem prob{ug.grid, cfg.rho,          cfg.m, cfg.encoding,
                            cfg.alpha_points, 0.0, std::nullopt};
  const nlohmann::json cfg_j = cfg.to_json();
  const std::string cfg_hash = sha256_hex(cfg_j.dump(2));
  auto save = [&](const std::string& name, nlohmann::json payload) {
    payload["config"] = cfg_j;
    payload["config_sha256"] = cfg_hash;
    write_text(d / name, payload.dump(2) + "\n");
  };

  bool ok = true;
  try {
    GridMeasure mu = transform_measure(cfg.rho, cfg.m, ug.grid);
    if (mode == "weak" || mode == "all") {
      WeakDualResult wd = solve_weak_dual(mu, cfg.lp);
      if (wd.status == LpStatus::stalled) fail("weak dual LP stalled");
      SlacknessReport slack =
          complementary_slackness_report(ug, wd.plan, 3 * ug.grid.h);
      nlohmann::json j;
      j["value"] = wd.value;
      j["lp_iterations"] = wd.lp_iterations;
      j["plan_entries"] = wd.plan.mass.size();
      j["plan_total_mass"] = wd.plan.total_mass();
      j["plan_cost_l1"] = wd.plan.cost_l1();
      j["primal_value"] = red.value("value_quadrature", 0.0);
      j["slackness"] = {{"total_mass", slack.total_mass},
                        {"violating_mass", slack.violating_mass},
                        {"fraction", slack.fraction},
                        {"worst_gap", slack.worst_gap},
                        {"tol", 3 * ug.grid.h}};
      save("weak_dual.json", j);
      if (cfg.write_csv) {
        std::ostringstream pc;
        wd.plan.to_csv(pc);
        write_text(d / "plan.csv", pc.str());
      }
    }
    if (mode != "weak") {
      DualCertificate cert = certify_reduced_solution(ug, prob, cfg.lp);
      ok &= cert.valid && cert.gap_vs_primal >= -1e-8;
      save("certificate.json", cert.to_json());
      if (mode == "beckmann" || mode == "all") {
        std::vector<PwlConvex> conj;
        for (const auto& ph : cert.phi) conj.push_back(ph.conj_function());
        BeckmannResult bk = beckmann_value(cert.pi, conj, cfg.rho, cfg.lp);
        if (bk.status == LpStatus::stalled) fail("beckmann LP stalled");
        nlohmann::json j;
        j["value"] = bk.value;
        j["identity_value"] = cert.beck_term;
        ok &= bk.value <=
              cert.beck_term + 1e-6 * std::max(1.0, cert.beck_term);
        save("beckmann.json", j);
      }
    }
  } catch (const std::exception& e) {
    bool stall = std::string(e.what()).find("stalled") != std::string::npos;
    nlohmann::json j;
    j["error"] = e.what();
    save("dual_error.json", j);
    return stall ? 3 : 2;
  }
  return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// plot data

std::vector<std::string> emit_plot_data(const std::string& artifact_dir,
                                        const std::string& kind) {
  const fs::path dir(artifact_dir);
  auto load = [&](const char* name) {
    return nlohmann::json::parse(read_text(dir / name));
  };
  const RunConfig cfg = RunConfig::from_json(load("config.json"));
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    written.push_back((dir / name).string());
  };

  auto load_solution = [&]() {
    nlohmann::json red = load("reduced.json");
    UtilityGrid ug;
    ug.grid = make_grid(red.at("grid").at("dim").get<int>(),
                        red.at("grid").at("k").get<int>());
    ug.u = red.at("u").get<std::vector<double>>();
    ug.g = red.at("g").get<std::vector<double>>();
    return ug;
  };

  if (kind == "u_heatmap") {
    UtilityGrid ug = load_solution();
    std::ostringstream os;
    double pt[2] = {0, 0};
    for (int ax = 0; ax < ug.grid.dim; ++ax) os << (ax ? "," : "") << "x" << ax;
    os << ",u\n";
    for (std::size_t f = 0; f < ug.grid.n_nodes; ++f) {
      ug.grid.coords(f, pt);
      for (int ax = 0; ax < ug.grid.dim; ++ax)
        os << (ax ? "," : "") << num(pt[ax]);
      os << "," << num(ug.u[f]) << "\n";
    }
    emit("plot_u_heatmap.csv", os.str());
  } else if (kind == "region_map") {
    UtilityGrid ug = load_solution();
    require(ug.grid.dim == 2, "region_map needs a two-dimensional artifact");
    std::vector<std::uint8_t> hess = classify_regions(ug, 1e-6);
    static const char* names[4] = {"Z", "A", "B", "W"};
    std::ostringstream os;
    os << "x0,x1,label,region,hessian_class\n";
    double pt[2];
    for (std::size_t f = 0; f < ug.grid.n_nodes; ++f) {
      ug.grid.coords(f, pt);
      int label = ((*ug.g)[f * 2] > 0.5 ? 1 : 0) +
                  ((*ug.g)[f * 2 + 1] > 0.5 ? 2 : 0);
      os << num(pt[0]) << "," << num(pt[1]) << "," << label << ","
         << names[label] << "," << int(hess[f]) << "\n";
    }
    emit("plot_region_map.csv", os.str());
  } else if (kind == "plan_arrows") {
    require(fs::exists(dir / "plan.csv"),
            "artifact has no transport plan (weak dual stage skipped?)");
    const Grid grid = make_grid(cfg.n, cfg.k);
    std::istringstream in(read_text(dir / "plan.csv"));
    std::string line;
    std::getline(in, line);  // header
    std::ostringstream os;
    for (int ax = 0; ax < grid.dim; ++ax) os << (ax ? "," : "") << "sx" << ax;
    for (int ax = 0; ax < grid.dim; ++ax) os << ",tx" << ax;
    os << ",mass\n";
    double sp[2] = {0, 0}, tp[2] = {0, 0};
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::size_t a = 0, b = 0;
      double m = 0;
      std::sscanf(line.c_str(), "%zu,%zu,%lf", &a, &b, &m);
      grid.coords(a, sp);
      grid.coords(b, tp);
      for (int ax = 0; ax < grid.dim; ++ax)
        os << (ax ? "," : "") << num(sp[ax]);
      for (int ax = 0; ax < grid.dim; ++ax) os << "," << num(tp[ax]);
      os << "," << num(m) << "\n";
    }
    emit("plot_plan_arrows.csv", os.str());
  } else if (kind == "stoploss_curves") {
    UtilityGrid ug = load_solution();
    std::ostringstream os;
    os << "axis,alpha,series,value\n";
    const int pts = 101;
    for (int ax = 0; ax < ug.grid.dim; ++ax) {
      Distribution1D law = law_of_gradient(ug, cfg.rho, ax);
      for (int i = 0; i < pts; ++i) {
        double alpha = double(i) / (pts - 1);
        os << ax << "," << num(alpha) << ",gradient_law,"
           << num(stop_loss(law, alpha)) << "\n";
      }
      for (int i = 0; i < pts; ++i) {
        double alpha = double(i) / (pts - 1);
        os << ax << "," << num(alpha) << ",power_bound,"
           << num(stop_loss_power(cfg.m, alpha)) << "\n";
      }
    }
    emit("plot_stoploss_curves.csv", os.str());
  } else {
    fail("unknown plot kind '" + kind +
         "' (available: u_heatmap, region_map, plan_arrows, stoploss_curves)");
  }
  return written;
}

}  // namespace auctopt
