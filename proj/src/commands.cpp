#include "switchctl/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "switchctl/control.hpp"
#include "switchctl/error.hpp"
#include "switchctl/grid.hpp"
#include "switchctl/hjb_limits.hpp"
#include "switchctl/io.hpp"
#include "switchctl/npds_solver.hpp"
#include "switchctl/simulate.hpp"

namespace switchctl {

using nlohmann::json;

namespace {

// Acceptance-level limits for the certified fields.
constexpr double kPenalizedTolerance = 1e-3;
constexpr double kGradientExcessTolerance = 5e-3;
constexpr double kBoundSlack = 1e-8;

json header(const std::string& command) { return {{"schema_version", 1}, {"command", command}}; }

std::string csv(const RegimeField& field, const Grid& grid) {
  std::ostringstream out;
  write_field_csv(out, field, grid);
  return out.str();
}

json point(const Vec& x) {
  json a = json::array();
  for (int k = 0; k < x.size(); ++k) a.push_back(x(k));
  return a;
}

json one_based(const std::vector<int>& regimes) {
  json a = json::array();
  for (int r : regimes) a.push_back(r + 1);
  return a;
}

json rung_json(const Rung& r) {
  return {{"epsilon", r.epsilon},
          {"delta", r.delta},
          {"iterations", r.iterations},
          {"residual_sup", r.residual_sup},
          {"difference", r.difference}};
}

json rungs_json(const std::vector<Rung>& rungs) {
  json a = json::array();
  for (const auto& r : rungs) a.push_back(rung_json(r));
  return a;
}

json ladder_json(const LadderResult& l) {
  json j = {{"certified", l.certified}, {"rungs", rungs_json(l.rungs)}};
  if (!l.failure.empty()) j["failure"] = l.failure;
  if (!l.inner.empty()) {
    json inner = json::array();
    for (const auto& r : l.inner) inner.push_back(rungs_json(r));
    j["inner"] = inner;
  }
  return j;
}

json complementarity_json(const ComplementarityReport& r) {
  json j = {{"sup_max", r.sup_max}, {"sup_neg_max", r.sup_neg_max}};
  if (r.gradient) j["gradient_excess"] = r.gradient_excess;
  return j;
}

json validation_json(const ValidationReport& report) {
  json j = header("validate");
  j["passed"] = report.passed();
  json issues = json::array();
  for (const auto& i : report.issues) {
    issues.push_back({{"kind", std::string(to_string(i.kind))},
                      {"regimes", one_based(i.regimes)},
                      {"lhs", i.lhs},
                      {"rhs", i.rhs},
                      {"message", i.message}});
  }
  j["issues"] = issues;
  if (report.stats) {
    j["stats"] = {{"theta", report.stats->theta},
                  {"min_discount", report.stats->min_discount},
                  {"min_running_cost", report.stats->min_running_cost},
                  {"min_control_cost", report.stats->min_control_cost}};
  }
  return j;
}

json estimate_json(const PathCostEstimate& e, const ExperimentConfig& cfg) {
  return {{"mean", e.mean},
          {"standard_error", e.standard_error},
          {"ci95", {e.ci_low, e.ci_high}},
          {"paths", e.paths},
          {"absorbed", e.absorbed},
          {"truncated", e.truncated},
          {"horizon", e.horizon},
          {"dt", cfg.simulation.dt},
          {"seed", cfg.simulation.seed},
          {"x0", point(cfg.x0)},
          {"regime0", cfg.regime0 + 1},
          {"zero_volatility", cfg.simulation.zero_volatility}};
}

struct Prepared {
  ProblemSpec spec;
  Discretization disc;
};

CommandResult validation_failure(const ValidationReport& report) {
  CommandResult r;
  r.exit_code = kExitCheckFailed;
  r.artifacts["validation.json"] = dump_json(validation_json(report));
  r.summary = "hypothesis validation failed: " + report.issues.front().message;
  return r;
}

CommandResult cmd_validate(const ExperimentConfig& cfg) {
  const ValidationReport report = validate(cfg.spec, cfg.validation_samples);
  CommandResult r;
  r.exit_code = report.passed() ? kExitPass : kExitCheckFailed;
  r.artifacts["validation.json"] = dump_json(validation_json(report));
  r.summary = report.passed() ? "hypotheses hold"
                              : std::to_string(report.issues.size()) + " issue(s), first: " +
                                    std::string(to_string(report.issues.front().kind)) + " " +
                                    report.issues.front().message;
  return r;
}

CommandResult cmd_solve(const ExperimentConfig& cfg, const Discretization& disc) {
  const SolveResult res = solve_npds(cfg.solver, disc);
  double min_u = INFINITY;
  double excess = -INFINITY;
  for (int l = 0; l < disc.regimes(); ++l) {
    min_u = std::min(min_u, res.u[l].minCoeff());
    excess = std::max(excess, (res.u[l] - res.vtilde[l]).maxCoeff());
  }
  const bool bounds_ok = min_u >= -kBoundSlack && excess <= kBoundSlack;
  json j = header("solve");
  j["epsilon"] = cfg.solver.epsilon;
  j["delta"] = cfg.solver.delta;
  j["method"] = cfg.solver.method == NpdsMethod::Newton ? "newton" : "picard";
  j["relaxation"] = res.relaxation;
  j["tolerance"] = cfg.solver.tolerance;
  j["iterations"] = res.iterations;
  j["final_update"] = res.final_update;
  j["residual_sup"] = res.residual_sup;
  j["bounds"] = {{"min_u", min_u}, {"max_u_minus_vtilde", excess}, {"passed", bounds_ok}};
  j["monotone_stencil"] = disc.monotone();
  j["nodes"] = disc.grid().size();
  CommandResult r;
  r.exit_code = bounds_ok || !disc.monotone() ? kExitPass : kExitCheckFailed;
  r.artifacts["field.csv"] = csv(res.u, disc.grid());
  r.artifacts["vtilde.csv"] = csv(res.vtilde, disc.grid());
  r.artifacts["solve.json"] = dump_json(j);
  char buf[160];
  std::snprintf(buf, sizeof buf, "solved in %d iterations, residual %.3e, bounds %s", res.iterations,
                res.residual_sup, bounds_ok ? "hold" : "violated");
  r.summary = buf;
  return r;
}

CommandResult cmd_limits(const ExperimentConfig& cfg, const Discretization& disc) {
  const LadderResult dl = continuation_delta(cfg.solver.epsilon, cfg.continuation, disc);
  const ComplementarityReport pc1 = residual_pc1(dl.u, cfg.solver.epsilon, disc);
  const LadderResult el = continuation_epsilon(cfg.continuation, disc);
  const ComplementarityReport esd5 = residual_esd5(el.u, disc);
  const double cert = certification_tolerance(disc.grid());
  const bool pc1_ok = pc1.sup_max <= kPenalizedTolerance && pc1.sup_neg_max <= kPenalizedTolerance;
  const bool esd5_ok = esd5.sup_max <= cert && esd5.sup_neg_max <= cert &&
                       esd5.gradient_excess <= kGradientExcessTolerance;
  const bool passed = dl.certified && el.certified && pc1_ok && esd5_ok;

  json j = header("limits");
  j["epsilon"] = cfg.solver.epsilon;
  j["delta_ladder"] = ladder_json(dl);
  j["epsilon_ladder"] = ladder_json(el);
  j["penalized_residual"] = complementarity_json(pc1);
  j["limit_residual"] = complementarity_json(esd5);
  j["tolerances"] = {{"penalized", kPenalizedTolerance},
                     {"limit", cert},
                     {"gradient_excess", kGradientExcessTolerance},
                     {"stop_threshold", cfg.continuation.stop_threshold}};
  j["passed"] = passed;
  CommandResult r;
  r.exit_code = passed ? kExitPass : kExitCheckFailed;
  r.artifacts["u_eps.csv"] = csv(dl.u, disc.grid());
  r.artifacts["u.csv"] = csv(el.u, disc.grid());
  r.artifacts["limits.json"] = dump_json(j);
  char buf[200];
  std::snprintf(buf, sizeof buf, "delta ladder %zu rungs, epsilon ladder %zu rungs, limit residual %.3e, %s",
                dl.rungs.size(), el.rungs.size(), esd5.sup_max, passed ? "certified" : "NOT certified");
  r.summary = buf;
  return r;
}

CommandResult cmd_regions(const ExperimentConfig& cfg, const Discretization& disc) {
  const LadderResult dl = continuation_delta(cfg.solver.epsilon, cfg.continuation, disc);
  const double tol = cfg.region_tolerance;
  const RegionMap map = extract_regions(dl.u, disc, tol);
  const DecompositionReport dec = check_region_decomposition(map, dl.u, disc.spec(), tol);
  const bool passed = dec.passed() && dl.certified;

  json counts = json::array();
  for (int l = 0; l < map.regimes; ++l) {
    int binding = 0;
    for (bool b : map.binding[static_cast<size_t>(l)]) binding += b ? 1 : 0;
    counts.push_back({{"regime", l + 1},
                      {"continuation", map.count(l, RegionLabel::Continuation) -
                                           (disc.grid().size() - static_cast<int>(disc.grid().interior().size()))},
                      {"switching", map.count(l, RegionLabel::Switching)},
                      {"gradient_binding", map.count(l, RegionLabel::GradientBinding)},
                      {"binding_flags", binding}});
  }
  auto list = [&](const std::vector<DecompositionViolation>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"regime", e.regime + 1}, {"x", point(disc.grid().coordinate(e.node))}});
    return a;
  };
  json j = header("regions");
  j["epsilon"] = cfg.solver.epsilon;
  j["tolerance"] = tol;
  j["delta_ladder"] = ladder_json(dl);
  j["counts"] = counts;
  j["violations"] = list(dec.violations);
  j["incoherent"] = list(dec.incoherent);
  j["switching_nodes"] = dec.switching_nodes;
  j["passed"] = passed;
  CommandResult r;
  r.exit_code = passed ? kExitPass : kExitCheckFailed;
  std::ostringstream out;
  write_regions_csv(out, map, disc.grid());
  r.artifacts["regions.csv"] = out.str();
  r.artifacts["regions.json"] = dump_json(j);
  r.summary = std::to_string(dec.switching_nodes) + " switching node(s), " + std::to_string(dec.violations.size()) +
              " decomposition violation(s)";
  return r;
}

CommandResult cmd_simulate(const ExperimentConfig& cfg, const Discretization& disc, bool compare) {
  const LadderResult dl = continuation_delta(cfg.solver.epsilon, cfg.continuation, disc);
  const FeedbackPolicy policy(disc, dl.u, cfg.solver.epsilon, cfg.region_tolerance);
  const PathCostEstimate est = simulate_policy(policy, cfg.x0, cfg.regime0, cfg.simulation);
  CommandResult r;
  if (!compare) {
    json j = header("simulate");
    j["epsilon"] = cfg.solver.epsilon;
    j["estimate"] = estimate_json(est, cfg);
    j["rate_cap"] = policy.rate_cap();
    r.artifacts["estimate.json"] = dump_json(j);
    char buf[160];
    std::snprintf(buf, sizeof buf, "estimate %.6f +- %.2e over %d paths", est.mean, est.standard_error, est.paths);
    r.summary = buf;
    return r;
  }
  const double pde = policy.value_at(cfg.x0, cfg.regime0);
  const double discrepancy = std::abs(est.mean - pde);
  const double threshold = std::max(cfg.crosscheck_se_multiplier * est.standard_error, cfg.crosscheck_absolute);
  const bool passed = discrepancy <= threshold && dl.certified;
  json j = header("crosscheck");
  j["epsilon"] = cfg.solver.epsilon;
  j["delta_ladder"] = ladder_json(dl);
  j["pde_value"] = pde;
  j["estimate"] = estimate_json(est, cfg);
  j["discrepancy"] = discrepancy;
  j["threshold"] = threshold;
  j["rate_cap"] = policy.rate_cap();
  j["passed"] = passed;
  r.exit_code = passed ? kExitPass : kExitCheckFailed;
  r.artifacts["u_eps.csv"] = csv(dl.u, disc.grid());
  r.artifacts["crosscheck.json"] = dump_json(j);
  char buf[200];
  std::snprintf(buf, sizeof buf, "PDE %.6f, MC %.6f +- %.2e, |diff| %.2e vs %.2e: %s", pde, est.mean,
                est.standard_error, discrepancy, threshold, passed ? "pass" : "FAIL");
  r.summary = buf;
  return r;
}

}  // namespace

CommandResult run_command(const std::string& subcommand, const ExperimentConfig& cfg) {
  static const char* known[] = {"validate", "solve", "limits", "regions", "simulate", "crosscheck"};
  if (std::find(std::begin(known), std::end(known), subcommand) == std::end(known)) {
    throw Error(ErrorKind::InvalidArgument, "unknown subcommand '" + subcommand + "'");
  }
  if (subcommand == "validate") return cmd_validate(cfg);

  const ValidationReport report = validate(cfg.spec, cfg.validation_samples);
  if (!report.passed()) return validation_failure(report);
  const Discretization disc(validated(cfg.spec, cfg.validation_samples), Grid(cfg.spec.domain(), cfg.nodes));
  if (subcommand == "solve") return cmd_solve(cfg, disc);
  if (subcommand == "limits") return cmd_limits(cfg, disc);
  if (subcommand == "regions") return cmd_regions(cfg, disc);
  return cmd_simulate(cfg, disc, subcommand == "crosscheck");
}

int run(const std::string& subcommand, const std::string& config_path, const RunOptions& options,
        std::ostream& log) {
  try {
    ExperimentConfig cfg = load_config(config_path);
    if (options.seed) cfg.simulation.seed = *options.seed;
    const std::filesystem::path dir = options.out_dir ? *options.out_dir : cfg.output;
    const CommandResult result = run_command(subcommand, cfg);
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : result.artifacts) {
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out << content;
      if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir / name).string());
    }
    if (!options.quiet) {
      log << subcommand << ": " << result.summary << "\n";
      for (const auto& [name, content] : result.artifacts) log << "  wrote " << (dir / name).string() << "\n";
    }
    return result.exit_code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace switchctl
