#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "see/serialize.hpp"

namespace see::cli {

struct RunConfig {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  double tol = kCertTol;
  double eval_tol = kValueTol;
  unsigned long long budget = kDefaultBudget;
  long max_sweeps = 30000;
  // refine
  double penalty = 0.0;
  bool penalty_set = false;
  bool find_threshold = false;
  double m_cap = 1e9;
  double threshold_tol = 1e-6;
  int selection_state = -1;
  std::string rp_quantifier = "some-state";
  bool apply_ir = false;
  // simulate
  int start = -1;
  long horizon = 100;
  std::string profile_file;
  int profile_index = 0;
};

namespace detail {

inline std::filesystem::path resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SEESOLVE_OUT")) return env;
  return "out";
}

inline void emit_error(const std::string& kind, const std::string& message,
                       int line = 0, const std::string& key = "") {
  nlohmann::json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  if (line > 0) j["error"]["line"] = line;
  if (!key.empty()) j["error"]["key"] = key;
  std::cerr << j.dump() << "\n";
}

inline std::string manifest(const std::string& subcommand, const RunConfig& rc,
                            const LoadedModel& lm,
                            const std::vector<std::string>& outputs) {
  std::ostringstream os;
  os << "[run]\n";
  os << "subcommand = " << subcommand << "\n";
  os << "config = " << std::filesystem::path(rc.config_path).filename().string()
     << "\n";
  os << "model_fingerprint = " << lm.model.fingerprint() << "\n";
  os << "seed = " << rc.seed << "\n";
  os << "tol = " << format_g12(rc.tol) << "\n";
  os << "budget = " << rc.budget << "\n";
  os << "outputs =";
  for (const std::string& o : outputs) os << ' ' << o;
  os << "\n";
  return os.str();
}

inline MseOptions mse_options(const RunConfig& rc) {
  MseOptions opt;
  opt.tol = rc.tol;
  opt.eval_tol = rc.eval_tol;
  opt.max_sweeps = rc.max_sweeps;
  return opt;
}

inline int run_solve(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  const MseSolution sol = solve_mse(lm.model, mse_options(rc));
  EquilibriumSet single;
  single.fingerprint = lm.model.fingerprint();
  single.tol = rc.tol;
  single.exhaustive = false;
  single.members.push_back({sol.profile, sol.values, sol.certificate});
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "solution.txt", write_equilibrium_set(single, rc.seed));
  atomic_write_file(dir / "values.csv", write_values_csv(single, lm.model));
  atomic_write_file(dir / "run.txt",
                    manifest("solve", rc, lm, {"solution.txt", "values.csv"}));
  std::cout << "solve: certified profile with max one-shot gain "
            << format_g12(sol.certificate.max_gain) << " after " << sol.sweeps
            << " sweeps\n";
  return 0;
}

inline int run_enumerate(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  EnumerateOptions opt;
  opt.tol = rc.tol;
  opt.eval_tol = rc.eval_tol;
  opt.budget = rc.budget;
  const EquilibriumSet set = enumerate_stationary_mpe(lm.model, opt);
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "equilibria.txt", write_equilibrium_set(set, rc.seed));
  atomic_write_file(dir / "values.csv", write_values_csv(set, lm.model));
  atomic_write_file(dir / "run.txt",
                    manifest("enumerate", rc, lm, {"equilibria.txt", "values.csv"}));
  std::cout << "enumerate: " << set.members.size()
            << " certified stationary MPE (exhaustive)\n";
  return 0;
}

inline int run_refine(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  PipelineOptions opt;
  if (rc.find_threshold)
    opt.penalty_mode = PenaltyMode::find_threshold;
  else if (rc.penalty_set)
    opt.penalty_mode = PenaltyMode::fixed;
  opt.penalty = rc.penalty;
  opt.m_cap = rc.m_cap;
  opt.threshold_tol = rc.threshold_tol;
  opt.selection_state = rc.selection_state;
  opt.quantifier = rc.rp_quantifier == "all-states" ? RpQuantifier::all_states
                                                    : RpQuantifier::some_state;
  if (rc.apply_ir) {
    if (!lm.outside)
      throw ConfigError("--ir requires an [outside] section in the config", 0,
                        "outside");
    opt.outside = lm.outside;
  }
  opt.enumerate.tol = rc.tol;
  opt.enumerate.eval_tol = rc.eval_tol;
  opt.enumerate.budget = rc.budget;

  const RefinementReport rep = run_pipeline(lm.model, lm.viability, opt);
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "refine.txt", write_refinement_report(rep, rc.seed));
  atomic_write_file(dir / "equilibria.txt", write_equilibrium_set(rep.mpe, rc.seed));
  atomic_write_file(dir / "values.csv", write_values_csv(rep.mpe, lm.model));
  atomic_write_file(dir / "run.txt",
                    manifest("refine", rc, lm,
                             {"refine.txt", "equilibria.txt", "values.csv"}));
  std::cout << "refine: status " << rep.status << " (mpe " << rep.mpe.members.size()
            << ", viable " << rep.viable.members.size() << ", rp "
            << rep.rp.members.size() << ")\n";
  return 0;
}

inline int run_hc(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  if (!lm.hc)
    throw ConfigError("the hc subcommand needs a hegemon_client model config", 0,
                      "type");
  HCSolveOptions sopt;
  sopt.mse = mse_options(rc);
  const HCSolution sol = solve_hc(*lm.hc, sopt);
  const RegimeReport rep = classify_regime(sol, sopt);
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "regime.txt", write_regime_report(rep, rc.seed));
  atomic_write_file(dir / "policy.csv", write_hc_policy_csv(sol));
  atomic_write_file(dir / "run.txt",
                    manifest("hc", rc, lm, {"regime.txt", "policy.csv"}));
  std::cout << "hc: regime " << rep.regime << " (s* "
            << format_g12(rep.s_star) << ", x* " << format_g12(rep.x_star)
            << ", mu " << format_g12(rep.mu) << ", equilibrium "
            << (rep.equilibrium_certified ? "certified" : "anchored") << ")\n";
  return 0;
}

inline int run_hierarchy(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  HierarchyOptions opt;
  opt.selection_state = rc.selection_state;
  opt.tol = rc.tol;
  opt.budget = rc.budget;
  const HierarchyReport rep = verify_hierarchy(lm.model, lm.viability, opt);
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "hierarchy.txt", write_hierarchy_report(rep, rc.seed));
  atomic_write_file(dir / "run.txt", manifest("hierarchy", rc, lm, {"hierarchy.txt"}));
  std::cout << "hierarchy: " << (rep.ok() ? "pass" : "fail") << "\n";
  if (!rep.ok()) {
    emit_error("hierarchy", rep.counterexample.empty() ? "containment failure"
                                                       : rep.counterexample);
    return 1;
  }
  return 0;
}

inline int run_simulate(const RunConfig& rc) {
  const LoadedModel lm = load_model_file(rc.config_path);
  StrategyProfile profile;
  if (!rc.profile_file.empty()) {
    const EquilibriumSet set = parse_equilibrium_set(read_file(rc.profile_file));
    if (rc.profile_index < 0 ||
        rc.profile_index >= static_cast<int>(set.members.size()))
      throw ConfigError("profile index out of range for " + rc.profile_file, 0,
                        "profile-index");
    profile = set.members[rc.profile_index].profile;
  } else {
    profile = solve_mse(lm.model, mse_options(rc)).profile;
  }
  const int start = rc.start >= 0 ? rc.start : lm.model.initial_state;
  const auto traj = simulate_trajectory(lm.model, profile, start, rc.horizon, rc.seed);
  const auto dir = resolve_out_dir(rc.out_dir);
  atomic_write_file(dir / "trajectory.csv", write_trajectory_csv(lm.model, traj));
  atomic_write_file(dir / "run.txt", manifest("simulate", rc, lm, {"trajectory.csv"}));
  std::cout << "simulate: " << traj.size() << " steps from state " << start << "\n";
  return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the tests. Identical configurations
/// produce byte-identical outputs.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Markov-Stackelberg equilibrium solver with the sustainable "
               "exploitation refinement pipeline"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config)
      sub->add_option("config", rc.config_path, "model config file")->required();
    sub->add_option("--out", rc.out_dir,
                    "output directory (default: $SEESOLVE_OUT or ./out)");
    sub->add_option("--seed", rc.seed, "random seed, recorded in every artifact");
    sub->add_option("--tol", rc.tol, "certification tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--eval-tol", rc.eval_tol, "policy evaluation tolerance")
        ->check(CLI::PositiveNumber);
    sub->add_option("--budget", rc.budget, "enumeration budget (profile count)");
    sub->add_option("--max-sweeps", rc.max_sweeps, "solver sweep budget");
  };

  CLI::App* solve = app.add_subcommand("solve", "coupled best-response solve");
  add_common(solve);
  CLI::App* enumerate = app.add_subcommand("enumerate", "exhaustive MPE enumeration");
  add_common(enumerate);
  CLI::App* refine = app.add_subcommand("refine", "viability/renegotiation/selection pipeline");
  add_common(refine);
  refine->add_option("--penalty", rc.penalty, "fixed catastrophe penalty M")
      ->each([&](const std::string&) { rc.penalty_set = true; });
  refine->add_flag("--find-threshold", rc.find_threshold,
                   "search the smallest penalty restoring viability");
  refine->add_option("--m-cap", rc.m_cap, "threshold search cap");
  refine->add_option("--threshold-tol", rc.threshold_tol, "threshold search resolution");
  refine->add_option("--selection-state", rc.selection_state,
                     "state where the exploiter's value is maximized");
  refine->add_option("--rp-quantifier", rc.rp_quantifier,
                     "renegotiation quantifier reading")
      ->check(CLI::IsMember({"some-state", "all-states"}));
  refine->add_flag("--ir", rc.apply_ir, "apply the outside-option IR filter");
  CLI::App* hc = app.add_subcommand("hc", "hegemon-client build, solve, classify");
  add_common(hc);
  CLI::App* hierarchy = app.add_subcommand("hierarchy", "containment certification");
  add_common(hierarchy);
  hierarchy->add_option("--selection-state", rc.selection_state,
                        "state for the Nash certificates");
  CLI::App* simulate = app.add_subcommand("simulate", "play a profile forward");
  add_common(simulate);
  simulate->add_option("--start", rc.start, "starting state index");
  simulate->add_option("--horizon", rc.horizon, "number of periods")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--profile", rc.profile_file,
                       "equilibrium-set file to draw the profile from");
  simulate->add_option("--profile-index", rc.profile_index,
                       "member index within --profile");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    detail::emit_error("usage", e.what());
    return 5;
  }

  try {
    if (solve->parsed()) return detail::run_solve(rc);
    if (enumerate->parsed()) return detail::run_enumerate(rc);
    if (refine->parsed()) return detail::run_refine(rc);
    if (hc->parsed()) return detail::run_hc(rc);
    if (hierarchy->parsed()) return detail::run_hierarchy(rc);
    if (simulate->parsed()) return detail::run_simulate(rc);
  } catch (const ConfigError& e) {
    detail::emit_error("config", e.what(), e.line, e.key);
    return 2;
  } catch (const BudgetError& e) {
    detail::emit_error("budget", e.what());
    return 3;
  } catch (const SolveError& e) {
    detail::emit_error("solve", e.what());
    return 4;
  } catch (const ShapeError& e) {
    detail::emit_error("shape", e.what());
    return 2;
  } catch (const std::exception& e) {
    detail::emit_error("internal", e.what());
    return 1;
  }
  return 5;
}

}  // namespace see::cli
