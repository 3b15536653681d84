// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria marked with their runtime budgets enforce them.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "see/cli.hpp"
#include "see/hierarchy.hpp"
#include "see/serialize.hpp"
#include "see/toy3.hpp"
#include "../support/fixtures.hpp"
#include "../support/random_models.hpp"

using namespace see;
namespace fs = std::filesystem;

namespace {

std::string g_source_dir = ".";

struct Check {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    pass = false;
    if (detail.empty()) detail = why;
  }
  void require(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

// Shared hegemon-client artifacts: the criterion-7 sweep's regime reports are
// also the population over which criterion 5 checks slackness and mu.
struct SweepRow {
  double alpha;
  RegimeReport report;
  double state_step;
  double x_step;
};
std::vector<SweepRow>& sweep_rows() {
  static std::vector<SweepRow> rows = [] {
    std::vector<SweepRow> out;
    for (double alpha : {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      HCParams p;
      p.alpha = alpha;
      p.s_grid.count = 61;
      p.x_grid.count = 21;
      p.e_grid.count = 21;
      HCSolution sol = solve_hc(p);
      RegimeReport rep = classify_regime(sol);
      out.push_back({alpha, rep, sol.hc.state_step(),
                     sol.hc.x_grid[1] - sol.hc.x_grid[0]});
    }
    return out;
  }();
  return rows;
}

// ---------------------------------------------------------------------------

Check criterion1_oracle_equivalence() {
  Check c;
  int models = 0, solver_hits = 0;
  for (std::uint64_t seed = 1; models < 25 && seed <= 80; ++seed) {
    testing::RandomModelSpec spec;
    spec.max_profile_space = 200000;
    GameModel m = testing::random_model(seed, spec);
    ++models;
    EnumerateOptions opt;
    opt.tol = 1e-8;
    EquilibriumSet set = enumerate_stationary_mpe(m, opt);
    for (const CertifiedProfile& member : set.members) {
      const DeviationReport fresh = one_shot_deviation_check(m, member.profile);
      c.require(fresh.max_gain <= 1e-8,
                "seed " + std::to_string(seed) + ": recomputed gain " +
                    format_g12(fresh.max_gain));
    }
    try {
      MseSolution sol = solve_mse(m);
      c.require(set.contains(sol.profile),
                "seed " + std::to_string(seed) + ": solver output not in the set");
      ++solver_hits;
    } catch (const SolveError&) {
      // Convergence is not guaranteed; coverage is checked below.
    }
  }
  c.require(models >= 25, "fewer than 25 models generated");
  c.require(solver_hits >= 10, "solver converged on too few models");
  c.detail = std::to_string(models) + " models, solver converged on " +
             std::to_string(solver_hits);
  return c;
}

Check criterion2_theorem1() {
  Check c;
  ViabilitySet v = toy3_viability();
  bool saw_collapse_mpe = false;
  for (double delta : {0.1, 0.5, 0.9}) {
    GameModel m = toy3_model(delta);
    ThresholdResult thr = find_penalty_threshold(m, v, 1e6, 1e-6);
    c.require(std::isfinite(thr.threshold), "threshold not finite");
    for (double mult : {1.0, 2.0}) {
      GameModel pen = penalize(m, {mult * thr.threshold, v});
      EquilibriumSet set = enumerate_stationary_mpe(pen);
      for (const CertifiedProfile& member : set.members)
        c.require(check_viability(pen, member.profile, v),
                  "non-viable MPE at delta " + format_g12(delta) + ", M multiple " +
                      format_g12(mult));
    }
    EquilibriumSet raw = enumerate_stationary_mpe(m);
    EquilibriumSet viable = filter_viable(m, raw, v);
    if (viable.members.size() < raw.members.size()) {
      saw_collapse_mpe = true;
      c.require(thr.threshold > 0.0, "collapse MPE but zero threshold");
    }
  }
  c.require(saw_collapse_mpe, "no discount produced a collapse MPE");
  return c;
}

Check criterion3_nesting() {
  Check c;
  int selecting_runs = 0;
  auto audit_run = [&](const GameModel& m, const ViabilitySet& v,
                       const PipelineOptions& opt) {
    RefinementReport rep = run_pipeline(m, v, opt);
    if (rep.status != "selected") return;
    ++selecting_runs;
    auto member_of = [](const EquilibriumSet& set, const StrategyProfile& p) {
      return set.contains(p);
    };
    c.require(member_of(rep.rp, rep.selected->profile), "selected not in RP");
    for (const CertifiedProfile& p : rep.rp.members)
      c.require(member_of(rep.after_ir, p.profile), "RP not inside the IR stage");
    for (const CertifiedProfile& p : rep.after_ir.members)
      c.require(member_of(rep.viable, p.profile), "IR stage not inside viable");
    for (const CertifiedProfile& p : rep.viable.members)
      c.require(member_of(rep.mpe, p.profile), "viable not inside MPE");
    for (const CertifiedProfile& p : rep.rp.members)
      c.require(rep.selected->values.w_x[rep.selection_state] >=
                    p.values.w_x[rep.selection_state] - 1e-9,
                "selected not exploiter-optimal at the selection state");
  };

  audit_run(toy3_model(0.1), toy3_viability(), [] {
    PipelineOptions o;
    o.penalty_mode = PenaltyMode::find_threshold;
    return o;
  }());
  audit_run(toy3_model(0.5), make_viability({0, 1, 2}), {});
  audit_run(testing::coordination_model(), make_viability({0, 1}), {});
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    testing::RandomModelSpec spec;
    spec.max_profile_space = 50000;
    GameModel m = testing::random_model(seed, spec);
    std::vector<int> all(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) all[s] = s;
    audit_run(m, make_viability(all), {});
  }
  c.require(selecting_runs >= 10, "too few selecting pipeline runs");
  c.detail = std::to_string(selecting_runs) + " selecting runs audited";
  return c;
}

Check criterion4_renegotiation_soundness() {
  Check c;
  GameModel m = testing::coordination_model(0.5);
  ViabilitySet v = make_viability({0, 1});
  RefinementReport rep = run_pipeline(m, v, {});
  c.require(rep.viable.members.size() == 4, "expected four viable MPE");
  c.require(rep.rp.members.size() == 2, "expected two surviving profiles");
  c.require(!rep.audit.empty(), "empty audit trail");
  for (const AuditRow& row : rep.audit) {
    const CertifiedProfile& eliminated = rep.after_ir.members[row.eliminated];
    const CertifiedProfile& dominator = rep.after_ir.members[row.dominator];
    // Values re-verified by direct policy evaluation.
    const ValuePair ve = evaluate_policies(m, eliminated.profile, 1e-12);
    const ValuePair vd = evaluate_policies(m, dominator.profile, 1e-12);
    c.require(row.state == 1, "audit names the wrong state");
    c.require(vd.w_x[row.state] > ve.w_x[row.state] + 1e-9 &&
                  vd.w_e[row.state] > ve.w_e[row.state] + 1e-9,
              "audit dominator does not dominate");
    c.require(std::abs(row.margin_x - (vd.w_x[row.state] - ve.w_x[row.state])) < 1e-7,
              "audit margin mismatch");
    c.require(eliminated.profile.leader[1] == 0 && dominator.profile.leader[1] == 1,
              "unexpected elimination direction");
  }
  c.detail = std::to_string(rep.audit.size()) + " eliminations audited";
  return c;
}

Check criterion5_foc_consistency() {
  Check c;
  const int counts[3][3] = {{51, 11, 11}, {101, 21, 21}, {201, 41, 41}};
  std::vector<double> stests;
  for (double s = 1.60; s <= 3.44 + 1e-9; s += 0.16) stests.push_back(s);
  const std::vector<double> xrefs = {0.2, 0.6, 1.0};
  const std::vector<double> alphas = {0.10, 0.12, 0.14, 0.16, 0.18, 0.20};

  std::vector<std::vector<double>> ff_cell(3), lf_cell(3);
  std::vector<std::vector<bool>> ff_ok(3), lf_ok(3);
  for (int lvl = 0; lvl < 3; ++lvl) {
    for (double alpha : alphas) {
      HCParams p;
      p.alpha = alpha;
      p.s_grid.count = counts[lvl][0];
      p.x_grid.count = counts[lvl][1];
      p.e_grid.count = counts[lvl][2];
      HCModel hc = build_hc_model(p);
      const GameModel& m = hc.game;
      const int n = m.num_states();
      // Anchored single-agent programs: the follower's MDP under the safest
      // extraction policy, and the leader's MDP against the response map.
      std::vector<int> lambda0(n, 0);
      std::vector<double> wc = detail::follower_mdp_values(m, lambda0);
      std::vector<std::vector<int>> resp(n);
      for (int s = 0; s < n; ++s) {
        resp[s].resize(m.num_leader_actions(s));
        for (int x = 0; x < m.num_leader_actions(s); ++x)
          resp[s][x] = follower_best_response(m, wc, s, x);
      }
      std::vector<double> vh = detail::leader_mdp_values(m, resp);
      HCAnalysis an(hc, ValuePair{vh, wc});
      for (double s_test : stests) {
        const int si = nearest_index(hc.s_grid, s_test);
        for (double xr : xrefs) {
          int xi = -1;
          for (int xx = 0; xx < m.num_leader_actions(si); ++xx)
            if (std::abs(m.leader_actions[si][xx] - xr) < 1e-9) xi = xx;
          if (xi < 0) {
            ff_cell[lvl].push_back(0.0);
            ff_ok[lvl].push_back(false);
            continue;
          }
          const auto ff = an.follower_foc_residual(
              hc.s_grid[si], xr, m.follower_actions[si][resp[si][xi]]);
          ff_cell[lvl].push_back(std::abs(ff.residual));
          ff_ok[lvl].push_back(!ff.e_on_boundary);
        }
        int bx = 0;
        double bq = -std::numeric_limits<double>::infinity();
        for (int xx = 0; xx < m.num_leader_actions(si); ++xx) {
          const int ee = resp[si][xx];
          const double q =
              m.payoff_x[si][xx][ee] + m.discount * m.expected(vh, si, xx, ee);
          if (q > bq) {
            bq = q;
            bx = xx;
          }
        }
        const auto lf = an.leader_foc_residual(hc.s_grid[si],
                                               m.leader_actions[si][bx], 0.0);
        lf_cell[lvl].push_back(std::abs(lf.residual));
        lf_ok[lvl].push_back(!lf.x_on_boundary && bx > 0 &&
                             bx + 1 < m.num_leader_actions(si));
      }
    }
  }
  // Panel means over cells with an interior optimum at every level.
  double ff_mean[3] = {0, 0, 0}, lf_mean[3] = {0, 0, 0};
  int ff_n = 0, lf_n = 0;
  for (size_t i = 0; i < ff_cell[0].size(); ++i)
    if (ff_ok[0][i] && ff_ok[1][i] && ff_ok[2][i]) {
      for (int l = 0; l < 3; ++l) ff_mean[l] += ff_cell[l][i];
      ++ff_n;
    }
  for (size_t i = 0; i < lf_cell[0].size(); ++i)
    if (lf_ok[0][i] && lf_ok[1][i] && lf_ok[2][i]) {
      for (int l = 0; l < 3; ++l) lf_mean[l] += lf_cell[l][i];
      ++lf_n;
    }
  c.require(ff_n >= 30 && lf_n >= 20, "too few interior-optimum panel cells");
  for (int l = 0; l < 3; ++l) {
    ff_mean[l] /= std::max(1, ff_n);
    lf_mean[l] /= std::max(1, lf_n);
  }
  const double ff_ratio = ff_mean[2] / ff_mean[0];
  const double lf_ratio = lf_mean[2] / lf_mean[0];
  c.require(ff_ratio <= 0.6, "follower FOC residual ratio " + format_g12(ff_ratio));
  c.require(lf_ratio <= 0.6, "leader FOC residual ratio " + format_g12(lf_ratio));
  c.require(ff_mean[1] < ff_mean[0] && ff_mean[2] < ff_mean[1],
            "follower residual means not decreasing");
  c.require(lf_mean[1] < lf_mean[0] && lf_mean[2] < lf_mean[1],
            "leader residual means not decreasing");

  // Complementary slackness and multiplier sign over every regime report.
  for (const SweepRow& row : sweep_rows()) {
    c.require(std::abs(row.report.comp_slack) <= 1e-8,
              "comp slack " + format_g12(row.report.comp_slack) + " at alpha " +
                  format_g12(row.alpha));
    c.require(row.report.mu >= 0.0, "negative mu at alpha " + format_g12(row.alpha));
  }
  {
    std::ostringstream os;
    os << "ff means " << format_g12(ff_mean[0]) << " -> " << format_g12(ff_mean[1])
       << " -> " << format_g12(ff_mean[2]) << " (two-refinement ratio "
       << format_g12(ff_ratio) << "); lf " << format_g12(lf_mean[0]) << " -> "
       << format_g12(lf_mean[1]) << " -> " << format_g12(lf_mean[2]) << " (ratio "
       << format_g12(lf_ratio) << "); " << sweep_rows().size()
       << " regime reports clean";
    c.detail = os.str();
  }
  return c;
}

Check criterion6_sensitivity() {
  Check c;
  std::mt19937_64 rng(20260811);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53);
  };
  int draws = 0, agreed = 0, flagged = 0;
  while (draws < 20) {
    HCParams p;
    p.alpha = uniform(0.1, 0.4);
    p.rho = uniform(0.15, 0.45);
    p.kappa0 = uniform(0.0, 0.2);
    p.kappa1 = uniform(0.0, 0.1);
    p.kappa2 = uniform(0.3, 2.0);
    p.beta = uniform(0.5, 2.0);
    p.gamma = uniform(0.3, 1.0);
    p.phi2 = uniform(4.0, 12.0);
    p.eta = uniform(0.2, 1.0);
    p.growth = uniform(1.1, 1.35);
    p.a = uniform(0.05, 0.2);
    p.c = uniform(0.02, 0.08);
    p.lambda = uniform(0.7, 1.3);
    p.discount = uniform(0.4, 0.6);
    p.s_grid.count = 101;
    p.x_grid.count = 21;
    p.e_grid.count = 21;
    if (!check_hc_shapes(p).empty()) continue;
    ++draws;
    HCModel hc = build_hc_model(p);
    std::vector<int> lambda0(hc.game.num_states(), 0);
    std::vector<double> wc = detail::follower_mdp_values(hc.game, lambda0);
    std::vector<double> vh(wc.size(), 0.0);
    HCAnalysis an(hc, ValuePair{vh, wc});
    const double tol =
        std::max(1e-3, 10.0 * (hc.x_grid[1] - hc.x_grid[0]));
    for (double s : {1.6, 2.4, 3.2})
      for (double x : {0.4, 0.8}) {
        const SensitivityResult r = an.effort_sensitivity(s, x);
        if (std::abs(r.ift - r.fd) <= tol) {
          ++agreed;
        } else if (r.degenerate) {
          ++flagged;  // disagreement coincides with a flagged degeneracy
        } else {
          c.fail("draw " + std::to_string(draws) + " at (s=" + format_g12(s) +
                 ",x=" + format_g12(x) + "): ift " + format_g12(r.ift) + " vs fd " +
                 format_g12(r.fd) + " unflagged");
        }
      }
  }
  c.detail = std::to_string(draws) + " draws, " + std::to_string(agreed) +
             " agreements, " + std::to_string(flagged) + " flagged degeneracies";
  return c;
}

Check criterion7_regime_dichotomy() {
  Check c;
  int last = 0;
  bool saw_interior = false, saw_boundary = false;
  for (const SweepRow& row : sweep_rows()) {
    const RegimeReport& r = row.report;
    const int cur = r.regime == "interior" ? 1 : 2;
    if (cur == 1) saw_interior = true;
    if (cur == 2) {
      saw_boundary = true;
      c.require(std::abs(r.s_star_grid - 0.5) <= row.state_step,
                "steady state " + format_g12(r.s_star_grid) +
                    " not within one step of s_min at alpha " + format_g12(row.alpha));
      // x* = (f(s_min, e*) - s_min)/lambda within one grid step of the policy.
      c.require(std::abs(r.x_star_grid - r.x_star) <= row.x_step + 1e-12,
                "boundary extraction off the formula at alpha " +
                    format_g12(row.alpha));
      c.require(r.mu >= 0.0, "negative multiplier");
    }
    c.require(cur >= last, "regime switched back at alpha " + format_g12(row.alpha));
    last = cur;
  }
  c.require(saw_interior && saw_boundary, "sweep did not cross the regimes");
  int interior_count = 0;
  for (const SweepRow& row : sweep_rows())
    if (row.report.regime == "interior") ++interior_count;
  c.detail = std::to_string(interior_count) + " interior then " +
             std::to_string(static_cast<int>(sweep_rows().size()) - interior_count) +
             " boundary, monotone";
  return c;
}

Check criterion8_hierarchy() {
  Check c;
  for (double delta : {0.1, 0.5, 0.9}) {
    HierarchyReport rep = verify_hierarchy(toy3_model(delta), toy3_viability());
    c.require(rep.ok(), "TOY-3 verdict failed at delta " + format_g12(delta) + ": " +
                            rep.counterexample);
  }
  for (std::uint64_t seed = 2000; seed < 2010; ++seed) {
    testing::RandomModelSpec spec;
    spec.max_states = 3;
    spec.max_leader_actions = 2;
    spec.max_follower_actions = 2;
    spec.max_profile_space = 4096;
    GameModel m = testing::random_model(seed, spec);
    std::vector<int> all(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) all[s] = s;
    HierarchyReport rep = verify_hierarchy(m, make_viability(all));
    c.require(rep.ok(), "random model " + std::to_string(seed) + " failed: " +
                            rep.counterexample);
  }
  HierarchyOptions mutated;
  mutated.mutation = CertMutation::flip_deviation_inequality;
  HierarchyReport bug = verify_hierarchy(toy3_model(0.1), toy3_viability(), mutated);
  c.require(!bug.ok(), "injected certification bug was not caught");
  c.require(!bug.counterexample.empty(), "caught bug lacks a counterexample");
  c.detail = "TOY-3 x3 + 10 random models pass; mutation caught";
  return c;
}

Check criterion9_reproducibility() {
  Check c;
  const fs::path base = fs::temp_directory_path() / "see_acceptance_repro";
  fs::remove_all(base);
  const std::string cfg = g_source_dir + "/configs/toy3_d01.model";
  for (const char* sub : {"enumerate", "refine"}) {
    const fs::path a = base / (std::string(sub) + "_a");
    const fs::path b = base / (std::string(sub) + "_b");
    for (const fs::path& dir : {a, b}) {
      std::vector<std::string> argv_s = {"seesolve", sub, cfg, "--out", dir.string(),
                                         "--seed", "11"};
      if (std::string(sub) == "refine") argv_s.push_back("--find-threshold");
      std::vector<const char*> argv;
      for (const auto& s : argv_s) argv.push_back(s.c_str());
      const int code = cli::run(static_cast<int>(argv.size()), argv.data());
      c.require(code == 0, std::string(sub) + " exited with " + std::to_string(code));
    }
    if (!c.pass) break;
    for (const auto& entry : fs::directory_iterator(a)) {
      const std::string name = entry.path().filename().string();
      c.require(read_file(a / name) == read_file(b / name),
                std::string(sub) + ": " + name + " differs between runs");
    }
  }
  fs::remove_all(base);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--source-dir") g_source_dir = argv[i + 1];

  struct Entry {
    int id;
    const char* name;
    std::function<Check()> run;
    double budget_s;  // 0 = no stated budget
  };
  const std::vector<Entry> entries = {
      {1, "oracle equivalence on random models", criterion1_oracle_equivalence, 60},
      {2, "penalty threshold restores viability on TOY-3", criterion2_theorem1, 10},
      {3, "refinement nesting and exploiter-optimality", criterion3_nesting, 0},
      {4, "renegotiation-proofness soundness with audit", criterion4_renegotiation_soundness, 0},
      {5, "hegemon-client FOC consistency", criterion5_foc_consistency, 120},
      {6, "effort-sensitivity gradient check", criterion6_sensitivity, 0},
      {7, "regime dichotomy over the extraction scale", criterion7_regime_dichotomy, 0},
      {8, "hierarchy certification and mutation catch", criterion8_hierarchy, 0},
      {9, "byte-identical reproducibility", criterion9_reproducibility, 0},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = e.run();
    } catch (const std::exception& ex) {
      c.pass = false;
      c.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (e.budget_s > 0 && secs > e.budget_s) {
      c.pass = false;
      c.detail += " [runtime " + format_g12(secs) + "s over budget " +
                  format_g12(e.budget_s) + "s]";
    }
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n", c.pass ? "PASS" : "FAIL",
                e.id, e.name, secs, c.detail.empty() ? "" : " - ",
                c.detail.c_str());
    if (!c.pass) ++failures;
  }
  return failures;
}
