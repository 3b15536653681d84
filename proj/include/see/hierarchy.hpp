#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "see/refine.hpp"

namespace see {

/// Test seam: verify_hierarchy re-runs every certificate from scratch, and a
/// deliberately injected bug here must surface as a failed report. The only
/// supported mutation flips the one-shot deviation acceptance inequality.
enum class CertMutation { none, flip_deviation_inequality };

struct HierarchyOptions {
  int selection_state = -1;  // -1 = model's initial state
  double tol = kCertTol;
  unsigned long long budget = kDefaultBudget;
  RpQuantifier quantifier = RpQuantifier::some_state;
  CertMutation mutation = CertMutation::none;
};

/// Containment certification for the equilibrium chain on one model. All
/// verdicts are derived from certificates recomputed inside this call, never
/// from solver bookkeeping.
struct HierarchyReport {
  std::string scope_note;
  std::string fingerprint;
  int selection_state = 0;
  double tol = kCertTol;
  double ne_tol = 0.0;

  EquilibriumSet mpe;          // fresh exhaustive enumeration
  RefinementReport pipeline;   // fresh refinement run

  bool enumeration_matches = false;  // report MPE == pipeline MPE, bit for bit
  bool containment_ok = false;       // selected in RP subset viable subset MPE
  bool spe_ok = false;               // one-shot certificates all pass
  bool ne_ok = false;                // no stationary deviation improves at s0

  std::vector<double> one_shot_gain;       // per MPE member, fresh recompute
  std::vector<double> leader_ne_gain;      // best stationary leader deviation
  std::vector<double> follower_ne_gain;    // best stationary follower deviation
  std::string counterexample;

  bool ok() const {
    return enumeration_matches && containment_ok && spe_ok && ne_ok;
  }
};

/// Desk-scale certification of the refinement chain: recomputes the MPE set
/// and the pipeline, checks selected-in-RP-in-viable-in-MPE as profile
/// identity, certifies sequential rationality of every MPE by one-shot
/// deviation tests, and certifies the Nash property at the selection state
/// against every unilateral stationary Markov deviation.
///
/// Full history-dependent strategy enumeration is infeasible even at desk
/// scale; the chain is certified exactly at the level where it is literally
/// checkable, and the report says so in its header.
inline HierarchyReport verify_hierarchy(const GameModel& m, const ViabilitySet& v,
                                        const HierarchyOptions& opt = {}) {
  HierarchyReport rep;
  rep.scope_note =
      "containments certified on stationary Markov profiles: one-shot "
      "deviation tests carry the subgame-perfection content and stationary "
      "unilateral deviations the Nash content; history-dependent strategies "
      "are out of scope";
  rep.fingerprint = m.fingerprint();
  rep.selection_state = opt.selection_state >= 0 ? opt.selection_state : m.initial_state;
  rep.tol = opt.tol;
  // One-shot gains below tol can accumulate to tol/(1-delta) along a
  // stationary deviation, so the Nash check needs the amplified tolerance.
  rep.ne_tol = opt.tol / (1.0 - m.discount) + opt.tol;

  EnumerateOptions eopt;
  eopt.tol = opt.tol;
  eopt.budget = opt.budget;
  rep.mpe = enumerate_stationary_mpe(m, eopt);

  PipelineOptions popt;
  popt.selection_state = rep.selection_state;
  popt.quantifier = opt.quantifier;
  popt.enumerate = eopt;
  rep.pipeline = run_pipeline(m, v, popt);

  // (a) the report's MPE set equals the pipeline's enumeration bit for bit.
  rep.enumeration_matches =
      rep.mpe.members.size() == rep.pipeline.mpe.members.size();
  if (rep.enumeration_matches)
    for (size_t i = 0; i < rep.mpe.members.size(); ++i)
      if (!(rep.mpe.members[i].profile == rep.pipeline.mpe.members[i].profile)) {
        rep.enumeration_matches = false;
        rep.counterexample = "enumeration mismatch at member " + std::to_string(i);
        break;
      }

  // (b) containment chain over profile identity.
  rep.containment_ok = detail::subset_of(rep.pipeline.rp, rep.pipeline.viable) &&
                       detail::subset_of(rep.pipeline.viable, rep.mpe);
  if (rep.pipeline.selected &&
      !rep.pipeline.rp.contains(rep.pipeline.selected->profile))
    rep.containment_ok = false;
  if (!rep.containment_ok && rep.counterexample.empty())
    rep.counterexample = "containment chain violated";

  // (c) sequential rationality: fresh one-shot certificates per MPE member.
  rep.spe_ok = true;
  const bool flip = opt.mutation == CertMutation::flip_deviation_inequality;
  for (size_t i = 0; i < rep.mpe.members.size(); ++i) {
    const DeviationReport fresh =
        one_shot_deviation_check(m, rep.mpe.members[i].profile, opt.tol);
    rep.one_shot_gain.push_back(fresh.max_gain);
    const bool pass = flip ? fresh.max_gain > opt.tol : fresh.max_gain <= opt.tol;
    if (!pass) {
      rep.spe_ok = false;
      if (rep.counterexample.empty()) {
        std::ostringstream os;
        os << "MPE member " << i << " failed the one-shot certificate "
           << "(max gain " << format_g12(fresh.max_gain) << ")";
        rep.counterexample = os.str();
      }
    }
  }

  // (d) Nash at the selection state: no unilateral stationary Markov
  // deviation improves the deviator's value there.
  rep.ne_ok = true;
  const int n = m.num_states();
  unsigned long long leader_maps = 1, follower_maps = 1;
  const unsigned long long cap = ~0ULL / 4;
  for (int s = 0; s < n; ++s) {
    leader_maps = std::min(cap, leader_maps * m.num_leader_actions(s));
    for (int x = 0; x < m.num_leader_actions(s); ++x) {
      (void)x;
      follower_maps = std::min(cap, follower_maps * m.num_follower_actions(s));
    }
  }
  if (leader_maps + follower_maps > opt.budget)
    throw BudgetError("verify_hierarchy: stationary deviation space exceeds budget",
                      leader_maps + follower_maps, opt.budget);

  auto advance = [](std::vector<int>& digits, auto radix) {
    for (size_t i = 0; i < digits.size(); ++i) {
      if (++digits[i] < radix(i)) return true;
      digits[i] = 0;
    }
    return false;
  };

  const int s0 = rep.selection_state;
  for (size_t i = 0; i < rep.mpe.members.size(); ++i) {
    const CertifiedProfile& member = rep.mpe.members[i];
    const ValuePair base = evaluate_policies(m, member.profile, kValueTol);
    double worst_leader = 0.0, worst_follower = 0.0;

    StrategyProfile dev = member.profile;
    std::vector<int> digits(n, 0);
    do {
      dev.leader = digits;
      const ValuePair v2 = evaluate_policies(m, dev, kValueTol);
      worst_leader = std::max(worst_leader, v2.w_x[s0] - base.w_x[s0]);
    } while (advance(digits, [&](size_t s) { return m.num_leader_actions(static_cast<int>(s)); }));
    dev.leader = member.profile.leader;

    std::vector<std::pair<int, int>> slots;
    for (int s = 0; s < n; ++s)
      for (int x = 0; x < m.num_leader_actions(s); ++x) slots.emplace_back(s, x);
    std::vector<int> fdigits(slots.size(), 0);
    do {
      for (size_t j = 0; j < slots.size(); ++j)
        dev.follower[slots[j].first][slots[j].second] = fdigits[j];
      const ValuePair v2 = evaluate_policies(m, dev, kValueTol);
      worst_follower = std::max(worst_follower, v2.w_e[s0] - base.w_e[s0]);
    } while (advance(fdigits, [&](size_t j) {
      return m.num_follower_actions(slots[j].first);
    }));

    rep.leader_ne_gain.push_back(worst_leader);
    rep.follower_ne_gain.push_back(worst_follower);
    if (worst_leader > rep.ne_tol || worst_follower > rep.ne_tol) {
      rep.ne_ok = false;
      if (rep.counterexample.empty()) {
        std::ostringstream os;
        os << "MPE member " << i << " admits a stationary deviation gaining "
           << format_g12(std::max(worst_leader, worst_follower))
           << " at state " << s0;
        rep.counterexample = os.str();
      }
    }
  }
  return rep;
}

}  // namespace see
