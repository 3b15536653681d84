#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "see/solver.hpp"

namespace see {

/// Catastrophe penalty M applied to the exploiter on transitions that leave
/// the viability set.
struct PenaltySpec {
  double penalty = 0.0;
  ViabilitySet viability;
};

/// Exploitee outside-option values per state; drives the optional IR filter.
struct OutsideOption {
  std::vector<double> value;
};

class ThresholdNotFound : public std::runtime_error {
 public:
  ThresholdNotFound(const std::string& what, double cap)
      : std::runtime_error(what), cap(cap) {}
  double cap;
};

class EmptySelection : public std::runtime_error {
 public:
  explicit EmptySelection(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Viability
// ---------------------------------------------------------------------------

namespace detail {
inline double exit_mass(const Support& row, const ViabilitySet& v) {
  double mass = 0.0;
  for (const Transition& t : row)
    if (!v.contains(t.next)) mass += t.prob;
  return mass;
}
}  // namespace detail

/// True iff from every member state the induced chain assigns its full mass
/// (within kernel tolerance) back into the viability set.
inline bool check_viability(const GameModel& m, const StrategyProfile& p,
                            const ViabilitySet& v, double tol = kKernelTol) {
  const auto rows = induced_kernel(m, p);
  for (int s : v.members)
    if (detail::exit_mass(rows[s], v) > tol) return false;
  return true;
}

/// True iff the safe-action certificate holds: at each member state, playing
/// the certified action against the given follower responses keeps the state
/// in V with probability one.
inline bool check_safe_action(const GameModel& m, const ViabilitySet& v,
                              const std::vector<std::vector<int>>& follower,
                              double tol = kKernelTol) {
  if (!v.has_safe_action())
    throw ModelError("check_safe_action: no safe-action certificate present");
  for (int s : v.members) {
    const int x = v.safe_action[s];
    if (x < 0 || x >= m.num_leader_actions(s))
      throw ModelError("safe action index out of range at state " + std::to_string(s));
    const int e = follower[s][x];
    if (detail::exit_mass(m.kernel[s][x][e], v) > tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Catastrophe-penalized game
// ---------------------------------------------------------------------------

/// Returns the penalized game: the exploiter's stage payoff is reduced by
/// M times the probability of exiting V, i.e. the expectation of the
/// catastrophe indicator on the realized next state. The exploitee's payoffs
/// are untouched; the payoff bound grows by M.
inline GameModel penalize(const GameModel& m, const PenaltySpec& spec) {
  GameModel out = m;
  if (spec.penalty < 0.0) throw ModelError("penalize: penalty must be >= 0");
  if (spec.penalty == 0.0) return out;
  for (int s = 0; s < m.num_states(); ++s)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e) {
        const double exit = detail::exit_mass(m.kernel[s][x][e], spec.viability);
        out.payoff_x[s][x][e] -= spec.penalty * exit;
      }
  out.payoff_bound = m.payoff_bound + spec.penalty;
  return out;
}

struct ThresholdResult {
  double threshold = 0.0;
  double analytic_bound = 0.0;  // 2*payoff_bound / ((1-delta) * p_min)
};

/// Smallest penalty M (up to `resolution`) such that every enumerated MPE of
/// the penalized game is viable, located by doubling then bisection from
/// M = 0. Also reports the closed-form sufficiency bound from comparing the
/// penalized payoff against the safe action in discounted terms.
inline ThresholdResult find_penalty_threshold(const GameModel& m,
                                              const ViabilitySet& v,
                                              double m_cap = 1e9,
                                              double resolution = 1e-6,
                                              const EnumerateOptions& opt = {}) {
  if (!(m_cap > 0.0)) throw ModelError("find_penalty_threshold: m_cap must be > 0");
  if (!(resolution > 0.0)) throw ModelError("find_penalty_threshold: resolution must be > 0");

  double p_min = 0.0;
  for (int s : v.members)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e) {
        const double exit = detail::exit_mass(m.kernel[s][x][e], v);
        if (exit > kKernelTol && (p_min == 0.0 || exit < p_min)) p_min = exit;
      }
  ThresholdResult res;
  res.analytic_bound =
      p_min > 0.0 ? 2.0 * m.payoff_bound / ((1.0 - m.discount) * p_min) : 0.0;

  auto all_viable_at = [&](double penalty) {
    const GameModel pen = penalize(m, {penalty, v});
    const EquilibriumSet set = enumerate_stationary_mpe(pen, opt);
    return std::all_of(set.members.begin(), set.members.end(),
                       [&](const CertifiedProfile& c) {
                         return check_viability(pen, c.profile, v);
                       });
  };

  if (all_viable_at(0.0)) {
    res.threshold = 0.0;
    return res;
  }
  double lo = 0.0, hi = 1.0;
  while (!all_viable_at(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > m_cap)
      throw ThresholdNotFound(
          "find_penalty_threshold: no penalty up to " + format_g12(m_cap) +
              " makes every MPE viable; the model may lack a safe action",
          m_cap);
  }
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (all_viable_at(mid))
      hi = mid;
    else
      lo = mid;
  }
  res.threshold = hi;
  return res;
}

// ---------------------------------------------------------------------------
// Set refinement stages
// ---------------------------------------------------------------------------

/// Members of the set whose induced chain never leaves V.
inline EquilibriumSet filter_viable(const GameModel& m, const EquilibriumSet& set,
                                    const ViabilitySet& v) {
  EquilibriumSet out;
  out.fingerprint = set.fingerprint;
  out.exhaustive = set.exhaustive;
  out.tol = set.tol;
  for (const CertifiedProfile& c : set.members)
    if (check_viability(m, c.profile, v)) out.members.push_back(c);
  return out;
}

/// Keeps profiles whose exploitee value weakly dominates the outside option
/// at every member state.
inline EquilibriumSet ir_filter(const EquilibriumSet& set, const OutsideOption& out_opt,
                                const ViabilitySet& v, double tol = kCompareTol) {
  EquilibriumSet out;
  out.fingerprint = set.fingerprint;
  out.exhaustive = set.exhaustive;
  out.tol = set.tol;
  for (const CertifiedProfile& c : set.members) {
    bool keep = true;
    for (int s : v.members)
      if (c.values.w_e[s] < out_opt.value[s] - tol) {
        keep = false;
        break;
      }
    if (keep) out.members.push_back(c);
  }
  return out;
}

enum class RpQuantifier {
  some_state,  // eliminated when Pareto-improved at some member state
  all_states,  // eliminated when weakly improved at every member state
};

inline std::string to_string(RpQuantifier q) {
  return q == RpQuantifier::some_state ? "some-state" : "all-states";
}

struct AuditRow {
  int eliminated = -1;  // index into the stage's input set
  int dominator = -1;
  int state = -1;       // member state where the strict improvement holds
  double margin_x = 0.0;
  double margin_e = 0.0;
};

namespace detail {

inline bool pareto_dominates_at(const ValuePair& alt, const ValuePair& cur, int s,
                                double tol) {
  const bool weak = alt.w_e[s] >= cur.w_e[s] - tol && alt.w_x[s] >= cur.w_x[s] - tol;
  const bool strict = alt.w_e[s] > cur.w_e[s] + tol || alt.w_x[s] > cur.w_x[s] + tol;
  return weak && strict;
}

}  // namespace detail

/// Removes every profile for which some alternative in the *input* set makes
/// both players weakly better off with one strict improvement. The reference
/// set is the input set itself, never re-shrunk during the pass, so the stage
/// is idempotent. Under the some-state quantifier the Pareto test is applied
/// per member state; under all-states the weak improvement must hold at every
/// member state with a strict one somewhere.
inline EquilibriumSet renegotiation_proof_set(const EquilibriumSet& set,
                                              const ViabilitySet& v,
                                              double tol = kCompareTol,
                                              RpQuantifier q = RpQuantifier::some_state,
                                              std::vector<AuditRow>* audit = nullptr) {
  EquilibriumSet out;
  out.fingerprint = set.fingerprint;
  out.exhaustive = set.exhaustive;
  out.tol = set.tol;
  const int count = static_cast<int>(set.members.size());
  for (int i = 0; i < count; ++i) {
    const ValuePair& cur = set.members[i].values;
    bool eliminated = false;
    for (int j = 0; j < count && !eliminated; ++j) {
      if (j == i) continue;
      const ValuePair& alt = set.members[j].values;
      if (q == RpQuantifier::some_state) {
        for (int s : v.members) {
          if (detail::pareto_dominates_at(alt, cur, s, tol)) {
            eliminated = true;
            if (audit)
              audit->push_back({i, j, s, alt.w_x[s] - cur.w_x[s],
                                alt.w_e[s] - cur.w_e[s]});
            break;
          }
        }
      } else {
        bool weak_everywhere = true;
        int strict_state = -1;
        for (int s : v.members) {
          if (alt.w_e[s] < cur.w_e[s] - tol || alt.w_x[s] < cur.w_x[s] - tol) {
            weak_everywhere = false;
            break;
          }
          if (strict_state < 0 &&
              (alt.w_e[s] > cur.w_e[s] + tol || alt.w_x[s] > cur.w_x[s] + tol))
            strict_state = s;
        }
        if (weak_everywhere && strict_state >= 0) {
          eliminated = true;
          if (audit)
            audit->push_back({i, j, strict_state,
                              alt.w_x[strict_state] - cur.w_x[strict_state],
                              alt.w_e[strict_state] - cur.w_e[strict_state]});
        }
      }
    }
    if (!eliminated) out.members.push_back(set.members[i]);
  }
  return out;
}

/// Exploiter-optimal selection at the given state with the fixed lexicographic
/// tie-break: highest w_x, then highest w_e, then the smallest action-index
/// vector. The scan is order-invariant.
inline int select_see_index(const EquilibriumSet& set, int selection_state,
                            double tol = kCompareTol) {
  if (set.members.empty())
    throw EmptySelection("no SEE found at this grid/tolerance");
  const int count = static_cast<int>(set.members.size());
  double best_x = -std::numeric_limits<double>::infinity();
  for (const auto& c : set.members)
    best_x = std::max(best_x, c.values.w_x[selection_state]);
  double best_e = -std::numeric_limits<double>::infinity();
  for (const auto& c : set.members)
    if (c.values.w_x[selection_state] >= best_x - tol)
      best_e = std::max(best_e, c.values.w_e[selection_state]);
  int pick = -1;
  for (int i = 0; i < count; ++i) {
    const auto& c = set.members[i];
    if (c.values.w_x[selection_state] < best_x - tol) continue;
    if (c.values.w_e[selection_state] < best_e - tol) continue;
    if (pick < 0 || c.profile < set.members[pick].profile) pick = i;
  }
  return pick;
}

inline const CertifiedProfile& select_see(const EquilibriumSet& set,
                                          int selection_state,
                                          double tol = kCompareTol) {
  return set.members[static_cast<size_t>(select_see_index(set, selection_state, tol))];
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

enum class PenaltyMode { none, fixed, find_threshold };

struct PipelineOptions {
  PenaltyMode penalty_mode = PenaltyMode::none;
  double penalty = 0.0;        // fixed-penalty mode
  double m_cap = 1e9;          // threshold-search cap
  double threshold_tol = 1e-6; // threshold-search resolution
  int selection_state = -1;    // -1 = model's initial state
  RpQuantifier quantifier = RpQuantifier::some_state;
  std::optional<OutsideOption> outside;  // enables the IR stage
  double pareto_tol = kCompareTol;
  EnumerateOptions enumerate;
};

struct RefinementReport {
  std::string model_fingerprint;
  std::string basis_fingerprint;  // penalized model when a penalty is applied
  PenaltyMode penalty_mode = PenaltyMode::none;
  double penalty_used = 0.0;
  std::optional<ThresholdResult> threshold;

  EquilibriumSet mpe;       // enumeration on the basis model
  EquilibriumSet viable;
  bool ir_applied = false;
  EquilibriumSet after_ir;  // == viable when the IR stage is off
  EquilibriumSet rp;        // under `quantifier`
  EquilibriumSet rp_other;  // under the other reading
  bool quantifier_readings_agree = true;
  std::vector<AuditRow> audit;        // eliminations under `quantifier`
  std::vector<AuditRow> audit_other;

  std::optional<CertifiedProfile> selected;
  int selected_index = -1;  // index into rp.members
  std::string status;       // selected | no-mpe | no-viable | empty-after-ir | empty-rp

  // Raw-route cross-check when a penalty was applied: the viable subset of
  // the *unpenalized* game's MPE, and whether the two routes coincide.
  std::optional<EquilibriumSet> raw_viable;
  bool routes_agree = true;

  int selection_state = 0;
  RpQuantifier quantifier = RpQuantifier::some_state;
  double pareto_tol = kCompareTol;
};

namespace detail {

inline bool same_profiles(const EquilibriumSet& a, const EquilibriumSet& b) {
  if (a.members.size() != b.members.size()) return false;
  for (const auto& c : a.members)
    if (!b.contains(c.profile)) return false;
  return true;
}

inline bool subset_of(const EquilibriumSet& a, const EquilibriumSet& b) {
  return std::all_of(a.members.begin(), a.members.end(),
                     [&](const CertifiedProfile& c) { return b.contains(c.profile); });
}

}  // namespace detail

/// Runs the full refinement: enumerate (optionally on the penalized game) ->
/// viability filter -> optional IR filter -> renegotiation-proofness under
/// both quantifier readings -> exploiter-optimal selection. The nesting
/// selected in RP subset viable subset MPE is asserted on every run.
inline RefinementReport run_pipeline(const GameModel& m, const ViabilitySet& v,
                                     const PipelineOptions& opt = {}) {
  RefinementReport rep;
  rep.model_fingerprint = m.fingerprint();
  rep.penalty_mode = opt.penalty_mode;
  rep.selection_state = opt.selection_state >= 0 ? opt.selection_state : m.initial_state;
  rep.quantifier = opt.quantifier;
  rep.pareto_tol = opt.pareto_tol;

  GameModel basis = m;
  if (opt.penalty_mode == PenaltyMode::fixed) {
    rep.penalty_used = opt.penalty;
    basis = penalize(m, {opt.penalty, v});
  } else if (opt.penalty_mode == PenaltyMode::find_threshold) {
    rep.threshold =
        find_penalty_threshold(m, v, opt.m_cap, opt.threshold_tol, opt.enumerate);
    rep.penalty_used = rep.threshold->threshold;
    basis = penalize(m, {rep.penalty_used, v});
  }
  rep.basis_fingerprint = basis.fingerprint();

  rep.mpe = enumerate_stationary_mpe(basis, opt.enumerate);
  rep.viable = filter_viable(basis, rep.mpe, v);

  if (opt.penalty_mode != PenaltyMode::none) {
    const EquilibriumSet raw = enumerate_stationary_mpe(m, opt.enumerate);
    rep.raw_viable = filter_viable(m, raw, v);
    rep.routes_agree = detail::same_profiles(rep.viable, *rep.raw_viable);
  }

  if (opt.outside) {
    rep.ir_applied = true;
    rep.after_ir = ir_filter(rep.viable, *opt.outside, v, opt.pareto_tol);
  } else {
    rep.after_ir = rep.viable;
  }

  const RpQuantifier other = opt.quantifier == RpQuantifier::some_state
                                 ? RpQuantifier::all_states
                                 : RpQuantifier::some_state;
  rep.rp = renegotiation_proof_set(rep.after_ir, v, opt.pareto_tol, opt.quantifier,
                                   &rep.audit);
  rep.rp_other = renegotiation_proof_set(rep.after_ir, v, opt.pareto_tol, other,
                                         &rep.audit_other);
  rep.quantifier_readings_agree = detail::same_profiles(rep.rp, rep.rp_other);

  if (rep.mpe.members.empty())
    rep.status = "no-mpe";
  else if (rep.viable.members.empty())
    rep.status = "no-viable";
  else if (rep.after_ir.members.empty())
    rep.status = "empty-after-ir";
  else if (rep.rp.members.empty())
    rep.status = "empty-rp";
  else {
    rep.selected_index = select_see_index(rep.rp, rep.selection_state, opt.pareto_tol);
    rep.selected = rep.rp.members[static_cast<size_t>(rep.selected_index)];
    rep.status = "selected";
  }

  // Nesting invariant over the computed chain.
  if (!detail::subset_of(rep.viable, rep.mpe) ||
      !detail::subset_of(rep.after_ir, rep.viable) ||
      !detail::subset_of(rep.rp, rep.after_ir) ||
      (rep.selected && !rep.rp.contains(rep.selected->profile)))
    throw std::logic_error("refinement nesting invariant violated");
  return rep;
}

}  // namespace see
