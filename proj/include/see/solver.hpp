#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "see/game.hpp"

namespace see {

/// One-shot deviation gains for a profile. Leader gains are per state;
/// follower gains are per (state, leader action), covering off-path actions.
/// A profile is certified as a stationary MPE iff max_gain <= tol.
struct DeviationReport {
  std::vector<double> leader_gain;
  std::vector<std::vector<double>> follower_gain;
  std::vector<int> best_leader_deviation;               // argmax action per state
  std::vector<std::vector<int>> best_follower_deviation;
  double max_gain = 0.0;
  double tol = kCertTol;
  bool certified() const { return max_gain <= tol; }

  // Location of the largest gain, for counterexample reporting.
  int worst_state = -1;
  int worst_action = -1;  // -1 = leader entry, else the leader action index
};

struct CertifiedProfile {
  StrategyProfile profile;
  ValuePair values;
  DeviationReport report;
};

/// A collection of certified stationary MPE profiles for one model.
struct EquilibriumSet {
  std::vector<CertifiedProfile> members;
  std::string fingerprint;
  bool exhaustive = false;
  double tol = kCertTol;

  bool contains(const StrategyProfile& p) const {
    return std::any_of(members.begin(), members.end(),
                       [&](const CertifiedProfile& c) { return c.profile == p; });
  }
};

/// Follower's best effort at (s,x) against continuation values w_e.
/// Ties break toward the lowest effort index.
inline int follower_best_response(const GameModel& m,
                                  const std::vector<double>& w_e, int s, int x) {
  int best = 0;
  double best_v = m.payoff_e[s][x][0] + m.discount * m.expected(w_e, s, x, 0);
  for (int e = 1; e < m.num_follower_actions(s); ++e) {
    const double v = m.payoff_e[s][x][e] + m.discount * m.expected(w_e, s, x, e);
    if (v > best_v) {
      best = e;
      best_v = v;
    }
  }
  return best;
}

/// Deviation gains computed against given values (no re-evaluation).
/// one_shot_deviation_check wraps this with a fresh policy evaluation.
inline DeviationReport deviation_report_from_values(const GameModel& m,
                                                    const StrategyProfile& p,
                                                    const ValuePair& v,
                                                    double tol = kCertTol) {
  const int n = m.num_states();
  DeviationReport rep;
  rep.tol = tol;
  rep.leader_gain.assign(n, 0.0);
  rep.follower_gain.resize(n);
  rep.best_leader_deviation.assign(n, 0);
  rep.best_follower_deviation.resize(n);

  for (int s = 0; s < n; ++s) {
    const int nx = m.num_leader_actions(s);
    const int ne = m.num_follower_actions(s);
    rep.follower_gain[s].assign(nx, 0.0);
    rep.best_follower_deviation[s].assign(nx, 0);

    // Follower: at every (s,x), gain of the best effort over the specified one.
    for (int x = 0; x < nx; ++x) {
      const int chosen = p.follower[s][x];
      const double chosen_v =
          m.payoff_e[s][x][chosen] + m.discount * m.expected(v.w_e, s, x, chosen);
      double best_v = chosen_v;
      int best_e = chosen;
      for (int e = 0; e < ne; ++e) {
        const double val =
            m.payoff_e[s][x][e] + m.discount * m.expected(v.w_e, s, x, e);
        if (val > best_v) {
          best_v = val;
          best_e = e;
        }
      }
      rep.follower_gain[s][x] = best_v - chosen_v;
      rep.best_follower_deviation[s][x] = best_e;
      if (rep.follower_gain[s][x] > rep.max_gain) {
        rep.max_gain = rep.follower_gain[s][x];
        rep.worst_state = s;
        rep.worst_action = x;
      }
    }

    // Leader: best one-shot action against the follower's specified responses.
    const int on_x = p.leader[s];
    const double base = m.payoff_x[s][on_x][p.follower[s][on_x]] +
                        m.discount * m.expected(v.w_x, s, on_x, p.follower[s][on_x]);
    double best_v = base;
    int best_x = on_x;
    for (int x = 0; x < nx; ++x) {
      const int e = p.follower[s][x];
      const double val =
          m.payoff_x[s][x][e] + m.discount * m.expected(v.w_x, s, x, e);
      if (val > best_v) {
        best_v = val;
        best_x = x;
      }
    }
    rep.leader_gain[s] = best_v - base;
    rep.best_leader_deviation[s] = best_x;
    if (rep.leader_gain[s] > rep.max_gain) {
      rep.max_gain = rep.leader_gain[s];
      rep.worst_state = s;
      rep.worst_action = -1;
    }
  }
  return rep;
}

/// Re-evaluates the profile from scratch and reports all one-shot deviation
/// gains. This is the certification primitive: it never reuses values
/// produced by a solver.
inline DeviationReport one_shot_deviation_check(const GameModel& m,
                                                const StrategyProfile& p,
                                                double tol = kCertTol,
                                                double eval_tol = kValueTol) {
  const ValuePair v = evaluate_policies(m, p, eval_tol);
  return deviation_report_from_values(m, p, v, tol);
}

// ---------------------------------------------------------------------------
// Coupled best-response value iteration
// ---------------------------------------------------------------------------

struct MseOptions {
  double tol = kCertTol;       // certification tolerance
  double eval_tol = kValueTol; // policy-evaluation tolerance
  long max_sweeps = 30000;
  // Damped in-place sweeps keep the same fixed points but break the
  // period-two orbits that plain synchronous best-response iteration falls
  // into on strongly coupled models.
  double damping = 0.5;        // weight on the fresh backup, in (0, 1]
  bool in_place = true;        // update values within the sweep
  // When the iteration chatters between near-indifferent policies instead of
  // settling, the recently visited profiles are certified outright; the
  // first one passing the one-shot deviation test is returned.
  int candidate_pool = 16;
  long first_checkpoint = 256;
};

struct MseSolution {
  StrategyProfile profile;
  ValuePair values;
  DeviationReport certificate;
  long sweeps = 0;
  double residual = 0.0;
};

/// Solves for a Markov-Stackelberg equilibrium by nested best-response value
/// iteration: each sweep recomputes the follower's best response to the
/// current continuation values at every (s,x), then the leader's best action
/// anticipating it. Certification is always a separate recomputation, so a
/// spurious fixed point cannot be silently accepted.
///
/// Throws SolveError when the coupled iteration fails to produce a certified
/// profile within max_sweeps; best-response iteration on the coupled system
/// is not globally a contraction, and some models (including TOY-3 at high
/// discount) genuinely have no pure stationary MPE.
inline MseSolution solve_mse(const GameModel& m, const MseOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ModelError("solve_mse: tol must be > 0");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw ModelError("solve_mse: damping must be in (0,1]");
  const int n = m.num_states();
  std::vector<double> w_x(n, 0.0), w_e(n, 0.0), nw_x(n), nw_e(n);
  StrategyProfile prof;
  prof.leader.assign(n, 0);
  prof.follower.resize(n);
  for (int s = 0; s < n; ++s) prof.follower[s].assign(m.num_leader_actions(s), 0);
  StrategyProfile prev = prof;
  long stable = 0;

  // Recently visited distinct profiles, oldest first.
  std::vector<StrategyProfile> pool;
  auto remember = [&](const StrategyProfile& p) {
    for (const auto& q : pool)
      if (q == p) return;
    pool.push_back(p);
    if (static_cast<int>(pool.size()) > opt.candidate_pool)
      pool.erase(pool.begin());
  };
  auto certify = [&](const StrategyProfile& p) -> std::optional<MseSolution> {
    MseSolution sol;
    sol.profile = p;
    sol.values = evaluate_policies(m, p, opt.eval_tol);
    sol.certificate = deviation_report_from_values(m, p, sol.values, opt.tol);
    if (!sol.certificate.certified()) return std::nullopt;
    return sol;
  };

  const double iter_tol = std::min(opt.tol, opt.eval_tol) * (1.0 - m.discount) * 0.5;
  double res = 0.0;
  long checkpoint = opt.first_checkpoint;
  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    res = 0.0;
    for (int s = 0; s < n; ++s) {
      int best_x = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int x = 0; x < m.num_leader_actions(s); ++x) {
        const int e = follower_best_response(m, w_e, s, x);
        prof.follower[s][x] = e;
        const double q =
            m.payoff_x[s][x][e] + m.discount * m.expected(w_x, s, x, e);
        if (q > best_q) {
          best_q = q;
          best_x = x;
        }
      }
      prof.leader[s] = best_x;
      const int e_on = prof.follower[s][best_x];
      const double tx = best_q;
      const double te = m.payoff_e[s][best_x][e_on] +
                        m.discount * m.expected(w_e, s, best_x, e_on);
      res = std::max(res, std::max(std::abs(tx - w_x[s]), std::abs(te - w_e[s])));
      if (opt.in_place) {
        w_x[s] = (1.0 - opt.damping) * w_x[s] + opt.damping * tx;
        w_e[s] = (1.0 - opt.damping) * w_e[s] + opt.damping * te;
      } else {
        nw_x[s] = (1.0 - opt.damping) * w_x[s] + opt.damping * tx;
        nw_e[s] = (1.0 - opt.damping) * w_e[s] + opt.damping * te;
      }
    }
    if (!opt.in_place) {
      w_x = nw_x;
      w_e = nw_e;
    }
    stable = (prof == prev) ? stable + 1 : 0;
    remember(prof);

    if (res <= iter_tol && stable >= 2) {
      if (auto sol = certify(prof)) {
        sol->sweeps = sweep;
        sol->residual = res;
        return *sol;
      }
      throw SolveError("solve_mse: iteration fixed point failed certification",
                       res);
    }
    if (sweep == checkpoint) {
      checkpoint *= 2;
      for (const StrategyProfile& cand : pool)
        if (auto sol = certify(cand)) {
          sol->sweeps = sweep;
          sol->residual = res;
          return *sol;
        }
    }
    prev = prof;
  }
  for (const StrategyProfile& cand : pool)
    if (auto sol = certify(cand)) {
      sol->sweeps = opt.max_sweeps;
      sol->residual = res;
      return *sol;
    }
  throw SolveError("solve_mse: no convergence within sweep budget", res);
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration
// ---------------------------------------------------------------------------

struct EnumerateOptions {
  double tol = kCertTol;
  double eval_tol = kValueTol;
  unsigned long long budget = kDefaultBudget;
};

/// Number of pure stationary profiles: Prod_s |X(s)| * Prod_{s,x} |E(s)|.
/// Saturates at a large sentinel instead of overflowing.
inline unsigned long long profile_space_size(const GameModel& m) {
  const unsigned long long cap = ~0ULL / 4;
  unsigned long long total = 1;
  auto mul = [&](unsigned long long f) {
    if (f == 0) { total = 0; return; }
    if (total > cap / f) total = cap;
    else total *= f;
  };
  for (int s = 0; s < m.num_states(); ++s) {
    mul(static_cast<unsigned long long>(m.num_leader_actions(s)));
    for (int x = 0; x < m.num_leader_actions(s); ++x) {
      (void)x;
      mul(static_cast<unsigned long long>(m.num_follower_actions(s)));
    }
  }
  return total;
}

/// Exhaustively certifies every pure stationary profile and returns the ones
/// whose one-shot deviation gains stay within tol.
///
/// The loop factors the search: values depend only on on-path behavior, so
/// they are computed once per (leader map, on-path effort) combination and
/// off-path effort choices are filled in from the cached deviation tables.
/// The result is identical to testing every full profile one by one.
inline EquilibriumSet enumerate_stationary_mpe(const GameModel& m,
                                               const EnumerateOptions& opt = {}) {
  const unsigned long long space = profile_space_size(m);
  if (space > opt.budget)
    throw BudgetError("enumerate_stationary_mpe: profile space " +
                          std::to_string(space) + " exceeds budget " +
                          std::to_string(opt.budget),
                      space, opt.budget);

  const int n = m.num_states();
  EquilibriumSet out;
  out.fingerprint = m.fingerprint();
  out.tol = opt.tol;
  out.exhaustive = true;

  const bool direct_eval = n <= 256;
  EvalOptions eval_opt;
  eval_opt.tol = opt.eval_tol;
  eval_opt.direct = direct_eval;

  std::vector<int> leader(n, 0);
  std::vector<int> e_on(n, 0);

  // Scratch tables reused across combinations.
  std::vector<std::vector<double>> lv(n), bv_best(n);
  std::vector<std::vector<std::vector<double>>> bv(n);
  for (int s = 0; s < n; ++s) {
    const int nx = m.num_leader_actions(s);
    lv[s].assign(nx, 0.0);
    bv_best[s].assign(nx, 0.0);
    bv[s].assign(nx, std::vector<double>(m.num_follower_actions(s), 0.0));
  }

  StrategyProfile prof;
  prof.leader.assign(n, 0);
  prof.follower.resize(n);
  for (int s = 0; s < n; ++s) prof.follower[s].assign(m.num_leader_actions(s), 0);

  auto advance = [](std::vector<int>& digits, auto radix) {
    for (size_t i = 0; i < digits.size(); ++i) {
      if (++digits[i] < radix(i)) return true;
      digits[i] = 0;
    }
    return false;
  };

  do {  // leader maps
    e_on.assign(n, 0);
    do {  // on-path efforts
      prof.leader = leader;
      for (int s = 0; s < n; ++s) prof.follower[s][leader[s]] = e_on[s];
      ValuePair v = evaluate_policies(m, prof, eval_opt);

      bool viable_combo = true;
      for (int s = 0; s < n && viable_combo; ++s) {
        const int nx = m.num_leader_actions(s);
        const int ne = m.num_follower_actions(s);
        for (int x = 0; x < nx; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          for (int e = 0; e < ne; ++e) {
            bv[s][x][e] =
                m.payoff_e[s][x][e] + m.discount * m.expected(v.w_e, s, x, e);
            best = std::max(best, bv[s][x][e]);
          }
          bv_best[s][x] = best;
        }
        // On-path follower optimality prunes the whole combination.
        if (bv[s][leader[s]][e_on[s]] < bv_best[s][leader[s]] - opt.tol)
          viable_combo = false;
      }
      if (!viable_combo) continue;

      // Admissible off-path efforts: follower-optimal and not handing the
      // leader a profitable one-shot deviation.
      std::vector<std::vector<std::vector<int>>> admissible(n);
      std::vector<std::pair<int, int>> slot_sx;  // off-path (s,x) to fill
      bool dead = false;
      for (int s = 0; s < n && !dead; ++s) {
        const int nx = m.num_leader_actions(s);
        admissible[s].assign(nx, {});
        const int ex = e_on[s];
        const double v_on = m.payoff_x[s][leader[s]][ex] +
                            m.discount * m.expected(v.w_x, s, leader[s], ex);
        for (int x = 0; x < nx; ++x) {
          if (x == leader[s]) {
            admissible[s][x] = {e_on[s]};
            continue;
          }
          for (int e = 0; e < m.num_follower_actions(s); ++e) {
            if (bv[s][x][e] < bv_best[s][x] - opt.tol) continue;
            const double dev = m.payoff_x[s][x][e] +
                               m.discount * m.expected(v.w_x, s, x, e);
            if (dev > v_on + opt.tol) continue;
            admissible[s][x].push_back(e);
          }
          if (admissible[s][x].empty()) {
            dead = true;
            break;
          }
          slot_sx.emplace_back(s, x);
        }
      }
      if (dead) continue;

      std::vector<int> choice(slot_sx.size(), 0);
      bool more = true;
      while (more) {
        for (size_t i = 0; i < slot_sx.size(); ++i) {
          auto [s, x] = slot_sx[i];
          prof.follower[s][x] = admissible[s][x][choice[i]];
        }
        CertifiedProfile cp;
        cp.profile = prof;
        cp.values = v;
        cp.report = deviation_report_from_values(m, prof, v, opt.tol);
        if (cp.report.certified()) out.members.push_back(std::move(cp));
        more = advance(choice, [&](size_t i) {
          auto [s, x] = slot_sx[i];
          return static_cast<int>(admissible[s][x].size());
        });
      }
    } while (advance(e_on, [&](size_t s) { return m.num_follower_actions(static_cast<int>(s)); }));
  } while (advance(leader, [&](size_t s) { return m.num_leader_actions(static_cast<int>(s)); }));

  std::sort(out.members.begin(), out.members.end(),
            [](const CertifiedProfile& a, const CertifiedProfile& b) {
              return a.profile < b.profile;
            });
  return out;
}

}  // namespace see
