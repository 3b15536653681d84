#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "see/common.hpp"

namespace see {

/// One entry of a finite-support next-state distribution.
struct Transition {
  int next = 0;
  double prob = 0.0;
  bool operator==(const Transition&) const = default;
};

/// Finite-support distribution over next states.
using Support = std::vector<Transition>;

/// A two-player dynamic game on finite grids. The leader (exploiter) moves
/// first each period, the follower (exploitee) responds after observing the
/// leader's action, and the state then transitions through `kernel`.
///
/// All tables are indexed [state][leader-action][follower-effort] with
/// per-state action sets, so action index j at state s refers to
/// leader_actions[s][j]. A deterministic law of motion is a point-mass kernel.
struct GameModel {
  std::string name;
  std::vector<double> states;                        // state labels
  std::vector<std::vector<double>> leader_actions;   // X(s), action labels
  std::vector<std::vector<double>> follower_actions; // E(s), effort labels
  std::vector<std::vector<std::vector<double>>> payoff_x;
  std::vector<std::vector<std::vector<double>>> payoff_e;
  std::vector<std::vector<std::vector<Support>>> kernel;
  double discount = 0.9;
  double payoff_bound = 1.0;
  int initial_state = 0;

  int num_states() const { return static_cast<int>(states.size()); }
  int num_leader_actions(int s) const { return static_cast<int>(leader_actions[s].size()); }
  int num_follower_actions(int s) const { return static_cast<int>(follower_actions[s].size()); }

  /// Expected continuation Sum_s' Q(s'|s,x,e) * w[s'].
  double expected(const std::vector<double>& w, int s, int x, int e) const {
    double acc = 0.0;
    for (const Transition& t : kernel[s][x][e]) acc += t.prob * w[t.next];
    return acc;
  }

  /// Stable content hash used to tie serialized results back to the model.
  std::string fingerprint() const {
    std::ostringstream os;
    os << name << '|' << num_states() << '|' << format_g12(discount) << '|'
       << format_g12(payoff_bound) << '|' << initial_state;
    for (double v : states) os << '|' << format_g12(v);
    for (int s = 0; s < num_states(); ++s) {
      os << "|A";
      for (double v : leader_actions[s]) os << ' ' << format_g12(v);
      os << "|E";
      for (double v : follower_actions[s]) os << ' ' << format_g12(v);
      for (int x = 0; x < num_leader_actions(s); ++x)
        for (int e = 0; e < num_follower_actions(s); ++e) {
          os << "|P " << format_g12(payoff_x[s][x][e]) << ' '
             << format_g12(payoff_e[s][x][e]) << "|K";
          for (const Transition& t : kernel[s][x][e])
            os << ' ' << t.next << ':' << format_g12(t.prob);
        }
    }
    return to_hex(fnv1a64(os.str()));
  }
};

/// A stationary pure-strategy profile. leader[s] indexes leader_actions[s];
/// follower[s][x] indexes follower_actions[s] and is total over all (s,x),
/// including leader actions off the equilibrium path.
struct StrategyProfile {
  std::vector<int> leader;
  std::vector<std::vector<int>> follower;
  bool operator==(const StrategyProfile&) const = default;
  bool operator<(const StrategyProfile& o) const {
    if (leader != o.leader) return leader < o.leader;
    return follower < o.follower;
  }
};

/// Discounted values per state for both players.
struct ValuePair {
  std::vector<double> w_x;
  std::vector<double> w_e;
};

/// Sustainability set V plus (optionally) a safe-action certificate per
/// member state. safe_action is empty when no certificate is supplied;
/// otherwise it has one entry per state with -1 outside V.
struct ViabilitySet {
  std::vector<int> members;       // sorted state indices
  std::vector<int> safe_action;   // empty, or size num_states with -1 = none

  bool contains(int s) const {
    return std::binary_search(members.begin(), members.end(), s);
  }
  bool has_safe_action() const { return !safe_action.empty(); }
};

inline ViabilitySet make_viability(std::vector<int> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  return ViabilitySet{std::move(members), {}};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string invariant;  // which check failed
  std::string where;      // offending (s,x,e) or field
  std::string detail;
  bool warning = false;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const {
    return std::none_of(issues.begin(), issues.end(),
                        [](const ValidationIssue& i) { return !i.warning; });
  }
  bool clean() const { return issues.empty(); }
  std::string summary() const {
    if (issues.empty()) return "all checks passed";
    std::ostringstream os;
    for (const auto& i : issues)
      os << (i.warning ? "warning" : "error") << ": " << i.invariant << " at "
         << i.where << ": " << i.detail << '\n';
    return os.str();
  }
};

struct ValidateOptions {
  double kernel_tol = kKernelTol;
  // The exploiter's stage payoff is expected to be weakly increasing in the
  // extraction action; set false for user models that break the shape.
  bool check_monotone_payoff_x = true;
};

inline std::string sxe(int s, int x, int e) {
  std::ostringstream os;
  os << "(s=" << s << ",x=" << x << ",e=" << e << ")";
  return os.str();
}

/// Checks every structural invariant of the model and reports violations
/// with the offending indices. Never mutates the model.
inline ValidationReport validate_model(const GameModel& m,
                                       const ValidateOptions& opt = {}) {
  ValidationReport rep;
  auto fail = [&](std::string inv, std::string where, std::string detail,
                  bool warn = false) {
    rep.issues.push_back(
        {std::move(inv), std::move(where), std::move(detail), warn});
  };

  const int n = m.num_states();
  if (n == 0) fail("nonempty-states", "states", "model has no states");
  if (!(m.discount > 0.0 && m.discount < 1.0))
    fail("discount-in-(0,1)", "discount", format_g12(m.discount));
  if (static_cast<int>(m.leader_actions.size()) != n ||
      static_cast<int>(m.follower_actions.size()) != n ||
      static_cast<int>(m.payoff_x.size()) != n ||
      static_cast<int>(m.payoff_e.size()) != n ||
      static_cast<int>(m.kernel.size()) != n) {
    fail("table-shape", "model", "per-state tables do not match state count");
    return rep;  // cannot check further safely
  }

  for (int s = 0; s < n; ++s) {
    const int nx = m.num_leader_actions(s);
    const int ne = m.num_follower_actions(s);
    if (nx == 0) fail("nonempty-actions", "leader_actions[" + std::to_string(s) + "]", "empty");
    if (ne == 0) fail("nonempty-actions", "follower_actions[" + std::to_string(s) + "]", "empty");
    if (static_cast<int>(m.payoff_x[s].size()) != nx ||
        static_cast<int>(m.payoff_e[s].size()) != nx ||
        static_cast<int>(m.kernel[s].size()) != nx) {
      fail("table-shape", "state " + std::to_string(s), "action dimension mismatch");
      continue;
    }
    for (int x = 0; x < nx; ++x) {
      if (static_cast<int>(m.payoff_x[s][x].size()) != ne ||
          static_cast<int>(m.payoff_e[s][x].size()) != ne ||
          static_cast<int>(m.kernel[s][x].size()) != ne) {
        fail("table-shape", "(s=" + std::to_string(s) + ",x=" + std::to_string(x) + ")",
             "effort dimension mismatch");
        continue;
      }
      for (int e = 0; e < ne; ++e) {
        double sum = 0.0;
        for (const Transition& t : m.kernel[s][x][e]) {
          if (t.next < 0 || t.next >= n)
            fail("kernel-target-range", sxe(s, x, e),
                 "next state " + std::to_string(t.next) + " out of range");
          if (t.prob < 0.0)
            fail("kernel-nonnegative", sxe(s, x, e),
                 "mass " + format_g12(t.prob) + " < 0");
          sum += t.prob;
        }
        if (std::abs(sum - 1.0) > opt.kernel_tol)
          fail("kernel-normalized", sxe(s, x, e),
               "row sums to " + format_g12(sum));
        for (double v : {m.payoff_x[s][x][e], m.payoff_e[s][x][e]})
          if (std::abs(v) > m.payoff_bound)
            fail("payoff-bounded", sxe(s, x, e),
                 format_g12(v) + " exceeds bound " + format_g12(m.payoff_bound));
      }
      if (opt.check_monotone_payoff_x && x + 1 < nx) {
        for (int e = 0; e < ne; ++e)
          if (m.payoff_x[s][x + 1][e] < m.payoff_x[s][x][e] - 1e-15)
            fail("payoff-x-weakly-increasing", sxe(s, x, e),
                 format_g12(m.payoff_x[s][x][e]) + " > " +
                     format_g12(m.payoff_x[s][x + 1][e]) + " at next action",
                 /*warn=*/true);
      }
    }
  }
  return rep;
}

inline void require_profile_valid(const GameModel& m, const StrategyProfile& p) {
  const int n = m.num_states();
  if (static_cast<int>(p.leader.size()) != n ||
      static_cast<int>(p.follower.size()) != n)
    throw ModelError("profile does not match model state count");
  for (int s = 0; s < n; ++s) {
    if (p.leader[s] < 0 || p.leader[s] >= m.num_leader_actions(s))
      throw ModelError("leader action index out of range at state " + std::to_string(s));
    if (static_cast<int>(p.follower[s].size()) != m.num_leader_actions(s))
      throw ModelError("follower map not total at state " + std::to_string(s));
    for (int e : p.follower[s])
      if (e < 0 || e >= m.num_follower_actions(s))
        throw ModelError("follower effort index out of range at state " + std::to_string(s));
  }
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

struct EvalOptions {
  double tol = kValueTol;
  long max_sweeps = 0;   // 0 = derive from the contraction bound
  bool direct = false;   // solve the linear system instead of sweeping
};

namespace detail {

/// Gaussian elimination with partial pivoting for (I - delta*P) w = u, solved
/// for both players at once. `rows[s]` is the induced kernel row at s.
inline void solve_linear_two_rhs(const std::vector<Support>& rows, double delta,
                                 const std::vector<double>& ux,
                                 const std::vector<double>& ue,
                                 std::vector<double>& wx,
                                 std::vector<double>& we) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
  for (int s = 0; s < n; ++s) {
    a[static_cast<size_t>(s) * n + s] = 1.0;
    for (const Transition& t : rows[s])
      a[static_cast<size_t>(s) * n + t.next] -= delta * t.prob;
  }
  std::vector<double> bx = ux, be = ue;
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[static_cast<size_t>(r) * n + col]) >
          std::abs(a[static_cast<size_t>(best) * n + col]))
        best = r;
    if (best != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<size_t>(col) * n + c], a[static_cast<size_t>(best) * n + c]);
      std::swap(bx[col], bx[best]);
      std::swap(be[col], be[best]);
    }
    const double pivot = a[static_cast<size_t>(col) * n + col];
    if (pivot == 0.0) throw SolveError("singular policy-evaluation system", 0.0);
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<size_t>(r) * n + col] / pivot;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
      bx[r] -= f * bx[col];
      be[r] -= f * be[col];
    }
  }
  wx.assign(n, 0.0);
  we.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double sx = bx[r], se = be[r];
    for (int c = r + 1; c < n; ++c) {
      sx -= a[static_cast<size_t>(r) * n + c] * wx[c];
      se -= a[static_cast<size_t>(r) * n + c] * we[c];
    }
    wx[r] = sx / a[static_cast<size_t>(r) * n + r];
    we[r] = se / a[static_cast<size_t>(r) * n + r];
  }
}

inline long default_sweep_budget(const GameModel& m, double tol) {
  const double span = 2.0 * m.payoff_bound / (1.0 - m.discount) + 1.0;
  const double k = std::log(std::max(tol, 1e-300) / span) / std::log(m.discount);
  const double capped = std::min(k + 64.0, 10e6);
  return static_cast<long>(std::max(capped, 64.0));
}

}  // namespace detail

/// Markov chain on states induced by playing a fixed profile: row s is the
/// kernel row at (s, leader[s], follower[s][leader[s]]).
inline std::vector<Support> induced_kernel(const GameModel& m,
                                           const StrategyProfile& p) {
  require_profile_valid(m, p);
  std::vector<Support> rows(m.num_states());
  for (int s = 0; s < m.num_states(); ++s) {
    const int x = p.leader[s];
    rows[s] = m.kernel[s][x][p.follower[s][x]];
  }
  return rows;
}

/// Fixed point of the policy-evaluation recursion
///   W_i(s) = u_i(s, policy) + delta * E[W_i(s')]
/// for both players, with sup-norm recursion residual <= tol.
inline ValuePair evaluate_policies(const GameModel& m, const StrategyProfile& p,
                                   const EvalOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ModelError("evaluate_policies: tol must be > 0");
  require_profile_valid(m, p);
  const int n = m.num_states();
  std::vector<Support> rows = induced_kernel(m, p);
  std::vector<double> ux(n), ue(n);
  for (int s = 0; s < n; ++s) {
    const int x = p.leader[s];
    const int e = p.follower[s][x];
    ux[s] = m.payoff_x[s][x][e];
    ue[s] = m.payoff_e[s][x][e];
  }

  ValuePair v;
  if (opt.direct) {
    detail::solve_linear_two_rhs(rows, m.discount, ux, ue, v.w_x, v.w_e);
    return v;
  }

  v.w_x.assign(n, 0.0);
  v.w_e.assign(n, 0.0);
  std::vector<double> nx(n), ne(n);
  const long budget = opt.max_sweeps > 0 ? opt.max_sweeps
                                         : detail::default_sweep_budget(m, opt.tol);
  double res = 0.0;
  for (long sweep = 0; sweep < budget; ++sweep) {
    res = 0.0;
    for (int s = 0; s < n; ++s) {
      double cx = 0.0, ce = 0.0;
      for (const Transition& t : rows[s]) {
        cx += t.prob * v.w_x[t.next];
        ce += t.prob * v.w_e[t.next];
      }
      nx[s] = ux[s] + m.discount * cx;
      ne[s] = ue[s] + m.discount * ce;
      res = std::max(res, std::max(std::abs(nx[s] - v.w_x[s]),
                                   std::abs(ne[s] - v.w_e[s])));
    }
    v.w_x.swap(nx);
    v.w_e.swap(ne);
    // One more application of the sweep contracts the residual by delta,
    // so stopping here leaves the returned values within tol of the recursion.
    if (res <= opt.tol) return v;
  }
  throw SolveError("policy evaluation did not reach tol within sweep budget", res);
}

inline ValuePair evaluate_policies(const GameModel& m, const StrategyProfile& p,
                                   double tol) {
  EvalOptions opt;
  opt.tol = tol;
  return evaluate_policies(m, p, opt);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct TrajectoryStep {
  int state = 0;
  int x = 0;  // leader action index
  int e = 0;  // follower effort index
  double u_x = 0.0;
  double u_e = 0.0;
};

/// Plays the profile from `start` for `horizon` periods. The path is a
/// deterministic function of the seed; point-mass kernel rows never consume
/// randomness, so fully deterministic models ignore the seed entirely.
inline std::vector<TrajectoryStep> simulate_trajectory(
    const GameModel& m, const StrategyProfile& p, int start, long horizon,
    std::uint64_t seed) {
  require_profile_valid(m, p);
  if (horizon < 1) throw ModelError("simulate_trajectory: horizon must be >= 1");
  if (start < 0 || start >= m.num_states())
    throw ModelError("simulate_trajectory: start state out of range");

  std::mt19937_64 rng(seed);
  auto uniform01 = [&rng]() {
    return (rng() >> 11) * 0x1.0p-53;  // 53-bit mantissa, platform-stable
  };

  std::vector<TrajectoryStep> out;
  out.reserve(static_cast<size_t>(horizon));
  int s = start;
  for (long t = 0; t < horizon; ++t) {
    const int x = p.leader[s];
    const int e = p.follower[s][x];
    out.push_back({s, x, e, m.payoff_x[s][x][e], m.payoff_e[s][x][e]});
    const Support& row = m.kernel[s][x][e];
    if (row.size() == 1) {
      s = row[0].next;
    } else {
      const double u = uniform01();
      double acc = 0.0;
      int next = row.back().next;
      for (const Transition& tr : row) {
        acc += tr.prob;
        if (u < acc) {
          next = tr.next;
          break;
        }
      }
      s = next;
    }
  }
  return out;
}

}  // namespace see
