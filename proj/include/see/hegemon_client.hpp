#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "see/refine.hpp"
#include "see/solver.hpp"

namespace see {

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;
};

/// How off-grid next states enter the kernel. Interpolation spreads the mass
/// over the two bracketing grid points (weights summing to one, expected
/// label equal to the continuous next state), which keeps value functions
/// smooth enough for derivative work; nearest-point snapping gives a fully
/// deterministic chain but quantizes the dynamics.
enum class SnapRule { interpolate, nearest };

/// Parametric hegemon-client primitives. The functional families are the
/// simplest ones satisfying the required shapes; every coefficient is
/// user-configurable and the shapes are re-checked numerically on the grid.
///
///   pi(x)  = alpha * x^(0.5+rho)                    extraction benefit
///   k(s,e) = kappa0 + kappa1*e + kappa2/(1+s)       monitoring cost and
///                                                   instability spillovers
///   b(s)   = beta * s                               capacity benefit
///   phi(e) = 0.5*gamma*e^2 + phi1*e + 0.25*phi2*e^4  effort cost, phi'(0)=0
///   d(x)   = eta * x                                extraction burden
///   f(s,e) = growth*s + a*e - c*s^2                 regeneration
///   h(x)   = lambda * x                             extraction drain
///
/// The kappa2 spillover term makes low client capacity costly to the hegemon
/// independently of the extraction scale alpha, which is what separates the
/// interior and boundary regimes as alpha sweeps up.
struct HCParams {
  double alpha = 0.25;
  double rho = 0.25;
  double kappa0 = 0.1;
  double kappa1 = 0.0;
  double kappa2 = 1.5;
  double beta = 1.0;
  double gamma = 0.5;
  double phi1 = 0.0;
  double phi2 = 8.0;
  double eta = 0.5;
  double growth = 1.25;
  double a = 0.1;
  double c = 0.05;
  double lambda = 1.0;
  double s_min = 0.5;
  double discount = 0.5;
  double s_init = std::numeric_limits<double>::quiet_NaN();  // NaN = 3/4 up V
  SnapRule snap = SnapRule::interpolate;
  GridSpec s_grid{0.0, 4.0, 201};
  GridSpec x_grid{0.0, 2.0, 41};
  GridSpec e_grid{0.0, 1.0, 41};

  double pi(double x) const { return x <= 0.0 ? 0.0 : alpha * std::pow(x, 0.5 + rho); }
  double pi_p(double x) const { return alpha * (0.5 + rho) * std::pow(x, rho - 0.5); }
  double k(double s, double e) const { return kappa0 + kappa1 * e + kappa2 / (1.0 + s); }
  double k_e(double s, double e) const { (void)s; (void)e; return kappa1; }
  double b(double s) const { return beta * s; }
  double phi(double e) const {
    return 0.5 * gamma * e * e + phi1 * e + 0.25 * phi2 * e * e * e * e;
  }
  double phi_p(double e) const { return gamma * e + phi1 + phi2 * e * e * e; }
  double phi_pp(double e) const { return gamma + 3.0 * phi2 * e * e; }
  double d(double x) const { return eta * x; }
  double f(double s, double e) const { return growth * s + a * e - c * s * s; }
  double f_s(double s, double e) const { (void)e; return growth - 2.0 * c * s; }
  double f_e(double s, double e) const { (void)s; (void)e; return a; }
  double f_ee(double s, double e) const { (void)s; (void)e; return 0.0; }
  double h(double x) const { return lambda * x; }
  double h_p(double x) const { (void)x; return lambda; }
};

struct ShapeIssue {
  std::string property;
  std::string where;
  double value = 0.0;
};

class ShapeError : public ModelError {
 public:
  ShapeError(const std::string& what, std::vector<ShapeIssue> issues)
      : ModelError(what), issues(std::move(issues)) {}
  std::vector<ShapeIssue> issues;
};

/// Numeric shape checks on the tabulated primitives. pi must be strictly
/// increasing; b, d, h, f weakly increasing; phi convex with phi'(0)=0
/// (checked by a second-order one-sided difference at zero); k nonnegative.
inline std::vector<ShapeIssue> check_hc_shapes(const HCParams& p) {
  std::vector<ShapeIssue> issues;
  const auto sg = linspace(p.s_grid.lo, p.s_grid.hi, p.s_grid.count);
  const auto xg = linspace(p.x_grid.lo, p.x_grid.hi, p.x_grid.count);
  const auto eg = linspace(p.e_grid.lo, p.e_grid.hi, p.e_grid.count);
  const double tol = 1e-12;
  auto at = [](double v) {
    return "grid point " + format_g12(v);
  };

  for (size_t i = 0; i + 1 < xg.size(); ++i) {
    if (p.pi(xg[i + 1]) <= p.pi(xg[i]) + tol)
      issues.push_back({"pi strictly increasing", at(xg[i]), p.pi(xg[i + 1]) - p.pi(xg[i])});
    if (p.d(xg[i + 1]) < p.d(xg[i]) - tol)
      issues.push_back({"d weakly increasing", at(xg[i]), p.d(xg[i + 1]) - p.d(xg[i])});
    if (p.h(xg[i + 1]) < p.h(xg[i]) - tol)
      issues.push_back({"h weakly increasing", at(xg[i]), p.h(xg[i + 1]) - p.h(xg[i])});
  }
  for (size_t i = 0; i + 1 < sg.size(); ++i) {
    if (p.b(sg[i + 1]) < p.b(sg[i]) - tol)
      issues.push_back({"b weakly increasing", at(sg[i]), p.b(sg[i + 1]) - p.b(sg[i])});
    for (double e : {eg.front(), eg.back()})
      if (p.f(sg[i + 1], e) < p.f(sg[i], e) - tol)
        issues.push_back({"f increasing in s", at(sg[i]), p.f(sg[i + 1], e) - p.f(sg[i], e)});
  }
  for (size_t i = 0; i + 1 < eg.size(); ++i) {
    for (double s : {sg.front(), sg.back()})
      if (p.f(s, eg[i + 1]) < p.f(s, eg[i]) - tol)
        issues.push_back({"f increasing in e", at(eg[i]), p.f(s, eg[i + 1]) - p.f(s, eg[i])});
    if (i + 2 < eg.size()) {
      const double second = p.phi(eg[i + 2]) - 2.0 * p.phi(eg[i + 1]) + p.phi(eg[i]);
      if (second < -1e-9)
        issues.push_back({"phi convex", at(eg[i + 1]), second});
    }
  }
  if (std::abs(p.phi_p(eg.front())) > 1e-12)
    issues.push_back({"phi'(0) = 0", at(eg.front()), p.phi_p(eg.front())});
  if (eg.size() >= 3) {
    const double de = eg[1] - eg[0];
    if (de > 0) {
      // Second-order one-sided slope at e = 0, corroborating the analytic
      // check to the discretization order of the estimator.
      const double slope0 =
          (-3.0 * p.phi(eg[0]) + 4.0 * p.phi(eg[1]) - p.phi(eg[2])) / (2.0 * de);
      const double scale = std::max(1.0, std::abs(p.phi(eg.back())));
      if (std::abs(slope0) > std::max(1e-6, 25.0 * de * de * de * scale))
        issues.push_back({"phi'(0) = 0 (numeric)", at(eg[0]), slope0});
    }
  }
  for (double s : {sg.front(), sg.back()})
    for (double e : {eg.front(), eg.back()})
      if (p.k(s, e) < -tol)
        issues.push_back({"k nonnegative", at(s), p.k(s, e)});
  if (!(p.discount > 0.0 && p.discount < 1.0))
    issues.push_back({"discount in (0,1)", "discount", p.discount});
  if (!(p.s_min >= p.s_grid.lo && p.s_min <= p.s_grid.hi))
    issues.push_back({"s_min inside state grid", "s_min", p.s_min});
  return issues;
}

/// The grid game built from HC primitives, with bookkeeping kept for the
/// first-order-condition analysis.
struct HCModel {
  HCParams params;
  GameModel game;
  ViabilitySet viability;
  std::vector<double> s_grid, x_grid, e_grid;
  std::vector<std::vector<int>> feasible_x;  // x-grid indices kept in X(s)
  int first_viable = 0;                      // lowest state index in V

  double state_step() const {
    return s_grid.size() > 1 ? s_grid[1] - s_grid[0] : 0.0;
  }
};

/// Builds the grid model: u^H = pi(x) - k(s,e), u^C = b(s) - phi(e) - d(x),
/// deterministic kernel snapping f(s,e) - h(x) to the nearest grid point
/// (half-up), viability V = {s >= s_min}. Feasible extraction at a viable
/// state is limited by the outer relaxation x <= f(s, e_max) - s_min; states
/// below s_min are absorbing collapse states with a single null action.
inline HCModel build_hc_model(const HCParams& params) {
  if (auto issues = check_hc_shapes(params); !issues.empty()) {
    std::string what = "hegemon-client shape checks failed:";
    for (const auto& i : issues)
      what += "\n  " + i.property + " violated at " + i.where +
              " (value " + format_g12(i.value) + ")";
    throw ShapeError(what, std::move(issues));
  }

  HCModel hc;
  hc.params = params;
  hc.s_grid = linspace(params.s_grid.lo, params.s_grid.hi, params.s_grid.count);
  hc.x_grid = linspace(params.x_grid.lo, params.x_grid.hi, params.x_grid.count);
  hc.e_grid = linspace(params.e_grid.lo, params.e_grid.hi, params.e_grid.count);

  const int n = static_cast<int>(hc.s_grid.size());
  GameModel& m = hc.game;
  m.name = "hegemon-client";
  m.discount = params.discount;
  m.states = hc.s_grid;
  m.leader_actions.resize(n);
  m.follower_actions.resize(n);
  m.payoff_x.resize(n);
  m.payoff_e.resize(n);
  m.kernel.resize(n);
  hc.feasible_x.resize(n);

  std::vector<int> members;
  hc.first_viable = -1;
  const double e_max = hc.e_grid.back();
  double bound = 0.0;

  for (int i = 0; i < n; ++i) {
    const double s = hc.s_grid[i];
    const bool viable = s >= params.s_min - 1e-12;
    if (viable) {
      members.push_back(i);
      if (hc.first_viable < 0) hc.first_viable = i;
      const double cap = params.f(s, e_max) - params.s_min;
      for (int j = 0; j < static_cast<int>(hc.x_grid.size()); ++j)
        if (hc.x_grid[j] <= cap + 1e-12) hc.feasible_x[i].push_back(j);
      if (hc.feasible_x[i].empty()) hc.feasible_x[i].push_back(0);
      const int nx = static_cast<int>(hc.feasible_x[i].size());
      const int ne = static_cast<int>(hc.e_grid.size());
      m.leader_actions[i].resize(nx);
      for (int j = 0; j < nx; ++j) m.leader_actions[i][j] = hc.x_grid[hc.feasible_x[i][j]];
      m.follower_actions[i] = hc.e_grid;
      m.payoff_x[i].assign(nx, std::vector<double>(ne));
      m.payoff_e[i].assign(nx, std::vector<double>(ne));
      m.kernel[i].assign(nx, std::vector<Support>(ne));
      for (int j = 0; j < nx; ++j) {
        const double x = m.leader_actions[i][j];
        for (int l = 0; l < ne; ++l) {
          const double e = hc.e_grid[l];
          m.payoff_x[i][j][l] = params.pi(x) - params.k(s, e);
          m.payoff_e[i][j][l] = params.b(s) - params.phi(e) - params.d(x);
          bound = std::max({bound, std::abs(m.payoff_x[i][j][l]),
                            std::abs(m.payoff_e[i][j][l])});
          const double next_real =
              std::clamp(params.f(s, e) - params.h(x), hc.s_grid.front(), hc.s_grid.back());
          if (params.snap == SnapRule::nearest) {
            m.kernel[i][j][l] = Support{{nearest_index(hc.s_grid, next_real), 1.0}};
          } else {
            const double step = hc.s_grid.size() > 1 ? hc.s_grid[1] - hc.s_grid[0] : 1.0;
            const double pos = (next_real - hc.s_grid.front()) / step;
            const int lo_idx =
                std::clamp(static_cast<int>(std::floor(pos)), 0,
                           static_cast<int>(hc.s_grid.size()) - 1);
            const double frac = std::clamp(pos - lo_idx, 0.0, 1.0);
            if (frac < 1e-12 || lo_idx + 1 >= static_cast<int>(hc.s_grid.size()))
              m.kernel[i][j][l] = Support{{lo_idx, 1.0}};
            else if (frac > 1.0 - 1e-12)
              m.kernel[i][j][l] = Support{{lo_idx + 1, 1.0}};
            else
              m.kernel[i][j][l] = Support{{lo_idx, 1.0 - frac}, {lo_idx + 1, frac}};
          }
        }
      }
    } else {
      // Collapse: extraction is gone but the primitives still apply at the
      // null action, so the hegemon keeps paying instability spillovers
      // -k(s,0) and the client keeps the bare capacity flow b(s). The state
      // is absorbing.
      hc.feasible_x[i] = {};
      m.leader_actions[i] = {0.0};
      m.follower_actions[i] = {0.0};
      m.payoff_x[i] = {{-params.k(s, 0.0)}};
      m.payoff_e[i] = {{params.b(s)}};
      bound = std::max({bound, std::abs(m.payoff_x[i][0][0]),
                        std::abs(m.payoff_e[i][0][0])});
      m.kernel[i] = {{Support{{i, 1.0}}}};
    }
  }
  if (members.empty())
    throw ModelError("build_hc_model: no grid state is viable (s_min too high)");
  m.payoff_bound = bound + 1e-9;

  hc.viability = make_viability(members);
  hc.viability.safe_action.assign(n, -1);
  for (int i : members) hc.viability.safe_action[i] = 0;  // lowest feasible x

  double target = params.s_init;
  if (std::isnan(target))
    target = hc.s_grid[hc.first_viable] +
             0.75 * (hc.s_grid.back() - hc.s_grid[hc.first_viable]);
  m.initial_state = nearest_index(hc.s_grid, std::clamp(target, hc.s_grid.front(), hc.s_grid.back()));
  if (m.initial_state < hc.first_viable) m.initial_state = hc.first_viable;
  return hc;
}

// ---------------------------------------------------------------------------
// Deterministic steady states
// ---------------------------------------------------------------------------

struct SteadyState {
  bool fixed_point = false;
  int state = -1;            // the fixed point, or the lowest state on a cycle
  std::vector<int> cycle;    // nonempty when the orbit closed on a cycle
  long steps = 0;
};

/// Iterates the induced deterministic map until it revisits a state. A
/// 1-cycle is a fixed point; longer cycles are reported, not treated as
/// errors. Requires a point-mass induced kernel.
inline SteadyState find_steady_state(const GameModel& m, const StrategyProfile& p,
                                     int start, long max_steps = 1000000) {
  const auto rows = induced_kernel(m, p);
  for (const Support& row : rows)
    if (row.size() != 1)
      throw ModelError("find_steady_state: induced kernel is not deterministic");
  std::vector<long> seen(m.num_states(), -1);
  SteadyState out;
  int s = start;
  for (long t = 0; t <= max_steps; ++t) {
    if (seen[s] >= 0) {
      // Recover the cycle from the first revisit.
      int cur = s;
      do {
        out.cycle.push_back(cur);
        cur = rows[cur][0].next;
      } while (cur != s);
      out.steps = t;
      if (out.cycle.size() == 1) {
        out.fixed_point = true;
        out.state = s;
        out.cycle.clear();
      } else {
        out.state = *std::min_element(out.cycle.begin(), out.cycle.end());
      }
      return out;
    }
    seen[s] = t;
    s = rows[s][0].next;
  }
  throw SolveError("find_steady_state: no cycle within step budget", 0.0);
}

struct RealOrbit {
  bool fixed_point = false;
  double s_star = 0.0;       // fixed point, or the lowest point of a cycle
  std::vector<double> cycle; // nonempty when the orbit closed on a cycle
  long steps = 0;
};

/// Steady state of the continuous law of motion s -> f(s, e) - h(x) where
/// (x, e) follow the grid policy at the nearest viable node. This is the
/// deterministic skeleton shared by both snap rules: under the interpolation
/// kernel it equals the expected-label dynamics.
inline RealOrbit find_steady_state_real(const HCModel& hc, const StrategyProfile& p,
                                        double start_label, long max_steps = 20000) {
  const HCParams& pr = hc.params;
  RealOrbit out;
  double s = std::clamp(start_label, hc.s_grid.front(), hc.s_grid.back());
  std::vector<double> tail;
  for (long t = 0; t < max_steps; ++t) {
    const int node = nearest_index(hc.s_grid, s);
    double next;
    if (node < hc.first_viable) {
      next = s;  // collapse region is absorbing
    } else {
      const int xi = p.leader[node];
      const double x = hc.game.leader_actions[node][xi];
      const double e = hc.game.follower_actions[node][p.follower[node][xi]];
      next = std::clamp(pr.f(s, e) - pr.h(x), hc.s_grid.front(), hc.s_grid.back());
    }
    if (std::abs(next - s) < 1e-10) {
      out.fixed_point = true;
      out.s_star = next;
      out.steps = t;
      return out;
    }
    for (size_t i = 0; i < tail.size(); ++i)
      if (std::abs(tail[i] - next) < 1e-9) {
        out.cycle.assign(tail.begin() + i, tail.end());
        out.s_star = *std::min_element(out.cycle.begin(), out.cycle.end());
        out.steps = t;
        return out;
      }
    tail.push_back(next);
    if (tail.size() > 64) tail.erase(tail.begin());
    s = next;
  }
  out.s_star = s;  // did not settle; report the last point
  out.steps = max_steps;
  return out;
}

// ---------------------------------------------------------------------------
// First-order-condition analysis on the solved grid game
// ---------------------------------------------------------------------------

namespace detail {

/// Natural cubic spline for smooth off-grid evaluation of value functions.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> xs, std::vector<double> ys)
      : xs_(std::move(xs)), ys_(std::move(ys)) {
    const int n = static_cast<int>(xs_.size());
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
    b[0] = 1.0;
    b[n - 1] = 1.0;
    for (int i = 1; i + 1 < n; ++i) {
      const double hl = xs_[i] - xs_[i - 1];
      const double hr = xs_[i + 1] - xs_[i];
      a[i] = hl / 6.0;
      b[i] = (hl + hr) / 3.0;
      c[i] = hr / 6.0;
      r[i] = (ys_[i + 1] - ys_[i]) / hr - (ys_[i] - ys_[i - 1]) / hl;
    }
    for (int i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (int i = n - 2; i >= 0; --i) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
  }

  double eval(double x) const {
    const auto [i, hl, t] = locate(x);
    const double h = hl;
    const double A = (xs_[i + 1] - x) / h;
    const double B = (x - xs_[i]) / h;
    (void)t;
    return A * ys_[i] + B * ys_[i + 1] +
           ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::tuple<int, double, double> locate(double x) const {
    int i = static_cast<int>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
    i = std::clamp(i, 0, static_cast<int>(xs_.size()) - 2);
    return {i, xs_[i + 1] - xs_[i], x - xs_[i]};
  }
  std::vector<double> xs_, ys_, m_;
};

}  // namespace detail

struct FollowerFocResult {
  double residual = 0.0;
  double s_next = 0.0;
  double value_slope = 0.0;
  bool e_on_boundary = false;  // no interior FOC applies there
};

struct SensitivityResult {
  double ift = 0.0;   // implicit-function-theorem value
  double fd = 0.0;    // central finite difference from re-solving
  double e_star = 0.0;
  double denominator = 0.0;
  bool degenerate = false;  // near-zero second-order term or boundary optimum
  std::string reason;
};

struct LeaderFocResult {
  double residual = 0.0;             // FOC exactly as displayed
  double residual_k_corrected = 0.0; // with the k_e * de*/dx envelope term
  double comp_slack = 0.0;           // mu * (f(s,e*) - h(x) - s_min)
  double de_dx = 0.0;
  double value_slope = 0.0;
  double e_star = 0.0;
  bool x_on_boundary = false;
};

/// FOC diagnostics against a solved hegemon-client game. Value-function
/// derivatives are central differences on the state grid (one-sided at the
/// edges of the viable region), linearly interpolated between nodes;
/// derivatives of the primitives are analytic. The continuous follower
/// re-solve used by sensitivity checks interpolates the value table with a
/// cubic spline.
class HCAnalysis {
 public:
  HCAnalysis(const HCModel& hc, ValuePair values)
      : hc_(hc), vals_(std::move(values)) {
    const int lo = hc_.first_viable;
    const int n = static_cast<int>(hc_.s_grid.size());
    region_.assign(hc_.s_grid.begin() + lo, hc_.s_grid.end());
    wc_.assign(vals_.w_e.begin() + lo, vals_.w_e.end());
    vh_.assign(vals_.w_x.begin() + lo, vals_.w_x.end());
    wc_spline_ = detail::CubicSpline(region_, wc_);
    (void)n;
  }

  const ValuePair& values() const { return vals_; }
  const HCModel& model() const { return hc_; }

  double wc_slope(double s) const { return slope(wc_, s); }
  double wc_curvature(double s) const { return curvature(wc_, s); }
  double vh_slope(double s) const { return slope(vh_, s); }

  /// -phi'(e) + delta * W_C'(s') * f_e(s,e) with s' = f(s,e) - h(x).
  FollowerFocResult follower_foc_residual(double s, double x, double e) const {
    const HCParams& p = hc_.params;
    FollowerFocResult r;
    const double de = grid_step(hc_.e_grid);
    r.e_on_boundary = e <= hc_.e_grid.front() + 0.5 * de ||
                      e >= hc_.e_grid.back() - 0.5 * de;
    r.s_next = clamp_state(p.f(s, e) - p.h(x));
    r.value_slope = wc_slope(r.s_next);
    r.residual = -p.phi_p(e) + p.discount * r.value_slope * p.f_e(s, e);
    return r;
  }

  /// Best continuous effort at (s,x): maximizes -phi(e) + delta*W_C(s'(e))
  /// over the effort interval, with W_C replaced by its local quadratic
  /// model around the induced next state. The model base point is updated a
  /// few times so the expansion is taken where the optimum actually lands;
  /// the smooth surrogate keeps e*(x) free of the jitter a raw interpolant
  /// inherits from grid-value kinks.
  double solve_follower_continuous(double s, double x) const {
    const HCParams& p = hc_.params;
    const double lo = hc_.e_grid.front(), hi = hc_.e_grid.back();
    // Base point from the discrete best response.
    int e0_idx = 0;
    {
      double best = -std::numeric_limits<double>::infinity();
      for (int e = 0; e < static_cast<int>(hc_.e_grid.size()); ++e) {
        const double sn = clamp_state(p.f(s, hc_.e_grid[e]) - p.h(x));
        const double v = -p.phi(hc_.e_grid[e]) + p.discount * wc_spline_.eval(sn);
        if (v > best) {
          best = v;
          e0_idx = e;
        }
      }
    }
    double e_star = hc_.e_grid[e0_idx];
    for (int pass = 0; pass < 3; ++pass) {
      const double s_base = clamp_state(p.f(s, e_star) - p.h(x));
      const LocalFit fit = local_fit(wc_, s_base);
      const double w_base = wc_spline_.eval(s_base);
      auto objective = [&](double e) {
        const double sn = clamp_state(p.f(s, e) - p.h(x));
        const double u = sn - s_base;
        return -p.phi(e) +
               p.discount * (w_base + fit.slope * u + 0.5 * fit.curvature * u * u);
      };
      double a = lo, b = hi;
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
      double f1 = objective(c1), f2 = objective(c2);
      for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        if (f1 < f2) {
          a = c1;
          c1 = c2;
          f1 = f2;
          c2 = a + gr * (b - a);
          f2 = objective(c2);
        } else {
          b = c2;
          c2 = c1;
          f2 = f1;
          c1 = b - gr * (b - a);
          f1 = objective(c1);
        }
      }
      const double next = 0.5 * (a + b);
      if (std::abs(next - e_star) < 1e-11) {
        e_star = next;
        break;
      }
      e_star = next;
    }
    return e_star;
  }

  /// de*/dx by the implicit function theorem on the follower FOC, against a
  /// central finite difference from re-solving the follower problem at
  /// x +/- fd_step (default: three x-grid steps).
  SensitivityResult effort_sensitivity(double s, double x, double fd_step = 0.0) const {
    const HCParams& p = hc_.params;
    SensitivityResult r;
    r.e_star = solve_follower_continuous(s, x);
    const double sn = clamp_state(p.f(s, r.e_star) - p.h(x));
    const double w1 = wc_slope(sn);
    const double w2 = wc_curvature(sn);
    const double fe = p.f_e(s, r.e_star);
    r.denominator = -p.phi_pp(r.e_star) +
                    p.discount * (w2 * fe * fe + w1 * p.f_ee(s, r.e_star));
    const double numerator = p.discount * w2 * fe * p.h_p(x);
    if (std::abs(r.denominator) < 0.05 * std::max(1.0, p.phi_pp(r.e_star))) {
      r.degenerate = true;
      r.reason = "second-order term near zero";
    }
    const double de = grid_step(hc_.e_grid);
    if (r.e_star <= hc_.e_grid.front() + de || r.e_star >= hc_.e_grid.back() - de) {
      r.degenerate = true;
      r.reason = r.reason.empty() ? "optimum at effort boundary" : r.reason;
    }
    if (sn <= region_.front() + grid_step(hc_.s_grid) ||
        sn >= region_.back() - grid_step(hc_.s_grid)) {
      r.degenerate = true;
      r.reason = r.reason.empty() ? "next state at grid edge" : r.reason;
    }
    r.ift = r.denominator != 0.0 ? numerator / r.denominator : 0.0;

    double step = fd_step > 0.0 ? fd_step : 3.0 * grid_step(hc_.x_grid);
    step = std::min({step, x - hc_.x_grid.front(), hc_.x_grid.back() - x});
    if (step <= 0.0) {
      r.degenerate = true;
      r.reason = r.reason.empty() ? "x at grid boundary" : r.reason;
      r.fd = r.ift;
      return r;
    }
    const double ep = solve_follower_continuous(s, x + step);
    const double em = solve_follower_continuous(s, x - step);
    r.fd = (ep - em) / (2.0 * step);
    return r;
  }

  /// Left side of the leader FOC as displayed, plus the envelope-corrected
  /// variant including k_e * de*/dx (reported whenever kappa1 != 0), and the
  /// complementary-slackness product.
  LeaderFocResult leader_foc_residual(double s, double x, double mu) const {
    const HCParams& p = hc_.params;
    LeaderFocResult r;
    SensitivityResult sens = effort_sensitivity(s, x);
    r.e_star = sens.e_star;
    r.de_dx = sens.ift;
    const double sn = clamp_state(p.f(s, r.e_star) - p.h(x));
    r.value_slope = vh_slope(sn);
    const double resp = p.h_p(x) - p.f_e(s, r.e_star) * r.de_dx;
    r.residual = p.pi_p(x) - p.discount * r.value_slope * resp - mu * resp;
    r.residual_k_corrected = r.residual - p.k_e(s, r.e_star) * r.de_dx;
    r.comp_slack = mu * (p.f(s, r.e_star) - p.h(x) - p.s_min);
    const double dx = grid_step(hc_.x_grid);
    r.x_on_boundary =
        x <= hc_.x_grid.front() + 0.5 * dx || x >= hc_.x_grid.back() - 0.5 * dx;
    return r;
  }

  /// Multiplier recovered from the displayed FOC at a boundary solution.
  double recover_mu(double s, double x) const {
    const HCParams& p = hc_.params;
    SensitivityResult sens = effort_sensitivity(s, x);
    const double sn = clamp_state(p.f(s, sens.e_star) - p.h(x));
    const double resp = p.h_p(x) - p.f_e(s, sens.e_star) * sens.ift;
    if (std::abs(resp) < 1e-12) return 0.0;
    return p.pi_p(x) / resp - p.discount * vh_slope(sn);
  }

 private:
  static double grid_step(const std::vector<double>& g) {
    return g.size() > 1 ? g[1] - g[0] : 0.0;
  }
  double clamp_state(double s) const {
    return std::clamp(s, region_.front(), region_.back());
  }

  /// Symmetric local-quadratic least-squares fit around s over a fixed
  /// physical window (never below two grid steps per side). Equivalent to
  /// central differencing on coarse grids; on fine grids the wider stencil
  /// averages out the small kinks that grid value functions carry at policy
  /// switches, which plain 3-point differences amplify by 1/step^2.
  struct LocalFit {
    double slope = 0.0;
    double curvature = 0.0;
  };

  LocalFit local_fit(const std::vector<double>& w, double s) const {
    const int n = static_cast<int>(region_.size());
    LocalFit out;
    if (n < 3) {
      if (n == 2) out.slope = (w[1] - w[0]) / (region_[1] - region_[0]);
      return out;
    }
    const double step = region_[1] - region_[0];
    const double s0 = clamp_state(s);
    const int half = std::max(2, static_cast<int>(std::round(fit_window_ / step)));
    int center = nearest_index(region_, s0);
    int lo = center - half, hi = center + half;
    if (lo < 0) {
      hi = std::min(n - 1, hi - lo);
      lo = 0;
    }
    if (hi > n - 1) {
      lo = std::max(0, lo - (hi - (n - 1)));
      hi = n - 1;
    }
    // Quadratic least squares in u = s_i - s0.
    double m0 = 0, m1 = 0, m2 = 0, m3 = 0, m4 = 0, r0 = 0, r1 = 0, r2 = 0;
    for (int i = lo; i <= hi; ++i) {
      const double u = region_[i] - s0;
      const double u2 = u * u;
      m0 += 1;
      m1 += u;
      m2 += u2;
      m3 += u2 * u;
      m4 += u2 * u2;
      r0 += w[i];
      r1 += w[i] * u;
      r2 += w[i] * u2;
    }
    // Solve the 3x3 normal equations for (value, slope, 0.5*curvature).
    double a[3][4] = {{m0, m1, m2, r0}, {m1, m2, m3, r1}, {m2, m3, m4, r2}};
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
      std::swap(a[col], a[piv]);
      if (a[col][col] == 0.0) return out;
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double f = a[r][col] / a[col][col];
        for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      }
    }
    out.slope = a[1][3] / a[1][1];
    out.curvature = 2.0 * a[2][3] / a[2][2];
    return out;
  }

  double slope(const std::vector<double>& w, double s) const {
    return local_fit(w, s).slope;
  }

  double curvature(const std::vector<double>& w, double s) const {
    return local_fit(w, s).curvature;
  }

  const HCModel hc_;
  ValuePair vals_;
  std::vector<double> region_;  // viable-region state grid
  std::vector<double> wc_, vh_;
  detail::CubicSpline wc_spline_;
  double fit_window_ = 0.24;    // physical half-width of derivative fits
};

// ---------------------------------------------------------------------------
// Regime classification
// ---------------------------------------------------------------------------

/// A solved hegemon-client model. When the coupled Stackelberg solve
/// certifies an equilibrium, `certified` is true and all value tables agree.
/// Pure stationary equilibria routinely fail to exist on fine grids (the
/// continuum equilibrium sits at a protection threshold between grid
/// points), so the fallback anchors the analysis on alternating exact
/// best-response solves: the follower's MDP given the leader policy, then
/// the leader's MDP against the induced response map. Both are single-agent
/// dynamic programs, so the fallback always terminates deterministically.
struct HCSolution {
  HCModel hc;
  StrategyProfile profile;
  ValuePair values;   // joint evaluation of `profile`
  std::vector<double> wc_opt;  // follower-optimal values given the leader policy
  std::vector<double> vh_opt;  // leader-optimal values against the response map
  bool certified = false;      // one-shot deviation check passed
  double max_gain = 0.0;       // certificate gain of `profile`
  bool anchor_stabilized = false;  // leader policy reached a fixed point
  int rounds = 0;
};

namespace detail {

/// Follower's optimal value function when the leader plays `lambda`.
inline std::vector<double> follower_mdp_values(const GameModel& m,
                                               const std::vector<int>& lambda,
                                               double tol = 1e-12) {
  const int n = m.num_states();
  std::vector<double> w(n, 0.0);
  const long budget = default_sweep_budget(m, tol);
  for (long it = 0; it < budget; ++it) {
    double res = 0.0;
    for (int s = 0; s < n; ++s) {
      const int x = lambda[s];
      double best = -std::numeric_limits<double>::infinity();
      for (int e = 0; e < m.num_follower_actions(s); ++e)
        best = std::max(best, m.payoff_e[s][x][e] + m.discount * m.expected(w, s, x, e));
      res = std::max(res, std::abs(best - w[s]));
      w[s] = best;
    }
    if (res < tol) break;
  }
  return w;
}

/// Leader's optimal value function against a fixed follower response map.
inline std::vector<double> leader_mdp_values(const GameModel& m,
                                             const std::vector<std::vector<int>>& resp,
                                             double tol = 1e-12) {
  const int n = m.num_states();
  std::vector<double> w(n, 0.0);
  const long budget = default_sweep_budget(m, tol);
  for (long it = 0; it < budget; ++it) {
    double res = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int x = 0; x < m.num_leader_actions(s); ++x) {
        const int e = resp[s][x];
        best = std::max(best, m.payoff_x[s][x][e] + m.discount * m.expected(w, s, x, e));
      }
      res = std::max(res, std::abs(best - w[s]));
      w[s] = best;
    }
    if (res < tol) break;
  }
  return w;
}

}  // namespace detail

struct HCSolveOptions {
  MseOptions mse;          // budget for the certified attempt
  int anchor_rounds = 6;   // best-response rounds in the fallback
  bool try_certified = true;

  HCSolveOptions() { mse.max_sweeps = 4000; }
};

inline HCSolution solve_hc(const HCParams& params, const HCSolveOptions& opt = {}) {
  HCSolution sol;
  sol.hc = build_hc_model(params);
  const GameModel& m = sol.hc.game;
  const int n = m.num_states();

  if (opt.try_certified) {
    try {
      MseSolution mse = solve_mse(m, opt.mse);
      sol.profile = mse.profile;
      sol.values = mse.values;
      sol.certified = true;
      sol.max_gain = mse.certificate.max_gain;
      sol.anchor_stabilized = true;
      sol.wc_opt = detail::follower_mdp_values(m, sol.profile.leader);
      sol.vh_opt = detail::leader_mdp_values(m, sol.profile.follower);
      return sol;
    } catch (const SolveError&) {
      // fall through to the anchored solve
    }
  }

  // Anchor at the safest extraction everywhere and alternate exact
  // best-response solves.
  std::vector<int> lambda(n, 0);
  std::vector<std::vector<int>> resp(n);
  std::vector<double> wc;
  for (int round = 1; round <= opt.anchor_rounds; ++round) {
    sol.rounds = round;
    wc = detail::follower_mdp_values(m, lambda);
    for (int s = 0; s < n; ++s) {
      resp[s].resize(m.num_leader_actions(s));
      for (int x = 0; x < m.num_leader_actions(s); ++x)
        resp[s][x] = follower_best_response(m, wc, s, x);
    }
    const std::vector<double> vh = detail::leader_mdp_values(m, resp);
    std::vector<int> next(n, 0);
    for (int s = 0; s < n; ++s) {
      int bx = 0;
      double bq = -std::numeric_limits<double>::infinity();
      for (int x = 0; x < m.num_leader_actions(s); ++x) {
        const int e = resp[s][x];
        const double q = m.payoff_x[s][x][e] + m.discount * m.expected(vh, s, x, e);
        if (q > bq) {
          bq = q;
          bx = x;
        }
      }
      next[s] = bx;
    }
    if (next == lambda) {
      sol.anchor_stabilized = true;
      break;
    }
    lambda = next;
  }
  wc = detail::follower_mdp_values(m, lambda);
  for (int s = 0; s < n; ++s) {
    resp[s].resize(m.num_leader_actions(s));
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      resp[s][x] = follower_best_response(m, wc, s, x);
  }
  sol.profile.leader = lambda;
  sol.profile.follower = resp;
  sol.values = evaluate_policies(m, sol.profile, kValueTol);
  sol.wc_opt = wc;
  sol.vh_opt = detail::leader_mdp_values(m, resp);
  DeviationReport rep = deviation_report_from_values(m, sol.profile, sol.values);
  sol.max_gain = rep.max_gain;
  sol.certified = rep.certified();
  return sol;
}

struct RegimeReport {
  std::string regime;  // "interior" or "boundary"
  double s_star = 0.0;
  double x_star = 0.0;
  double e_star = 0.0;
  double mu = 0.0;
  double follower_foc = 0.0;
  double leader_foc = 0.0;
  double leader_foc_k_corrected = 0.0;
  double comp_slack = 0.0;
  double golden_lhs = 0.0;  // f_s + f_e * de*/ds at the steady state
  double golden_rhs = 0.0;  // 1/delta (diagnostic only)
  double s_star_unconstrained = 0.0;
  bool unconstrained_fixed_point = false;
  double s_star_grid = 0.0;
  double x_star_grid = 0.0;
  double e_star_grid = 0.0;
  bool follower_foc_boundary = false;
  bool leader_foc_boundary = false;
  bool equilibrium_certified = false;
  bool anchor_stabilized = false;
};

/// Classifies the solved model: if the unconstrained steady state (same
/// primitives with the viability floor lowered to the grid floor) stays above
/// s_min, the regime is interior with mu = 0 and the golden-rule balance is
/// reported as a diagnostic; otherwise the state is pinned at s_min, the
/// boundary extraction solves h(x*) = f(s_min, e*(s_min,x*)) - s_min, and mu
/// is recovered from the leader FOC.
inline RegimeReport classify_regime(const HCSolution& solved,
                                    const HCSolveOptions& solver_opt = {}) {
  const HCModel& hc = solved.hc;
  const HCParams& p = hc.params;
  RegimeReport rep;
  rep.golden_rhs = 1.0 / p.discount;
  rep.equilibrium_certified = solved.certified;
  rep.anchor_stabilized = solved.anchor_stabilized;

  // Constrained steady state of the continuous dynamics under the solved
  // grid profile.
  RealOrbit grid_ss = find_steady_state_real(
      hc, solved.profile, hc.s_grid[hc.game.initial_state]);
  rep.s_star_grid = grid_ss.s_star;
  {
    const int s_idx =
        std::max(hc.first_viable, nearest_index(hc.s_grid, grid_ss.s_star));
    const int x_idx = solved.profile.leader[s_idx];
    rep.x_star_grid = hc.game.leader_actions[s_idx][x_idx];
    rep.e_star_grid =
        hc.game.follower_actions[s_idx][solved.profile.follower[s_idx][x_idx]];
  }

  // Unconstrained re-solve: viability floor lowered to the grid floor.
  HCParams unc = p;
  unc.s_min = p.s_grid.lo;
  HCSolution usol = solve_hc(unc, solver_opt);
  RealOrbit uss = find_steady_state_real(usol.hc, usol.profile,
                                         usol.hc.s_grid[usol.hc.game.initial_state]);
  rep.unconstrained_fixed_point = uss.fixed_point;
  rep.s_star_unconstrained = uss.s_star;

  HCAnalysis analysis(hc, ValuePair{solved.vh_opt, solved.wc_opt});
  const double half_step = 0.5 * hc.state_step();

  if (rep.s_star_unconstrained > p.s_min + half_step) {
    rep.regime = "interior";
    rep.mu = 0.0;
    rep.s_star = rep.s_star_grid;
    rep.x_star = rep.x_star_grid;
    rep.e_star = analysis.solve_follower_continuous(rep.s_star, rep.x_star);
    const auto ffoc = analysis.follower_foc_residual(rep.s_star, rep.x_star, rep.e_star);
    rep.follower_foc = ffoc.residual;
    rep.follower_foc_boundary = ffoc.e_on_boundary;
    const auto lfoc = analysis.leader_foc_residual(rep.s_star, rep.x_star, 0.0);
    rep.leader_foc = lfoc.residual;
    rep.leader_foc_k_corrected = lfoc.residual_k_corrected;
    rep.leader_foc_boundary = lfoc.x_on_boundary;
    rep.comp_slack = 0.0;
  } else {
    rep.regime = "boundary";
    rep.s_star = p.s_min;
    // Pin the state: h(x*) = f(s_min, e*(s_min, x*)) - s_min. Solved by
    // bisection on g(x) = f(s_min, e*(x)) - s_min - h(x), which is robust to
    // jumps in the follower's response.
    auto g = [&](double x) {
      const double e = analysis.solve_follower_continuous(p.s_min, x);
      return p.f(p.s_min, e) - p.s_min - p.h(x);
    };
    double lo = hc.x_grid.front(), hi = hc.x_grid.back();
    double x;
    if (g(lo) <= 0.0) {
      x = lo;  // even zero extraction drains the floor state
    } else if (g(hi) >= 0.0) {
      x = hi;
    } else {
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      x = 0.5 * (lo + hi);
    }
    rep.x_star = x;
    rep.e_star = analysis.solve_follower_continuous(p.s_min, x);
    rep.mu = std::max(0.0, analysis.recover_mu(p.s_min, x));
    const auto ffoc = analysis.follower_foc_residual(rep.s_star, rep.x_star, rep.e_star);
    rep.follower_foc = ffoc.residual;
    rep.follower_foc_boundary = ffoc.e_on_boundary;
    const auto lfoc = analysis.leader_foc_residual(rep.s_star, rep.x_star, rep.mu);
    rep.leader_foc = lfoc.residual;
    rep.leader_foc_k_corrected = lfoc.residual_k_corrected;
    rep.leader_foc_boundary = lfoc.x_on_boundary;
    // Complementary slackness against the jointly solved pair.
    rep.comp_slack = rep.mu * (p.f(p.s_min, rep.e_star) - p.h(rep.x_star) - p.s_min);
  }

  // Golden-rule diagnostic: effective regeneration versus discounting.
  {
    const double ds = hc.state_step();
    const double s0 = std::clamp(rep.s_star, hc.s_grid[hc.first_viable] + ds,
                                 hc.s_grid.back() - ds);
    const double ep = analysis.solve_follower_continuous(s0 + ds, rep.x_star);
    const double em = analysis.solve_follower_continuous(s0 - ds, rep.x_star);
    const double de_ds = (ep - em) / (2.0 * ds);
    rep.golden_lhs = p.f_s(rep.s_star, rep.e_star) +
                     p.f_e(rep.s_star, rep.e_star) * de_ds;
  }
  return rep;
}

}  // namespace see
