#pragma once

// Shared hand-built fixtures for refinement and hierarchy tests.

#include "see/refine.hpp"
#include "see/toy3.hpp"

namespace see::testing {

/// Two-state model with two Pareto-ranked families of MPE at state 1.
///
/// State 0 is a null absorbing state. State 1 is absorbing under every
/// action; the leader picks restraint (x=0) or pressure (x=1) and the
/// follower is exactly indifferent at both, so four profiles are MPE:
/// pressure profiles pay (2,2) per period, restraint profiles (1,1).
/// With delta=0.5 the state-1 values are (4,4) against (2,2), so the
/// restraint equilibria are strictly Pareto-dominated there.
inline GameModel coordination_model(double delta = 0.5) {
  GameModel m;
  m.name = "coordination";
  m.discount = delta;
  m.payoff_bound = 2.0;
  m.initial_state = 1;
  m.states = {0.0, 1.0};
  m.leader_actions = {{0.0}, {0.0, 1.0}};
  m.follower_actions = {{0.0}, {0.0, 1.0}};
  m.payoff_x = {{{0.0}}, {{1.0, 1.0}, {0.0, 2.0}}};
  m.payoff_e = {{{0.0}}, {{1.0, 1.0}, {2.0, 2.0}}};
  m.kernel = {{{Support{{0, 1.0}}}},
              {{Support{{1, 1.0}}, Support{{1, 1.0}}},
               {Support{{1, 1.0}}, Support{{1, 1.0}}}}};
  return m;
}

/// A one-viable-state model whose only action exits V: no penalty can ever
/// restore viability because there is nothing else to play.
inline GameModel doomed_model() {
  GameModel m;
  m.name = "doomed";
  m.discount = 0.5;
  m.payoff_bound = 1.0;
  m.initial_state = 0;
  m.states = {0.0, 1.0};  // state 1 = collapse sink
  m.leader_actions = {{0.0}, {0.0}};
  m.follower_actions = {{0.0}, {0.0}};
  m.payoff_x = {{{1.0}}, {{0.0}}};
  m.payoff_e = {{{1.0}}, {{0.0}}};
  m.kernel = {{{Support{{1, 1.0}}}}, {{Support{{1, 1.0}}}}};
  return m;
}

/// Synthetic certified profile with prescribed values; used to exercise the
/// set stages without running a solver.
inline CertifiedProfile synthetic_member(std::vector<int> leader,
                                         std::vector<double> w_x,
                                         std::vector<double> w_e) {
  CertifiedProfile c;
  c.profile.leader = std::move(leader);
  c.profile.follower.resize(c.profile.leader.size());
  for (auto& row : c.profile.follower) row = {0};
  c.values.w_x = std::move(w_x);
  c.values.w_e = std::move(w_e);
  c.report.max_gain = 0.0;
  return c;
}

}  // namespace see::testing
