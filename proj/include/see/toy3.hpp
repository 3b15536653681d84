#pragma once

#include "see/game.hpp"

namespace see {

/// Three-state desk model used throughout the tests and docs.
///
/// State 0 is an absorbing collapse state with a single null action and zero
/// payoffs. At s in {1,2} the leader picks low or high extraction {L,H} and
/// the follower picks effort {0,1}. Deterministic dynamics:
///   (L,0) stay, (L,1) up (capped at 2), (H,0) down, (H,1) stay.
/// Stage payoffs at s >= 1: u_x = 2 if H else 1; u_e = s - 1{H} - 0.5*e.
/// The natural viability set is {1,2} with safe action L.
inline GameModel toy3_model(double discount = 0.9) {
  GameModel m;
  m.name = "toy3";
  m.discount = discount;
  m.payoff_bound = 2.0;
  m.initial_state = 2;
  m.states = {0.0, 1.0, 2.0};
  m.leader_actions = {{0.0}, {1.0, 2.0}, {1.0, 2.0}};   // L=index 0, H=index 1
  m.follower_actions = {{0.0}, {0.0, 1.0}, {0.0, 1.0}};

  const int n = 3;
  m.payoff_x.assign(n, {});
  m.payoff_e.assign(n, {});
  m.kernel.assign(n, {});

  // Absorbing collapse state.
  m.payoff_x[0] = {{0.0}};
  m.payoff_e[0] = {{0.0}};
  m.kernel[0] = {{Support{{0, 1.0}}}};

  for (int s = 1; s <= 2; ++s) {
    m.payoff_x[s].assign(2, std::vector<double>(2));
    m.payoff_e[s].assign(2, std::vector<double>(2));
    m.kernel[s].assign(2, std::vector<Support>(2));
    for (int x = 0; x < 2; ++x)
      for (int e = 0; e < 2; ++e) {
        m.payoff_x[s][x][e] = (x == 1) ? 2.0 : 1.0;
        m.payoff_e[s][x][e] = s - (x == 1 ? 1.0 : 0.0) - 0.5 * e;
        int next;
        if (x == 0)
          next = (e == 0) ? s : std::min(s + 1, 2);
        else
          next = (e == 0) ? s - 1 : s;
        m.kernel[s][x][e] = Support{{next, 1.0}};
      }
  }
  return m;
}

/// Viability set {1,2} for TOY-3 with the safe action L certified per state.
inline ViabilitySet toy3_viability(bool with_safe_action = true) {
  ViabilitySet v = make_viability({1, 2});
  if (with_safe_action) v.safe_action = {-1, 0, 0};
  return v;
}

}  // namespace see
