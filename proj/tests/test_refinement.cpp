#include <catch2/catch_amalgamated.hpp>

#include "see/refine.hpp"
#include "see/toy3.hpp"
#include "support/fixtures.hpp"
#include "support/random_models.hpp"

using namespace see;

namespace {

StrategyProfile toy3_profile(int x1, int x2, int e_all = 0) {
  StrategyProfile p;
  p.leader = {0, x1, x2};
  p.follower = {{0}, {e_all, e_all}, {e_all, e_all}};
  return p;
}

}  // namespace

TEST_CASE("check_viability: TOY-3 restraint keeps the state in V") {
  GameModel m = toy3_model(0.9);
  ViabilitySet v = toy3_viability();
  REQUIRE(check_viability(m, toy3_profile(0, 0, 0), v));
  REQUIRE(check_viability(m, toy3_profile(0, 0, 1), v));
}

TEST_CASE("check_viability: extraction at s=1 exits V") {
  GameModel m = toy3_model(0.9);
  ViabilitySet v = toy3_viability();
  REQUIRE_FALSE(check_viability(m, toy3_profile(1, 0), v));
  REQUIRE_FALSE(check_viability(m, toy3_profile(1, 1), v));
}

TEST_CASE("check_viability: V = all states accepts every profile") {
  for (std::uint64_t seed = 900; seed < 905; ++seed) {
    GameModel m = testing::random_model(seed);
    std::vector<int> all(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) all[s] = s;
    ViabilitySet v = make_viability(all);
    REQUIRE(check_viability(m, testing::random_profile(m, seed), v));
  }
}

TEST_CASE("check_safe_action: L is safe in TOY-3, H is not") {
  GameModel m = toy3_model(0.9);
  ViabilitySet v = toy3_viability();  // safe action L at 1 and 2
  std::vector<std::vector<int>> follower0 = {{0}, {0, 0}, {0, 0}};
  std::vector<std::vector<int>> follower1 = {{0}, {1, 1}, {1, 1}};
  REQUIRE(check_safe_action(m, v, follower0));
  REQUIRE(check_safe_action(m, v, follower1));

  ViabilitySet bad = v;
  bad.safe_action = {-1, 1, 1};  // claim H is safe
  REQUIRE_FALSE(check_safe_action(m, bad, follower0));  // (1,H,0) exits

  ViabilitySet everything = make_viability({0, 1, 2});
  everything.safe_action = {0, 1, 1};
  REQUIRE(check_safe_action(m, everything, follower0));
}

TEST_CASE("check_safe_action: missing certificate is an error") {
  GameModel m = toy3_model(0.9);
  ViabilitySet v = toy3_viability(/*with_safe_action=*/false);
  std::vector<std::vector<int>> follower = {{0}, {0, 0}, {0, 0}};
  REQUIRE_THROWS_AS(check_safe_action(m, v, follower), ModelError);
}

TEST_CASE("penalize: zero penalty leaves the model unchanged") {
  GameModel m = toy3_model(0.9);
  GameModel p = penalize(m, {0.0, toy3_viability()});
  REQUIRE(p.fingerprint() == m.fingerprint());
}

TEST_CASE("penalize: TOY-3 point-mass indicator arithmetic at M=100") {
  GameModel m = toy3_model(0.9);
  GameModel p = penalize(m, {100.0, toy3_viability()});
  REQUIRE(p.payoff_x[1][1][0] == Catch::Approx(-98.0));  // (s=1,H,e=0) exits
  REQUIRE(p.payoff_x[2][1][0] == Catch::Approx(2.0));    // (s=2,H,e=0) stays
  REQUIRE(p.payoff_bound == Catch::Approx(102.0));
  // Exploitee payoffs untouched.
  for (int s = 0; s < 3; ++s)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e)
        REQUIRE(p.payoff_e[s][x][e] == m.payoff_e[s][x][e]);
}

TEST_CASE("penalize: stochastic exit mass scales the expected penalty") {
  GameModel m = toy3_model(0.9);
  const double exit_p = 0.3;
  m.kernel[1][1][0] = {{0, exit_p}, {1, 1.0 - exit_p}};
  const double M = 10.0;
  GameModel p = penalize(m, {M, toy3_viability()});
  REQUIRE(p.payoff_x[1][1][0] == Catch::Approx(2.0 - M * exit_p));
}

TEST_CASE("penalize: follower best responses are unchanged given continuations") {
  GameModel m = toy3_model(0.5);
  GameModel p = penalize(m, {7.5, toy3_viability()});
  std::vector<double> w_e = {0.0, 1.3, -0.4};
  for (int s = 1; s <= 2; ++s)
    for (int x = 0; x < 2; ++x)
      REQUIRE(follower_best_response(m, w_e, s, x) ==
              follower_best_response(p, w_e, s, x));
}

TEST_CASE("find_penalty_threshold: already-viable games need no penalty") {
  // Coordination model: every MPE is viable (V = all states).
  GameModel m = testing::coordination_model();
  ViabilitySet v = make_viability({0, 1});
  ThresholdResult r = find_penalty_threshold(m, v);
  REQUIRE(r.threshold == 0.0);
  REQUIRE(r.analytic_bound == 0.0);  // no exit mass anywhere
}

TEST_CASE("find_penalty_threshold: TOY-3 at delta 0.1 needs M* = 0.8") {
  // The penalty hits every transition that lands outside V, including the
  // collapse state's own self-loop, so under the greedy collapse profile
  // w_x[0] = -M/0.9 and w_x[1] = (2-M) + 0.1*w_x[0] = 2 - (10/9)M. The
  // restraint deviation at s=1 turns profitable when w_x[1] < 1/0.9,
  // i.e. exactly at M = 0.8, which is also where (L@1,H@2) becomes an MPE.
  GameModel m = toy3_model(0.1);
  ViabilitySet v = toy3_viability();
  const double resolution = 1e-6;
  ThresholdResult r = find_penalty_threshold(m, v, 1e9, resolution);
  REQUIRE(r.threshold > 0.0);
  REQUIRE(r.threshold == Catch::Approx(0.8).margin(4 * resolution));
  REQUIRE(r.analytic_bound == Catch::Approx(2.0 * 2.0 / (0.9 * 1.0)));

  // At M* and at twice M*, every enumerated MPE must be viable.
  for (double mult : {1.0, 2.0}) {
    GameModel pen = penalize(m, {mult * r.threshold, v});
    EquilibriumSet set = enumerate_stationary_mpe(pen);
    REQUIRE_FALSE(set.members.empty());
    for (const auto& c : set.members) REQUIRE(check_viability(pen, c.profile, v));
  }
}

TEST_CASE("find_penalty_threshold: V = all states gives zero") {
  GameModel m = toy3_model(0.1);
  ViabilitySet v = make_viability({0, 1, 2});
  ThresholdResult r = find_penalty_threshold(m, v);
  REQUIRE(r.threshold == 0.0);
}

TEST_CASE("find_penalty_threshold: cap exhaustion reports a missing safe action") {
  GameModel m = testing::doomed_model();
  ViabilitySet v = make_viability({0});
  REQUIRE_THROWS_AS(find_penalty_threshold(m, v, 64.0), ThresholdNotFound);
}

TEST_CASE("filter_viable: removes collapse profiles and keeps restraint") {
  GameModel m = toy3_model(0.1);
  ViabilitySet v = toy3_viability();
  EquilibriumSet set = enumerate_stationary_mpe(m);
  REQUIRE(set.members.size() == 1);  // greedy collapse
  EquilibriumSet viable = filter_viable(m, set, v);
  REQUIRE(viable.members.empty());

  // Synthetic set of restraint profiles passes through unchanged.
  EquilibriumSet hand;
  for (int e : {0, 1}) {
    CertifiedProfile c;
    c.profile = toy3_profile(0, 0, e);
    c.values.w_x.assign(3, 0.0);
    c.values.w_e.assign(3, 0.0);
    hand.members.push_back(c);
  }
  REQUIRE(filter_viable(m, hand, v).members.size() == 2);

  EquilibriumSet empty;
  REQUIRE(filter_viable(m, empty, v).members.empty());
}

TEST_CASE("renegotiation_proof_set: singletons and value ties are kept") {
  ViabilitySet v = make_viability({0});
  EquilibriumSet single;
  single.members.push_back(testing::synthetic_member({0}, {1.0}, {1.0}));
  REQUIRE(renegotiation_proof_set(single, v).members.size() == 1);

  EquilibriumSet twins;
  twins.members.push_back(testing::synthetic_member({0}, {1.0}, {1.0}));
  twins.members.push_back(testing::synthetic_member({1}, {1.0}, {1.0}));
  REQUIRE(renegotiation_proof_set(twins, v).members.size() == 2);
}

TEST_CASE("renegotiation_proof_set: dominated equilibrium is eliminated with audit") {
  // Two certified MPE of the coordination model: pressure dominates restraint
  // at state 1 with margins (2,2); values verified by direct policy evaluation.
  GameModel m = testing::coordination_model(0.5);
  ViabilitySet v = make_viability({0, 1});
  EquilibriumSet mpe = enumerate_stationary_mpe(m);
  REQUIRE(mpe.members.size() == 4);
  EquilibriumSet viable = filter_viable(m, mpe, v);
  REQUIRE(viable.members.size() == 4);
  for (const auto& c : viable.members) {
    const ValuePair direct = evaluate_policies(m, c.profile, 1e-12);
    const double expected = c.profile.leader[1] == 1 ? 4.0 : 2.0;
    REQUIRE(direct.w_x[1] == Catch::Approx(expected).margin(1e-9));
    REQUIRE(direct.w_e[1] == Catch::Approx(expected).margin(1e-9));
  }

  std::vector<AuditRow> audit;
  EquilibriumSet rp = renegotiation_proof_set(viable, v, kCompareTol,
                                              RpQuantifier::some_state, &audit);
  REQUIRE(rp.members.size() == 2);
  for (const auto& c : rp.members) REQUIRE(c.profile.leader[1] == 1);
  REQUIRE(audit.size() == 2);
  for (const AuditRow& row : audit) {
    REQUIRE(viable.members[row.eliminated].profile.leader[1] == 0);
    REQUIRE(viable.members[row.dominator].profile.leader[1] == 1);
    REQUIRE(row.state == 1);
    REQUIRE(row.margin_x == Catch::Approx(2.0).margin(1e-7));
    REQUIRE(row.margin_e == Catch::Approx(2.0).margin(1e-7));
  }
}

TEST_CASE("renegotiation_proof_set: dominance is tested against the input set") {
  // P dominates Q at state 0; Q dominates R at state 1; P does not dominate R.
  // With the fixed reference set, R is still eliminated by Q.
  ViabilitySet v = make_viability({0, 1});
  EquilibriumSet set;
  set.members.push_back(testing::synthetic_member({0, 0}, {4.0, 0.0}, {4.0, 5.0}));  // P
  set.members.push_back(testing::synthetic_member({1, 0}, {3.0, 2.0}, {3.0, 2.0}));  // Q
  set.members.push_back(testing::synthetic_member({2, 0}, {9.0, 1.0}, {0.0, 1.0}));  // R
  EquilibriumSet rp = renegotiation_proof_set(set, v);
  REQUIRE(rp.members.size() == 1);
  REQUIRE(rp.members[0].profile.leader[0] == 0);
}

TEST_CASE("renegotiation_proof_set: quantifier readings can differ") {
  // P beats Q at state 0, Q beats P at state 1. The some-state reading
  // eliminates both; the all-states reading keeps both.
  ViabilitySet v = make_viability({0, 1});
  EquilibriumSet set;
  set.members.push_back(testing::synthetic_member({0, 0}, {4.0, 1.0}, {4.0, 1.0}));
  set.members.push_back(testing::synthetic_member({1, 0}, {2.0, 3.0}, {2.0, 3.0}));
  EquilibriumSet some = renegotiation_proof_set(set, v, kCompareTol,
                                                RpQuantifier::some_state);
  EquilibriumSet all = renegotiation_proof_set(set, v, kCompareTol,
                                               RpQuantifier::all_states);
  REQUIRE(some.members.empty());
  REQUIRE(all.members.size() == 2);
}

TEST_CASE("renegotiation_proof_set: idempotent under both readings") {
  GameModel m = testing::coordination_model();
  ViabilitySet v = make_viability({0, 1});
  EquilibriumSet viable = filter_viable(m, enumerate_stationary_mpe(m), v);
  for (RpQuantifier q : {RpQuantifier::some_state, RpQuantifier::all_states}) {
    EquilibriumSet once = renegotiation_proof_set(viable, v, kCompareTol, q);
    EquilibriumSet twice = renegotiation_proof_set(once, v, kCompareTol, q);
    REQUIRE(once.members.size() == twice.members.size());
    for (size_t i = 0; i < once.members.size(); ++i)
      REQUIRE(once.members[i].profile == twice.members[i].profile);
  }
}

TEST_CASE("select_see: argmax, tie-breaks, and order invariance") {
  ViabilitySet v = make_viability({0});
  EquilibriumSet set;
  set.members.push_back(testing::synthetic_member({2}, {5.0}, {9.0}));
  set.members.push_back(testing::synthetic_member({1}, {7.0}, {1.0}));
  REQUIRE(select_see(set, 0).profile.leader[0] == 1);  // higher w_x wins

  EquilibriumSet tie;
  tie.members.push_back(testing::synthetic_member({3}, {7.0}, {1.0}));
  tie.members.push_back(testing::synthetic_member({1}, {7.0}, {2.0}));
  REQUIRE(select_see(tie, 0).profile.leader[0] == 1);  // w_e breaks the tie

  EquilibriumSet lex;
  lex.members.push_back(testing::synthetic_member({3}, {7.0}, {2.0}));
  lex.members.push_back(testing::synthetic_member({1}, {7.0}, {2.0}));
  REQUIRE(select_see(lex, 0).profile.leader[0] == 1);  // smallest action vector

  std::reverse(lex.members.begin(), lex.members.end());
  REQUIRE(select_see(lex, 0).profile.leader[0] == 1);

  EquilibriumSet empty;
  REQUIRE_THROWS_AS(select_see(empty, 0), EmptySelection);
}

TEST_CASE("ir_filter: boundary cases of the weak inequality") {
  ViabilitySet v = make_viability({0});
  EquilibriumSet set;
  set.members.push_back(testing::synthetic_member({0}, {1.0}, {3.0}));

  OutsideOption very_negative{{-1e12}};
  REQUIRE(ir_filter(set, very_negative, v).members.size() == 1);

  OutsideOption too_high{{3.5}};
  REQUIRE(ir_filter(set, too_high, v).members.empty());

  OutsideOption exactly{{3.0}};
  REQUIRE(ir_filter(set, exactly, v).members.size() == 1);
}

TEST_CASE("run_pipeline: TOY-3 raw route reports the empty viable stage") {
  GameModel m = toy3_model(0.1);
  RefinementReport rep = run_pipeline(m, toy3_viability());
  REQUIRE(rep.status == "no-viable");
  REQUIRE(rep.mpe.members.size() == 1);
  REQUIRE(rep.viable.members.empty());
  REQUIRE_FALSE(rep.selected.has_value());
}

TEST_CASE("run_pipeline: threshold route selects the restrained equilibrium") {
  GameModel m = toy3_model(0.1);
  PipelineOptions opt;
  opt.penalty_mode = PenaltyMode::find_threshold;
  RefinementReport rep = run_pipeline(m, toy3_viability(), opt);
  REQUIRE(rep.status == "selected");
  REQUIRE(rep.threshold.has_value());
  REQUIRE(rep.threshold->threshold == Catch::Approx(0.8).margin(1e-4));
  REQUIRE(rep.selected->profile.leader == std::vector<int>{0, 0, 1});
  // Fresh certification of the selected profile on the penalized basis model.
  GameModel basis = penalize(m, {rep.penalty_used, toy3_viability()});
  DeviationReport fresh = one_shot_deviation_check(basis, rep.selected->profile);
  REQUIRE(fresh.max_gain <= kCertTol);
  REQUIRE(check_viability(basis, rep.selected->profile, toy3_viability()));
  // The raw route has no viable MPE, so the two routes disagree and say so.
  REQUIRE(rep.raw_viable.has_value());
  REQUIRE(rep.raw_viable->members.empty());
  REQUIRE_FALSE(rep.routes_agree);
}

TEST_CASE("run_pipeline: V = all states passes a singleton set through") {
  GameModel m = toy3_model(0.1);
  ViabilitySet v = make_viability({0, 1, 2});
  RefinementReport rep = run_pipeline(m, v);
  REQUIRE(rep.status == "selected");
  REQUIRE(rep.mpe.members.size() == 1);
  REQUIRE(rep.viable.members.size() == 1);
  REQUIRE(rep.rp.members.size() == 1);
  REQUIRE(rep.selected->profile == rep.mpe.members[0].profile);
}

TEST_CASE("run_pipeline: coordination model end to end with nesting") {
  GameModel m = testing::coordination_model();
  ViabilitySet v = make_viability({0, 1});
  RefinementReport rep = run_pipeline(m, v);
  REQUIRE(rep.status == "selected");
  REQUIRE(rep.mpe.members.size() == 4);
  REQUIRE(rep.viable.members.size() == 4);
  REQUIRE(rep.rp.members.size() == 2);
  REQUIRE(rep.selected->profile.leader[1] == 1);
  REQUIRE(rep.quantifier_readings_agree);
  // Selected maximizes w_x at the selection state over the RP set.
  for (const auto& c : rep.rp.members)
    REQUIRE(rep.selected->values.w_x[rep.selection_state] >=
            c.values.w_x[rep.selection_state] - 1e-9);
}

TEST_CASE("run_pipeline: IR stage tightens the viable set") {
  GameModel m = testing::coordination_model();
  ViabilitySet v = make_viability({0, 1});
  PipelineOptions opt;
  // Outside option above the restraint value (2) at state 1 but below the
  // pressure value (4): only pressure profiles survive IR.
  opt.outside = OutsideOption{{-1.0, 3.0}};
  RefinementReport rep = run_pipeline(m, v, opt);
  REQUIRE(rep.ir_applied);
  REQUIRE(rep.viable.members.size() == 4);
  REQUIRE(rep.after_ir.members.size() == 2);
  REQUIRE(rep.status == "selected");
  for (const auto& c : rep.after_ir.members) REQUIRE(c.profile.leader[1] == 1);
}
