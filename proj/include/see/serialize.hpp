#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "see/hegemon_client.hpp"
#include "see/hierarchy.hpp"
#include "see/model_io.hpp"

namespace see {

/// Writes through a temp file and renames, so readers never see partial
/// output.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace detail {

inline void write_profile_block(std::ostringstream& os, const std::string& header,
                                const CertifiedProfile& c) {
  os << '[' << header << "]\n";
  os << "max_gain = " << format_g12(c.report.max_gain) << "\n";
  os << "leader =";
  for (int x : c.profile.leader) os << ' ' << x;
  os << "\n";
  for (size_t s = 0; s < c.profile.follower.size(); ++s) {
    os << "follower." << s << " =";
    for (int e : c.profile.follower[s]) os << ' ' << e;
    os << "\n";
  }
  os << "w_x =";
  for (double v : c.values.w_x) os << ' ' << format_g12(v);
  os << "\nw_e =";
  for (double v : c.values.w_e) os << ' ' << format_g12(v);
  os << "\n\n";
}

inline CertifiedProfile parse_profile_block(const ConfigSection& sec) {
  CertifiedProfile c;
  auto ints = [&](const std::string& key) {
    std::vector<int> out;
    if (const ConfigEntry* e = sec.find(key))
      for (const std::string& t : tokens(e->value))
        out.push_back(static_cast<int>(parse_int(t, e->line, key)));
    return out;
  };
  auto nums = [&](const std::string& key) {
    std::vector<double> out;
    if (const ConfigEntry* e = sec.find(key))
      for (const std::string& t : tokens(e->value))
        out.push_back(parse_double(t, e->line, key));
    return out;
  };
  c.profile.leader = ints("leader");
  c.profile.follower.resize(c.profile.leader.size());
  for (size_t s = 0; s < c.profile.follower.size(); ++s)
    c.profile.follower[s] = ints("follower." + std::to_string(s));
  c.values.w_x = nums("w_x");
  c.values.w_e = nums("w_e");
  if (const ConfigEntry* e = sec.find("max_gain"))
    c.report.max_gain = parse_double(e->value, e->line, "max_gain");
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Equilibrium sets
// ---------------------------------------------------------------------------

inline std::string write_equilibrium_set(const EquilibriumSet& set,
                                         std::uint64_t seed = 0) {
  std::ostringstream os;
  os << "[equilibria]\n";
  os << "fingerprint = " << set.fingerprint << "\n";
  os << "tol = " << format_g12(set.tol) << "\n";
  os << "exhaustive = " << (set.exhaustive ? 1 : 0) << "\n";
  os << "seed = " << seed << "\n";
  os << "count = " << set.members.size() << "\n\n";
  for (size_t i = 0; i < set.members.size(); ++i)
    detail::write_profile_block(os, "profile." + std::to_string(i), set.members[i]);
  return os.str();
}

inline EquilibriumSet parse_equilibrium_set(const std::string& text) {
  const ConfigDoc doc = parse_config(text);
  const ConfigSection& meta = doc.require("equilibria");
  EquilibriumSet set;
  if (const ConfigEntry* e = meta.find("fingerprint")) set.fingerprint = e->value;
  set.tol = detail::opt_num(meta, "tol", kCertTol);
  set.exhaustive = detail::opt_num(meta, "exhaustive", 0) != 0;
  const long count = static_cast<long>(detail::opt_num(meta, "count", 0));
  for (long i = 0; i < count; ++i)
    set.members.push_back(
        detail::parse_profile_block(doc.require("profile." + std::to_string(i))));
  return set;
}

/// One state per row; the profile column ties rows to the set's members.
inline std::string write_values_csv(const EquilibriumSet& set, const GameModel& m) {
  std::ostringstream os;
  os << "profile,state,label,w_x,w_e\n";
  for (size_t i = 0; i < set.members.size(); ++i)
    for (int s = 0; s < m.num_states(); ++s)
      os << i << ',' << s << ',' << format_g12(m.states[s]) << ','
         << format_g12(set.members[i].values.w_x[s]) << ','
         << format_g12(set.members[i].values.w_e[s]) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string to_string(PenaltyMode m) {
  switch (m) {
    case PenaltyMode::none: return "none";
    case PenaltyMode::fixed: return "fixed";
    case PenaltyMode::find_threshold: return "find-threshold";
  }
  return "none";
}

/// The refinement report names stage members by their index into the
/// equilibrium-set file written alongside it.
inline std::string write_refinement_report(const RefinementReport& rep,
                                           std::uint64_t seed = 0) {
  std::ostringstream os;
  os << "[refine]\n";
  os << "model_fingerprint = " << rep.model_fingerprint << "\n";
  os << "basis_fingerprint = " << rep.basis_fingerprint << "\n";
  os << "penalty_mode = " << to_string(rep.penalty_mode) << "\n";
  os << "penalty = " << format_g12(rep.penalty_used) << "\n";
  if (rep.threshold) {
    os << "threshold = " << format_g12(rep.threshold->threshold) << "\n";
    os << "threshold_analytic_bound = " << format_g12(rep.threshold->analytic_bound)
       << "\n";
  }
  os << "selection_state = " << rep.selection_state << "\n";
  os << "rp_quantifier = " << to_string(rep.quantifier) << "\n";
  os << "pareto_tol = " << format_g12(rep.pareto_tol) << "\n";
  os << "seed = " << seed << "\n";
  os << "status = " << rep.status << "\n";
  os << "mpe_count = " << rep.mpe.members.size() << "\n";

  auto indices_of = [&](const EquilibriumSet& subset) {
    std::ostringstream idx;
    for (const CertifiedProfile& c : subset.members)
      for (size_t i = 0; i < rep.mpe.members.size(); ++i)
        if (rep.mpe.members[i].profile == c.profile) {
          idx << ' ' << i;
          break;
        }
    return idx.str();
  };
  os << "viable =" << indices_of(rep.viable) << "\n";
  os << "ir_applied = " << (rep.ir_applied ? 1 : 0) << "\n";
  if (rep.ir_applied) os << "after_ir =" << indices_of(rep.after_ir) << "\n";
  os << "rp =" << indices_of(rep.rp) << "\n";
  os << "rp_other =" << indices_of(rep.rp_other) << "\n";
  os << "quantifier_readings_agree = " << (rep.quantifier_readings_agree ? 1 : 0)
     << "\n";
  if (rep.raw_viable) {
    os << "routes_agree = " << (rep.routes_agree ? 1 : 0) << "\n";
    os << "raw_viable_count = " << rep.raw_viable->members.size() << "\n";
  }
  if (rep.selected) {
    os << "selected_rp_index = " << rep.selected_index << "\n";
  }
  os << "\n";
  if (rep.selected) detail::write_profile_block(os, "selected", *rep.selected);

  // Eliminations as (eliminated, dominator, state, margin) rows; indices
  // refer to the RP stage's input set.
  os << "[audit]\n";
  for (const AuditRow& r : rep.audit)
    os << "row = " << r.eliminated << ' ' << r.dominator << ' ' << r.state << ' '
       << format_g12(r.margin_x) << ' ' << format_g12(r.margin_e) << "\n";
  os << "\n[audit.other]\n";
  for (const AuditRow& r : rep.audit_other)
    os << "row = " << r.eliminated << ' ' << r.dominator << ' ' << r.state << ' '
       << format_g12(r.margin_x) << ' ' << format_g12(r.margin_e) << "\n";
  return os.str();
}

/// Summary of a refinement report as re-read from disk; used for replay and
/// round-trip checks.
struct RefinementSummary {
  std::string model_fingerprint;
  std::string basis_fingerprint;
  std::string status;
  double penalty = 0.0;
  std::optional<double> threshold;
  int selection_state = 0;
  size_t mpe_count = 0;
  std::vector<int> viable;
  std::vector<int> rp;
  std::optional<CertifiedProfile> selected;
  std::vector<AuditRow> audit;
};

inline RefinementSummary parse_refinement_report(const std::string& text) {
  const ConfigDoc doc = parse_config(text);
  const ConfigSection& sec = doc.require("refine");
  RefinementSummary out;
  auto str = [&](const std::string& key) {
    const ConfigEntry* e = sec.find(key);
    return e ? e->value : std::string();
  };
  out.model_fingerprint = str("model_fingerprint");
  out.basis_fingerprint = str("basis_fingerprint");
  out.status = str("status");
  out.penalty = detail::opt_num(sec, "penalty", 0.0);
  if (sec.find("threshold")) out.threshold = detail::opt_num(sec, "threshold", 0.0);
  out.selection_state = static_cast<int>(detail::opt_num(sec, "selection_state", 0));
  out.mpe_count = static_cast<size_t>(detail::opt_num(sec, "mpe_count", 0));
  auto ints = [&](const std::string& key) {
    std::vector<int> v;
    if (const ConfigEntry* e = sec.find(key))
      for (const std::string& t : detail::tokens(e->value))
        v.push_back(static_cast<int>(detail::parse_int(t, e->line, key)));
    return v;
  };
  out.viable = ints("viable");
  out.rp = ints("rp");
  if (const ConfigSection* sel = doc.find("selected"))
    out.selected = detail::parse_profile_block(*sel);
  if (const ConfigSection* audit = doc.find("audit"))
    for (const ConfigEntry* e : audit->all("row")) {
      const auto t = detail::tokens(e->value);
      if (t.size() != 5) continue;
      out.audit.push_back({static_cast<int>(detail::parse_int(t[0], e->line, "row")),
                           static_cast<int>(detail::parse_int(t[1], e->line, "row")),
                           static_cast<int>(detail::parse_int(t[2], e->line, "row")),
                           detail::parse_double(t[3], e->line, "row"),
                           detail::parse_double(t[4], e->line, "row")});
    }
  return out;
}

inline std::string write_regime_report(const RegimeReport& r, std::uint64_t seed = 0) {
  std::ostringstream os;
  os << "[regime]\n";
  os << "regime = " << r.regime << "\n";
  os << "equilibrium_certified = " << (r.equilibrium_certified ? 1 : 0) << "\n";
  os << "anchor_stabilized = " << (r.anchor_stabilized ? 1 : 0) << "\n";
  os << "seed = " << seed << "\n";
  os << "s_star = " << format_g12(r.s_star) << "\n";
  os << "x_star = " << format_g12(r.x_star) << "\n";
  os << "e_star = " << format_g12(r.e_star) << "\n";
  os << "mu = " << format_g12(r.mu) << "\n";
  os << "follower_foc = " << format_g12(r.follower_foc) << "\n";
  os << "leader_foc = " << format_g12(r.leader_foc) << "\n";
  os << "leader_foc_k_corrected = " << format_g12(r.leader_foc_k_corrected) << "\n";
  os << "comp_slack = " << format_g12(r.comp_slack) << "\n";
  os << "golden_rule_lhs = " << format_g12(r.golden_lhs) << "\n";
  os << "golden_rule_rhs = " << format_g12(r.golden_rhs) << "\n";
  os << "s_star_unconstrained = " << format_g12(r.s_star_unconstrained) << "\n";
  os << "unconstrained_fixed_point = " << (r.unconstrained_fixed_point ? 1 : 0) << "\n";
  os << "s_star_grid = " << format_g12(r.s_star_grid) << "\n";
  os << "x_star_grid = " << format_g12(r.x_star_grid) << "\n";
  os << "e_star_grid = " << format_g12(r.e_star_grid) << "\n";
  os << "follower_foc_boundary = " << (r.follower_foc_boundary ? 1 : 0) << "\n";
  os << "leader_foc_boundary = " << (r.leader_foc_boundary ? 1 : 0) << "\n";
  return os.str();
}

/// Per-state policy and value table of a solved hegemon-client model.
inline std::string write_hc_policy_csv(const HCSolution& sol) {
  std::ostringstream os;
  os << "state,label,x_star,e_star,v_h,w_c\n";
  const HCModel& hc = sol.hc;
  for (int s = hc.first_viable; s < hc.game.num_states(); ++s) {
    const int xi = sol.profile.leader[s];
    os << s << ',' << format_g12(hc.s_grid[s]) << ','
       << format_g12(hc.game.leader_actions[s][xi]) << ','
       << format_g12(hc.game.follower_actions[s][sol.profile.follower[s][xi]]) << ','
       << format_g12(sol.values.w_x[s]) << ',' << format_g12(sol.values.w_e[s])
       << "\n";
  }
  return os.str();
}

inline std::string write_hierarchy_report(const HierarchyReport& rep,
                                          std::uint64_t seed = 0) {
  std::ostringstream os;
  os << "[hierarchy]\n";
  os << "scope = " << rep.scope_note << "\n";
  os << "fingerprint = " << rep.fingerprint << "\n";
  os << "selection_state = " << rep.selection_state << "\n";
  os << "tol = " << format_g12(rep.tol) << "\n";
  os << "ne_tol = " << format_g12(rep.ne_tol) << "\n";
  os << "seed = " << seed << "\n";
  os << "mpe_count = " << rep.mpe.members.size() << "\n";
  os << "viable_count = " << rep.pipeline.viable.members.size() << "\n";
  os << "rp_count = " << rep.pipeline.rp.members.size() << "\n";
  os << "selected = " << (rep.pipeline.selected ? 1 : 0) << "\n";
  os << "enumeration_matches = " << (rep.enumeration_matches ? 1 : 0) << "\n";
  os << "containment_ok = " << (rep.containment_ok ? 1 : 0) << "\n";
  os << "spe_ok = " << (rep.spe_ok ? 1 : 0) << "\n";
  os << "ne_ok = " << (rep.ne_ok ? 1 : 0) << "\n";
  os << "verdict = " << (rep.ok() ? "pass" : "fail") << "\n";
  if (!rep.counterexample.empty()) os << "counterexample = " << rep.counterexample << "\n";
  os << "\n[certificates]\n";
  for (size_t i = 0; i < rep.one_shot_gain.size(); ++i)
    os << "row = " << i << ' ' << format_g12(rep.one_shot_gain[i]) << ' '
       << format_g12(rep.leader_ne_gain[i]) << ' '
       << format_g12(rep.follower_ne_gain[i]) << "\n";
  return os.str();
}

inline std::string write_trajectory_csv(const GameModel& m,
                                        const std::vector<TrajectoryStep>& traj) {
  std::ostringstream os;
  os << "t,state,label,x_label,e_label,u_x,u_e\n";
  for (size_t t = 0; t < traj.size(); ++t) {
    const TrajectoryStep& step = traj[t];
    os << t << ',' << step.state << ',' << format_g12(m.states[step.state]) << ','
       << format_g12(m.leader_actions[step.state][step.x]) << ','
       << format_g12(m.follower_actions[step.state][step.e]) << ','
       << format_g12(step.u_x) << ',' << format_g12(step.u_e) << "\n";
  }
  return os.str();
}

}  // namespace see
