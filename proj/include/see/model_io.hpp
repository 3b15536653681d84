#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "see/hegemon_client.hpp"
#include "see/refine.hpp"

namespace see {

// ---------------------------------------------------------------------------
// Structured text configs: [section] headers with key = value entries.
// Repeated keys are allowed (tabulated rows). Comments start with '#'.
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
  std::vector<const ConfigEntry*> all(const std::string& key) const {
    std::vector<const ConfigEntry*> out;
    for (const auto& e : entries)
      if (e.key == key) out.push_back(&e);
    return out;
  }
};

struct ConfigDoc {
  std::vector<ConfigSection> sections;

  const ConfigSection* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  const ConfigSection& require(const std::string& name) const {
    if (const ConfigSection* s = find(name)) return *s;
    throw ConfigError("missing [" + name + "] section", 0, name);
  }
};

namespace detail {

inline std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

inline double parse_double(const std::string& s, int line, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("value '" + s + "' for key '" + key + "' is not a number",
                      line, key);
  }
}

inline long parse_int(const std::string& s, int line, const std::string& key) {
  try {
    size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("value '" + s + "' for key '" + key + "' is not an integer",
                      line, key);
  }
}

}  // namespace detail

inline ConfigDoc parse_config(const std::string& text) {
  ConfigDoc doc;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    if (size_t hash = s.find('#'); hash != std::string::npos) s = s.substr(0, hash);
    s = detail::strip(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("unterminated section header", line, s);
      doc.sections.push_back({detail::strip(s.substr(1, s.size() - 2)), line, {}});
      continue;
    }
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value'", line, s);
    if (doc.sections.empty())
      throw ConfigError("entry before any [section]", line, s.substr(0, eq));
    ConfigEntry e{detail::strip(s.substr(0, eq)), detail::strip(s.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError("empty key", line, e.key);
    doc.sections.back().entries.push_back(std::move(e));
  }
  return doc;
}

inline ConfigDoc load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path, 0, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// A model plus the optional companion data a config can carry.
struct LoadedModel {
  GameModel model;
  ViabilitySet viability;
  bool has_viability = false;
  std::optional<HCParams> hc;  // present for formula-based (hegemon-client) files
  std::optional<OutsideOption> outside;
};

namespace detail {

inline double req_num(const ConfigSection& sec, const std::string& key) {
  const ConfigEntry* e = sec.find(key);
  if (!e)
    throw ConfigError("missing key '" + key + "' in [" + sec.name + "]",
                      sec.line, key);
  return parse_double(e->value, e->line, key);
}

inline double opt_num(const ConfigSection& sec, const std::string& key, double dflt) {
  const ConfigEntry* e = sec.find(key);
  return e ? parse_double(e->value, e->line, key) : dflt;
}

inline GridSpec parse_grid(const ConfigSection& sec, const std::string& key) {
  const ConfigEntry* e = sec.find(key);
  if (!e)
    throw ConfigError("missing grid '" + key + "' in [" + sec.name + "]",
                      sec.line, key);
  const auto t = tokens(e->value);
  if (t.size() != 3)
    throw ConfigError("grid '" + key + "' needs 'lo hi count'", e->line, key);
  return {parse_double(t[0], e->line, key), parse_double(t[1], e->line, key),
          static_cast<int>(parse_int(t[2], e->line, key))};
}

inline LoadedModel load_table_model(const ConfigDoc& doc) {
  LoadedModel out;
  GameModel& m = out.model;
  const ConfigSection& meta = doc.require("model");
  if (const ConfigEntry* e = meta.find("name")) m.name = e->value;
  m.discount = req_num(meta, "discount");
  m.payoff_bound = req_num(meta, "payoff_bound");
  m.initial_state = static_cast<int>(opt_num(meta, "initial_state", 0));

  const ConfigSection& states = doc.require("states");
  const ConfigEntry* labels = states.find("labels");
  if (!labels)
    throw ConfigError("missing key 'labels' in [states]", states.line, "labels");
  for (const std::string& t : tokens(labels->value))
    m.states.push_back(parse_double(t, labels->line, "labels"));
  const int n = m.num_states();
  if (n == 0) throw ConfigError("empty state list", labels->line, "labels");

  m.leader_actions.resize(n);
  m.follower_actions.resize(n);
  m.payoff_x.resize(n);
  m.payoff_e.resize(n);
  m.kernel.resize(n);
  for (int s = 0; s < n; ++s) {
    const ConfigSection& acts = doc.require("actions." + std::to_string(s));
    for (const char* who : {"leader", "follower"}) {
      const ConfigEntry* e = acts.find(who);
      if (!e)
        throw ConfigError("missing key '" + std::string(who) + "' in [" + acts.name + "]",
                          acts.line, who);
      auto& dst = std::string(who) == "leader" ? m.leader_actions[s] : m.follower_actions[s];
      for (const std::string& t : tokens(e->value))
        dst.push_back(parse_double(t, e->line, who));
      if (dst.empty())
        throw ConfigError("empty action list in [" + acts.name + "]", e->line, who);
    }
    m.payoff_x[s].assign(m.num_leader_actions(s),
                         std::vector<double>(m.num_follower_actions(s), 0.0));
    m.payoff_e[s] = m.payoff_x[s];
    m.kernel[s].assign(m.num_leader_actions(s),
                       std::vector<Support>(m.num_follower_actions(s)));
  }

  auto check_sxe = [&](long s, long x, long e, int line, const std::string& key) {
    if (s < 0 || s >= n)
      throw ConfigError("state index " + std::to_string(s) + " out of range", line, key);
    if (x < 0 || x >= m.num_leader_actions(static_cast<int>(s)))
      throw ConfigError("leader action index " + std::to_string(x) + " out of range at state " +
                            std::to_string(s), line, key);
    if (e < 0 || e >= m.num_follower_actions(static_cast<int>(s)))
      throw ConfigError("effort index " + std::to_string(e) + " out of range at state " +
                            std::to_string(s), line, key);
  };

  const ConfigSection& pay = doc.require("payoffs");
  for (const ConfigEntry* e : pay.all("row")) {
    const auto t = tokens(e->value);
    if (t.size() != 5)
      throw ConfigError("payoff row needs 's x e u_x u_e'", e->line, "row");
    const long s = parse_int(t[0], e->line, "row");
    const long x = parse_int(t[1], e->line, "row");
    const long ee = parse_int(t[2], e->line, "row");
    check_sxe(s, x, ee, e->line, "row");
    m.payoff_x[s][x][ee] = parse_double(t[3], e->line, "row");
    m.payoff_e[s][x][ee] = parse_double(t[4], e->line, "row");
  }

  const ConfigSection& ker = doc.require("kernel");
  for (const ConfigEntry* e : ker.all("row")) {
    const auto t = tokens(e->value);
    if (t.size() < 4)
      throw ConfigError("kernel row needs 's x e next:prob...'", e->line, "row");
    const long s = parse_int(t[0], e->line, "row");
    const long x = parse_int(t[1], e->line, "row");
    const long ee = parse_int(t[2], e->line, "row");
    check_sxe(s, x, ee, e->line, "row");
    Support row;
    for (size_t i = 3; i < t.size(); ++i) {
      const size_t colon = t[i].find(':');
      if (colon == std::string::npos)
        throw ConfigError("kernel mass '" + t[i] + "' needs next:prob", e->line, "row");
      const long next = parse_int(t[i].substr(0, colon), e->line, "row");
      if (next < 0 || next >= n)
        throw ConfigError("next state " + std::to_string(next) + " out of range",
                          e->line, "row");
      row.push_back({static_cast<int>(next),
                     parse_double(t[i].substr(colon + 1), e->line, "row")});
    }
    m.kernel[s][x][ee] = std::move(row);
  }
  for (int s = 0; s < n; ++s)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e)
        if (m.kernel[s][x][e].empty())
          throw ConfigError("no kernel row for (s=" + std::to_string(s) + ",x=" +
                                std::to_string(x) + ",e=" + std::to_string(e) + ")",
                            ker.line, "row");
  return out;
}

}  // namespace detail

/// Loads a model config. `type = table` declares the grids and tables
/// directly; `type = hegemon_client` declares HC parameters and the model is
/// built from the parametric families.
inline LoadedModel load_model(const ConfigDoc& doc) {
  const ConfigSection& meta = doc.require("model");
  const ConfigEntry* type = meta.find("type");
  const std::string kind = type ? type->value : "table";

  LoadedModel out;
  if (kind == "table") {
    out = detail::load_table_model(doc);
  } else if (kind == "hegemon_client") {
    const ConfigSection& hc = doc.require("hc");
    HCParams p;
    p.alpha = detail::opt_num(hc, "alpha", p.alpha);
    p.rho = detail::opt_num(hc, "rho", p.rho);
    p.kappa0 = detail::opt_num(hc, "kappa0", p.kappa0);
    p.kappa1 = detail::opt_num(hc, "kappa1", p.kappa1);
    p.kappa2 = detail::opt_num(hc, "kappa2", p.kappa2);
    p.beta = detail::opt_num(hc, "beta", p.beta);
    p.gamma = detail::opt_num(hc, "gamma", p.gamma);
    p.phi1 = detail::opt_num(hc, "phi1", p.phi1);
    p.phi2 = detail::opt_num(hc, "phi2", p.phi2);
    p.eta = detail::opt_num(hc, "eta", p.eta);
    p.growth = detail::opt_num(hc, "growth", p.growth);
    p.a = detail::opt_num(hc, "a", p.a);
    p.c = detail::opt_num(hc, "c", p.c);
    p.lambda = detail::opt_num(hc, "lambda", p.lambda);
    p.s_min = detail::opt_num(hc, "s_min", p.s_min);
    p.discount = detail::req_num(hc, "discount");
    p.s_init = detail::opt_num(hc, "s_init", p.s_init);
    if (const ConfigEntry* e = hc.find("snap")) {
      if (e->value == "nearest")
        p.snap = SnapRule::nearest;
      else if (e->value == "interpolate")
        p.snap = SnapRule::interpolate;
      else
        throw ConfigError("snap must be 'interpolate' or 'nearest'", e->line, "snap");
    }
    const ConfigSection& grid = doc.require("hc.grid");
    p.s_grid = detail::parse_grid(grid, "s");
    p.x_grid = detail::parse_grid(grid, "x");
    p.e_grid = detail::parse_grid(grid, "e");
    HCModel built = build_hc_model(p);
    out.model = built.game;
    if (const ConfigEntry* e = meta.find("name")) out.model.name = e->value;
    out.viability = built.viability;
    out.has_viability = true;
    out.hc = p;
  } else {
    throw ConfigError("unknown model type '" + kind + "'", type ? type->line : meta.line,
                      "type");
  }

  if (const ConfigSection* viab = doc.find("viability")) {
    const ConfigEntry* members = viab->find("members");
    if (!members)
      throw ConfigError("missing key 'members' in [viability]", viab->line, "members");
    std::vector<int> ms;
    for (const std::string& t : detail::tokens(members->value)) {
      const long s = detail::parse_int(t, members->line, "members");
      if (s < 0 || s >= out.model.num_states())
        throw ConfigError("viability member " + t + " out of range", members->line,
                          "members");
      ms.push_back(static_cast<int>(s));
    }
    out.viability = make_viability(ms);
    out.has_viability = true;
    if (const ConfigEntry* safe = viab->find("safe")) {
      out.viability.safe_action.assign(out.model.num_states(), -1);
      for (const std::string& t : detail::tokens(safe->value)) {
        const size_t colon = t.find(':');
        if (colon == std::string::npos)
          throw ConfigError("safe action '" + t + "' needs state:action", safe->line,
                            "safe");
        const long s = detail::parse_int(t.substr(0, colon), safe->line, "safe");
        const long x = detail::parse_int(t.substr(colon + 1), safe->line, "safe");
        if (s < 0 || s >= out.model.num_states() || x < 0 ||
            x >= out.model.num_leader_actions(static_cast<int>(s)))
          throw ConfigError("safe action '" + t + "' out of range", safe->line, "safe");
        out.viability.safe_action[s] = static_cast<int>(x);
      }
    }
  }
  if (!out.has_viability) {
    std::vector<int> all(out.model.num_states());
    for (int s = 0; s < out.model.num_states(); ++s) all[s] = s;
    out.viability = make_viability(all);
  }

  if (const ConfigSection* outside = doc.find("outside")) {
    const ConfigEntry* vals = outside->find("values");
    if (!vals)
      throw ConfigError("missing key 'values' in [outside]", outside->line, "values");
    OutsideOption opt;
    for (const std::string& t : detail::tokens(vals->value))
      opt.value.push_back(detail::parse_double(t, vals->line, "values"));
    if (static_cast<int>(opt.value.size()) != out.model.num_states())
      throw ConfigError("[outside] values must list one entry per state", vals->line,
                        "values");
    out.outside = std::move(opt);
  }
  return out;
}

inline LoadedModel load_model_file(const std::string& path) {
  return load_model(load_config_file(path));
}

/// Serializes a table model back to config text; parsing the output yields
/// the same model (numbers at 12 significant digits).
inline std::string write_table_model(const LoadedModel& lm) {
  const GameModel& m = lm.model;
  std::ostringstream os;
  os << "[model]\n";
  if (!m.name.empty()) os << "name = " << m.name << "\n";
  os << "type = table\n";
  os << "discount = " << format_g12(m.discount) << "\n";
  os << "payoff_bound = " << format_g12(m.payoff_bound) << "\n";
  os << "initial_state = " << m.initial_state << "\n\n";
  os << "[states]\nlabels =";
  for (double v : m.states) os << ' ' << format_g12(v);
  os << "\n\n";
  if (lm.has_viability) {
    os << "[viability]\nmembers =";
    for (int s : lm.viability.members) os << ' ' << s;
    os << "\n";
    if (lm.viability.has_safe_action()) {
      os << "safe =";
      for (int s : lm.viability.members)
        if (lm.viability.safe_action[s] >= 0)
          os << ' ' << s << ':' << lm.viability.safe_action[s];
      os << "\n";
    }
    os << "\n";
  }
  for (int s = 0; s < m.num_states(); ++s) {
    os << "[actions." << s << "]\nleader =";
    for (double v : m.leader_actions[s]) os << ' ' << format_g12(v);
    os << "\nfollower =";
    for (double v : m.follower_actions[s]) os << ' ' << format_g12(v);
    os << "\n\n";
  }
  os << "[payoffs]\n";
  for (int s = 0; s < m.num_states(); ++s)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e)
        os << "row = " << s << ' ' << x << ' ' << e << ' '
           << format_g12(m.payoff_x[s][x][e]) << ' ' << format_g12(m.payoff_e[s][x][e])
           << "\n";
  os << "\n[kernel]\n";
  for (int s = 0; s < m.num_states(); ++s)
    for (int x = 0; x < m.num_leader_actions(s); ++x)
      for (int e = 0; e < m.num_follower_actions(s); ++e) {
        os << "row = " << s << ' ' << x << ' ' << e;
        for (const Transition& t : m.kernel[s][x][e])
          os << ' ' << t.next << ':' << format_g12(t.prob);
        os << "\n";
      }
  if (lm.outside) {
    os << "\n[outside]\nvalues =";
    for (double v : lm.outside->value) os << ' ' << format_g12(v);
    os << "\n";
  }
  return os.str();
}

}  // namespace see
