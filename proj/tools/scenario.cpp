#include "scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include <vmstab/common.hpp>

namespace vmstab::cli {

namespace pt = boost::property_tree;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string tok;
  std::istringstream is(text);
  while (std::getline(is, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(tok, &pos);
    } catch (...) {
      pos = 0;
    }
    if (pos != tok.size() || !std::isfinite(v)) throw ConfigError(what + ": '" + tok + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

namespace {

// line numbers of "key = value" entries per section, for diagnostics
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream is(text);
  std::string line, section;
  int no = 0;
  static const std::regex sec(R"(^\s*\[([^\]]+)\]\s*$)");
  static const std::regex kv(R"(^\s*([^=;#\s][^=]*?)\s*=)");
  std::smatch m;
  while (std::getline(is, line)) {
    ++no;
    if (std::regex_search(line, m, sec)) section = m[1];
    else if (std::regex_search(line, m, kv)) lines[section + "." + std::string(m[1])] = no;
  }
  return lines;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string origin, std::map<std::string, int> lines)
      : tree_(tree), origin_(std::move(origin)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    auto it = lines_.find(key);
    std::string where = origin_ + (it != lines_.end() ? ":" + std::to_string(it->second) : "");
    throw ConfigError(where + ": " + key + ": " + msg);
  }

  bool has(const std::string& key) const { return static_cast<bool>(tree_.get_optional<std::string>(key)); }

  std::string str(const std::string& key, const std::string& def) {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(key);
    return v ? strip(*v) : def;
  }

  double num(const std::string& key, double def) {
    if (!has(key)) {
      used_.insert(key);
      return def;
    }
    std::string s = str(key, "");
    size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (...) {
      fail(key, "'" + s + "' is not a number");
    }
    if (pos != s.size() || !std::isfinite(v)) fail(key, "'" + s + "' is not a finite number");
    return v;
  }

  int integer(const std::string& key, int def) {
    double v = num(key, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected an integer");
    return static_cast<int>(v);
  }

  bool flag(const std::string& key, bool def) {
    if (!has(key)) {
      used_.insert(key);
      return def;
    }
    std::string s = str(key, "");
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    fail(key, "expected true/false, got '" + s + "'");
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    std::string s = str(key, def);
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
      fail(key, "unknown value '" + s + "' (" + opts + ")");
    }
    return s;
  }

  void mark(const std::string& key) { used_.insert(key); }

  void check_unknown() const {
    for (const auto& [sec, sub] : tree_) {
      if (sub.empty() && !sub.data().empty()) fail(sec, "entry outside any section");
      for (const auto& [k, v] : sub) {
        std::string key = sec + "." + k;
        if (!used_.count(key)) fail(key, "unknown key");
      }
    }
  }

  static std::string strip(std::string s) {
    // trailing inline comments
    for (char c : {';', '#'}) {
      auto p = s.find(c);
      if (p != std::string::npos) s.erase(p);
    }
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  }

 private:
  const pt::ptree& tree_;
  std::string origin_;
  std::map<std::string, int> lines_;
  std::set<std::string> used_;
};

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Reader r(tree, origin, key_lines(text));
  Scenario s;
  s.text = text;
  s.path = origin;

  if (!r.has("profiles.name")) r.fail("profiles.name", "missing (the scenario needs a profile)");
  s.profile = r.str("profiles.name", "");
  {
    auto names = builtin_profile_names();
    if (std::find(names.begin(), names.end(), s.profile) == names.end()) {
      std::string opts;
      for (const auto& a : names) opts += (opts.empty() ? "" : "|") + a;
      r.fail("profiles.name", "unknown profile '" + s.profile + "' (" + opts + ")");
    }
  }
  if (auto sec = tree.get_child_optional("profiles")) {
    for (const auto& [k, v] : *sec) {
      if (k.rfind("param.", 0) == 0) {
        s.params[k.substr(6)] = r.num("profiles." + k, 0);
      }
    }
  }
  s.scaling = r.choice("profiles.scaling", "none", {"none", "amplitude", "momentum", "species"});
  s.K = r.num("profiles.K", 1.0);
  if (!(s.K > 0)) r.fail("profiles.K", "must be > 0");
  s.k_plus = r.num("profiles.k_plus", 1.0);
  s.k_minus = r.num("profiles.k_minus", 1.0);
  if (s.k_plus < 0 || s.k_minus < 0) r.fail("profiles.k_plus", "species amplitudes must be >= 0");

  s.n = r.integer("discretization.n", 64);
  if (s.n < 8) r.fail("discretization.n", "must be >= 8");
  s.quad_tol = r.num("discretization.quad_tol", 1e-10);
  if (!(s.quad_tol > 0)) r.fail("discretization.quad_tol", "tolerances must be > 0");
  s.quad_level = r.integer("discretization.quad_level", 0);
  if (s.quad_level < 0 || s.quad_level > 6) r.fail("discretization.quad_level", "must be in [0, 6]");

  s.kind = r.choice("equilibrium.kind", "homogeneous", {"homogeneous", "volterra", "dirichlet"});
  s.alpha = r.num("equilibrium.alpha", 0);
  s.beta = r.num("equilibrium.beta", 0);
  s.eq_tol = r.num("equilibrium.tol", 1e-12);
  if (!(s.eq_tol > 0)) r.fail("equilibrium.tol", "tolerances must be > 0");
  s.eq_max_iter = r.integer("equilibrium.max_iter", 400);

  {
    std::string p = r.choice("operators.projection", "auto", {"auto", "explicit", "orbit"});
    s.projection = parse_projection_mode(p);
  }
  s.rin_per_cell = r.integer("operators.rin_per_cell", 2);
  if (s.rin_per_cell < 1) r.fail("operators.rin_per_cell", "must be >= 1");
  s.symmetry_gate = r.num("operators.symmetry_gate", 1e-4);
  if (!(s.symmetry_gate > 0)) r.fail("operators.symmetry_gate", "tolerances must be > 0");
  s.cross_check = r.flag("operators.cross_check", false);

  s.workflow = r.choice("stability.workflow", "verdict", {"verdict", "mode", "certificates", "diagnostics", "sweep"});
  s.lambda_min = r.num("stability.lambda_min", 1e-2);
  s.lambda_max = r.num("stability.lambda_max", 1e2);
  if (!(s.lambda_min > 0) || !(s.lambda_max > s.lambda_min))
    r.fail("stability.lambda_min", "need 0 < lambda_min < lambda_max");
  s.scan_points = r.integer("stability.scan_points", 25);
  if (s.scan_points < 2) r.fail("stability.scan_points", "must be >= 2");
  s.lambda_tol = r.num("stability.lambda_tol", 1e-6);
  if (!(s.lambda_tol > 0)) r.fail("stability.lambda_tol", "tolerances must be > 0");
  s.refine = r.flag("stability.refine", true);
  s.band_factor = r.num("stability.band_factor", 10);
  if (!(s.band_factor > 0)) r.fail("stability.band_factor", "must be > 0");
  if (r.has("stability.diagnostic_lambdas")) {
    try {
      s.diag_lambdas = parse_list(r.str("stability.diagnostic_lambdas", ""), "stability.diagnostic_lambdas");
    } catch (const ConfigError& e) {
      r.fail("stability.diagnostic_lambdas", e.what());
    }
    for (double l : s.diag_lambdas)
      if (l < 0) r.fail("stability.diagnostic_lambdas", "lambda must be >= 0");
  } else {
    r.mark("stability.diagnostic_lambdas");
  }
  s.dump_matrices = r.flag("stability.dump_matrices", false);

  s.sweep_family = r.choice("sweep.family", "homogeneous", {"homogeneous", "dirichlet-magnetic"});
  s.sweep_scaling = r.choice("sweep.scaling", "amplitude", {"amplitude", "momentum"});
  if (r.has("sweep.values")) {
    try {
      s.sweep_values = parse_list(r.str("sweep.values", ""), "sweep.values");
    } catch (const ConfigError& e) {
      r.fail("sweep.values", e.what());
    }
    for (double v : s.sweep_values)
      if (!(v > 0)) r.fail("sweep.values", "K values must be > 0");
  } else {
    r.mark("sweep.values");
  }
  s.sweep_bisect = r.flag("sweep.bisect", true);
  s.sweep_rel_tol = r.num("sweep.rel_tol", 1e-4);
  if (!(s.sweep_rel_tol > 0)) r.fail("sweep.rel_tol", "tolerances must be > 0");
  if (s.workflow == "sweep" && s.sweep_values.empty()) r.fail("sweep.values", "the sweep workflow needs K values");

  s.out_dir = r.str("output.dir", "");
  s.name = r.str("output.name", "");
  r.check_unknown();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  Scenario s = parse_scenario(ss.str(), path);
  if (s.name.empty()) {
    std::string base = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
    auto dot = base.find_last_of('.');
    s.name = dot == std::string::npos ? base : base.substr(0, dot);
  }
  return s;
}

Profile build_profile(const Scenario& s) {
  Profile p = make_profile(s.profile, s.params);
  if (s.scaling == "amplitude") return scale_amplitude(p, s.K);
  if (s.scaling == "momentum") return scale_momentum(p, s.K);
  if (s.scaling == "species") return scale_species(p, s.k_plus, s.k_minus);
  return p;
}

}  // namespace vmstab::cli
