#include "phbeam/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace phbeam {

const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::Rest: return "rest";
    case InitialKind::Fourier: return "fourier";
    case InitialKind::Mode1: return "mode1";
    case InitialKind::File: return "file";
  }
  return "?";
}

ConfigError::ConfigError(std::vector<ConfigIssue> found)
    : std::runtime_error(render(found)), issues(std::move(found)) {}

std::string ConfigError::render(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  os << "configuration invalid (" << issues.size()
     << (issues.size() == 1 ? " problem)" : " problems)");
  for (const ConfigIssue& i : issues) {
    os << "\n  ";
    if (i.line > 0) os << "line " << i.line << ": ";
    if (!i.key.empty()) os << i.key << ": ";
    os << i.message;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Presets

namespace {

struct Preset {
  const char* name;
  const char* text;
};

// Shared beam data for the tuned scenarios.
#define FIG1_MATERIAL                 \
  "material.EI = 14.97\n"            \
  "material.EA = 50.0\n"             \
  "material.rhoA = 2.1\n"            \
  "material.L = 0.54\n"              \
  "material.alpha1 = 1e-3\n"         \
  "material.alpha2 = 1e-3\n"

const Preset kPresets[] = {
    {"fig1-ebc",
     "# Nonlinear beam with structural damping, driven to the line\n"
     "# w1(z) = a z + b by the static boundary law.  The cubic shaping\n"
     "# forces soften near the target, so the horizon is long.\n"
     "name = fig1-ebc\n"
     "model = nonlinear_structural\n" FIG1_MATERIAL
     "grid.n_nodes = 201\n"
     "grid.order = 2\n"
     "boundary.unactuated = free\n"
     "integrator.scheme = implicit_midpoint\n"
     "integrator.dt = 1e-4\n"
     "integrator.t_final = 300.0\n"
     "integrator.stride = 1000\n"
     "controller = ebc\n"
     "ebc.c1 = 2e8\n"
     "ebc.c2 = 1000.0\n"
     "ebc.c3 = 8e4\n"
     "ebc.k1 = 2200.0\n"
     "ebc.k2 = 1.0\n"
     "ebc.k3 = 1.0\n"
     "ebc.a = 0.01\n"
     "ebc.b = 0.01\n"
     "initial.kind = rest\n"},
    {"fig1-casimir",
     "# Same beam under the six-state dynamic boundary controller.\n"
     "name = fig1-casimir\n"
     "model = nonlinear_structural\n" FIG1_MATERIAL
     "grid.n_nodes = 201\n"
     "grid.order = 2\n"
     "boundary.unactuated = free\n"
     "integrator.scheme = implicit_midpoint\n"
     "integrator.dt = 1e-4\n"
     "integrator.t_final = 2.0\n"
     "integrator.stride = 20\n"
     "controller = casimir\n"
     "casimir.c1 = 2e8\n"
     "casimir.c2 = 1000.0\n"
     "casimir.c3 = 8e4\n"
     "casimir.a = 0.01\n"
     "casimir.b = 0.01\n"
     "casimir.r4 = 100.0\n"
     "casimir.r5 = 100.0\n"
     "casimir.r6 = 100.0\n"
     "casimir.m4 = 1.0\n"
     "casimir.m5 = 1.0\n"
     "casimir.m6 = 1.0\n"
     "casimir.g4 = 47.0\n"
     "casimir.g5 = 1.0\n"
     "casimir.g6 = 1.0\n"
     "initial.kind = rest\n"},
    {"free-decay",
     "# Unforced decay of a band-limited random initial state; the energy\n"
     "# ledger and the dissipation identities are easiest to read here.\n"
     "name = free-decay\n"
     "model = nonlinear_structural\n" FIG1_MATERIAL
     "grid.n_nodes = 201\n"
     "grid.order = 2\n"
     "boundary.unactuated = clamped\n"
     "integrator.scheme = implicit_midpoint\n"
     "integrator.dt = 1e-4\n"
     "integrator.t_final = 0.5\n"
     "integrator.stride = 10\n"
     "controller = none\n"
     "initial.kind = fourier\n"
     "initial.modes = 5\n"
     "initial.amplitude = 5e-3\n"
     "seed = 42\n"},
    {"mode1-linear",
     "# Undamped linear beam released from its first cantilever mode; the\n"
     "# tip oscillation frequency has a closed-form reference.\n"
     "name = mode1-linear\n"
     "model = linear_viscous\n"
     "material.EI = 14.97\n"
     "material.EA = 50.0\n"
     "material.rhoA = 2.1\n"
     "material.L = 0.54\n"
     "material.alpha1 = 0.0\n"
     "material.alpha2 = 0.0\n"
     "grid.n_nodes = 201\n"
     "grid.order = 2\n"
     "boundary.unactuated = clamped\n"
     "integrator.scheme = implicit_midpoint\n"
     "integrator.dt = 1e-4\n"
     "integrator.t_final = 1.0\n"
     "integrator.stride = 10\n"
     "controller = none\n"
     "initial.kind = mode1\n"
     "initial.amplitude = 1e-3\n"},
};

#undef FIG1_MATERIAL

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const Preset& p : kPresets) names.push_back(p.name);
  return names;
}

bool is_preset(const std::string& name) {
  for (const Preset& p : kPresets)
    if (name == p.name) return true;
  return false;
}

std::string preset_text(const std::string& name) {
  for (const Preset& p : kPresets)
    if (name == p.name) return p.text;
  std::string known;
  for (const Preset& p : kPresets) known += std::string(" ") + p.name;
  throw std::invalid_argument("unknown preset '" + name + "' (known:" + known + ")");
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Entry {
  std::string key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void collect_entries(const std::string& text, int depth, std::vector<Entry>& out,
                     std::vector<ConfigIssue>& issues) {
  if (depth > 4) {
    issues.push_back({0, "preset", "presets nested too deeply"});
    return;
  }
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string s = trim(raw);
    if (s.empty()) continue;

    size_t eq = s.find('=');
    std::string key, value;
    if (eq == std::string::npos) {
      // A bare token names a preset.
      key = "preset";
      value = s;
    } else {
      key = trim(s.substr(0, eq));
      value = trim(s.substr(eq + 1));
      if (key.empty()) {
        issues.push_back({line, "", "expected 'key = value'"});
        continue;
      }
    }

    if (key == "preset") {
      if (!is_preset(value)) {
        issues.push_back({line, "preset", "unknown preset '" + value + "'"});
        continue;
      }
      // Preset entries expand in place; later lines override them.
      std::vector<Entry> inner;
      collect_entries(preset_text(value), depth + 1, inner, issues);
      for (Entry& e : inner) e.line = line;
      out.insert(out.end(), inner.begin(), inner.end());
      continue;
    }
    out.push_back({key, value, line});
  }
}

class Applier {
 public:
  Applier(ScenarioConfig& cfg, std::vector<ConfigIssue>& issues)
      : cfg_(cfg), issues_(issues) {}

  void apply(const Entry& e) {
    auto it = handlers().find(e.key);
    if (it == handlers().end()) {
      issues_.push_back({e.line, e.key, "unknown key"});
      return;
    }
    current_ = &e;
    it->second(*this);
    seen_.insert(e.key);
    line_of_[e.key] = e.line;
  }

  bool seen(const std::string& key) const { return seen_.count(key) > 0; }
  int line_of(const std::string& key) const {
    auto it = line_of_.find(key);
    return it == line_of_.end() ? 0 : it->second;
  }

  void issue(const std::string& key, const std::string& message) {
    issues_.push_back({line_of(key), key, message});
  }

 private:
  using Handler = std::function<void(Applier&)>;

  const std::string& value() const { return current_->value; }

  void fail(const std::string& message) {
    issues_.push_back({current_->line, current_->key, message});
  }

  double number() {
    const std::string& v = value();
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) {
      fail("expected a number, got '" + v + "'");
      return 0.0;
    }
    return d;
  }

  long long integer() {
    const std::string& v = value();
    char* end = nullptr;
    long long i = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) {
      fail("expected an integer, got '" + v + "'");
      return 0;
    }
    return i;
  }

  std::uint64_t unsigned_integer() {
    const std::string& v = value();
    char* end = nullptr;
    unsigned long long i = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || v[0] == '-') {
      fail("expected a nonnegative integer, got '" + v + "'");
      return 0;
    }
    return i;
  }

  template <typename T>
  void choice(T& slot, std::initializer_list<std::pair<const char*, T>> options) {
    std::string expected;
    for (const auto& [name, val] : options) {
      if (value() == name) {
        slot = val;
        return;
      }
      expected += std::string(expected.empty() ? "" : "|") + name;
    }
    fail("unknown value '" + value() + "' (expected " + expected + ")");
  }

  static const std::map<std::string, Handler>& handlers();

  ScenarioConfig& cfg_;
  std::vector<ConfigIssue>& issues_;
  const Entry* current_ = nullptr;
  std::set<std::string> seen_;
  std::map<std::string, int> line_of_;
};

const std::map<std::string, Applier::Handler>& Applier::handlers() {
  static const std::map<std::string, Handler> table = {
      {"name", [](Applier& a) { a.cfg_.name = a.value(); }},
      {"model",
       [](Applier& a) {
         a.choice(a.cfg_.variant, {{"linear_viscous", ModelVariant::LinearViscous},
                                   {"nonlinear_undamped", ModelVariant::NonlinearUndamped},
                                   {"nonlinear_structural", ModelVariant::NonlinearStructural}});
       }},
      {"material.EI", [](Applier& a) { a.cfg_.material.EI = a.number(); }},
      {"material.EA", [](Applier& a) { a.cfg_.material.EA = a.number(); }},
      {"material.rhoA", [](Applier& a) { a.cfg_.material.rhoA = a.number(); }},
      {"material.L", [](Applier& a) { a.cfg_.material.L = a.number(); }},
      {"material.alpha1", [](Applier& a) { a.cfg_.material.alpha1 = a.number(); }},
      {"material.alpha2", [](Applier& a) { a.cfg_.material.alpha2 = a.number(); }},
      {"grid.n_nodes", [](Applier& a) { a.cfg_.n_nodes = static_cast<int>(a.integer()); }},
      {"grid.order", [](Applier& a) { a.cfg_.order = static_cast<int>(a.integer()); }},
      {"boundary.unactuated",
       [](Applier& a) {
         a.choice(a.cfg_.unactuated,
                  {{"clamped", BoundaryKind::Clamped}, {"free", BoundaryKind::Free}});
       }},
      {"integrator.scheme",
       [](Applier& a) {
         a.choice(a.cfg_.scheme, {{"implicit_midpoint", Scheme::ImplicitMidpoint},
                                  {"rk4", Scheme::Rk4}});
       }},
      {"integrator.dt", [](Applier& a) { a.cfg_.dt = a.number(); }},
      {"integrator.t_final", [](Applier& a) { a.cfg_.t_final = a.number(); }},
      {"integrator.stride", [](Applier& a) { a.cfg_.stride = static_cast<int>(a.integer()); }},
      {"integrator.newton_tol", [](Applier& a) { a.cfg_.newton_tol = a.number(); }},
      {"integrator.max_newton_iters",
       [](Applier& a) { a.cfg_.max_newton_iters = static_cast<int>(a.integer()); }},
      {"integrator.jacobian",
       [](Applier& a) {
         a.choice(a.cfg_.fd_jacobian, {{"analytic", false}, {"fd", true}});
       }},
      {"controller",
       [](Applier& a) {
         a.choice(a.cfg_.control, {{"none", ControlMode::OpenLoop},
                                   {"ebc", ControlMode::Ebc},
                                   {"ebc_target", ControlMode::EbcTarget},
                                   {"casimir", ControlMode::Casimir}});
       }},
      {"ebc.c1", [](Applier& a) { a.cfg_.ebc.c1 = a.number(); }},
      {"ebc.c2", [](Applier& a) { a.cfg_.ebc.c2 = a.number(); }},
      {"ebc.c3", [](Applier& a) { a.cfg_.ebc.c3 = a.number(); }},
      {"ebc.k1", [](Applier& a) { a.cfg_.ebc.k1 = a.number(); }},
      {"ebc.k2", [](Applier& a) { a.cfg_.ebc.k2 = a.number(); }},
      {"ebc.k3", [](Applier& a) { a.cfg_.ebc.k3 = a.number(); }},
      {"ebc.a", [](Applier& a) { a.cfg_.ebc.a = a.number(); }},
      {"ebc.b", [](Applier& a) { a.cfg_.ebc.b = a.number(); }},
      {"casimir.c1", [](Applier& a) { a.cfg_.casimir.c1 = a.number(); }},
      {"casimir.c2", [](Applier& a) { a.cfg_.casimir.c2 = a.number(); }},
      {"casimir.c3", [](Applier& a) { a.cfg_.casimir.c3 = a.number(); }},
      {"casimir.a", [](Applier& a) { a.cfg_.casimir.a = a.number(); }},
      {"casimir.b", [](Applier& a) { a.cfg_.casimir.b = a.number(); }},
      {"casimir.r4", [](Applier& a) { a.cfg_.casimir.r4 = a.number(); }},
      {"casimir.r5", [](Applier& a) { a.cfg_.casimir.r5 = a.number(); }},
      {"casimir.r6", [](Applier& a) { a.cfg_.casimir.r6 = a.number(); }},
      {"casimir.m4", [](Applier& a) { a.cfg_.casimir.m4 = a.number(); }},
      {"casimir.m5", [](Applier& a) { a.cfg_.casimir.m5 = a.number(); }},
      {"casimir.m6", [](Applier& a) { a.cfg_.casimir.m6 = a.number(); }},
      {"casimir.g4", [](Applier& a) { a.cfg_.casimir.g4 = a.number(); }},
      {"casimir.g5", [](Applier& a) { a.cfg_.casimir.g5 = a.number(); }},
      {"casimir.g6", [](Applier& a) { a.cfg_.casimir.g6 = a.number(); }},
      {"initial.kind",
       [](Applier& a) {
         a.choice(a.cfg_.initial, {{"rest", InitialKind::Rest},
                                   {"fourier", InitialKind::Fourier},
                                   {"mode1", InitialKind::Mode1},
                                   {"file", InitialKind::File}});
       }},
      {"initial.modes",
       [](Applier& a) { a.cfg_.initial_modes = static_cast<int>(a.integer()); }},
      {"initial.amplitude", [](Applier& a) { a.cfg_.initial_amplitude = a.number(); }},
      {"initial.file", [](Applier& a) { a.cfg_.initial_file = a.value(); }},
      {"seed", [](Applier& a) { a.cfg_.seed = a.unsigned_integer(); }},
      {"output.dir", [](Applier& a) { a.cfg_.output_dir = a.value(); }},
  };
  return table;
}

void validate(ScenarioConfig& cfg, Applier& ap, std::vector<ConfigIssue>& issues) {
  static const char* required[] = {"model",        "material.EI",   "material.EA",
                                   "material.rhoA", "material.L",    "grid.n_nodes",
                                   "integrator.dt", "integrator.t_final"};
  for (const char* key : required)
    if (!ap.seen(key)) issues.push_back({0, key, "required key missing"});

  auto check = [&](bool ok, const char* key, const char* message) {
    if (!ok) ap.issue(key, message);
  };

  if (ap.seen("material.EI")) check(cfg.material.EI > 0, "material.EI", "must be positive");
  if (ap.seen("material.EA")) check(cfg.material.EA > 0, "material.EA", "must be positive");
  if (ap.seen("material.rhoA"))
    check(cfg.material.rhoA > 0, "material.rhoA", "must be positive");
  if (ap.seen("material.L")) check(cfg.material.L > 0, "material.L", "must be positive");
  check(cfg.material.alpha1 >= 0, "material.alpha1", "must be nonnegative");
  check(cfg.material.alpha2 >= 0, "material.alpha2", "must be nonnegative");

  if (ap.seen("grid.n_nodes"))
    check(cfg.n_nodes >= 9, "grid.n_nodes", "must be at least 9");
  check(cfg.order == 2 || cfg.order == 4, "grid.order", "must be 2 or 4");

  if (ap.seen("integrator.dt")) check(cfg.dt > 0, "integrator.dt", "must be positive");
  if (ap.seen("integrator.t_final"))
    check(cfg.t_final >= 0, "integrator.t_final", "must be nonnegative");
  check(cfg.stride >= 1, "integrator.stride", "must be at least 1");
  check(cfg.newton_tol > 0, "integrator.newton_tol", "must be positive");
  check(cfg.max_newton_iters >= 1, "integrator.max_newton_iters", "must be at least 1");

  if (cfg.control == ControlMode::Ebc || cfg.control == ControlMode::EbcTarget) {
    check(cfg.ebc.c1 > 0, "ebc.c1", "must be positive");
    check(cfg.ebc.c2 > 0, "ebc.c2", "must be positive");
    check(cfg.ebc.c3 > 0, "ebc.c3", "must be positive");
    check(cfg.ebc.k1 > 0, "ebc.k1", "must be positive");
    check(cfg.ebc.k2 > 0, "ebc.k2", "must be positive");
    check(cfg.ebc.k3 > 0, "ebc.k3", "must be positive");
  }
  if (cfg.control == ControlMode::Casimir) {
    check(cfg.casimir.c1 > 0, "casimir.c1", "must be positive");
    check(cfg.casimir.c2 > 0, "casimir.c2", "must be positive");
    check(cfg.casimir.c3 > 0, "casimir.c3", "must be positive");
    check(cfg.casimir.m4 > 0, "casimir.m4", "must be positive");
    check(cfg.casimir.m5 > 0, "casimir.m5", "must be positive");
    check(cfg.casimir.m6 > 0, "casimir.m6", "must be positive");
    check(cfg.casimir.r4 >= 0, "casimir.r4", "must be nonnegative");
    check(cfg.casimir.r5 >= 0, "casimir.r5", "must be nonnegative");
    check(cfg.casimir.r6 >= 0, "casimir.r6", "must be nonnegative");
  }

  check(cfg.initial_modes >= 1, "initial.modes", "must be at least 1");
  check(cfg.initial_amplitude >= 0, "initial.amplitude", "must be nonnegative");
  if (cfg.initial == InitialKind::File)
    check(!cfg.initial_file.empty(), "initial.file", "required for initial.kind = file");
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  std::vector<ConfigIssue> issues;
  std::vector<Entry> entries;
  collect_entries(text, 0, entries, issues);

  ScenarioConfig cfg;
  Applier ap(cfg, issues);
  for (const Entry& e : entries) ap.apply(e);
  validate(cfg, ap, issues);

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{0, path, "cannot open configuration file"}});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string render_config(const ScenarioConfig& c) {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "name = " << c.name << "\n";
  os << "model = " << to_string(c.variant) << "\n";
  os << "material.EI = " << num(c.material.EI) << "\n";
  os << "material.EA = " << num(c.material.EA) << "\n";
  os << "material.rhoA = " << num(c.material.rhoA) << "\n";
  os << "material.L = " << num(c.material.L) << "\n";
  os << "material.alpha1 = " << num(c.material.alpha1) << "\n";
  os << "material.alpha2 = " << num(c.material.alpha2) << "\n";
  os << "grid.n_nodes = " << c.n_nodes << "\n";
  os << "grid.order = " << c.order << "\n";
  os << "boundary.unactuated = " << to_string(c.unactuated) << "\n";
  os << "integrator.scheme = " << to_string(c.scheme) << "\n";
  os << "integrator.dt = " << num(c.dt) << "\n";
  os << "integrator.t_final = " << num(c.t_final) << "\n";
  os << "integrator.stride = " << c.stride << "\n";
  os << "integrator.newton_tol = " << num(c.newton_tol) << "\n";
  os << "integrator.max_newton_iters = " << c.max_newton_iters << "\n";
  os << "integrator.jacobian = " << (c.fd_jacobian ? "fd" : "analytic") << "\n";
  os << "controller = " << to_string(c.control) << "\n";
  if (c.control == ControlMode::Ebc || c.control == ControlMode::EbcTarget) {
    os << "ebc.c1 = " << num(c.ebc.c1) << "\n";
    os << "ebc.c2 = " << num(c.ebc.c2) << "\n";
    os << "ebc.c3 = " << num(c.ebc.c3) << "\n";
    os << "ebc.k1 = " << num(c.ebc.k1) << "\n";
    os << "ebc.k2 = " << num(c.ebc.k2) << "\n";
    os << "ebc.k3 = " << num(c.ebc.k3) << "\n";
    os << "ebc.a = " << num(c.ebc.a) << "\n";
    os << "ebc.b = " << num(c.ebc.b) << "\n";
  }
  if (c.control == ControlMode::Casimir) {
    os << "casimir.c1 = " << num(c.casimir.c1) << "\n";
    os << "casimir.c2 = " << num(c.casimir.c2) << "\n";
    os << "casimir.c3 = " << num(c.casimir.c3) << "\n";
    os << "casimir.a = " << num(c.casimir.a) << "\n";
    os << "casimir.b = " << num(c.casimir.b) << "\n";
    os << "casimir.r4 = " << num(c.casimir.r4) << "\n";
    os << "casimir.r5 = " << num(c.casimir.r5) << "\n";
    os << "casimir.r6 = " << num(c.casimir.r6) << "\n";
    os << "casimir.m4 = " << num(c.casimir.m4) << "\n";
    os << "casimir.m5 = " << num(c.casimir.m5) << "\n";
    os << "casimir.m6 = " << num(c.casimir.m6) << "\n";
    os << "casimir.g4 = " << num(c.casimir.g4) << "\n";
    os << "casimir.g5 = " << num(c.casimir.g5) << "\n";
    os << "casimir.g6 = " << num(c.casimir.g6) << "\n";
  }
  os << "initial.kind = " << to_string(c.initial) << "\n";
  if (c.initial == InitialKind::Fourier) {
    os << "initial.modes = " << c.initial_modes << "\n";
  }
  if (c.initial == InitialKind::Fourier || c.initial == InitialKind::Mode1) {
    os << "initial.amplitude = " << num(c.initial_amplitude) << "\n";
  }
  if (c.initial == InitialKind::File) {
    os << "initial.file = " << c.initial_file << "\n";
  }
  os << "seed = " << c.seed << "\n";
  if (!c.output_dir.empty()) os << "output.dir = " << c.output_dir << "\n";
  return os.str();
}

}  // namespace phbeam
