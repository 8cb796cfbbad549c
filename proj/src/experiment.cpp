#include "rbsde_lab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "rbsde_lab/finance.hpp"
#include "rbsde_lab/minimality.hpp"
#include "rbsde_lab/obstacle_analysis.hpp"
#include "rbsde_lab/rbsde.hpp"
#include "rbsde_lab/second_order.hpp"

namespace rbsde_lab {

namespace fs = std::filesystem;

namespace {

std::string join_messages(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "\n";
    out += d.field + ": " + d.message;
  }
  return out;
}

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> tol{
      {"node", 1e-12},       {"identity", 1e-10},   {"minimality", 1e-10}, {"superhedge", 1e-10},
      {"suboptimal", 1e-3},  {"oscillation", 1e-12}, {"witness", 1e-6},    {"probe_shift", 0.01}};
  return tol;
}

// ---- schema helpers -------------------------------------------------------

class Checker {
 public:
  explicit Checker(const Json& root) : root_(root) {}

  void error(const std::string& field, const std::string& message) { diags_.push_back({field, message}); }
  std::vector<Diagnostic> take() { return std::move(diags_); }

  const Json* object(const Json& parent, const std::string& key, const std::string& path, bool required) {
    if (!parent.is_object() || !parent.contains(key)) {
      if (required) error(path + "/" + key, "required object missing");
      return nullptr;
    }
    const Json& v = parent.at(key);
    if (!v.is_object()) {
      error(path + "/" + key, "must be an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const Json& parent, const std::string& key, const std::string& path, bool required) {
    if (!parent.is_object() || !parent.contains(key)) {
      if (required) error(path + "/" + key, "required number missing");
      return std::nullopt;
    }
    const Json& v = parent.at(key);
    if (!v.is_number()) {
      error(path + "/" + key, "must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      error(path + "/" + key, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<long long> integer(const Json& parent, const std::string& key, const std::string& path,
                                   bool required) {
    if (!parent.is_object() || !parent.contains(key)) {
      if (required) error(path + "/" + key, "required integer missing");
      return std::nullopt;
    }
    const Json& v = parent.at(key);
    if (!v.is_number_integer()) {
      error(path + "/" + key, "must be an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<std::string> string(const Json& parent, const std::string& key, const std::string& path,
                                    bool required) {
    if (!parent.is_object() || !parent.contains(key)) {
      if (required) error(path + "/" + key, "required string missing");
      return std::nullopt;
    }
    const Json& v = parent.at(key);
    if (!v.is_string()) {
      error(path + "/" + key, "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

 private:
  const Json& root_;
  std::vector<Diagnostic> diags_;
};

constexpr const char* kGeneratorFamilies[] = {"zero", "affine-y", "linear", "two-rates"};
constexpr const char* kBarrierFamilies[] = {"constant", "affine", "abs", "cosine", "put", "call", "zhang", "tabulated"};

bool one_of(const std::string& s, std::initializer_list<const char*> names) {
  return std::any_of(names.begin(), names.end(), [&](const char* n) { return s == n; });
}

template <std::size_t N>
bool in_list(const std::string& s, const char* const (&names)[N]) {
  return std::any_of(std::begin(names), std::end(names), [&](const char* n) { return s == n; });
}

template <std::size_t N>
std::string list_names(const char* const (&names)[N]) {
  std::string out;
  for (const char* n : names) out += (out.empty() ? "" : ", ") + std::string(n);
  return out;
}

double get_or(const Json& j, const std::string& key, double fallback) {
  return j.is_object() && j.contains(key) ? j.at(key).get<double>() : fallback;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// ---- parsed pieces --------------------------------------------------------

struct LatticeCfg {
  double horizon = 1.0;
  int steps = 8;
  double spacing = 1.0;
};

LatticeCfg lattice_cfg(const Json& cfg, double default_horizon = 1.0) {
  LatticeCfg l;
  l.horizon = default_horizon;
  if (cfg.contains("lattice")) {
    const Json& j = cfg.at("lattice");
    l.horizon = get_or(j, "horizon", default_horizon);
    if (j.contains("steps")) l.steps = j.at("steps").get<int>();
    l.spacing = get_or(j, "spacing_factor", 1.0);
  }
  return l;
}

std::vector<double> control_levels(const Json& cfg) {
  if (cfg.contains("controls")) return cfg.at("controls").get<std::vector<double>>();
  if (cfg.contains("market")) {
    std::vector<double> a;
    for (double s : cfg.at("market").at("sigmas").get<std::vector<double>>()) a.push_back(s * s);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
  }
  return {1.0};
}

Generator make_generator(const Json& cfg, const ControlSet& controls) {
  if (!cfg.contains("generator")) return generator_zero();
  const Json& g = cfg.at("generator");
  const std::string fam = g.at("family").get<std::string>();
  if (fam == "zero") return generator_zero();
  if (fam == "affine-y") return generator_affine_y(get_or(g, "rate", 0.0));
  if (fam == "linear") return generator_linear(get_or(g, "r", 0.0), get_or(g, "theta", 0.0));
  return generator_two_rates(get_or(g, "r_low", 0.0), get_or(g, "r_high", 0.0), get_or(g, "theta", 0.0),
                             controls.min());
}

/// Lipschitz constants the generator family will declare, without building it.
std::pair<double, double> predicted_lipschitz(const Json& g, double a_floor) {
  const std::string fam = g.value("family", "zero");
  if (fam == "affine-y") return {std::abs(get_or(g, "rate", 0.0)), 0.0};
  if (fam == "linear") return {std::abs(get_or(g, "r", 0.0)), std::abs(get_or(g, "theta", 0.0))};
  if (fam == "two-rates") {
    const double lo = get_or(g, "r_low", 0.0);
    const double hi = get_or(g, "r_high", 0.0);
    return {std::max(std::abs(lo), std::abs(hi)), std::abs(get_or(g, "theta", 0.0)) + (hi - lo) / std::sqrt(a_floor)};
  }
  return {0.0, 0.0};
}

using BarrierFn = std::function<double(double, double)>;

double zhang_tail(const std::string& name, double b) { return name == "quadratic" ? b * b : std::abs(b); }

/// Tabulated barrier rows "i,j,value" after a header line.
std::map<std::pair<int, int>, double> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::vector<Diagnostic>{{path.string(), "cannot open tabulated obstacle"}});
  std::map<std::pair<int, int>, double> rows;
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int i = 0, j = 0;
    double v = 0.0;
    char c1 = 0, c2 = 0;
    if (!(ss >> i >> c1 >> j >> c2 >> v) || c1 != ',' || c2 != ',')
      throw ConfigError(std::vector<Diagnostic>{{path.string() + ":" + std::to_string(lineno), "expected i,j,value"}});
    rows[{i, j}] = v;
  }
  return rows;
}

Barrier make_barrier(const Lattice& lat, const Json& b, const fs::path& base) {
  const std::string fam = b.at("family").get<std::string>();
  if (fam == "tabulated") {
    const auto rows = read_table(resolve(base, b.at("path").get<std::string>()));
    Barrier out = Barrier::absent(lat.steps());
    for (const auto& [key, v] : rows)
      if (key.first >= 0 && key.first <= lat.steps() && std::abs(key.second) <= key.first)
        out.set(key.first, key.second, v);
    return out;
  }
  if (fam == "zhang") {
    const std::string tail = b.value("tail", "abs");
    Barrier out = zhang_obstacle(lat, [tail](double x) { return zhang_tail(tail, x); }).lower;
    return out;
  }
  const double c0 = get_or(b, "c0", get_or(b, "value", 0.0));
  const double ct = get_or(b, "ct", 0.0);
  const double cb = get_or(b, "cb", 0.0);
  BarrierFn fn;
  if (fam == "constant") fn = [c0](double, double) { return c0; };
  else if (fam == "affine") fn = [=](double t, double x) { return c0 + ct * t + cb * x; };
  else if (fam == "abs") fn = [=](double t, double x) { return c0 + ct * t + cb * std::abs(x); };
  else if (fam == "cosine") {
    const double amp = get_or(b, "amplitude", 1.0);
    const double freq = get_or(b, "frequency", 1.0);
    fn = [=](double t, double x) { return c0 + ct * t + amp * std::cos(freq * x); };
  } else {
    const double k = get_or(b, "strike", 1.0);
    const double s0 = get_or(b, "spot", 1.0);
    const bool put = fam == "put";
    fn = [=](double, double x) {
      const double s = s0 * std::exp(x);
      return std::max(put ? k - s : s - k, 0.0);
    };
  }
  return Barrier::from_function(lat, fn);
}

ObstacleSpec make_obstacle_spec(const Lattice& lat, const Json& cfg, const fs::path& base) {
  const Json& o = cfg.at("obstacle");
  const int n = lat.steps();
  ObstacleSpec obs;
  obs.lower = o.contains("lower") ? make_barrier(lat, o.at("lower"), base) : Barrier::absent(n);
  obs.upper = o.contains("upper") ? make_barrier(lat, o.at("upper"), base) : Barrier::absent(n);
  obs.terminal.assign(static_cast<std::size_t>(2 * n + 1), 0.0);
  std::optional<Barrier> term;
  if (o.contains("terminal")) term = make_barrier(lat, o.at("terminal"), base);
  for (int j = -n; j <= n; ++j) {
    std::optional<double> v;
    if (term) v = term->at(n, j);
    if (!v) v = obs.lower.at(n, j);
    if (!v) v = obs.upper.at(n, j);
    if (!v) throw ConfigError(std::vector<Diagnostic>{{"/obstacle/terminal", "terminal value undefined at j = " + std::to_string(j)}});
    obs.terminal[static_cast<std::size_t>(j + n)] = *v;
  }
  try {
    validate_obstacle(lat, obs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::vector<Diagnostic>{{"/obstacle", e.what()}});
  }
  return obs;
}

MarketSpec make_market(const Json& m) {
  MarketSpec spec;
  spec.spot = get_or(m, "spot", 1.0);
  spec.sigmas = m.at("sigmas").get<std::vector<double>>();
  if (m.contains("r")) spec.r_low = spec.r_high = m.at("r").get<double>();
  spec.r_low = get_or(m, "r_low", spec.r_low);
  spec.r_high = get_or(m, "r_high", spec.r_high);
  spec.theta = get_or(m, "theta", 0.0);
  const Json& p = m.at("payoff");
  const std::string kind = p.at("kind").get<std::string>();
  spec.payoff.kind = kind == "put"        ? Payoff::Kind::put
                     : kind == "call"     ? Payoff::Kind::call
                     : kind == "constant" ? Payoff::Kind::constant
                                          : Payoff::Kind::identity;
  spec.payoff.strike = get_or(p, "strike", 1.0);
  spec.payoff.level = get_or(p, "level", 0.0);
  return spec;
}

double log10_policy_count(int steps, std::size_t controls) {
  return static_cast<double>(steps) * steps * std::log10(static_cast<double>(controls));
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diags) : std::runtime_error(join_messages(diags)), diags_(std::move(diags)) {}

Json load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::vector<Diagnostic>{{path.string(), "cannot open config file"}});
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::vector<Diagnostic>{{path.string(), e.what()}});
  }
}

std::vector<Diagnostic> validate_config(const Json& cfg, const fs::path& base) {
  Checker ck(cfg);
  if (!cfg.is_object()) {
    ck.error("", "config must be a JSON object");
    return ck.take();
  }
  const auto kind = ck.string(cfg, "experiment", "", true);
  if (kind && !in_list(*kind, kExperimentKinds))
    ck.error("/experiment", "unknown experiment '" + *kind + "'; expected one of " + list_names(kExperimentKinds));
  const std::string k = kind.value_or("");
  const bool finance = one_of(k, {"price-american", "convergence-sweep"});
  const bool zhang = k == "counterexample";

  // Lattice.
  double horizon = zhang ? 2.0 : 1.0;
  long long steps = 8;
  double spacing = 1.0;
  if (const Json* l = ck.object(cfg, "lattice", "", !zhang && !finance)) {
    if (auto h = ck.number(*l, "horizon", "/lattice", false)) {
      horizon = *h;
      if (!(*h > 0.0)) ck.error("/lattice/horizon", "horizon must be positive");
      if (zhang && *h != 2.0) ck.error("/lattice/horizon", "counterexample lives on horizon 2");
    }
    if (auto n = ck.integer(*l, "steps", "/lattice", !finance || !cfg.contains("sweep"))) {
      steps = *n;
      if (*n < 1) ck.error("/lattice/steps", "steps must be at least 1");
      if (*n > 4096) ck.error("/lattice/steps", "steps above 4096 are not supported");
      if (zhang && *n % 2 != 0) ck.error("/lattice/steps", "counterexample needs an even step count");
    }
    if (auto c = ck.number(*l, "spacing_factor", "/lattice", false)) {
      spacing = *c;
      if (*c < 1.0) ck.error("/lattice/spacing_factor", "spacing factor below 1: branch probabilities would be negative");
    }
    if (finance) {
      if (auto m = ck.number(*l, "maturity", "/lattice", false)) {
        horizon = *m;
        if (!(*m > 0.0)) ck.error("/lattice/maturity", "maturity must be positive");
      }
    }
  }

  // Controls.
  std::vector<double> levels;
  if (finance) {
    if (cfg.contains("controls")) ck.error("/controls", "finance experiments take volatilities from /market/sigmas");
  } else if (!cfg.contains("controls")) {
    ck.error("/controls", "required array of variance levels missing");
  } else if (!cfg.at("controls").is_array() || cfg.at("controls").empty()) {
    ck.error("/controls", "must be a non-empty array of numbers");
  } else {
    for (std::size_t q = 0; q < cfg.at("controls").size(); ++q) {
      const Json& v = cfg.at("controls").at(q);
      if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>()))
        ck.error("/controls/" + std::to_string(q), "variance level must be a positive number");
      else
        levels.push_back(v.get<double>());
    }
    for (std::size_t q = 1; q < levels.size(); ++q)
      if (!(levels[q] > levels[q - 1])) ck.error("/controls", "variance levels must be strictly increasing");
  }

  // Market.
  if (finance) {
    if (const Json* m = ck.object(cfg, "market", "", true)) {
      if (auto s = ck.number(*m, "spot", "/market", true); s && !(*s > 0.0))
        ck.error("/market/spot", "spot must be positive");
      if (!m->contains("sigmas") || !m->at("sigmas").is_array() || m->at("sigmas").empty()) {
        ck.error("/market/sigmas", "required non-empty array of volatilities");
      } else {
        for (std::size_t q = 0; q < m->at("sigmas").size(); ++q) {
          const Json& v = m->at("sigmas").at(q);
          if (!v.is_number() || !(v.get<double>() > 0.0))
            ck.error("/market/sigmas/" + std::to_string(q), "volatility must be positive");
          else
            levels.push_back(v.get<double>() * v.get<double>());
        }
        std::sort(levels.begin(), levels.end());
      }
      auto r = ck.number(*m, "r", "/market", false);
      auto lo = ck.number(*m, "r_low", "/market", false);
      auto hi = ck.number(*m, "r_high", "/market", false);
      ck.number(*m, "theta", "/market", false);
      if (r && (lo || hi)) ck.error("/market/r", "give either r or the pair r_low, r_high");
      if (lo.has_value() != hi.has_value()) ck.error("/market", "r_low and r_high must be given together");
      if (lo && hi && *lo > *hi) ck.error("/market/r_low", "r_low > r_high");
      if (const Json* p = ck.object(*m, "payoff", "/market", true)) {
        const auto pk = ck.string(*p, "kind", "/market/payoff", true);
        if (pk && !one_of(*pk, {"put", "call", "constant", "identity"}))
          ck.error("/market/payoff/kind", "unknown payoff '" + *pk + "'; expected put, call, constant or identity");
        if (pk && one_of(*pk, {"put", "call"})) ck.number(*p, "strike", "/market/payoff", true);
        if (pk && *pk == "constant") ck.number(*p, "level", "/market/payoff", true);
      }
      Json gen{{"family", lo && hi && *lo != *hi ? "two-rates" : "linear"},
               {"r", r.value_or(0.0)},
               {"r_low", lo.value_or(0.0)},
               {"r_high", hi.value_or(0.0)},
               {"theta", get_or(*m, "theta", 0.0)}};
      if (!levels.empty() && steps >= 1 && horizon > 0.0) {
        const auto [ly, lz] = predicted_lipschitz(gen, levels.front());
        const double dt = horizon / static_cast<double>(steps);
        if (!(ly * dt < 1.0)) ck.error("/market", "step guard L_y * dt < 1 fails: reduce dt");
        const double dx = spacing * std::sqrt(levels.back() * dt);
        if (lz * dx > std::sqrt(levels.front()) * (1.0 - ly * dt))
          ck.error("/market", "explicit step not monotone (L_z dx > sqrt(a_min)(1 - L_y dt)): reduce dt");
      }
    }
    if (k == "convergence-sweep") {
      if (const Json* s = ck.object(cfg, "sweep", "", true)) {
        if (!s->contains("steps") || !s->at("steps").is_array() || s->at("steps").empty())
          ck.error("/sweep/steps", "required non-empty array of step counts");
        else
          for (std::size_t q = 0; q < s->at("steps").size(); ++q) {
            const Json& v = s->at("steps").at(q);
            if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 4096)
              ck.error("/sweep/steps/" + std::to_string(q), "step count must be an integer in [1, 4096]");
          }
      }
    }
  }

  // Generator.
  if (!finance && !zhang && cfg.contains("generator")) {
    if (const Json* g = ck.object(cfg, "generator", "", false)) {
      const auto fam = ck.string(*g, "family", "/generator", true);
      if (fam && !in_list(*fam, kGeneratorFamilies))
        ck.error("/generator/family", "unknown generator '" + *fam + "'; expected one of " + list_names(kGeneratorFamilies));
      if (fam && *fam == "affine-y") ck.number(*g, "rate", "/generator", true);
      if (fam && *fam == "linear") {
        ck.number(*g, "r", "/generator", false);
        ck.number(*g, "theta", "/generator", false);
      }
      if (fam && *fam == "two-rates") {
        auto lo = ck.number(*g, "r_low", "/generator", true);
        auto hi = ck.number(*g, "r_high", "/generator", true);
        ck.number(*g, "theta", "/generator", false);
        if (lo && hi && *lo > *hi) ck.error("/generator/r_low", "r_low > r_high");
      }
      if (fam && in_list(*fam, kGeneratorFamilies) && !levels.empty() && steps >= 1 && horizon > 0.0) {
        const auto [ly, lz] = predicted_lipschitz(*g, levels.front());
        const double dt = horizon / static_cast<double>(steps);
        if (!(ly * dt < 1.0)) ck.error("/generator", "step guard L_y * dt < 1 fails: reduce dt");
        const double dx = spacing * std::sqrt(levels.back() * dt);
        if (lz * dx > std::sqrt(levels.front()) * (1.0 - ly * dt))
          ck.error("/generator", "explicit step not monotone (L_z dx > sqrt(a_min)(1 - L_y dt)): reduce dt");
      }
    }
  } else if ((finance || zhang) && cfg.contains("generator")) {
    ck.error("/generator", finance ? "finance experiments derive the generator from /market" : "counterexample uses f = 0");
  }

  // Obstacle.
  const bool needs_obstacle = !finance && !zhang;
  if (zhang && cfg.contains("obstacle")) ck.error("/obstacle", "counterexample builds its own obstacle; use /tail");
  if (zhang && cfg.contains("tail")) {
    const Json& t = cfg.at("tail");
    if (!t.is_string() || !one_of(t.get<std::string>(), {"abs", "quadratic"}))
      ck.error("/tail", "tail must be \"abs\" or \"quadratic\"");
  }
  if (const Json* o = ck.object(cfg, "obstacle", "", needs_obstacle); o && needs_obstacle) {
    bool has_lower = false, has_upper = false;
    for (const char* side : {"lower", "upper", "terminal"}) {
      const std::string path = std::string("/obstacle/") + side;
      const Json* b = ck.object(*o, side, "/obstacle", false);
      if (!b) continue;
      if (std::string(side) == "lower") has_lower = true;
      if (std::string(side) == "upper") has_upper = true;
      const auto fam = ck.string(*b, "family", path, true);
      if (!fam) continue;
      if (!in_list(*fam, kBarrierFamilies)) {
        ck.error(path + "/family", "unknown obstacle family '" + *fam + "'; expected one of " + list_names(kBarrierFamilies));
        continue;
      }
      if (*fam == "constant") ck.number(*b, "value", path, true);
      if (*fam == "affine" || *fam == "abs" || *fam == "cosine") {
        ck.number(*b, "c0", path, false);
        ck.number(*b, "ct", path, false);
        ck.number(*b, "cb", path, false);
      }
      if (*fam == "put" || *fam == "call") {
        ck.number(*b, "strike", path, true);
        if (auto s = ck.number(*b, "spot", path, false); s && !(*s > 0.0)) ck.error(path + "/spot", "spot must be positive");
      }
      if (*fam == "zhang" && horizon != 2.0) ck.error(path, "zhang obstacle needs horizon 2");
      if (*fam == "tabulated") {
        if (auto p = ck.string(*b, "path", path, true); p && !fs::exists(resolve(base, *p)))
          ck.error(path + "/path", "file not found: " + resolve(base, *p).string());
      }
    }
    if (!has_lower && !has_upper && !o->contains("terminal"))
      ck.error("/obstacle", "at least one of lower, upper or terminal required");
    if (k == "solve-2drbsde" && !has_upper) ck.error("/obstacle/upper", "solve-2drbsde needs an upper obstacle");
    if (k != "solve-2drbsde" && has_upper) ck.error("/obstacle/upper", "upper obstacle only used by solve-2drbsde");
    if (one_of(k, {"check-obstacle", "verify-skorokhod"}) && !has_lower)
      ck.error("/obstacle/lower", k + " needs a lower obstacle");
  }

  // Policies.
  if (const Json* p = ck.object(cfg, "policies", "", false)) {
    const auto mode = ck.string(*p, "mode", "/policies", true);
    if (mode && !one_of(*mode, {"none", "constant", "enumerate", "sample"}))
      ck.error("/policies/mode", "mode must be none, constant, enumerate or sample");
    if (mode && *mode == "sample") {
      if (auto n = ck.integer(*p, "count", "/policies", true); n && *n < 1) ck.error("/policies/count", "count must be positive");
      ck.integer(*p, "seed", "/policies", true);
    }
    if (mode && *mode == "constant") {
      if (auto c = ck.integer(*p, "control", "/policies", true);
          c && (*c < 0 || (!levels.empty() && static_cast<std::size_t>(*c) >= levels.size())))
        ck.error("/policies/control", "control index out of range");
    } else if (p->contains("seed")) {
      ck.integer(*p, "seed", "/policies", false);
    }
    if (mode && *mode == "enumerate") {
      double cap = static_cast<double>(kDefaultEnumerationCap);
      if (auto c = ck.integer(*p, "cap", "/policies", false)) {
        cap = static_cast<double>(*c);
        if (*c < 1) ck.error("/policies/cap", "cap must be positive");
      }
      if (!levels.empty() && steps >= 1) {
        const double lg = log10_policy_count(static_cast<int>(steps), levels.size());
        if (lg > std::log10(cap) + 1e-12) {
          std::ostringstream msg;
          msg.precision(6);
          msg << "enumeration of " << levels.size() << "^" << steps * steps << " (~1e" << lg
              << ") policies exceeds cap " << static_cast<long long>(cap);
          ck.error("/policies", msg.str());
        }
      }
    }
  }
  if (k == "solve-rbsde") {
    const Json* p = cfg.contains("policies") ? &cfg.at("policies") : nullptr;
    if (!p || !p->is_object() || p->value("mode", "") != "constant")
      ck.error("/policies", "solve-rbsde needs a constant policy ({\"mode\": \"constant\", \"control\": k})");
  }
  if (k == "price-american" && cfg.contains("superhedge")) {
    const Json& s = cfg.at("superhedge");
    if (!s.is_object()) {
      ck.error("/superhedge", "must be an object");
    } else {
      if (auto n = ck.integer(s, "samples", "/superhedge", false); n && *n < 0)
        ck.error("/superhedge/samples", "samples must be non-negative");
      if (s.contains("samples") && s.at("samples").is_number_integer() && s.at("samples").get<long long>() > 0)
        ck.integer(s, "seed", "/superhedge", true);
    }
  }

  // Oscillation block.
  if (k == "check-obstacle" || k == "verify-skorokhod") {
    const Json* s = ck.object(cfg, "oscillation", "", k == "check-obstacle");
    if (s) {
      auto eps = ck.number(*s, "epsilon", "/oscillation", true);
      if (eps && !(*eps > 0.0)) ck.error("/oscillation/epsilon", "epsilon must be positive");
      auto n = ck.integer(*s, "intervals", "/oscillation", k == "check-obstacle");
      auto m = ck.integer(*s, "m", "/oscillation", k == "check-obstacle");
      if (n && (*n < 1 || *n > steps)) ck.error("/oscillation/intervals", "intervals must lie in [1, N]");
      if (m && (*m < 0 || (n && *m >= *n))) ck.error("/oscillation/m", "m must satisfy 0 <= m < intervals");
      if (auto p = ck.number(*s, "p", "/oscillation", false); p && *p < 1.0) ck.error("/oscillation/p", "p must be >= 1");
    }
  }

  // Tolerances.
  if (const Json* t = ck.object(cfg, "tolerances", "", false)) {
    for (const auto& [name, v] : t->items()) {
      if (!default_tolerances().count(name) && name != "y0")
        ck.error("/tolerances/" + name, "unknown tolerance name");
      else if (!v.is_number() || !(v.get<double>() > 0.0))
        ck.error("/tolerances/" + name, "tolerance must be a positive number");
    }
  }
  if (const Json* o = ck.object(cfg, "output", "", false)) {
    if (o->contains("fields") && !o->at("fields").is_boolean()) ck.error("/output/fields", "must be a boolean");
  }
  return ck.take();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json report_body(const Json& report) {
  Json body = report;
  body.erase("wall_time_seconds");
  return body;
}

namespace {

// ---- run helpers ----------------------------------------------------------

struct Context {
  Context(const Json& c, fs::path b, unsigned t) : cfg(c), base(std::move(b)), threads(t) {}

  const Json& cfg;
  fs::path base;
  unsigned threads;
  Json headline = Json::object();
  Json verdicts = Json::array();
  Json files = Json::array();
  std::map<std::string, std::string> outputs;  // file name -> content
  bool failed = false;

  double tol(const std::string& name) const {
    if (cfg.contains("tolerances") && cfg.at("tolerances").contains(name)) return cfg.at("tolerances").at(name).get<double>();
    return default_tolerances().at(name);
  }

  /// Verdict "value op tolerance" with op in {"<=", ">"}.
  void verdict(const std::string& name, double value, const std::string& tol_name, bool greater = false,
               std::optional<double> tol_value = std::nullopt) {
    const double t = tol_value ? *tol_value : tol(tol_name);
    const bool pass = greater ? value > t : value <= t;
    Json v;
    v["name"] = name;
    v["result"] = pass ? "pass" : "fail";
    v["value"] = value;
    v["comparison"] = greater ? ">" : "<=";
    v["tolerance"] = tol_name;
    v["tolerance_value"] = t;
    verdicts.push_back(v);
    if (!pass) failed = true;
  }

  void flag(const std::string& name, bool pass, const std::string& tol_name) {
    Json v;
    v["name"] = name;
    v["result"] = pass ? "pass" : "fail";
    v["tolerance"] = tol_name;
    v["tolerance_value"] = tol(tol_name);
    verdicts.push_back(v);
    if (!pass) failed = true;
  }

  void add_file(const std::string& name, const std::string& kind, std::string content) {
    Json f;
    f["name"] = name;
    f["kind"] = kind;
    files.push_back(f);
    outputs[name] = std::move(content);
  }

  bool fields_requested() const {
    return cfg.contains("output") && cfg.at("output").value("fields", false);
  }
};

std::vector<Policy> policy_set(const Lattice& lat, const Json& cfg, bool& exhaustive) {
  exhaustive = false;
  if (!cfg.contains("policies")) return {};
  const Json& p = cfg.at("policies");
  const std::string mode = p.value("mode", "none");
  if (mode == "enumerate") {
    exhaustive = true;
    return enumerate_policies(lat, p.value("cap", kDefaultEnumerationCap));
  }
  if (mode == "sample") return sample_policies(lat, p.at("count").get<std::size_t>(), p.at("seed").get<std::uint64_t>());
  if (mode == "constant") return {Policy(lat, p.at("control").get<std::uint32_t>())};
  return {};
}

std::string csv_value(std::optional<double> v) { return v ? format_double(*v) : ""; }

std::string field_csv(const Lattice& lat, const ObstacleSpec& obs, const NodeField<double>& y,
                      const std::function<std::optional<double>(int, int)>& z, const NodeField<double>* dK,
                      const NodeField<double>* dk) {
  std::string out = "i,j,B,Y,Z,L,dK,dk\n";
  const int n = lat.steps();
  for (int i = 0; i <= n; ++i)
    for (int j = -i; j <= i; ++j) {
      const bool terminal = i == n;
      out += std::to_string(i) + "," + std::to_string(j) + "," + format_double(lat.value(i, j)) + "," +
             format_double(y(i, j)) + "," + csv_value(terminal ? std::nullopt : z(i, j)) + "," +
             csv_value(terminal ? std::optional<double>(obs.xi(n, j)) : obs.lower.at(i, j)) + "," +
             csv_value(terminal || !dK ? std::nullopt : std::optional<double>((*dK)(i, j))) + "," +
             csv_value(terminal || !dk ? std::nullopt : std::optional<double>((*dk)(i, j))) + "\n";
    }
  return out;
}

Json node_json(Node n) { return Json{{"i", n.layer}, {"j", n.offset}}; }

double max_abs_diff(const NodeField<double>& a, const NodeField<double>& b, int last_layer) {
  double m = 0.0;
  for (int i = 0; i <= last_layer; ++i)
    for (int j = -i; j <= i; ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

/// min over nodes of (Y - L) and (S - Y); +inf where a barrier is absent.
std::pair<double, double> bound_margins(const Lattice& lat, const ObstacleSpec& obs, const NodeField<double>& y) {
  double lo = std::numeric_limits<double>::infinity(), hi = lo;
  for (int i = 0; i <= lat.steps(); ++i)
    for (int j = -i; j <= i; ++j) {
      if (auto l = obs.lower.at(i, j)) lo = std::min(lo, y(i, j) - *l);
      if (auto s = obs.upper.at(i, j)) hi = std::min(hi, *s - y(i, j));
    }
  return {lo, hi};
}

void run_solve_rbsde(Context& cx, const Lattice& lat, const Generator& gen, const ObstacleSpec& obs) {
  bool ex = false;
  const Policy pol = policy_set(lat, cx.cfg, ex).front();
  const RbsdeSolution s = solve_rbsde(lat, pol, gen, obs);
  double sk = 0.0;
  for (int i = 0; i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j)
      if (s.dk_minus(i, j) > 0.0) {
        const auto l = obs.lower.at(i, j);
        sk = std::max(sk, l ? std::abs((s.y(i, j) - *l) * s.dk_minus(i, j)) : std::numeric_limits<double>::infinity());
      }
  const auto [lo, hi] = bound_margins(lat, obs, s.y);
  (void)hi;
  cx.headline["y0"] = s.y(0, 0);
  cx.headline["z0"] = s.z(0, 0);
  cx.headline["min_margin_to_lower"] = std::isfinite(lo) ? Json(lo) : Json(nullptr);
  cx.verdict("lower-domination", std::isfinite(lo) ? -lo : 0.0, "node");
  cx.verdict("fixed-skorokhod", sk, "node");
  if (cx.fields_requested()) {
    cx.add_file("fields.csv", "node-fields",
                field_csv(lat, obs, s.y, [&](int i, int j) { return std::optional<double>(s.z(i, j)); }, &s.dk, &s.dk));
  }
}

void run_solve_2rbsde(Context& cx, const Lattice& lat, const Generator& gen, const ObstacleSpec& obs, bool doubly) {
  const SecondOrderSolution sol = doubly ? solve_2drbsde(lat, gen, obs) : solve_2rbsde(lat, gen, obs);
  const Policy& star = sol.optimal_policy;
  const RbsdeSolution ystar = solve_drbsde_fixed(lat, star, gen, obs);
  const Decomposition dec = decompose(lat, sol, star);
  cx.headline["Y0"] = sol.Y(0, 0);
  cx.headline["Z0"] = sol.canonical_z(0, 0);
  cx.headline["control_count"] = lat.controls().size();
  cx.headline["optimal_control_at_root"] = star(0, 0);
  cx.headline["y0_optimal_policy"] = ystar.y(0, 0);

  const auto [lo, hi] = bound_margins(lat, obs, sol.Y);
  cx.verdict("lower-domination", std::isfinite(lo) ? -lo : 0.0, "node");
  if (doubly) {
    cx.verdict("upper-domination", std::isfinite(hi) ? -hi : 0.0, "node");
    double dec_err = 0.0;
    for (int i = 0; i < lat.steps(); ++i)
      for (int j = -i; j <= i; ++j)
        dec_err = std::max(dec_err, std::abs(dec.dV(i, j) - (dec.dK(i, j) - dec.dKplus(i, j))));
    cx.verdict("decomposition", dec_err, "node");
    cx.verdict("upper-skorokhod", upper_skorokhod_sum(lat, obs, sol, star), "node");
    cx.headline["upper_skorokhod_sum"] = upper_skorokhod_sum(lat, obs, sol, star);
  }
  // Y = y^{P*} at the argmax policy.
  cx.verdict("optimal-policy-attains", max_abs_diff(sol.Y, ystar.y, lat.steps()), "node");
  if (lat.controls().size() == 1) {
    const NodeField<double> K = extract_K(lat, sol, star);
    const RbsdeSolution plain = doubly ? solve_drbsde_fixed(lat, star, gen, obs) : solve_rbsde(lat, star, gen, obs);
    const double dy = max_abs_diff(sol.Y, plain.y, lat.steps());
    const double dk = max_abs_diff(doubly ? dec.dV : K, plain.dk, lat.steps() - 1);
    cx.verdict("singleton-reduction", std::max(dy, dk), "node");
  }
  bool exhaustive = false;
  const std::vector<Policy> pols = policy_set(lat, cx.cfg, exhaustive);
  if (!pols.empty()) {
    const RepresentationReport rep = representation_check(lat, gen, obs, sol, pols, exhaustive, cx.tol("node"), cx.threads);
    cx.headline["policies_tested"] = pols.size();
    cx.headline["exhaustive"] = exhaustive;
    cx.headline["min_root_gap"] = rep.min_gap;
    cx.headline["min_root_gap_policy"] = rep.argmin;
    cx.verdict("representation-domination", std::max(0.0, -rep.worst_node_violation), "node");
    if (exhaustive) cx.verdict("representation-attained", std::abs(rep.min_gap), "node");
  }
  if (cx.fields_requested()) {
    cx.add_file("fields.csv", "node-fields",
                field_csv(lat, obs, sol.Y, [&](int i, int j) { return std::optional<double>(sol.canonical_z(i, j)); },
                          &dec.dK, &ystar.dk));
  }
}

std::vector<Policy> minimality_policies(const Lattice& lat, const SecondOrderSolution& sol, const Json& cfg) {
  std::vector<Policy> pols{sol.optimal_policy};
  for (std::size_t k = 0; k < lat.controls().size(); ++k) pols.emplace_back(lat, static_cast<std::uint32_t>(k));
  bool ex = false;
  for (auto& p : policy_set(lat, cfg, ex)) pols.push_back(std::move(p));
  return pols;
}

void run_verify_minimality(Context& cx, const Lattice& lat, const Generator& gen, const ObstacleSpec& obs) {
  const SecondOrderSolution sol = solve_2rbsde(lat, gen, obs);
  const std::vector<Policy> pols = minimality_policies(lat, sol, cx.cfg);
  const MinimalityReport rep = minimality_report(lat, gen, obs, sol, pols, cx.tol("minimality"), cx.threads);
  cx.headline["Y0"] = sol.Y(0, 0);
  cx.headline["policies_tested"] = pols.size();
  cx.headline["weighted_residual_optimal"] = rep.residuals.front();
  cx.headline["skorokhod_residual_optimal"] = rep.skorokhod.front();
  cx.headline["weighted_infimum"] = rep.infimum;
  cx.headline["weighted_max"] = *std::max_element(rep.residuals.begin(), rep.residuals.end());
  cx.headline["skorokhod_max"] = *std::max_element(rep.skorokhod.begin(), rep.skorokhod.end());
  cx.headline["max_identity_defect"] = rep.max_identity_defect;
  cx.verdict("identity", rep.max_identity_defect, "identity");
  cx.verdict("weighted-minimality", std::abs(rep.residuals.front()), "minimality");
  cx.verdict("skorokhod-minimality", rep.skorokhod.front(), "minimality");
}

void run_verify_skorokhod(Context& cx, const Lattice& lat, const Generator& gen, const ObstacleSpec& obs) {
  const SecondOrderSolution sol = solve_2rbsde(lat, gen, obs);
  const std::vector<Policy> pols = minimality_policies(lat, sol, cx.cfg);
  std::vector<double> sk(pols.size());
  for (std::size_t q = 0; q < pols.size(); ++q) sk[q] = skorokhod_residual(lat, obs, sol, pols[q]);
  cx.headline["Y0"] = sol.Y(0, 0);
  cx.headline["policies_tested"] = pols.size();
  cx.headline["skorokhod_residual_optimal"] = sk.front();
  cx.headline["skorokhod_min"] = *std::min_element(sk.begin(), sk.end());
  cx.headline["skorokhod_max"] = *std::max_element(sk.begin(), sk.end());
  cx.verdict("skorokhod-minimality", sk.front(), "minimality");
  if (cx.cfg.contains("oscillation")) {
    const double eps = cx.cfg.at("oscillation").at("epsilon").get<double>();
    const CrossingPartition part = crossing_partition(lat, sol, obs, eps);
    const auto dist = crossing_count_distribution(lat, part, sol.optimal_policy);
    Json d = Json::array();
    std::string csv = "crossings,probability\n";
    for (std::size_t c = 0; c < dist.size(); ++c) {
      d.push_back(dist[c]);
      csv += std::to_string(c) + "," + format_double(dist[c]) + "\n";
    }
    cx.headline["crossing_epsilon"] = eps;
    cx.headline["min_crossings"] = part.min_crossings;
    cx.headline["max_crossings"] = part.max_crossings;
    cx.headline["crossing_distribution_optimal"] = d;
    cx.add_file("crossings.csv", "crossing-count-distribution", csv);
  }
}

void run_counterexample(Context& cx) {
  const LatticeCfg l = lattice_cfg(cx.cfg, 2.0);
  const ControlSet controls(control_levels(cx.cfg));
  const std::string tail = cx.cfg.value("tail", "abs");
  const ZhangReport z =
      zhang_counterexample(l.steps, controls, [tail](double b) { return zhang_tail(tail, b); }, tail);
  cx.headline["Y0"] = z.y0;
  cx.headline["dt"] = z.dt;
  cx.headline["tail"] = z.tail;
  cx.headline["possible"] = z.possible;
  cx.headline["message"] = z.message;
  const double y0_tol = cx.cfg.contains("tolerances") && cx.cfg.at("tolerances").contains("y0")
                            ? cx.cfg.at("tolerances").at("y0").get<double>()
                            : z.y0_tolerance;
  if (!z.possible) {
    cx.verdict("y0", std::abs(z.y0 - 2.0), "y0", false, y0_tol);
    return;
  }
  cx.headline["witness_control"] = z.witness_control;
  cx.headline["witness_node"] = node_json(z.witness_node);
  cx.headline["witness_gap"] = z.witness_gap;
  cx.headline["gap_at_root"] = z.gap_at_root;
  cx.headline["expected_gap_at_one"] = z.expected_gap_at_one;
  Json v = Json::array();
  for (const auto& e : z.violations)
    v.push_back(Json{{"i", e.node.layer}, {"j", e.node.offset}, {"increment", e.increment}, {"probability", e.probability}});
  cx.headline["violations"] = v;
  cx.verdict("y0", std::abs(z.y0 - 2.0), "y0", false, y0_tol);
  cx.verdict("strict-gap-at-one", z.witness_gap, "witness", true);
  cx.flag("monotonicity-violation", !z.violations.empty(), "node");
}

void run_price_american(Context& cx) {
  const MarketSpec m = make_market(cx.cfg.at("market"));
  LatticeParams lp;
  const Json& l = cx.cfg.at("lattice");
  lp.maturity = get_or(l, "maturity", get_or(l, "horizon", 1.0));
  lp.steps = l.at("steps").get<int>();
  lp.spacing_factor = get_or(l, "spacing_factor", 1.0);
  const AmericanPrice price = price_american(m, lp);
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  if (cx.cfg.contains("superhedge")) {
    samples = cx.cfg.at("superhedge").value("samples", std::size_t{0});
    seed = cx.cfg.at("superhedge").value("seed", std::uint64_t{0});
  }
  const SuperhedgeReport sh = verify_superhedge(price, m, samples, seed, 0.0, cx.tol("superhedge"), cx.threads);
  const SuperhedgeReport probe =
      verify_superhedge(price, m, samples, seed, -cx.tol("probe_shift"), cx.tol("superhedge"), cx.threads);
  cx.headline["price"] = price.price;
  cx.headline["payoff"] = m.payoff.name();
  cx.headline["generator"] = market_generator(m).name();
  cx.headline["scenarios_tested"] = sh.policies;
  cx.headline["min_obstacle_margin"] = sh.min_obstacle_margin;
  cx.headline["min_value_margin"] = sh.min_value_margin;
  cx.headline["min_terminal_margin"] = sh.min_terminal_margin;
  cx.headline["probe_capital"] = probe.capital;
  cx.headline["probe_obstacle_shortfall_nodes"] = probe.obstacle_shortfall_nodes;
  cx.headline["probe_min_obstacle_margin"] = probe.min_obstacle_margin;
  cx.verdict("superhedge-obstacle", -sh.min_obstacle_margin, "superhedge");
  cx.verdict("superhedge-value", -sh.min_value_margin, "superhedge");
  cx.flag("strictness-probe", probe.shortfall, "probe_shift");
  if (cx.fields_requested()) {
    const Decomposition dec = decompose(price.lattice, price.solution, price.solution.optimal_policy);
    cx.add_file("fields.csv", "node-fields",
                field_csv(price.lattice, price.obstacle, price.solution.Y,
                          [&](int i, int j) { return std::optional<double>(price.solution.canonical_z(i, j)); },
                          &dec.dK, nullptr));
  }
}

void run_convergence_sweep(Context& cx) {
  const MarketSpec m = make_market(cx.cfg.at("market"));
  const Json& l = cx.cfg.contains("lattice") ? cx.cfg.at("lattice") : Json::object();
  const std::vector<int> steps = cx.cfg.at("sweep").at("steps").get<std::vector<int>>();
  std::string csv = "steps,price\n";
  Json series = Json::array();
  bool up = true, down = true;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int n : steps) {
    LatticeParams lp;
    lp.maturity = get_or(l, "maturity", get_or(l, "horizon", 1.0));
    lp.steps = n;
    lp.spacing_factor = get_or(l, "spacing_factor", 1.0);
    const double p = price_american(m, lp).price;
    if (!std::isnan(prev)) {
      up = up && p >= prev;
      down = down && p <= prev;
    }
    prev = p;
    series.push_back(Json{{"steps", n}, {"price", p}});
    csv += std::to_string(n) + "," + format_double(p) + "\n";
  }
  cx.headline["series"] = series;
  cx.headline["monotone"] = up ? "non-decreasing" : (down ? "non-increasing" : "none");
  if (series.size() >= 3) {
    const double a = series[series.size() - 3]["price"].get<double>();
    const double b = series[series.size() - 2]["price"].get<double>();
    const double c = series[series.size() - 1]["price"].get<double>();
    cx.headline["last_difference_ratio"] = (c - b) != 0.0 ? Json((b - a) / (c - b)) : Json(nullptr);
  }
  cx.add_file("sweep.csv", "convergence-series", csv);
}

void run_check_obstacle(Context& cx, const Lattice& lat, const ObstacleSpec& obs) {
  const Json& s = cx.cfg.at("oscillation");
  const int n = s.at("intervals").get<int>();
  const int m = s.at("m").get<int>();
  const double eps = s.at("epsilon").get<double>();
  const double p = get_or(s, "p", 1.0);
  bool ex = false;
  std::vector<Policy> pols = policy_set(lat, cx.cfg, ex);
  if (pols.empty())
    for (std::size_t k = 0; k < lat.controls().size(); ++k) pols.emplace_back(lat, static_cast<std::uint32_t>(k));
  const OscillationReport rep = oscillation_report(lat, obs, pols, n, eps, m, p);
  cx.headline["policies_tested"] = rep.policy_count;
  cx.headline["sup_probability"] = rep.sup_probability;
  cx.headline["ell"] = rep.ell;
  cx.headline["markov_bound"] = rep.markov_bound;
  cx.headline["max_union_bound"] = *std::max_element(rep.union_bound.begin(), rep.union_bound.end());
  cx.headline["mesh"] = lat.horizon() / n;
  double slack = -std::numeric_limits<double>::infinity();
  for (double q : rep.probability) slack = std::max(slack, q - rep.markov_bound);
  cx.flag("markov-dominates", rep.markov_dominates, "oscillation");
  cx.flag("union-dominates", rep.union_dominates, "oscillation");
  cx.headline["max_probability_minus_markov"] = slack;
}

}  // namespace

RunResult run_experiment(const Json& cfg, const fs::path& out_dir, unsigned threads, const fs::path& base) {
  const auto diags = validate_config(cfg, base);
  if (!diags.empty()) throw ConfigError(diags);
  const auto start = std::chrono::steady_clock::now();
  Context cx(cfg, base, std::max(1u, threads));
  const std::string kind = cfg.at("experiment").get<std::string>();

  try {
    if (kind == "counterexample") {
      run_counterexample(cx);
    } else if (kind == "price-american") {
      run_price_american(cx);
    } else if (kind == "convergence-sweep") {
      run_convergence_sweep(cx);
    } else {
      const LatticeCfg l = lattice_cfg(cfg);
      const Lattice lat(l.horizon, l.steps, ControlSet(control_levels(cfg)), l.spacing);
      const Generator gen = make_generator(cfg, lat.controls());
      const ObstacleSpec obs = make_obstacle_spec(lat, cfg, base);
      if (kind == "solve-rbsde") run_solve_rbsde(cx, lat, gen, obs);
      else if (kind == "solve-2rbsde") run_solve_2rbsde(cx, lat, gen, obs, false);
      else if (kind == "solve-2drbsde") run_solve_2rbsde(cx, lat, gen, obs, true);
      else if (kind == "verify-minimality") run_verify_minimality(cx, lat, gen, obs);
      else if (kind == "verify-skorokhod") run_verify_skorokhod(cx, lat, gen, obs);
      else run_check_obstacle(cx, lat, obs);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::vector<Diagnostic>{{"", e.what()}});
  }

  RunResult res;
  Json& r = res.report;
  r["tool"] = "rbsde_lab";
  r["experiment"] = kind;
  r["input"] = cfg;
  r["headline"] = cx.headline;
  r["verdicts"] = cx.verdicts;
  r["files"] = cx.files;
  r["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.exit_code = cx.failed ? 2 : 0;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& [name, content] : cx.outputs) {
      std::ofstream f(out_dir / name, std::ios::binary);
      f << content;
    }
    std::ofstream f(out_dir / "report.json", std::ios::binary);
    f << r.dump(2) << "\n";
  }
  return res;
}

}  // namespace rbsde_lab
