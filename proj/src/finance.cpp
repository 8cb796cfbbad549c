#include "rbsde_lab/finance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rbsde_lab/parallel.hpp"

namespace rbsde_lab {

double Payoff::operator()(double s) const {
  switch (kind) {
    case Kind::put: return std::max(strike - s, 0.0);
    case Kind::call: return std::max(s - strike, 0.0);
    case Kind::constant: return level;
    case Kind::identity: return s;
  }
  return 0.0;
}

std::string Payoff::name() const {
  switch (kind) {
    case Kind::put: return "put";
    case Kind::call: return "call";
    case Kind::constant: return "constant";
    case Kind::identity: return "identity";
  }
  return "unknown";
}

ControlSet MarketSpec::controls() const {
  std::vector<double> a;
  a.reserve(sigmas.size());
  for (double s : sigmas) a.push_back(s * s);
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return ControlSet(std::move(a));
}

void validate_market(const MarketSpec& m) {
  std::ostringstream err;
  if (!(m.spot > 0.0) || !std::isfinite(m.spot)) err << "spot must be positive; ";
  if (m.sigmas.empty()) err << "at least one volatility level required; ";
  for (double s : m.sigmas)
    if (!(s > 0.0) || !std::isfinite(s)) err << "volatility levels must be positive; ";
  if (!std::isfinite(m.r_low) || !std::isfinite(m.r_high) || !std::isfinite(m.theta))
    err << "rates and risk premium must be finite; ";
  if (m.r_low > m.r_high) err << "r_low > r_high; ";
  if ((m.payoff.kind == Payoff::Kind::put || m.payoff.kind == Payoff::Kind::call) && !std::isfinite(m.payoff.strike))
    err << "strike must be finite; ";
  const std::string msg = err.str();
  if (!msg.empty()) throw std::invalid_argument(msg.substr(0, msg.size() - 2));
}

Generator generator_linear(double r, double theta) {
  return {"linear",
          [r, theta](double, double, double y, double z, double a) { return -(r * y + theta * std::sqrt(a) * z); },
          std::abs(r), std::abs(theta)};
}

Generator generator_two_rates(double r_low, double r_high, double theta, double a_floor) {
  if (r_low > r_high) throw std::invalid_argument("r_low > r_high");
  if (!(a_floor > 0.0)) throw std::invalid_argument("variance floor must be positive");
  const double spread = r_high - r_low;
  return {"two-rates",
          [r_low, spread, theta](double, double, double y, double z, double a) {
            const double borrow = std::max(z - y, 0.0);
            return -(r_low * y + theta * std::sqrt(a) * z - spread * borrow);
          },
          std::max(std::abs(r_low), std::abs(r_high)), std::abs(theta) + spread / std::sqrt(a_floor)};
}

Generator market_generator(const MarketSpec& m) {
  if (!m.two_rates()) return generator_linear(m.r_low, m.theta);
  return generator_two_rates(m.r_low, m.r_high, m.theta, m.controls().min());
}

AmericanPrice price_american(const MarketSpec& market, const LatticeParams& params) {
  validate_market(market);
  Lattice lat(params.maturity, params.steps, market.controls(), params.spacing_factor);
  const Payoff g = market.payoff;
  const double s0 = market.spot;
  ObstacleSpec obs = make_obstacle(lat, [g, s0](double, double b) { return g(s0 * std::exp(b)); });
  SecondOrderSolution sol = solve_2rbsde(lat, market_generator(market), obs);
  const double price = sol.Y(0, 0);
  return AmericanPrice{price, std::move(lat), std::move(obs), std::move(sol)};
}

namespace {

/// Wealth before the trading step: the w with w + f(w, z) dt = W.
double drift_step(const Generator& gen, double t, double b, double wealth, double z, double a, double dt) {
  double w = wealth;
  for (int it = 0; it < 1000; ++it) {
    const double next = wealth - gen(t, b, w, z, a) * dt;
    if (std::abs(next - w) <= 1e-16 * (1.0 + std::abs(w))) return next;
    w = next;
  }
  return w;
}

struct PolicyMargins {
  double obstacle = std::numeric_limits<double>::infinity();
  double value = std::numeric_limits<double>::infinity();
  double terminal = std::numeric_limits<double>::infinity();
  std::size_t obstacle_short = 0;
  std::size_t value_short = 0;
};

PolicyMargins roll_forward(const AmericanPrice& price, const Generator& gen, const Policy& pol, double w0,
                           double tol) {
  const Lattice& lat = price.lattice;
  const int n = lat.steps();
  const double inf = std::numeric_limits<double>::infinity();
  NodeField<double> w(n, inf);
  w(0, 0) = w0;
  PolicyMargins out;
  for (int i = 0; i <= n; ++i)
    for (int j = -i; j <= i; ++j) {
      const double wij = w(i, j);
      if (wij == inf) continue;
      const double l = price.obstacle.lower.at(i, j).value_or(-inf);
      const double ml = i == n ? wij - price.obstacle.xi(n, j) : wij - l;
      const double mv = wij - price.solution.Y(i, j);
      out.obstacle = std::min(out.obstacle, ml);
      out.value = std::min(out.value, mv);
      if (i == n) out.terminal = std::min(out.terminal, ml);
      if (ml < -tol) ++out.obstacle_short;
      if (mv < -tol) ++out.value_short;
      if (i == n) continue;
      const std::size_t k = pol(i, j);
      const double a = lat.controls().level(k);
      const double z = price.solution.z(i, j, k);
      const double pre = drift_step(gen, lat.time(i), lat.value(i, j), wij, z, a, lat.dt());
      const Transition& p = lat.transition(k);
      const double moves[3] = {1.0, 0.0, -1.0};
      const double probs[3] = {p.up, p.mid, p.down};
      for (int m = 0; m < 3; ++m) {
        if (probs[m] <= 0.0) continue;
        const int jj = j + static_cast<int>(moves[m]);
        w(i + 1, jj) = std::min(w(i + 1, jj), pre + z * moves[m] * lat.dx());
      }
    }
  return out;
}

}  // namespace

SuperhedgeReport verify_superhedge(const AmericanPrice& price, const MarketSpec& market, std::size_t samples,
                                   std::uint64_t seed, double capital_shift, double tolerance, unsigned threads) {
  const Lattice& lat = price.lattice;
  const Generator gen = market_generator(market);
  std::vector<Policy> policies{price.solution.optimal_policy};
  for (std::size_t k = 0; k < lat.controls().size(); ++k) policies.emplace_back(lat, static_cast<std::uint32_t>(k));
  if (samples > 0)
    for (auto& p : sample_policies(lat, samples, seed)) policies.push_back(std::move(p));

  SuperhedgeReport rep;
  rep.capital = price.price + capital_shift;
  rep.policies = policies.size();
  rep.tolerance = tolerance;
  std::vector<PolicyMargins> margins(policies.size());
  parallel_for(policies.size(), threads,
               [&](std::size_t q) { margins[q] = roll_forward(price, gen, policies[q], rep.capital, tolerance); });
  rep.min_obstacle_margin = rep.min_value_margin = rep.min_terminal_margin = std::numeric_limits<double>::infinity();
  for (const auto& m : margins) {
    rep.min_obstacle_margin = std::min(rep.min_obstacle_margin, m.obstacle);
    rep.min_value_margin = std::min(rep.min_value_margin, m.value);
    rep.min_terminal_margin = std::min(rep.min_terminal_margin, m.terminal);
    rep.obstacle_shortfall_nodes += m.obstacle_short;
    rep.value_shortfall_nodes += m.value_short;
  }
  rep.shortfall = rep.obstacle_shortfall_nodes > 0;
  rep.dominates = rep.obstacle_shortfall_nodes == 0 && rep.value_shortfall_nodes == 0;
  return rep;
}

}  // namespace rbsde_lab
