#include "rbsde_lab/minimality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rbsde_lab/parallel.hpp"

namespace rbsde_lab {

namespace {
constexpr double kTieThreshold = 1e-12;
}

Linearization linearize(const Generator& gen, double t, double b, double y, double y2, double z, double z2, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("linearize needs a > 0");
  Linearization lin;
  if (std::abs(y - y2) > kTieThreshold) lin.lambda = (gen(t, b, y, z, a) - gen(t, b, y2, z, a)) / (y - y2);
  if (std::abs(z - z2) > kTieThreshold)
    lin.eta = (gen(t, b, y2, z, a) - gen(t, b, y2, z2, a)) / (std::sqrt(a) * (z - z2));
  return lin;
}

WeightField linearize_fields(const Lattice& lat, const Generator& gen, const Policy& pol,
                             const NodeField<double>& upper, const NodeField<double>& lower) {
  check_policy(lat, pol);
  const int n = lat.steps();
  WeightField w{NodeField<double>(n, 0.0), NodeField<double>(n, 0.0)};
  for (int i = 0; i < n; ++i) {
    const auto up_next = upper.layer(i + 1);
    const auto lo_next = lower.layer(i + 1);
    for (int j = -i; j <= i; ++j) {
      const std::size_t k = pol(i, j);
      const ConditionalStep su = conditional_step(lat, gen, up_next, i, j, k);
      const ConditionalStep sl = conditional_step(lat, gen, lo_next, i, j, k);
      const Linearization lin = linearize(gen, lat.time(i), lat.value(i, j), su.expectation, sl.expectation, su.z,
                                          sl.z, lat.controls().level(k));
      w.lambda(i, j) = lin.lambda;
      w.eta(i, j) = lin.eta;
    }
  }
  return w;
}

DiscreteWeight::DiscreteWeight(const Lattice& lat, const Policy& pol, WeightField field)
    : lat_(&lat), pol_(pol), field_(std::move(field)) {
  check_policy(lat, pol);
  if (field_.lambda.steps() != lat.steps() || field_.eta.steps() != lat.steps())
    throw std::invalid_argument("weight field does not match lattice");
  for (int i = 0; i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j)
      for (int move : {1, 0, -1})
        if (!(factor(i, j, move) > 0.0))
          throw GuardViolation("weight factor 1 + lambda*dt + eta*dB/sqrt(a) not positive at (" +
                               std::to_string(i) + "," + std::to_string(j) + "); reduce dt");
}

double DiscreteWeight::factor(int i, int j, int move) const {
  const double a = lat_->controls().level(pol_(i, j));
  return 1.0 + field_.lambda(i, j) * lat_->dt() + field_.eta(i, j) * (move * lat_->dx()) / std::sqrt(a);
}

NodeField<double> DiscreteWeight::weighted_mass(Node start) const {
  NodeField<double> mass(lat_->steps(), 0.0);
  mass[start] = 1.0;
  for (int i = start.layer; i < lat_->steps(); ++i)
    for (int j = -i; j <= i; ++j) {
      const double m = mass(i, j);
      if (m == 0.0) continue;
      const Transition& p = lat_->transition(pol_(i, j));
      mass(i + 1, j + 1) += m * p.up * factor(i, j, 1);
      mass(i + 1, j) += m * p.mid * factor(i, j, 0);
      mass(i + 1, j - 1) += m * p.down * factor(i, j, -1);
    }
  return mass;
}

double DiscreteWeight::expectation(const NodeField<double>& increments, Node start) const {
  const NodeField<double> mass = weighted_mass(start);
  double total = 0.0;
  for (int i = start.layer; i < lat_->steps(); ++i)
    for (int j = -i; j <= i; ++j) total += mass(i, j) * increments(i, j);
  return total;
}

double DiscreteWeight::path_weight(const std::vector<int>& offsets) const {
  if (offsets.empty() || offsets.front() != 0) throw std::invalid_argument("path must start at the root");
  double m = 1.0;
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
    const int move = offsets[i + 1] - offsets[i];
    if (move < -1 || move > 1) throw std::invalid_argument("path is not a lattice path");
    m *= factor(static_cast<int>(i), offsets[i], move);
  }
  return m;
}

DiscreteWeight discrete_weight(const Lattice& lat, const Policy& pol, WeightField field) {
  return DiscreteWeight(lat, pol, std::move(field));
}

NodeField<double> increment_difference(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                       const SecondOrderSolution& sol, const Policy& pol) {
  const RbsdeSolution y = solve_drbsde_fixed(lat, pol, gen, obs);
  Decomposition d = decompose(lat, sol, pol);
  for (std::size_t idx = 0; idx < d.dV.size(); ++idx) d.dV.values()[idx] -= y.dk.values()[idx];
  return d.dV;
}

MinimalityResidual conditional_minimality_residual(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                                   const SecondOrderSolution& sol, const Policy& pol, Node start) {
  const RbsdeSolution y = solve_drbsde_fixed(lat, pol, gen, obs);
  Decomposition d = decompose(lat, sol, pol);
  NodeField<double> incr = d.dV;
  for (std::size_t idx = 0; idx < incr.size(); ++idx) incr.values()[idx] -= y.dk.values()[idx];
  const DiscreteWeight m(lat, pol, linearize_fields(lat, gen, pol, sol.Y, y.y));
  MinimalityResidual r;
  r.residual = m.expectation(incr, start);
  r.gap = sol.Y[start] - y.y[start];
  r.identity_defect = std::abs(r.residual - r.gap);
  return r;
}

MinimalityResidual minimality_residual(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                       const SecondOrderSolution& sol, const Policy& pol) {
  return conditional_minimality_residual(lat, gen, obs, sol, pol, Node{});
}

double skorokhod_residual(const Lattice& lat, const ObstacleSpec& obs, const SecondOrderSolution& sol,
                          const Policy& pol, Node start) {
  const NodeField<double> dk = extract_K(lat, sol, pol);
  const NodeField<double> mass = forward_mass(lat, pol, start);
  double total = 0.0;
  for (int i = start.layer; i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j) {
      if (mass(i, j) == 0.0 || dk(i, j) == 0.0) continue;
      auto l = obs.lower.at(i, j);
      if (!l) return std::numeric_limits<double>::infinity();
      total += mass(i, j) * (sol.Y(i, j) - *l) * dk(i, j);
    }
  return total;
}

double upper_skorokhod_sum(const Lattice& lat, const ObstacleSpec& obs, const SecondOrderSolution& sol,
                           const Policy& pol) {
  const NodeField<double> mass = forward_mass(lat, pol);
  double total = 0.0;
  for (int i = 0; i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j) {
      const double push = sol.upper_push(i, j);
      if (push == 0.0) continue;
      auto s = obs.upper.at(i, j);
      if (!s) throw std::logic_error("upper push recorded where no upper obstacle exists");
      total += mass(i, j) * (*s - sol.Y(i, j)) * push;
    }
  return total;
}

Policy splice_policy(const Lattice& lat, const Policy& before, const Policy& after, int layer) {
  check_policy(lat, before);
  check_policy(lat, after);
  Policy out = before;
  for (int i = std::max(layer, 0); i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j) out.at(i, j) = after(i, j);
  return out;
}

std::vector<IncrementViolation> monotonicity_probe(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                                   const SecondOrderSolution& sol, const Policy& pol,
                                                   double tolerance) {
  const NodeField<double> incr = increment_difference(lat, gen, obs, sol, pol);
  const NodeField<double> mass = forward_mass(lat, pol);
  std::vector<IncrementViolation> out;
  for (int i = 0; i < lat.steps(); ++i)
    for (int j = -i; j <= i; ++j)
      if (mass(i, j) > 0.0 && incr(i, j) < -tolerance) out.push_back({Node{i, j}, incr(i, j), mass(i, j)});
  return out;
}

MinimalityReport minimality_report(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                   const SecondOrderSolution& sol, const std::vector<Policy>& policies,
                                   double tolerance, unsigned threads) {
  if (policies.empty()) throw std::invalid_argument("minimality_report needs at least one policy");
  MinimalityReport rep;
  rep.tolerance = tolerance;
  rep.residuals.assign(policies.size(), 0.0);
  rep.identity_defects.assign(policies.size(), 0.0);
  rep.skorokhod.assign(policies.size(), 0.0);
  parallel_for(policies.size(), threads, [&](std::size_t p) {
    const MinimalityResidual r = minimality_residual(lat, gen, obs, sol, policies[p]);
    rep.residuals[p] = r.residual;
    rep.identity_defects[p] = r.identity_defect;
    rep.skorokhod[p] = skorokhod_residual(lat, obs, sol, policies[p]);
  });
  auto w = std::min_element(rep.residuals.begin(), rep.residuals.end());
  rep.infimum = *w;
  rep.argmin = static_cast<std::size_t>(w - rep.residuals.begin());
  rep.min_residual = *w;
  auto s = std::min_element(rep.skorokhod.begin(), rep.skorokhod.end());
  rep.skorokhod_infimum = *s;
  rep.skorokhod_argmin = static_cast<std::size_t>(s - rep.skorokhod.begin());
  rep.max_identity_defect = *std::max_element(rep.identity_defects.begin(), rep.identity_defects.end());
  rep.weighted_attained = std::abs(rep.infimum) <= tolerance;
  rep.skorokhod_attained = rep.skorokhod_infimum <= tolerance;
  rep.identity_holds = rep.max_identity_defect <= tolerance;
  return rep;
}

ObstacleSpec zhang_obstacle(const Lattice& lat, const std::function<double(double)>& tail) {
  if (lat.horizon() != 2.0) throw std::invalid_argument("Zhang obstacle lives on T = 2");
  const int n = lat.steps();
  ObstacleSpec obs;
  obs.lower = Barrier::absent(n);
  obs.upper = Barrier::absent(n);
  for (int i = 0; i <= n; ++i)
    for (int j = -i; j <= i; ++j) {
      // 2 * i <= n  <=>  t_i <= 1, decided on layer indices to avoid rounding at t = 1.
      const double v = 2 * i <= n ? 2.0 * (1.0 - lat.time(i)) : std::min(2.0, tail(lat.value(i, j)));
      obs.lower.set(i, j, v);
    }
  obs.terminal.resize(static_cast<std::size_t>(2 * n + 1));
  for (int j = -n; j <= n; ++j) obs.terminal[static_cast<std::size_t>(j + n)] = *obs.lower.at(n, j);
  validate_obstacle(lat, obs);
  return obs;
}

ZhangReport zhang_counterexample(int steps, const ControlSet& controls, std::function<double(double)> tail,
                                 std::string tail_name) {
  if (steps < 2 || steps % 2 != 0) throw std::invalid_argument("Zhang counter-example needs an even step count");
  if (!tail) tail = [](double b) { return std::abs(b); };
  ZhangReport rep;
  rep.steps = steps;
  rep.tail = "min(2, " + tail_name + "(b))";
  const Lattice lat(2.0, steps, controls, 1.0);
  rep.dt = lat.dt();
  rep.y0_tolerance = 2.0 * lat.dt();
  const ObstacleSpec obs = zhang_obstacle(lat, tail);
  const Generator gen = generator_zero();
  const SecondOrderSolution sol = solve_2rbsde(lat, gen, obs);
  rep.y0 = sol.Y(0, 0);
  rep.y0_matches = std::abs(rep.y0 - 2.0) <= rep.y0_tolerance;
  if (controls.size() < 2) {
    rep.possible = false;
    rep.message = "no counter-example possible: singleton control set gives K = k";
    return rep;
  }
  const int one = steps / 2;
  for (std::size_t k = 0; k < controls.size() && !rep.strict_gap; ++k) {
    const Policy pol(lat, static_cast<std::uint32_t>(k));
    const RbsdeSolution y = solve_rbsde(lat, pol, gen, obs);
    const NodeField<double> mass = forward_mass(lat, pol);
    double best = 0.0;
    Node at{one, 0};
    double expected = 0.0;
    for (int j = -one; j <= one; ++j) {
      const double gap = sol.Y(one, j) - y.y(one, j);
      expected += mass(one, j) * gap;
      if (mass(one, j) > 0.0 && gap > best) {
        best = gap;
        at = Node{one, j};
      }
    }
    if (best > 1e-6) {
      rep.witness_control = k;
      rep.witness_node = at;
      rep.witness_gap = best;
      rep.strict_gap = true;
      rep.gap_at_root = sol.Y(0, 0) - y.y(0, 0);
      rep.expected_gap_at_one = expected;
      rep.violations = monotonicity_probe(lat, gen, obs, sol, pol);
    }
  }
  rep.counterexample = rep.y0_matches && rep.strict_gap && !rep.violations.empty();
  if (rep.counterexample) {
    rep.message = "supermartingale inequality Y_0 - y_0 >= E[Y_1 - y_1] fails under the witness policy";
  } else if (!rep.strict_gap) {
    rep.message = "no constant policy separates Y and y^P at time 1";
  } else {
    rep.message = "witness found but increments of K - k stay non-negative";
  }
  return rep;
}

}  // namespace rbsde_lab
