#include "rbsde_lab/second_order.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rbsde_lab/parallel.hpp"

namespace rbsde_lab {

namespace {

SecondOrderSolution solve_dp(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs, bool doubly) {
  check_step_guard(lat, gen);
  validate_obstacle(lat, obs);
  const int n = lat.steps();
  const std::size_t kc = lat.controls().size();
  SecondOrderSolution sol;
  sol.steps = n;
  sol.control_count = kc;
  sol.doubly_reflected = doubly;
  sol.Y = NodeField<double>(n);
  sol.lower_clamped = NodeField<double>(n);
  sol.upper_push = NodeField<double>(n, 0.0);
  sol.optimal_policy = Policy(lat, 0);
  sol.z_.assign(lat.node_count() * kc, 0.0);
  sol.target_.assign(lat.node_count() * kc, 0.0);

  for (int j = -n; j <= n; ++j) {
    sol.Y(n, j) = obs.xi(n, j);
    sol.lower_clamped(n, j) = obs.xi(n, j);
  }
  for (int i = n - 1; i >= 0; --i) {
    const auto next = sol.Y.layer(i + 1);
    for (int j = -i; j <= i; ++j) {
      const std::size_t base = NodeField<char>::index(i, j) * kc;
      double best = -std::numeric_limits<double>::infinity();
      std::uint32_t best_k = 0;
      for (std::size_t k = 0; k < kc; ++k) {
        const ConditionalStep s = conditional_step(lat, gen, next, i, j, k);
        sol.z_[base + k] = s.z;
        sol.target_[base + k] = s.target;
        if (s.target > best) {
          best = s.target;
          best_k = static_cast<std::uint32_t>(k);
        }
      }
      sol.optimal_policy.at(i, j) = best_k;
      double v = best;
      if (auto l = obs.lower.at(i, j); l && best < *l) v = *l;
      sol.lower_clamped(i, j) = v;
      if (auto u = obs.upper.at(i, j); u && v > *u) {
        sol.upper_push(i, j) = v - *u;
        v = *u;
      }
      sol.Y(i, j) = v;
    }
  }
  return sol;
}

void check_solution(const Lattice& lat, const SecondOrderSolution& sol, const Policy& pol) {
  if (sol.steps != lat.steps() || sol.control_count != lat.controls().size())
    throw std::invalid_argument("second-order solution does not belong to this lattice");
  check_policy(lat, pol);
}

}  // namespace

SecondOrderSolution solve_2rbsde(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs) {
  if (obs.has_upper()) throw std::invalid_argument("solve_2rbsde takes no upper obstacle; use solve_2drbsde");
  return solve_dp(lat, gen, obs, false);
}

SecondOrderSolution solve_2drbsde(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs) {
  return solve_dp(lat, gen, obs, true);
}

Decomposition decompose(const Lattice& lat, const SecondOrderSolution& sol, const Policy& pol) {
  check_solution(lat, sol, pol);
  const int n = lat.steps();
  Decomposition d{NodeField<double>(n, 0.0), NodeField<double>(n, 0.0), NodeField<double>(n, 0.0)};
  for (int i = 0; i < n; ++i)
    for (int j = -i; j <= i; ++j) {
      const double dk = sol.lower_clamped(i, j) - sol.target(i, j, pol(i, j));
      d.dK(i, j) = dk;
      d.dKplus(i, j) = sol.upper_push(i, j);
      d.dV(i, j) = dk - sol.upper_push(i, j);
    }
  return d;
}

NodeField<double> extract_K(const Lattice& lat, const SecondOrderSolution& sol, const Policy& pol) {
  return decompose(lat, sol, pol).dK;
}

RepresentationReport representation_check(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                          const SecondOrderSolution& sol, const std::vector<Policy>& policies,
                                          bool exhaustive, double tolerance, unsigned threads) {
  RepresentationReport rep;
  rep.exhaustive = exhaustive;
  rep.gaps.assign(policies.size(), 0.0);
  rep.min_node_gap.assign(policies.size(), 0.0);
  parallel_for(policies.size(), threads, [&](std::size_t p) {
    const RbsdeSolution y = solve_drbsde_fixed(lat, policies[p], gen, obs);
    rep.gaps[p] = sol.Y(0, 0) - y.y(0, 0);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; idx < y.y.size(); ++idx) worst = std::min(worst, sol.Y.values()[idx] - y.y.values()[idx]);
    rep.min_node_gap[p] = worst;
  });
  if (!policies.empty()) {
    auto it = std::min_element(rep.gaps.begin(), rep.gaps.end());
    rep.min_gap = *it;
    rep.argmin = static_cast<std::size_t>(it - rep.gaps.begin());
    rep.worst_node_violation = *std::min_element(rep.min_node_gap.begin(), rep.min_node_gap.end());
  }
  rep.attained = exhaustive && !policies.empty() && rep.min_gap <= tolerance;
  return rep;
}

}  // namespace rbsde_lab
