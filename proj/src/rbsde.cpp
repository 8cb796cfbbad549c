#include "rbsde_lab/rbsde.hpp"

#include <cmath>
#include <stdexcept>

namespace rbsde_lab {

ConditionalStep conditional_step(const Lattice& lat, const Generator& gen, std::span<const double> next, int i, int j,
                                 std::size_t k) {
  const Transition& p = lat.transition(k);
  const double a = lat.controls().level(k);
  const std::size_t c = static_cast<std::size_t>(j + i + 1);
  const double up = next[c + 1];
  const double mid = next[c];
  const double down = next[c - 1];
  ConditionalStep s;
  s.expectation = p.up * up + p.mid * mid + p.down * down;
  s.z = (p.up * up * lat.dx() - p.down * down * lat.dx()) / (a * lat.dt());
  s.target = s.expectation + gen(lat.time(i), lat.value(i, j), s.expectation, s.z, a) * lat.dt();
  return s;
}

void check_step_guard(const Lattice& lat, const Generator& gen) {
  if (!(gen.lipschitz_y() * lat.dt() < 1.0))
    throw GuardViolation("explicit-scheme guard L_y*dt < 1 violated; reduce dt");
}

bool monotone_scheme(const Lattice& lat, const Generator& gen) {
  const double slack = 1.0 - gen.lipschitz_y() * lat.dt();
  for (double a : lat.controls().levels())
    if (gen.lipschitz_z() * lat.dx() > std::sqrt(a) * slack) return false;
  return true;
}

namespace {

RbsdeSolution solve_fixed(const Lattice& lat, const Policy& pol, const Generator& gen, const ObstacleSpec& obs) {
  check_policy(lat, pol);
  check_step_guard(lat, gen);
  validate_obstacle(lat, obs);
  const int n = lat.steps();
  RbsdeSolution sol{NodeField<double>(n), NodeField<double>(n), NodeField<double>(n), NodeField<double>(n),
                    NodeField<double>(n)};
  for (int j = -n; j <= n; ++j) sol.y(n, j) = obs.xi(n, j);
  for (int i = n - 1; i >= 0; --i) {
    const auto next = sol.y.layer(i + 1);
    for (int j = -i; j <= i; ++j) {
      const ConditionalStep s = conditional_step(lat, gen, next, i, j, pol(i, j));
      double y = s.target;
      double push_up = 0.0;
      double push_down = 0.0;
      if (auto l = obs.lower.at(i, j); l && s.target < *l) {
        push_up = *l - s.target;
        y = *l;
      }
      if (auto u = obs.upper.at(i, j); u && s.target > *u) {
        push_down = s.target - *u;
        y = *u;
      }
      sol.y(i, j) = y;
      sol.z(i, j) = s.z;
      sol.dk_minus(i, j) = push_up;
      sol.dk_plus(i, j) = push_down;
      sol.dk(i, j) = push_up - push_down;
    }
  }
  return sol;
}

}  // namespace

RbsdeSolution solve_rbsde(const Lattice& lat, const Policy& pol, const Generator& gen, const ObstacleSpec& obs) {
  if (obs.has_upper()) throw std::invalid_argument("solve_rbsde takes no upper obstacle; use solve_drbsde_fixed");
  return solve_fixed(lat, pol, gen, obs);
}

RbsdeSolution solve_drbsde_fixed(const Lattice& lat, const Policy& pol, const Generator& gen,
                                 const ObstacleSpec& obs) {
  return solve_fixed(lat, pol, gen, obs);
}

NodeField<double> snell_envelope(const Lattice& lat, const Policy& pol, const ObstacleSpec& obs) {
  check_policy(lat, pol);
  validate_obstacle(lat, obs);
  const int n = lat.steps();
  NodeField<double> u(n);
  for (int j = -n; j <= n; ++j) u(n, j) = obs.xi(n, j);
  for (int i = n - 1; i >= 0; --i)
    for (int j = -i; j <= i; ++j) {
      const Transition& p = lat.transition(pol(i, j));
      double cont = p.up * u(i + 1, j + 1) + p.mid * u(i + 1, j) + p.down * u(i + 1, j - 1);
      if (auto l = obs.lower.at(i, j)) cont = std::max(*l, cont);
      u(i, j) = cont;
    }
  return u;
}

}  // namespace rbsde_lab
