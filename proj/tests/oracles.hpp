#pragma once

// Test-only reference implementations, written without the library's solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rbsde_lab/finance.hpp"
#include "rbsde_lab/generator.hpp"
#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"
#include "rbsde_lab/rbsde.hpp"

namespace oracle {

using rbsde_lab::Generator;
using rbsde_lab::Lattice;
using rbsde_lab::ObstacleSpec;
using rbsde_lab::Policy;

/// Value of a plain 2D vector grid, offset j + i.
using Grid = std::vector<std::vector<double>>;

struct Step {
  double e;
  double z;
  double target;
};

inline Step explicit_step(const Lattice& lat, const Generator& gen, const Grid& v, int i, int j, double a) {
  const double r = a * lat.dt() / (lat.dx() * lat.dx());
  const double up = v[i + 1][j + 1 + i + 1];
  const double mid = v[i + 1][j + i + 1];
  const double dn = v[i + 1][j - 1 + i + 1];
  const double e = 0.5 * r * up + (1.0 - r) * mid + 0.5 * r * dn;
  const double z = (up - dn) / (2.0 * lat.dx());
  return {e, z, e + gen(lat.time(i), j * lat.dx(), e, z, a) * lat.dt()};
}

inline Grid terminal_grid(const Lattice& lat, const ObstacleSpec& obs) {
  const int n = lat.steps();
  Grid v(n + 1);
  for (int i = 0; i <= n; ++i) v[i].assign(2 * i + 1, 0.0);
  for (int j = -n; j <= n; ++j) v[n][j + n] = obs.xi(n, j);
  return v;
}

/// Stopped explicit BSDE: y = L on `stop` nodes, the explicit target elsewhere.
inline double stopped_value(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs, const Policy& pol,
                            const std::vector<bool>& stop) {
  Grid v = terminal_grid(lat, obs);
  std::size_t idx = lat.decision_node_count();
  for (int i = lat.steps() - 1; i >= 0; --i)
    for (int j = i; j >= -i; --j) {
      --idx;
      const double a = lat.controls().level(pol(i, j));
      v[i][j + i] = stop[idx] ? *obs.lower.at(i, j) : explicit_step(lat, gen, v, i, j, a).target;
    }
  return v[0][0];
}

/// max over every stopping region (subset of decision nodes) of the stopped value.
inline double brute_force_stopping(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                   const Policy& pol) {
  const std::size_t nodes = lat.decision_node_count();
  double best = -INFINITY;
  std::vector<bool> stop(nodes);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nodes); ++mask) {
    for (std::size_t b = 0; b < nodes; ++b) stop[b] = (mask >> b) & 1u;
    best = std::max(best, stopped_value(lat, gen, obs, pol, stop));
  }
  return best;
}

/// Fixed-policy reflected value by direct recursion (lower obstacle only).
inline Grid reflected(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs, const Policy& pol) {
  Grid v = terminal_grid(lat, obs);
  for (int i = lat.steps() - 1; i >= 0; --i)
    for (int j = -i; j <= i; ++j) {
      const double t = explicit_step(lat, gen, v, i, j, lat.controls().level(pol(i, j))).target;
      const auto l = obs.lower.at(i, j);
      v[i][j + i] = l ? std::max(*l, t) : t;
    }
  return v;
}

/// Independently coded trinomial American option with the lattice's dx and probabilities, f = 0.
inline double american_trinomial(double spot, double strike, bool put, double sigma, double maturity, int steps,
                                 double c) {
  const double dt = maturity / steps;
  const double dx = c * sigma * std::sqrt(dt);
  const double pu = sigma * sigma * dt / (2 * dx * dx);
  const double pm = 1 - 2 * pu;
  auto pay = [&](int j) {
    const double s = spot * std::exp(j * dx);
    return std::max(put ? strike - s : s - strike, 0.0);
  };
  std::vector<double> v(2 * steps + 1);
  for (int j = -steps; j <= steps; ++j) v[j + steps] = pay(j);
  for (int i = steps - 1; i >= 0; --i) {
    std::vector<double> w(2 * i + 1);
    for (int j = -i; j <= i; ++j) {
      const double cont = pu * v[j + 1 + i + 1] + std::max(pm, 0.0) * v[j + i + 1] + pu * v[j - 1 + i + 1];
      w[j + i] = std::max(pay(j), cont);
    }
    v.swap(w);
  }
  return v[0];
}

/// Every lattice path of offsets j_0 = 0, ..., j_N with its probability under pol (3^N paths).
inline void for_each_path(const Lattice& lat, const Policy& pol,
                          const std::function<void(const std::vector<int>&, double)>& visit) {
  const int n = lat.steps();
  std::vector<int> path(n + 1, 0);
  std::function<void(int, double)> rec = [&](int i, double p) {
    if (i == n) {
      visit(path, p);
      return;
    }
    const auto& t = lat.transition(pol(i, path[i]));
    const double probs[3] = {t.up, t.mid, t.down};
    const int moves[3] = {1, 0, -1};
    for (int m = 0; m < 3; ++m) {
      if (probs[m] == 0.0) continue;
      path[i + 1] = path[i] + moves[m];
      rec(i + 1, p * probs[m]);
    }
  };
  rec(0, 1.0);
}

struct Instance {
  Lattice lat;
  Generator gen;
  ObstacleSpec obs;
  std::string label;
};

/// Randomized instance with a monotone explicit step; lower obstacle, terminal above it.
inline Instance random_instance(std::mt19937_64& rng, int steps, std::size_t controls, bool with_upper = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> levels;
  double a = 0.2 + 0.3 * u(rng);
  for (std::size_t k = 0; k < controls; ++k) {
    levels.push_back(a);
    a += 0.1 + 0.5 * u(rng);
  }
  const double horizon = 0.5 + u(rng);
  const double c = 1.0 + 0.5 * u(rng) * (u(rng) < 0.5);
  Lattice lat(horizon, steps, rbsde_lab::ControlSet(levels), c);

  const int fam = static_cast<int>(rng() % 4);
  const double r = 0.6 * (u(rng) - 0.5);
  double theta = 0.4 * (u(rng) - 0.5);
  Generator gen = rbsde_lab::generator_zero();
  for (int attempt = 0; attempt < 40; ++attempt) {
    if (fam == 0) gen = rbsde_lab::generator_zero();
    if (fam == 1) gen = rbsde_lab::generator_affine_y(r);
    if (fam == 2) gen = rbsde_lab::generator_linear(r, theta);
    if (fam == 3) gen = rbsde_lab::generator_two_rates(std::min(r, 0.05), std::max(r, 0.05) + 0.1, theta, levels.front());
    if (rbsde_lab::monotone_scheme(lat, gen)) break;
    theta *= 0.5;
    if (attempt == 39) gen = rbsde_lab::generator_zero();
  }

  const double c0 = u(rng) - 0.5, ct = 2 * (u(rng) - 0.5), amp = u(rng), freq = 0.5 + 3 * u(rng),
               phase = 6.28 * u(rng), bump = 0.3 * u(rng);
  auto lower = [=](double t, double b) { return c0 + ct * t + amp * std::cos(freq * b + phase); };
  std::function<double(double, double)> upper;
  if (with_upper) {
    const double gapc = 0.05 + 0.6 * u(rng), slope = u(rng);
    upper = [=](double t, double b) { return lower(t, b) + gapc + slope * std::abs(b) + bump; };
  }
  ObstacleSpec obs = rbsde_lab::make_obstacle(lat, lower, upper, [=](double b) { return lower(horizon, b) + bump * std::sin(b) * std::sin(b); });
  return {std::move(lat), std::move(gen), std::move(obs), "fam" + std::to_string(fam)};
}

}  // namespace oracle
