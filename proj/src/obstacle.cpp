#include "rbsde_lab/obstacle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rbsde_lab {

Barrier Barrier::absent(int steps) {
  Barrier b;
  b.values_ = NodeField<double>(steps, 0.0);
  b.present_ = NodeField<unsigned char>(steps, 0);
  return b;
}

Barrier Barrier::from_function(const Lattice& lat, const std::function<double(double, double)>& fn) {
  Barrier b = absent(lat.steps());
  for (int i = 0; i <= lat.steps(); ++i)
    for (int j = -i; j <= i; ++j) b.set(i, j, fn(lat.time(i), lat.value(i, j)));
  return b;
}

Barrier Barrier::constant(const Lattice& lat, double value) {
  return from_function(lat, [value](double, double) { return value; });
}

void Barrier::set(int i, int j, double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("barrier values must be finite; use clear() for absent nodes");
  values_(i, j) = v;
  present_(i, j) = 1;
}

void Barrier::clear(int i, int j) {
  values_(i, j) = 0.0;
  present_(i, j) = 0;
}

bool Barrier::empty() const {
  for (auto p : present_.values())
    if (p) return false;
  return true;
}

ObstacleSpec make_obstacle(const Lattice& lat, std::function<double(double, double)> lower,
                           std::function<double(double, double)> upper, std::function<double(double)> terminal) {
  ObstacleSpec obs;
  obs.lower = lower ? Barrier::from_function(lat, lower) : Barrier::absent(lat.steps());
  obs.upper = upper ? Barrier::from_function(lat, upper) : Barrier::absent(lat.steps());
  const int n = lat.steps();
  obs.terminal.resize(static_cast<std::size_t>(2 * n + 1));
  for (int j = -n; j <= n; ++j) {
    double v;
    if (terminal) {
      v = terminal(lat.value(n, j));
    } else if (lower) {
      v = *obs.lower.at(n, j);
    } else if (upper) {
      v = *obs.upper.at(n, j);
    } else {
      throw std::invalid_argument("make_obstacle: no terminal condition and no obstacle");
    }
    obs.terminal[static_cast<std::size_t>(j + n)] = v;
  }
  validate_obstacle(lat, obs);
  return obs;
}

void validate_obstacle(const Lattice& lat, const ObstacleSpec& obs) {
  const int n = lat.steps();
  if (obs.lower.steps() != n || obs.upper.steps() != n)
    throw std::invalid_argument("obstacle/lattice step mismatch");
  if (obs.terminal.size() != static_cast<std::size_t>(2 * n + 1))
    throw std::invalid_argument("terminal condition has wrong size");
  for (int j = -n; j <= n; ++j) {
    const double xi = obs.xi(n, j);
    if (!std::isfinite(xi)) throw std::invalid_argument("terminal condition must be finite");
    if (auto l = obs.lower.at(n, j); l && xi < *l)
      throw std::invalid_argument("terminal below lower obstacle at j=" + std::to_string(j));
    if (auto s = obs.upper.at(n, j); s && xi > *s)
      throw std::invalid_argument("terminal above upper obstacle at j=" + std::to_string(j));
  }
  for (int i = 0; i <= n; ++i)
    for (int j = -i; j <= i; ++j) {
      auto l = obs.lower.at(i, j);
      auto s = obs.upper.at(i, j);
      if (l && s && *l > *s)
        throw std::invalid_argument("lower obstacle above upper obstacle at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
    }
}

}  // namespace rbsde_lab
