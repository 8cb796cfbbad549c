#include "rbsde_lab/lattice.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rbsde_lab {

ControlSet::ControlSet(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("control set is empty");
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (!(levels_[k] > 0.0) || !std::isfinite(levels_[k]))
      throw std::invalid_argument("control levels must be finite and strictly positive");
    if (k > 0 && !(levels_[k] > levels_[k - 1]))
      throw std::invalid_argument("control levels must be strictly increasing");
  }
}

bool ControlSet::subset_of(const ControlSet& other) const {
  return std::includes(other.levels_.begin(), other.levels_.end(), levels_.begin(), levels_.end());
}

Lattice::Lattice(double horizon, int steps, ControlSet controls, double spacing_factor)
    : horizon_(horizon), steps_(steps), controls_(std::move(controls)), spacing_(spacing_factor) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
  if (steps < 1) throw std::invalid_argument("lattice needs at least one step");
  if (!(spacing_factor >= 1.0))
    throw std::invalid_argument("spacing factor below 1: probability bound dx^2 >= a_max*dt violated");
  dt_ = horizon_ / steps_;
  dx_ = spacing_ * std::sqrt(controls_.max() * dt_);
  transitions_.reserve(controls_.size());
  for (double a : controls_.levels()) transitions_.push_back(transition_probabilities(a));
}

Transition Lattice::transition_probabilities(double a) const {
  if (!(a >= controls_.min() && a <= controls_.max()))
    throw std::invalid_argument("variance level outside control bounds");
  // a dt / dx^2 with dx^2 = c^2 a_max dt, written so that a = a_max, c = 1 gives exactly 1.
  const double ratio = (a / controls_.max()) / (spacing_ * spacing_);
  Transition t;
  t.up = 0.5 * ratio;
  t.down = t.up;
  t.mid = 1.0 - ratio;
  return t;
}

Policy::Policy(const Lattice& lat, std::uint32_t k) : choice_(lat.steps() - 1, k) {
  if (k >= lat.controls().size()) throw std::invalid_argument("control index out of range");
}

Policy make_policy(const Lattice& lat, std::span<const std::uint32_t> choices) {
  if (choices.size() != lat.decision_node_count())
    throw std::invalid_argument("policy size does not match lattice decision nodes");
  Policy p(lat, 0);
  std::copy(choices.begin(), choices.end(), p.choice_.values().begin());
  check_policy(lat, p);
  return p;
}

void check_policy(const Lattice& lat, const Policy& pol) {
  if (pol.steps() != lat.steps()) throw std::invalid_argument("policy/lattice step mismatch");
  for (auto k : pol.choices())
    if (k >= lat.controls().size()) throw std::invalid_argument("policy control index out of range");
}

std::size_t policy_count(const Lattice& lat) {
  const std::size_t base = lat.controls().size();
  std::size_t count = 1;
  for (std::size_t n = 0; n < lat.decision_node_count(); ++n) {
    if (count > std::numeric_limits<std::size_t>::max() / base) return std::numeric_limits<std::size_t>::max();
    count *= base;
  }
  return count;
}

void for_each_policy(const Lattice& lat, const std::function<void(const Policy&)>& visit, std::size_t cap) {
  const std::size_t total = policy_count(lat);
  if (total > cap)
    throw EnumerationTooLarge("policy family too large to enumerate: " +
                              (total == std::numeric_limits<std::size_t>::max() ? std::string("overflow")
                                                                                : std::to_string(total)) +
                              " > cap " + std::to_string(cap));
  const auto base = static_cast<std::uint32_t>(lat.controls().size());
  std::vector<std::uint32_t> digits(lat.decision_node_count(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    visit(make_policy(lat, digits));
    for (std::size_t d = digits.size(); d-- > 0;) {
      if (++digits[d] < base) break;
      digits[d] = 0;
    }
  }
}

std::vector<Policy> enumerate_policies(const Lattice& lat, std::size_t cap) {
  std::vector<Policy> out;
  for_each_policy(lat, [&](const Policy& p) { out.push_back(p); }, cap);
  return out;
}

std::vector<Policy> sample_policies(const Lattice& lat, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_policies needs n >= 1");
  std::mt19937_64 rng(seed);
  const std::uint64_t base = lat.controls().size();
  std::vector<Policy> out;
  out.reserve(n);
  std::vector<std::uint32_t> digits(lat.decision_node_count());
  for (std::size_t s = 0; s < n; ++s) {
    // Raw engine output modulo |A|: the engine sequence is fixed by the standard,
    // distribution objects are not.
    for (auto& d : digits) d = static_cast<std::uint32_t>(rng() % base);
    out.push_back(make_policy(lat, digits));
  }
  return out;
}

NodeField<double> forward_mass(const Lattice& lat, const Policy& pol, Node start) {
  check_policy(lat, pol);
  NodeField<double> mass(lat.steps(), 0.0);
  mass[start] = 1.0;
  for (int i = start.layer; i < lat.steps(); ++i) {
    for (int j = -i; j <= i; ++j) {
      const double m = mass(i, j);
      if (m == 0.0) continue;
      const Transition& p = lat.transition(pol(i, j));
      mass(i + 1, j + 1) += m * p.up;
      mass(i + 1, j) += m * p.mid;
      mass(i + 1, j - 1) += m * p.down;
    }
  }
  return mass;
}

}  // namespace rbsde_lab
