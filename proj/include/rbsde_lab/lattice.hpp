#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rbsde_lab {

/// Raised when a step-size or probability guard of a discrete scheme fails.
class GuardViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a brute-force enumeration would exceed its configured cap.
class EnumerationTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Position on the recombining grid: layer i in [0, N], offset j in [-i, i].
struct Node {
  int layer = 0;
  int offset = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

/**
 * Dense field over the trinomial grid {(i, j) : 0 <= i <= steps, |j| <= i}.
 *
 * Storage is row-major by layer with j ascending, so layer i starts at
 * i*i and the whole grid holds (steps + 1)^2 values.
 */
template <typename T>
class NodeField {
 public:
  NodeField() = default;
  explicit NodeField(int steps, T init = T{})
      : steps_(steps),
        data_(static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(steps + 1), init) {}

  static constexpr std::size_t index(int i, int j) {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(i) +
           static_cast<std::size_t>(j + i);
  }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }
  T& operator[](Node n) { return (*this)(n.layer, n.offset); }
  const T& operator[](Node n) const { return (*this)(n.layer, n.offset); }

  std::span<T> layer(int i) { return {data_.data() + index(i, -i), static_cast<std::size_t>(2 * i + 1)}; }
  std::span<const T> layer(int i) const {
    return {data_.data() + index(i, -i), static_cast<std::size_t>(2 * i + 1)};
  }

  int steps() const { return steps_; }
  std::size_t size() const { return data_.size(); }
  std::span<const T> values() const { return data_; }
  std::span<T> values() { return data_; }

  friend bool operator==(const NodeField&, const NodeField&) = default;

 private:
  int steps_ = 0;
  std::vector<T> data_;
};

/// Finite set of admissible variance levels a_1 < ... < a_K (all > 0).
class ControlSet {
 public:
  explicit ControlSet(std::vector<double> levels);

  std::size_t size() const { return levels_.size(); }
  double level(std::size_t k) const { return levels_.at(k); }
  double min() const { return levels_.front(); }
  double max() const { return levels_.back(); }
  std::span<const double> levels() const { return levels_; }

  /// True when every level of this set is also a level of `other`.
  bool subset_of(const ControlSet& other) const;

 private:
  std::vector<double> levels_;
};

/// Branch probabilities for the moves +dx, 0, -dx.
struct Transition {
  double up = 0.0;
  double mid = 0.0;
  double down = 0.0;
};

/**
 * Recombining trinomial lattice for the canonical process B with a fixed
 * spatial step dx = c * sqrt(a_max * dt). Immutable after construction.
 */
class Lattice {
 public:
  Lattice(double horizon, int steps, ControlSet controls, double spacing_factor = 1.0);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return dt_; }
  double dx() const { return dx_; }
  double spacing_factor() const { return spacing_; }
  const ControlSet& controls() const { return controls_; }

  /// t_i, with t_N pinned to the horizon.
  double time(int i) const { return i == steps_ ? horizon_ : i * dt_; }
  /// B(i, j) = j * dx.
  double value(int /*i*/, int j) const { return j * dx_; }

  std::size_t node_count() const { return NodeField<char>::index(steps_ + 1, -(steps_ + 1)); }
  std::size_t decision_node_count() const {
    return static_cast<std::size_t>(steps_) * static_cast<std::size_t>(steps_);
  }

  /// Variance-matched probabilities for a level a in [a_min, a_max].
  Transition transition_probabilities(double a) const;
  /// Cached probabilities for control index k.
  const Transition& transition(std::size_t k) const { return transitions_.at(k); }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.horizon_ == b.horizon_ && a.steps_ == b.steps_ && a.spacing_ == b.spacing_ &&
           std::equal(a.controls_.levels().begin(), a.controls_.levels().end(),
                      b.controls_.levels().begin(), b.controls_.levels().end());
  }

 private:
  double horizon_;
  int steps_;
  ControlSet controls_;
  double spacing_;
  double dt_;
  double dx_;
  std::vector<Transition> transitions_;
};

inline Lattice build_lattice(double horizon, int steps, ControlSet controls, double spacing_factor = 1.0) {
  return Lattice(horizon, steps, std::move(controls), spacing_factor);
}

/**
 * Markov (node-feedback) volatility policy: a control index at every
 * non-terminal node. The lattice stand-in for one probability measure.
 */
class Policy {
 public:
  Policy() = default;
  /// Constant policy choosing control `k` everywhere.
  Policy(const Lattice& lat, std::uint32_t k);

  std::uint32_t operator()(int i, int j) const { return choice_(i, j); }
  std::uint32_t& at(int i, int j) { return choice_(i, j); }
  int steps() const { return choice_.steps() + 1; }
  std::span<const std::uint32_t> choices() const { return choice_.values(); }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  friend Policy make_policy(const Lattice&, std::span<const std::uint32_t>);
  NodeField<std::uint32_t> choice_;
};

/// Policy from control indices listed in canonical node order.
Policy make_policy(const Lattice& lat, std::span<const std::uint32_t> choices);

/// Throws std::invalid_argument unless `pol` fits `lat`.
void check_policy(const Lattice& lat, const Policy& pol);

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

/// |A|^(#decision nodes), saturating at SIZE_MAX.
std::size_t policy_count(const Lattice& lat);

/**
 * Every Markov policy, in lexicographic order over canonical node order
 * (row-major by layer, offset ascending; the root is most significant and
 * the last decision node varies fastest).
 */
std::vector<Policy> enumerate_policies(const Lattice& lat, std::size_t cap = kDefaultEnumerationCap);

/// Streaming variant of enumerate_policies; same order, no storage.
void for_each_policy(const Lattice& lat, const std::function<void(const Policy&)>& visit,
                     std::size_t cap = kDefaultEnumerationCap);

/// Node-wise independent uniform draws from the control set (mt19937_64).
std::vector<Policy> sample_policies(const Lattice& lat, std::size_t n, std::uint64_t seed);

/// Probability mass of each node under `pol`, started from `start` with mass 1.
NodeField<double> forward_mass(const Lattice& lat, const Policy& pol, Node start = {});

}  // namespace rbsde_lab
