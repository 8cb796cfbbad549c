#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rbsde_lab/lattice.hpp"

namespace rbsde_lab {

/**
 * Node-indexed obstacle where each node is either a finite value or absent
 * (the -inf / +inf sentinel). Absent nodes never enter arithmetic.
 */
class Barrier {
 public:
  Barrier() = default;
  /// Barrier absent at every node of an N-step lattice.
  static Barrier absent(int steps);
  /// Finite barrier L(i, j) = fn(t_i, B(i, j)).
  static Barrier from_function(const Lattice& lat, const std::function<double(double t, double b)>& fn);
  static Barrier constant(const Lattice& lat, double value);

  std::optional<double> at(int i, int j) const {
    if (!present_(i, j)) return std::nullopt;
    return values_(i, j);
  }
  bool present(int i, int j) const { return present_(i, j) != 0; }
  void set(int i, int j, double v);
  void clear(int i, int j);
  int steps() const { return values_.steps(); }
  /// True when no node carries a finite value.
  bool empty() const;

 private:
  NodeField<double> values_;
  NodeField<unsigned char> present_;
};

/// Lower obstacle L, optional upper obstacle S and terminal condition xi(j).
struct ObstacleSpec {
  Barrier lower;
  Barrier upper;
  std::vector<double> terminal;  // indexed j + N

  double xi(int steps, int j) const { return terminal.at(static_cast<std::size_t>(j + steps)); }
  bool has_upper() const { return !upper.empty(); }
};

/**
 * Builds an obstacle spec from (t, b) functions. A missing function leaves
 * the barrier absent; a missing terminal uses L(N, .) (or S at N if only S).
 */
ObstacleSpec make_obstacle(const Lattice& lat, std::function<double(double, double)> lower,
                           std::function<double(double, double)> upper = {},
                           std::function<double(double)> terminal = {});

/// Throws std::invalid_argument on size mismatch, xi < L(N), xi > S(N) or L > S.
void validate_obstacle(const Lattice& lat, const ObstacleSpec& obs);

}  // namespace rbsde_lab
