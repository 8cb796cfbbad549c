#pragma once

#include <cstddef>
#include <vector>

#include "rbsde_lab/generator.hpp"
#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"
#include "rbsde_lab/rbsde.hpp"

namespace rbsde_lab {

/**
 * Second-order solution on the lattice: the value Y (dynamic program over
 * the control set), per-control Z and step targets, the argmax policy P*,
 * and for two obstacles the upper push of the decomposition.
 */
struct SecondOrderSolution {
  int steps = 0;
  std::size_t control_count = 0;
  bool doubly_reflected = false;
  NodeField<double> Y;
  /// max(L, max_a target_a): the lower-clamped value before the upper clamp.
  NodeField<double> lower_clamped;
  /// Upper push dKplus = (lower_clamped - S)^+, zero without S.
  NodeField<double> upper_push;
  Policy optimal_policy;

  double z(int i, int j, std::size_t k) const { return z_[NodeField<char>::index(i, j) * control_count + k]; }
  double target(int i, int j, std::size_t k) const {
    return target_[NodeField<char>::index(i, j) * control_count + k];
  }
  /// Z at the argmax control.
  double canonical_z(int i, int j) const { return z(i, j, optimal_policy(i, j)); }

  std::vector<double> z_;
  std::vector<double> target_;
};

/// Lower-reflected 2RBSDE. Ties in the argmax go to the smallest control index.
SecondOrderSolution solve_2rbsde(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs);

/// Doubly-reflected 2DRBSDE: Y = min(max(L, max_a target_a), S).
SecondOrderSolution solve_2drbsde(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs);

/// Predictable per-policy increments dV = dK - dKplus with dK, dKplus >= 0.
struct Decomposition {
  NodeField<double> dV;
  NodeField<double> dK;
  NodeField<double> dKplus;
};

Decomposition decompose(const Lattice& lat, const SecondOrderSolution& sol, const Policy& pol);

/// dK(i, j) = lower_clamped(i, j) - target_pol(i, j); equals Y - target_pol without S.
NodeField<double> extract_K(const Lattice& lat, const SecondOrderSolution& sol, const Policy& pol);

/// Y - y^P checked for each given policy.
struct RepresentationReport {
  std::vector<double> gaps;        // Y(0,0) - y^P(0,0)
  std::vector<double> min_node_gap;  // min over nodes of Y - y^P
  double min_gap = 0.0;
  std::size_t argmin = 0;
  double worst_node_violation = 0.0;  // min over policies and nodes of Y - y^P
  bool exhaustive = false;
  bool attained = false;  // exhaustive and min_gap <= tolerance
};

/**
 * Solves each fixed-policy problem (doubly reflected when S is present) and
 * compares with the second-order value. `threads` splits the policy loop.
 */
RepresentationReport representation_check(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                          const SecondOrderSolution& sol, const std::vector<Policy>& policies,
                                          bool exhaustive = false, double tolerance = 1e-12, unsigned threads = 1);

}  // namespace rbsde_lab
