#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "rbsde_lab/generator.hpp"
#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"
#include "rbsde_lab/rbsde.hpp"
#include "rbsde_lab/second_order.hpp"

namespace rbsde_lab {

/// Divided-difference coefficients with f(y,z) - f(y2,z2) = lambda (y - y2) + eta sqrt(a) (z - z2).
struct Linearization {
  double lambda = 0.0;
  double eta = 0.0;
};

/// Telescopes y first (at z), then z (at y2). Differences below 1e-12 give 0.
Linearization linearize(const Generator& gen, double t, double b, double y, double y2, double z, double z2, double a);

/// Node-wise linearization coefficients between two value fields under one policy.
struct WeightField {
  NodeField<double> lambda;
  NodeField<double> eta;
};

/**
 * Linearizes gen between the explicit steps of `upper` and `lower` under
 * pol: the coefficients at (i, j) use the conditional expectations and
 * z-estimators of both fields on layer i + 1.
 */
WeightField linearize_fields(const Lattice& lat, const Generator& gen, const Policy& pol,
                             const NodeField<double>& upper, const NodeField<double>& lower);

/**
 * Multiplicative path weight M with M(root) = 1 and, along the branch dB,
 * M' = M * (1 + lambda dt + eta dB / sqrt(a)). This is the factor for which
 * the explicit-scheme identity Y_i - y_i = E_i[M'/M (Y_{i+1} - y_{i+1})] + d(K - k)_i
 * holds exactly; its dt -> 0 limit is the exponential weight.
 */
class DiscreteWeight {
 public:
  /// Throws GuardViolation when a branch factor is not strictly positive.
  DiscreteWeight(const Lattice& lat, const Policy& pol, WeightField field);

  /// Factor on branch move in {+1, 0, -1} leaving node (i, j).
  double factor(int i, int j, int move) const;
  /// E[M_i 1{X_i = (i, j)}] for a walk started at `start` with M(start) = 1.
  NodeField<double> weighted_mass(Node start = {}) const;
  /// E[sum_i M_i increments(X_i)] over layers >= start.layer.
  double expectation(const NodeField<double>& increments, Node start = {}) const;
  /// M along an explicit path of offsets j_0 = 0, j_1, ..., one per layer.
  double path_weight(const std::vector<int>& offsets) const;

 private:
  const Lattice* lat_;
  Policy pol_;
  WeightField field_;
};

DiscreteWeight discrete_weight(const Lattice& lat, const Policy& pol, WeightField field);

/// Predictable increments d(V - k) = dV^P - (dk^- - dk^+) under pol, with y^P solved on the spot.
NodeField<double> increment_difference(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                       const SecondOrderSolution& sol, const Policy& pol);

struct MinimalityResidual {
  double residual = 0.0;         // E[sum M d(K - k)]
  double gap = 0.0;              // Y - y^P at the start node
  double identity_defect = 0.0;  // |residual - gap|
};

MinimalityResidual minimality_residual(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                       const SecondOrderSolution& sol, const Policy& pol);

/// Same quantity conditioned on the walk sitting at `start`.
MinimalityResidual conditional_minimality_residual(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                                   const SecondOrderSolution& sol, const Policy& pol, Node start);

/// E[sum_i (Y_i - L_i) dK_i] under pol; +inf if dK > 0 where L is absent.
double skorokhod_residual(const Lattice& lat, const ObstacleSpec& obs, const SecondOrderSolution& sol,
                          const Policy& pol, Node start = {});

/// E[sum_i (S_i - Y_i) dKplus_i] under pol; 0 when S is absent.
double upper_skorokhod_sum(const Lattice& lat, const ObstacleSpec& obs, const SecondOrderSolution& sol,
                           const Policy& pol);

/// Policy equal to `before` on layers < layer and to `after` from layer on.
Policy splice_policy(const Lattice& lat, const Policy& before, const Policy& after, int layer);

struct IncrementViolation {
  Node node;
  double increment = 0.0;
  double probability = 0.0;
};

/// Nodes reached by pol whose increment d(K - k) is below -tolerance.
std::vector<IncrementViolation> monotonicity_probe(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                                   const SecondOrderSolution& sol, const Policy& pol,
                                                   double tolerance = 1e-12);

struct MinimalityReport {
  std::vector<double> residuals;
  std::vector<double> identity_defects;
  std::vector<double> skorokhod;
  double infimum = 0.0;
  std::size_t argmin = 0;
  double skorokhod_infimum = 0.0;
  std::size_t skorokhod_argmin = 0;
  double max_identity_defect = 0.0;
  double min_residual = 0.0;
  double tolerance = 0.0;
  bool weighted_attained = false;
  bool skorokhod_attained = false;
  bool identity_holds = false;
};

/// Both minimality residuals and the identity defect over a tested policy set.
MinimalityReport minimality_report(const Lattice& lat, const Generator& gen, const ObstacleSpec& obs,
                                   const SecondOrderSolution& sol, const std::vector<Policy>& policies,
                                   double tolerance = 1e-10, unsigned threads = 1);

struct ZhangReport {
  bool possible = true;
  std::string message;
  std::string tail;
  int steps = 0;
  double dt = 0.0;
  double y0 = 0.0;
  double y0_tolerance = 0.0;
  bool y0_matches = false;
  std::size_t witness_control = 0;  // constant policy index
  Node witness_node;
  double witness_gap = 0.0;
  bool strict_gap = false;
  double gap_at_root = 0.0;           // Y_0 - y_0^P
  double expected_gap_at_one = 0.0;   // E^P[Y_1 - y_1^P]
  std::vector<IncrementViolation> violations;
  bool counterexample = false;  // all three checks hold
};

/**
 * T = 2, f = 0, L = 2(1 - t) on [0, 1] and min(2, tail(b)) after, xi = L(T).
 * Exhibits a policy with Y > y^P at time 1 although Y_0 = y_0^P = 2.
 */
ZhangReport zhang_counterexample(int steps, const ControlSet& controls,
                                 std::function<double(double)> tail = {}, std::string tail_name = "abs");

/// The obstacle used by zhang_counterexample on a given lattice (T must be 2).
ObstacleSpec zhang_obstacle(const Lattice& lat, const std::function<double(double)>& tail);

}  // namespace rbsde_lab
