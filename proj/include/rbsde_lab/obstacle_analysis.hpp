#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"
#include "rbsde_lab/second_order.hpp"

namespace rbsde_lab {

/**
 * Alternating first passages of D = Y - L below eps and back above 2 eps.
 *
 * tau_0 = 0; tau_1 is the first layer with D <= eps; tau_2 the first later
 * layer with D >= 2 eps, and so on. Only layers i < N count as hits; the
 * sequence is padded with N (= T) afterwards. The rule is Markov in the
 * augmented state (node, seeking-low / seeking-high), so crossing counts are
 * computed by forward sweeps over that state rather than by path enumeration.
 */
struct CrossingPartition {
  double epsilon = 0.0;
  int steps = 0;
  NodeField<unsigned char> low_hit;   // D <= eps
  NodeField<unsigned char> high_hit;  // D >= 2 eps (absent L counts as D = +inf)
  int min_crossings = 0;              // over every lattice path
  int max_crossings = 0;
};

CrossingPartition crossing_partition(const Lattice& lat, const NodeField<double>& value, const Barrier& lower,
                                     double epsilon);
CrossingPartition crossing_partition(const Lattice& lat, const SecondOrderSolution& sol, const ObstacleSpec& obs,
                                     double epsilon);

/// Hit layers tau_1, tau_2, ... (< N) along a path of offsets j_0 = 0, ..., j_N.
std::vector<int> crossing_layers(const CrossingPartition& part, std::span<const int> path);

/// P[number of hits = c] under pol, c = 0..N.
std::vector<double> crossing_count_distribution(const Lattice& lat, const CrossingPartition& part, const Policy& pol);

/// Deterministic partition layers 0 = t_0 < ... < t_n = N with t_k = floor(k N / n).
std::vector<int> uniform_grid(const Lattice& lat, int intervals);

/// P[|L(t_{k+1}) - L(t_k)| >= eps] for each interval of a deterministic grid.
std::vector<double> jump_probabilities(const Lattice& lat, const Barrier& lower, const Policy& pol,
                                       std::span<const int> grid, double epsilon);

/// Exact P[#{k : |L(t_{k+1}) - L(t_k)| >= eps} >= n - m] on a deterministic grid.
double oscillation_probability(const Lattice& lat, const Barrier& lower, const Policy& pol, std::span<const int> grid,
                               double epsilon, int m);

/// Exact E[sum_k |L(t_{k+1}) - L(t_k)|^p] on a deterministic grid.
double p_variation(const Lattice& lat, const Barrier& lower, const Policy& pol, std::span<const int> grid, double p);

struct SampledEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
};

/**
 * Monte Carlo estimates over the crossing partition tau_0, ..., tau_n
 * (padded with N): the oscillation probability with threshold eps and slack
 * m, and the p-variation sum on the same partition, from the same paths.
 */
struct CrossingOscillation {
  SampledEstimate probability;
  SampledEstimate variation;
};

CrossingOscillation crossing_oscillation(const Lattice& lat, const Barrier& lower, const Policy& pol,
                                         const CrossingPartition& part, int intervals, double epsilon, int m,
                                         double p, std::size_t paths, std::uint64_t seed);

struct OscillationReport {
  double epsilon = 0.0;
  int m = 0;
  int n = 0;
  double p = 1.0;
  std::size_t policy_count = 0;
  std::vector<double> probability;  // per policy, exact on the grid
  std::vector<double> union_bound;  // per policy: sum of the last m + 1 jump probabilities
  double sup_probability = 0.0;
  double ell = 0.0;                 // max over policies and uniform grids 1..N of the p-variation
  double markov_bound = 0.0;        // ell / (eps^p (n - m))
  bool markov_dominates = false;
  bool union_dominates = false;
};

/// Assumption check on an n-interval uniform grid for every tested policy.
OscillationReport oscillation_report(const Lattice& lat, const ObstacleSpec& obs, const std::vector<Policy>& policies,
                                     int intervals, double epsilon, int m, double p = 1.0);

struct VariationBound {
  double ell = 0.0;
  double markov_bound = 0.0;
};

/**
 * ell = max over tested policies and uniform grids with 1..N intervals of the
 * exact p-variation; the Markov bound ell / (eps^p (n - m)).
 */
VariationBound p_variation_bound(const Lattice& lat, const ObstacleSpec& obs, const std::vector<Policy>& policies,
                                 double p, double epsilon, int intervals, int m);

}  // namespace rbsde_lab
