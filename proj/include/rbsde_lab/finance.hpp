#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rbsde_lab/generator.hpp"
#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"
#include "rbsde_lab/second_order.hpp"

namespace rbsde_lab {

/// Payoff g evaluated at asset values.
struct Payoff {
  enum class Kind { put, call, constant, identity };
  Kind kind = Kind::put;
  double strike = 1.0;  // put / call
  double level = 0.0;   // constant

  double operator()(double s) const;
  std::string name() const;
};

/**
 * Market with log-asset S = S0 exp(B) on the driftless lattice. The drift
 * enters only through the risk premium theta; volatility levels map to
 * variance controls a = sigma^2.
 */
struct MarketSpec {
  double spot = 1.0;
  std::vector<double> sigmas;
  double r_low = 0.0;
  double r_high = 0.0;
  double theta = 0.0;
  Payoff payoff;

  ControlSet controls() const;
  bool two_rates() const { return r_low != r_high; }
};

/// Throws std::invalid_argument listing every violated market constraint.
void validate_market(const MarketSpec& m);

/// f = -(r y + theta sqrt(a) z).
Generator generator_linear(double r, double theta);

/**
 * f = -(r_low y + theta sqrt(a) z - (r_high - r_low) (y - z)^-).
 * `a_floor` is the smallest variance level in use; it enters the declared
 * z-constant |theta| + (r_high - r_low) / sqrt(a_floor).
 */
Generator generator_two_rates(double r_low, double r_high, double theta, double a_floor);

/// Linear generator when the two rates agree, the two-rate generator otherwise.
Generator market_generator(const MarketSpec& m);

struct LatticeParams {
  double maturity = 1.0;
  int steps = 64;
  double spacing_factor = 1.0;
};

struct AmericanPrice {
  double price = 0.0;
  Lattice lattice;
  ObstacleSpec obstacle;
  SecondOrderSolution solution;
};

/// P_sup = Y(0, 0) of the 2RBSDE with L(i, j) = g(S(i, j)) and xi = L(N, .).
AmericanPrice price_american(const MarketSpec& market, const LatticeParams& params);

struct SuperhedgeReport {
  double capital = 0.0;               // W_0
  std::size_t policies = 0;           // tested volatility scenarios
  double min_obstacle_margin = 0.0;   // min over reached nodes of W - L
  double min_value_margin = 0.0;      // min over reached nodes of W - Y
  double min_terminal_margin = 0.0;   // min over reached terminal nodes of W - g
  std::size_t obstacle_shortfall_nodes = 0;
  std::size_t value_shortfall_nodes = 0;
  double tolerance = 0.0;
  bool shortfall = false;  // some reached node has W - L < -tolerance
  bool dominates = false;  // no shortfall against L or Y
};

/**
 * Rolls self-financing wealth forward from W_0 = Y_0 + capital_shift with
 * the control-matched strategy z(i, j, P(i, j)): the drift step solves
 * w + f(w, z) dt = W for w, then W' = w + z dB. Wealth reaching a node lies
 * on many paths; the update is increasing in W, so propagating the node-wise
 * minimum is the exact worst case over every path. Tested scenarios: P*,
 * every constant policy and `samples` uniform draws from `seed`.
 */
SuperhedgeReport verify_superhedge(const AmericanPrice& price, const MarketSpec& market, std::size_t samples,
                                   std::uint64_t seed, double capital_shift = 0.0, double tolerance = 1e-10,
                                   unsigned threads = 1);

}  // namespace rbsde_lab
