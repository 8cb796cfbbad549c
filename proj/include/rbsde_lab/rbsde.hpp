#pragma once

#include <span>

#include "rbsde_lab/generator.hpp"
#include "rbsde_lab/lattice.hpp"
#include "rbsde_lab/obstacle.hpp"

namespace rbsde_lab {

/// One explicit backward step at node (i, j) under control k.
struct ConditionalStep {
  double expectation = 0.0;  // e = E_a[v(i+1, .)]
  double z = 0.0;            // E_a[v(i+1, .) dB] / (a dt)
  double target = 0.0;       // e + f(t_i, B, e, z, a) dt
};

/// `next` is layer i+1 of a value field (size 2i+3, offset j+i+1).
ConditionalStep conditional_step(const Lattice& lat, const Generator& gen, std::span<const double> next, int i, int j,
                                 std::size_t k);

/// Throws GuardViolation unless L_y * dt < 1.
void check_step_guard(const Lattice& lat, const Generator& gen);

/**
 * True when the explicit step is monotone in the next-layer values, which is
 * what the comparison property (and domination by the 2RBSDE) rests on:
 * L_z * sqrt(a_max / a) * dx / sqrt(a_max) <= 1 - L_y * dt for every level.
 */
bool monotone_scheme(const Lattice& lat, const Generator& gen);

/**
 * Fixed-policy solution. dk_minus is the push up at L, dk_plus the push down at
 * S and dk = dk_minus - dk_plus the net predictable increment applied at (i, j)
 * over [t_i, t_{i+1}]. Increment fields are zero on the terminal layer.
 */
struct RbsdeSolution {
  NodeField<double> y;
  NodeField<double> z;
  NodeField<double> dk;
  NodeField<double> dk_minus;
  NodeField<double> dk_plus;
};

/// Lower-reflected BSDE under `pol`. Requires no upper obstacle.
RbsdeSolution solve_rbsde(const Lattice& lat, const Policy& pol, const Generator& gen, const ObstacleSpec& obs);

/// Doubly-reflected BSDE under `pol`: y = median(L, target, S).
RbsdeSolution solve_drbsde_fixed(const Lattice& lat, const Policy& pol, const Generator& gen,
                                 const ObstacleSpec& obs);

/// Generator-free optimal stopping value u = max(L, E_a[u']) with u(N) = xi.
NodeField<double> snell_envelope(const Lattice& lat, const Policy& pol, const ObstacleSpec& obs);

}  // namespace rbsde_lab
