#include "rbsde_lab/obstacle_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace rbsde_lab {

namespace {

enum Seeking : int { kSeekLow = 0, kSeekHigh = 1 };

double require(const Barrier& lower, int i, int j) {
  auto v = lower.at(i, j);
  if (!v) throw std::invalid_argument("oscillation analysis needs a finite lower obstacle on every node");
  return *v;
}

/// Applies the crossing rule at a node; returns true on a hit and flips `state`.
bool step_state(const CrossingPartition& part, int i, int j, int& state) {
  if (i >= part.steps) return false;
  if (state == kSeekLow && part.low_hit(i, j)) {
    state = kSeekHigh;
    return true;
  }
  if (state == kSeekHigh && part.high_hit(i, j)) {
    state = kSeekLow;
    return true;
  }
  return false;
}

/// Transition matrix from layer `from` to layer `to`: row j + from, column j' + to.
std::vector<double> layer_kernel(const Lattice& lat, const Policy& pol, int from, int to) {
  const std::size_t rows = static_cast<std::size_t>(2 * from + 1);
  const std::size_t cols = static_cast<std::size_t>(2 * to + 1);
  std::vector<double> out(rows * cols, 0.0);
  for (int j0 = -from; j0 <= from; ++j0) {
    std::vector<double> cur(static_cast<std::size_t>(2 * from + 1), 0.0);
    cur[static_cast<std::size_t>(j0 + from)] = 1.0;
    for (int i = from; i < to; ++i) {
      std::vector<double> nxt(static_cast<std::size_t>(2 * i + 3), 0.0);
      for (int j = -i; j <= i; ++j) {
        const double m = cur[static_cast<std::size_t>(j + i)];
        if (m == 0.0) continue;
        const Transition& p = lat.transition(pol(i, j));
        nxt[static_cast<std::size_t>(j + 1 + i + 1)] += m * p.up;
        nxt[static_cast<std::size_t>(j + i + 1)] += m * p.mid;
        nxt[static_cast<std::size_t>(j - 1 + i + 1)] += m * p.down;
      }
      cur = std::move(nxt);
    }
    std::copy(cur.begin(), cur.end(), out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j0 + from) * cols));
  }
  return out;
}

void check_grid(const Lattice& lat, std::span<const int> grid) {
  if (grid.size() < 2 || grid.front() != 0 || grid.back() != lat.steps())
    throw std::invalid_argument("partition must run from layer 0 to layer N");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (grid[k] <= grid[k - 1]) throw std::invalid_argument("partition layers must be strictly increasing");
}

}  // namespace

CrossingPartition crossing_partition(const Lattice& lat, const NodeField<double>& value, const Barrier& lower,
                                     double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("crossing threshold must be positive");
  const int n = lat.steps();
  CrossingPartition part;
  part.epsilon = epsilon;
  part.steps = n;
  part.low_hit = NodeField<unsigned char>(n, 0);
  part.high_hit = NodeField<unsigned char>(n, 0);
  for (int i = 0; i <= n; ++i)
    for (int j = -i; j <= i; ++j) {
      if (auto l = lower.at(i, j)) {
        const double gap = value(i, j) - *l;
        part.low_hit(i, j) = gap <= epsilon;
        part.high_hit(i, j) = gap >= 2.0 * epsilon;
      } else {
        part.high_hit(i, j) = 1;
      }
    }

  // Structural sweep over (node, state): min and max hit counts over all paths.
  constexpr int kUnreached = -1;
  NodeField<int> lo0(n, kUnreached), hi0(n, kUnreached), lo1(n, kUnreached), hi1(n, kUnreached);
  auto relax = [&](int i, int j, int state, int cmin, int cmax) {
    auto& lo = state == kSeekLow ? lo0 : lo1;
    auto& hi = state == kSeekLow ? hi0 : hi1;
    if (lo(i, j) == kUnreached || cmin < lo(i, j)) lo(i, j) = cmin;
    if (hi(i, j) == kUnreached || cmax > hi(i, j)) hi(i, j) = cmax;
  };
  relax(0, 0, kSeekLow, 0, 0);
  for (int i = 0; i < n; ++i)
    for (int j = -i; j <= i; ++j)
      for (int state : {kSeekLow, kSeekHigh}) {
        const auto& lo = state == kSeekLow ? lo0 : lo1;
        const auto& hi = state == kSeekLow ? hi0 : hi1;
        if (lo(i, j) == kUnreached) continue;
        int next_state = state;
        const int add = step_state(part, i, j, next_state) ? 1 : 0;
        for (int move : {1, 0, -1}) relax(i + 1, j + move, next_state, lo(i, j) + add, hi(i, j) + add);
      }
  part.min_crossings = std::numeric_limits<int>::max();
  part.max_crossings = 0;
  for (int j = -n; j <= n; ++j)
    for (int state : {kSeekLow, kSeekHigh}) {
      const auto& lo = state == kSeekLow ? lo0 : lo1;
      const auto& hi = state == kSeekLow ? hi0 : hi1;
      if (lo(n, j) == kUnreached) continue;
      part.min_crossings = std::min(part.min_crossings, lo(n, j));
      part.max_crossings = std::max(part.max_crossings, hi(n, j));
    }
  return part;
}

CrossingPartition crossing_partition(const Lattice& lat, const SecondOrderSolution& sol, const ObstacleSpec& obs,
                                     double epsilon) {
  return crossing_partition(lat, sol.Y, obs.lower, epsilon);
}

std::vector<int> crossing_layers(const CrossingPartition& part, std::span<const int> path) {
  if (path.size() != static_cast<std::size_t>(part.steps + 1)) throw std::invalid_argument("path length must be N + 1");
  std::vector<int> hits;
  int state = kSeekLow;
  for (int i = 0; i < part.steps; ++i)
    if (step_state(part, i, path[static_cast<std::size_t>(i)], state)) hits.push_back(i);
  return hits;
}

std::vector<double> crossing_count_distribution(const Lattice& lat, const CrossingPartition& part, const Policy& pol) {
  check_policy(lat, pol);
  const int n = lat.steps();
  const std::size_t counts = static_cast<std::size_t>(n + 1);
  auto slot = [&](int i, int j, int state, int c) {
    return (static_cast<std::size_t>(j + i) * 2 + static_cast<std::size_t>(state)) * counts + static_cast<std::size_t>(c);
  };
  std::vector<double> cur(2 * counts, 0.0);
  cur[slot(0, 0, kSeekLow, 0)] = 1.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> nxt(static_cast<std::size_t>(2 * i + 3) * 2 * counts, 0.0);
    for (int j = -i; j <= i; ++j) {
      const Transition& p = lat.transition(pol(i, j));
      for (int state : {kSeekLow, kSeekHigh})
        for (int c = 0; c <= i; ++c) {
          const double m = cur[slot(i, j, state, c)];
          if (m == 0.0) continue;
          int next_state = state;
          const int nc = c + (step_state(part, i, j, next_state) ? 1 : 0);
          nxt[slot(i + 1, j + 1, next_state, nc)] += m * p.up;
          nxt[slot(i + 1, j, next_state, nc)] += m * p.mid;
          nxt[slot(i + 1, j - 1, next_state, nc)] += m * p.down;
        }
    }
    cur = std::move(nxt);
  }
  std::vector<double> dist(counts, 0.0);
  for (int j = -n; j <= n; ++j)
    for (int state : {kSeekLow, kSeekHigh})
      for (int c = 0; c <= n; ++c) dist[static_cast<std::size_t>(c)] += cur[slot(n, j, state, c)];
  return dist;
}

std::vector<int> uniform_grid(const Lattice& lat, int intervals) {
  if (intervals < 1 || intervals > lat.steps())
    throw std::invalid_argument("uniform grid needs 1 <= intervals <= N");
  std::vector<int> grid(static_cast<std::size_t>(intervals + 1));
  for (int k = 0; k <= intervals; ++k)
    grid[static_cast<std::size_t>(k)] =
        static_cast<int>((static_cast<long long>(k) * lat.steps()) / intervals);
  return grid;
}

std::vector<double> jump_probabilities(const Lattice& lat, const Barrier& lower, const Policy& pol,
                                       std::span<const int> grid, double epsilon) {
  check_grid(lat, grid);
  const NodeField<double> mass = forward_mass(lat, pol);
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const int s = grid[k];
    const int e = grid[k + 1];
    const auto kern = layer_kernel(lat, pol, s, e);
    const std::size_t cols = static_cast<std::size_t>(2 * e + 1);
    double prob = 0.0;
    for (int j = -s; j <= s; ++j) {
      if (mass(s, j) == 0.0) continue;
      const double from = require(lower, s, j);
      for (int jj = -e; jj <= e; ++jj) {
        const double q = kern[static_cast<std::size_t>(j + s) * cols + static_cast<std::size_t>(jj + e)];
        if (q != 0.0 && std::abs(require(lower, e, jj) - from) >= epsilon) prob += mass(s, j) * q;
      }
    }
    out.push_back(prob);
  }
  return out;
}

double oscillation_probability(const Lattice& lat, const Barrier& lower, const Policy& pol, std::span<const int> grid,
                               double epsilon, int m) {
  check_grid(lat, grid);
  check_policy(lat, pol);
  const int n = static_cast<int>(grid.size()) - 1;
  if (m >= n) throw std::invalid_argument("oscillation probability needs m < n");
  const int cap = n - m;
  const std::size_t width = static_cast<std::size_t>(cap + 1);
  std::vector<double> cur(width, 0.0);  // layer 0: one node
  cur[0] = 1.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const int s = grid[k];
    const int e = grid[k + 1];
    const auto kern = layer_kernel(lat, pol, s, e);
    const std::size_t cols = static_cast<std::size_t>(2 * e + 1);
    std::vector<double> nxt(cols * width, 0.0);
    for (int j = -s; j <= s; ++j)
      for (int c = 0; c <= cap; ++c) {
        const double w = cur[static_cast<std::size_t>(j + s) * width + static_cast<std::size_t>(c)];
        if (w == 0.0) continue;
        const double from = require(lower, s, j);
        for (int jj = -e; jj <= e; ++jj) {
          const double q = kern[static_cast<std::size_t>(j + s) * cols + static_cast<std::size_t>(jj + e)];
          if (q == 0.0) continue;
          const int nc = std::min(cap, c + (std::abs(require(lower, e, jj) - from) >= epsilon ? 1 : 0));
          nxt[static_cast<std::size_t>(jj + e) * width + static_cast<std::size_t>(nc)] += w * q;
        }
      }
    cur = std::move(nxt);
  }
  double prob = 0.0;
  const int last = grid.back();
  for (int j = -last; j <= last; ++j) prob += cur[static_cast<std::size_t>(j + last) * width + static_cast<std::size_t>(cap)];
  return prob;
}

double p_variation(const Lattice& lat, const Barrier& lower, const Policy& pol, std::span<const int> grid, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("p-variation needs p >= 1");
  check_grid(lat, grid);
  const NodeField<double> mass = forward_mass(lat, pol);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const int s = grid[k];
    const int e = grid[k + 1];
    const auto kern = layer_kernel(lat, pol, s, e);
    const std::size_t cols = static_cast<std::size_t>(2 * e + 1);
    for (int j = -s; j <= s; ++j) {
      if (mass(s, j) == 0.0) continue;
      const double from = require(lower, s, j);
      for (int jj = -e; jj <= e; ++jj) {
        const double q = kern[static_cast<std::size_t>(j + s) * cols + static_cast<std::size_t>(jj + e)];
        if (q != 0.0) total += mass(s, j) * q * std::pow(std::abs(require(lower, e, jj) - from), p);
      }
    }
  }
  return total;
}

CrossingOscillation crossing_oscillation(const Lattice& lat, const Barrier& lower, const Policy& pol,
                                         const CrossingPartition& part, int intervals, double epsilon, int m,
                                         double p, std::size_t paths, std::uint64_t seed) {
  check_policy(lat, pol);
  if (intervals < 1 || m >= intervals) throw std::invalid_argument("crossing oscillation needs 0 <= m < n");
  if (paths < 2) throw std::invalid_argument("crossing oscillation needs at least two paths");
  const int n = lat.steps();
  std::mt19937_64 rng(seed);
  std::vector<int> path(static_cast<std::size_t>(n + 1));
  double s1 = 0.0, s2 = 0.0, v1 = 0.0, v2 = 0.0;
  for (std::size_t s = 0; s < paths; ++s) {
    path[0] = 0;
    for (int i = 0; i < n; ++i) {
      const int j = path[static_cast<std::size_t>(i)];
      const Transition& pr = lat.transition(pol(i, j));
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const int move = u < pr.up ? 1 : (u < pr.up + pr.mid ? 0 : -1);
      path[static_cast<std::size_t>(i + 1)] = j + move;
    }
    std::vector<int> taus{0};
    for (int h : crossing_layers(part, path)) taus.push_back(h);
    taus.resize(static_cast<std::size_t>(intervals + 1), n);
    int jumps = 0;
    double var = 0.0;
    for (int k = 0; k < intervals; ++k) {
      const int a = taus[static_cast<std::size_t>(k)];
      const int b = taus[static_cast<std::size_t>(k + 1)];
      const double d = std::abs(require(lower, b, path[static_cast<std::size_t>(b)]) -
                                require(lower, a, path[static_cast<std::size_t>(a)]));
      if (d >= epsilon) ++jumps;
      var += std::pow(d, p);
    }
    const double ind = jumps >= intervals - m ? 1.0 : 0.0;
    s1 += ind;
    s2 += ind * ind;
    v1 += var;
    v2 += var * var;
  }
  auto finish = [paths](double a, double b) {
    SampledEstimate e;
    e.paths = paths;
    e.mean = a / static_cast<double>(paths);
    const double var = std::max(0.0, b / static_cast<double>(paths) - e.mean * e.mean);
    e.std_error = std::sqrt(var / static_cast<double>(paths - 1));
    return e;
  };
  return {finish(s1, s2), finish(v1, v2)};
}

VariationBound p_variation_bound(const Lattice& lat, const ObstacleSpec& obs, const std::vector<Policy>& policies,
                                 double p, double epsilon, int intervals, int m) {
  if (policies.empty()) throw std::invalid_argument("p_variation_bound needs at least one policy");
  if (m >= intervals) throw std::invalid_argument("p_variation_bound needs m < n");
  VariationBound vb;
  for (const auto& pol : policies)
    for (int k = 1; k <= lat.steps(); ++k)
      vb.ell = std::max(vb.ell, p_variation(lat, obs.lower, pol, uniform_grid(lat, k), p));
  vb.markov_bound = vb.ell / (std::pow(epsilon, p) * (intervals - m));
  return vb;
}

OscillationReport oscillation_report(const Lattice& lat, const ObstacleSpec& obs, const std::vector<Policy>& policies,
                                     int intervals, double epsilon, int m, double p) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("oscillation threshold must be positive");
  OscillationReport rep;
  rep.epsilon = epsilon;
  rep.m = m;
  rep.n = intervals;
  rep.p = p;
  rep.policy_count = policies.size();
  const auto grid = uniform_grid(lat, intervals);
  const VariationBound vb = p_variation_bound(lat, obs, policies, p, epsilon, intervals, m);
  rep.ell = vb.ell;
  rep.markov_bound = vb.markov_bound;
  rep.markov_dominates = true;
  rep.union_dominates = true;
  for (const auto& pol : policies) {
    const double prob = oscillation_probability(lat, obs.lower, pol, grid, epsilon, m);
    const auto jumps = jump_probabilities(lat, obs.lower, pol, grid, epsilon);
    double ub = 0.0;
    for (std::size_t k = jumps.size() - std::min<std::size_t>(jumps.size(), static_cast<std::size_t>(m + 1));
         k < jumps.size(); ++k)
      ub += jumps[k];
    rep.probability.push_back(prob);
    rep.union_bound.push_back(ub);
    rep.sup_probability = std::max(rep.sup_probability, prob);
    // Relative slack only absorbs rounding in the two exact sums.
    if (prob > rep.markov_bound * (1.0 + 1e-12) + 1e-15) rep.markov_dominates = false;
    if (prob > ub * (1.0 + 1e-12) + 1e-15) rep.union_dominates = false;
  }
  return rep;
}

}  // namespace rbsde_lab
