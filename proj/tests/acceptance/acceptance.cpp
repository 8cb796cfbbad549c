// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <path-to-rbsde_lab-cli> <configs-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rbsde_lab/experiment.hpp"
#include "rbsde_lab/finance.hpp"
#include "rbsde_lab/minimality.hpp"
#include "rbsde_lab/obstacle_analysis.hpp"
#include "rbsde_lab/second_order.hpp"

using namespace rbsde_lab;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %d [PRIMARY] %-28s %s  %s\n", id, name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_node_diff(const NodeField<double>& a, const NodeField<double>& b, int last) {
  double m = 0.0;
  for (int i = 0; i <= last; ++i)
    for (int j = -i; j <= i; ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

// Shared instance sets.
std::vector<oracle::Instance> small_instances() {
  std::mt19937_64 rng(20240601);
  std::vector<oracle::Instance> out;
  for (int q = 0; q < 30; ++q) out.push_back(oracle::random_instance(rng, 1 + q % 3, 2));
  return out;
}

std::vector<oracle::Instance> medium_instances() {
  std::mt19937_64 rng(777);
  std::vector<oracle::Instance> out;
  for (int q = 0; q < 12; ++q) out.push_back(oracle::random_instance(rng, 8 + 4 * q, 2 + q % 3));
  return out;
}

oracle::Instance zhang_instance(int steps) {
  Lattice lat(2.0, steps, ControlSet({0.25, 1.0}));
  ObstacleSpec obs = zhang_obstacle(lat, [](double b) { return std::abs(b); });
  return {std::move(lat), generator_zero(), std::move(obs), "zhang"};
}

void criterion1() {
  Timer t;
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  int count = 0;
  for (int q = 0; q < 24; ++q) {
    const int n = 2 + (q * 7) % 63;  // 2..64
    auto inst = oracle::random_instance(rng, n, 1);
    const auto sol = solve_2rbsde(inst.lat, inst.gen, inst.obs);
    const Policy pol(inst.lat, 0);
    const auto fixed = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
    worst = std::max(worst, max_node_diff(sol.Y, fixed.y, n));
    worst = std::max(worst, max_node_diff(extract_K(inst.lat, sol, pol), fixed.dk, n - 1));
    ++count;
  }
  const double s = t.seconds();
  report(1, "singleton-reduction", worst <= 1e-12 && s < 10.0,
         "max |Y-y|,|K-k| = " + fmt(worst) + " over " + std::to_string(count) + " instances (N<=64), tol 1e-12; " +
             fmt(s) + " s < 10 s");
}

void criterion2() {
  Timer t;
  double worst_gap = 0.0, worst_dom = 0.0;
  std::size_t pols = 0;
  int spread = 0;  // instances where the choice of policy changes y0
  for (const auto& inst : small_instances()) {
    const auto sol = solve_2rbsde(inst.lat, inst.gen, inst.obs);
    const auto all = enumerate_policies(inst.lat);
    pols += all.size();
    double best = -INFINITY, least = INFINITY;
    for (const auto& p : all) {
      const auto y = oracle::reflected(inst.lat, inst.gen, inst.obs, p);
      best = std::max(best, y[0][0]);
      least = std::min(least, y[0][0]);
      for (int i = 0; i <= inst.lat.steps(); ++i)
        for (int j = -i; j <= i; ++j) worst_dom = std::max(worst_dom, y[i][j + i] - sol.Y(i, j));
    }
    worst_gap = std::max(worst_gap, std::abs(best - sol.Y(0, 0)));
    spread += best - least > 1e-6;
  }
  const double s = t.seconds();
  report(2, "representation-brute-force", worst_gap <= 1e-12 && worst_dom <= 1e-12 && s < 5.0,
         "|max_P y0^P - Y0| = " + fmt(worst_gap) + ", max(y^P - Y) = " + fmt(worst_dom) + " over " +
             std::to_string(pols) + " policies on 30 instances (N<=3,|A|=2; " + std::to_string(spread) +
             " with policy-dependent y0), tol 1e-12; " + fmt(s) + " s < 5 s");
}

void criterion3() {
  double worst = 0.0;
  std::size_t tested = 0;
  auto check = [&](const oracle::Instance& inst, const std::vector<Policy>& pols) {
    const auto sol = solve_2rbsde(inst.lat, inst.gen, inst.obs);
    const auto r = minimality_report(inst.lat, inst.gen, inst.obs, sol, pols, 1e-10, 4);
    tested += pols.size();
    worst = std::max(worst, r.max_identity_defect);
  };
  for (const auto& inst : small_instances()) check(inst, enumerate_policies(inst.lat));
  int q = 0;
  for (const auto& inst : medium_instances()) {
    auto pols = sample_policies(inst.lat, 40, 300 + q++);
    pols.push_back(solve_2rbsde(inst.lat, inst.gen, inst.obs).optimal_policy);
    check(inst, pols);
  }
  for (int n : {8, 32}) {
    const auto z = zhang_instance(n);
    check(z, sample_policies(z.lat, 40, 5));
  }
  report(3, "linearization-identity", worst <= 1e-10,
         "max |E[sum M d(K-k)] - (Y0-y0^P)| = " + fmt(worst) + " over " + std::to_string(tested) +
             " policy/instance pairs, tol 1e-10");
}

void criterion4() {
  double worst_weighted = 0.0, worst_sk = 0.0;
  int instances = 0;
  auto at_optimum = [&](const oracle::Instance& inst) {
    const auto sol = solve_2rbsde(inst.lat, inst.gen, inst.obs);
    const auto r = minimality_residual(inst.lat, inst.gen, inst.obs, sol, sol.optimal_policy);
    worst_weighted = std::max(worst_weighted, std::abs(r.residual));
    worst_sk = std::max(worst_sk, skorokhod_residual(inst.lat, inst.obs, sol, sol.optimal_policy));
    ++instances;
  };
  for (const auto& inst : small_instances()) at_optimum(inst);
  for (const auto& inst : medium_instances()) at_optimum(inst);
  const auto z = zhang_instance(8);
  at_optimum(z);
  at_optimum(zhang_instance(32));

  const auto sol = solve_2rbsde(z.lat, z.gen, z.obs);
  double sub_sk = 0.0, sub_root = 0.0;
  for (const auto& p : sample_policies(z.lat, 64, 4)) {
    sub_sk = std::max(sub_sk, skorokhod_residual(z.lat, z.obs, sol, p));
    sub_root = std::max(sub_root, std::abs(minimality_residual(z.lat, z.gen, z.obs, sol, p).residual));
  }
  const auto zr = zhang_counterexample(8, z.lat.controls());
  const Policy witness(z.lat, static_cast<std::uint32_t>(zr.witness_control));
  const double cond = conditional_minimality_residual(z.lat, z.gen, z.obs, sol, witness, zr.witness_node).residual;
  const bool pass = worst_weighted <= 1e-10 && worst_sk <= 1e-10 && sub_sk > 1e-3;
  report(4, "minimality-attained", pass,
         "at P*: max weighted " + fmt(worst_weighted) + ", max Skorokhod " + fmt(worst_sk) + " on " +
             std::to_string(instances) + " instances (tol 1e-10); Zhang sampled suboptimal Skorokhod residual " +
             fmt(sub_sk) + " > 1e-3 [root weighted residual " + fmt(sub_root) +
             ", identically 0 since Y0 = y0^P; time-1 conditional weighted residual " + fmt(cond) + "]");
}

void criterion5() {
  Timer t;
  const ControlSet a({0.25, 1.0});
  const auto z8 = zhang_counterexample(8, a);
  const auto z32 = zhang_counterexample(32, a);
  const double s = t.seconds();
  const bool pass = std::abs(z8.y0 - 2.0) <= 0.5 && std::abs(z32.y0 - 2.0) <= 0.13 && z8.witness_gap > 1e-6 &&
                    z8.witness_node.layer == 4 && !z8.violations.empty() && s < 5.0;
  report(5, "zhang-counterexample", pass,
         "Y0(N=8) = " + fmt(z8.y0) + " (tol 0.5), Y0(N=32) = " + fmt(z32.y0) + " (tol 0.13), gap " +
             fmt(z8.witness_gap) + " > 1e-6 at (" + std::to_string(z8.witness_node.layer) + "," +
             std::to_string(z8.witness_node.offset) + ") under constant control " +
             std::to_string(z8.witness_control) + ", " + std::to_string(z8.violations.size()) +
             " monotonicity violations; " + fmt(s) + " s < 5 s");
}

void criterion6() {
  Timer t;
  const LatticeParams lp{1.0, 64, 1.0};
  MarketSpec put;
  put.spot = 100.0;
  put.sigmas = {0.25};
  put.payoff = {Payoff::Kind::put, 100.0, 0.0};
  const auto pp = price_american(put, lp);
  const double snell = oracle::american_trinomial(100.0, 100.0, true, 0.25, 1.0, 64, 1.0);
  const double d_snell = std::abs(pp.price - snell);

  MarketSpec call = put;
  call.sigmas = {0.15, 0.3};
  call.payoff = {Payoff::Kind::call, 100.0, 0.0};
  const auto pc = price_american(call, lp);
  MarketSpec call_hi = call;
  call_hi.sigmas = {0.3};
  const double d_convex = std::abs(pc.price - price_american(call_hi, lp).price);

  const auto sh_put = verify_superhedge(pp, put, 32, 7, 0.0, 1e-10, 4);
  const auto sh_call = verify_superhedge(pc, call, 32, 7, 0.0, 1e-10, 4);
  const auto probe = verify_superhedge(pp, put, 32, 7, -0.01, 1e-10, 4);
  const double margin = std::min({sh_put.min_obstacle_margin, sh_put.min_value_margin, sh_call.min_obstacle_margin,
                                  sh_call.min_value_margin});
  const double s = t.seconds();
  const bool pass = d_snell <= 1e-12 && d_convex <= 1e-10 && margin >= -1e-10 && probe.shortfall && s < 30.0;
  report(6, "american-duality", pass,
         "|P_sup - Snell oracle| = " + fmt(d_snell) + " (tol 1e-12), |interval call - sigma_hi call| = " +
             fmt(d_convex) + " (tol 1e-10), min super-hedge margin " + fmt(margin) +
             " (>= -1e-10), Y0-0.01 probe shortfall nodes " + std::to_string(probe.obstacle_shortfall_nodes) +
             "; N=64, " + fmt(s) + " s < 30 s");
}

void criterion7() {
  std::mt19937_64 rng(4242);
  double bound = 0.0, decomp = 0.0, upper = 0.0;
  int count = 0;
  for (int q = 0; q < 20; ++q) {
    auto inst = oracle::random_instance(rng, 4 + 3 * q, 2 + q % 2, true);
    const auto sol = solve_2drbsde(inst.lat, inst.gen, inst.obs);
    for (int i = 0; i <= inst.lat.steps(); ++i)
      for (int j = -i; j <= i; ++j) {
        bound = std::max(bound, *inst.obs.lower.at(i, j) - sol.Y(i, j));
        bound = std::max(bound, sol.Y(i, j) - *inst.obs.upper.at(i, j));
      }
    std::vector<Policy> pols = sample_policies(inst.lat, 10, q);
    pols.push_back(sol.optimal_policy);
    for (const auto& p : pols) {
      const auto d = decompose(inst.lat, sol, p);
      for (int i = 0; i < inst.lat.steps(); ++i)
        for (int j = -i; j <= i; ++j) decomp = std::max(decomp, std::abs(d.dV(i, j) - (d.dK(i, j) - d.dKplus(i, j))));
    }
    upper = std::max(upper, std::abs(upper_skorokhod_sum(inst.lat, inst.obs, sol, sol.optimal_policy)));
    ++count;
  }
  // S = +inf: singleton reduction through the doubly reflected solver.
  double reduce = 0.0;
  for (int q = 0; q < 20; ++q) {
    auto inst = oracle::random_instance(rng, 3 + 3 * q, 1);
    const auto sol = solve_2drbsde(inst.lat, inst.gen, inst.obs);
    const Policy pol(inst.lat, 0);
    const auto fixed = solve_rbsde(inst.lat, pol, inst.gen, inst.obs);
    reduce = std::max(reduce, max_node_diff(sol.Y, fixed.y, inst.lat.steps()));
    reduce = std::max(reduce, max_node_diff(decompose(inst.lat, sol, pol).dV, fixed.dk, inst.lat.steps() - 1));
  }
  const bool pass = bound <= 0.0 && decomp == 0.0 && upper <= 1e-12 && reduce <= 1e-12;
  report(7, "doubly-reflected-structure", pass,
         "max bound violation " + fmt(bound) + ", max |dV-(dK-dKplus)| = " + fmt(decomp) + " (exact), upper Skorokhod " +
             fmt(upper) + " (tol 1e-12) on " + std::to_string(count) + " instances; S=+inf reduction " + fmt(reduce) +
             " (tol 1e-12)");
}

void criterion8() {
  // Time-only Lipschitz obstacles: exactly zero once mesh * Lip < eps.
  bool zero_ok = true;
  int zero_cases = 0;
  const double eps = 0.1;
  for (double lip : {0.3, 0.8, 1.7}) {
    Lattice lat(1.0, 48, ControlSet({0.25, 1.0}));
    const auto obs = make_obstacle(lat, [=](double t, double) { return std::sin(lip * t) + 1.0; });
    const std::vector<Policy> pols{Policy(lat, 0), Policy(lat, 1), sample_policies(lat, 1, 3).front()};
    for (int n : {2, 3, 4, 6, 8, 12, 16, 24, 48}) {
      const double mesh = (48 + n - 1) / n * lat.dt();  // longest grid interval
      if (mesh * lip >= eps) continue;
      const auto r = oscillation_report(lat, obs, pols, n, eps, 0);
      zero_ok = zero_ok && r.sup_probability == 0.0;
      ++zero_cases;
    }
  }
  // Markov domination on assorted obstacles.
  std::mt19937_64 rng(808);
  bool markov_ok = true;
  int markov_cases = 0;
  for (int q = 0; q < 16; ++q) {
    auto inst = oracle::random_instance(rng, 8 + q, 2);
    const auto pols = sample_policies(inst.lat, 8, q);
    const int n = 2 + q % (inst.lat.steps() - 1);
    for (double p : {1.0, 2.0}) {
      const auto r = oscillation_report(inst.lat, inst.obs, pols, n, 0.02 + 0.03 * (q % 5), q % n, p);
      markov_ok = markov_ok && r.markov_dominates;
      ++markov_cases;
    }
  }
  Lattice lat(1.0, 24, ControlSet({0.25, 1.0}));
  const auto flat = make_obstacle(lat, [](double, double) { return 0.4; });
  const auto vb = p_variation_bound(lat, flat, sample_policies(lat, 8, 1), 1.0, 0.1, 12, 3);
  const bool pass = zero_ok && zero_cases > 0 && markov_ok && vb.ell == 0.0;
  report(8, "obstacle-analysis", pass,
         "zero oscillation once mesh*Lip < eps: " + std::string(zero_ok ? "yes" : "no") + " (" +
             std::to_string(zero_cases) + " grids); Markov bound dominates on " + std::to_string(markov_cases) +
             " instances: " + (markov_ok ? "yes" : "no") + "; constant obstacle ell = " + fmt(vb.ell));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion9(const std::string& cli, const fs::path& configs) {
  const fs::path work = fs::temp_directory_path() / "rbsde_lab_acceptance";
  fs::remove_all(work);
  bool same = true;
  int compared = 0;
  std::string first_diff;
  for (const char* name : {"verify_minimality", "solve_2drbsde", "price_american", "check_obstacle", "counterexample",
                           "solve_rbsde", "verify_skorokhod"}) {
    std::vector<std::string> bodies;
    std::vector<std::string> files;
    for (int run = 0; run < 3; ++run) {
      const fs::path out = work / (std::string(name) + "_" + std::to_string(run));
      const std::string cmd = "\"" + cli + "\" run --config \"" + (configs / (std::string(name) + ".json")).string() +
                              "\" --out \"" + out.string() + "\" --threads " + std::to_string(1 + 2 * run) +
                              " > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        same = false;
        first_diff = std::string(name) + " exit status " + std::to_string(rc);
        break;
      }
      bodies.push_back(report_body(Json::parse(slurp(out / "report.json"))).dump());
      std::string data;
      for (const char* f : {"fields.csv", "crossings.csv", "sweep.csv"})
        if (fs::exists(out / f)) data += slurp(out / f);
      files.push_back(data);
    }
    for (std::size_t r = 1; r < bodies.size(); ++r)
      if (bodies[r] != bodies[0] || files[r] != files[0]) {
        same = false;
        if (first_diff.empty()) first_diff = name;
      }
    ++compared;
  }
  report(9, "determinism", same,
         "report bodies and data files byte-identical over 3 CLI runs (threads 1/3/5) for " + std::to_string(compared) +
             " configs" + (first_diff.empty() ? "" : "; mismatch: " + first_diff));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <rbsde_lab-cli> <configs-dir>\n";
    return 1;
  }
  const auto run = [](auto&& fn, int id, const char* name) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("exception: ") + e.what());
    }
  };
  run(criterion1, 1, "singleton-reduction");
  run(criterion2, 2, "representation-brute-force");
  run(criterion3, 3, "linearization-identity");
  run(criterion4, 4, "minimality-attained");
  run(criterion5, 5, "zhang-counterexample");
  run(criterion6, 6, "american-duality");
  run(criterion7, 7, "doubly-reflected-structure");
  run(criterion8, 8, "obstacle-analysis");
  run([&] { criterion9(argv[1], argv[2]); }, 9, "determinism");
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
