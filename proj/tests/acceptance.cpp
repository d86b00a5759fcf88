// Acceptance suite: one criterion per invocation, selected by argv[1]
// (1..10). Prints a single [PASS]/[FAIL] line and exits 0/1.

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "fixtures.hpp"
#include "sdnes/config.hpp"
#include "sdnes/deception.hpp"
#include "sdnes/dynamics.hpp"
#include "sdnes/experiment.hpp"
#include "sdnes/game.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kExamples = SDNES_EXAMPLES_DIR;
const std::string kCli = SDNES_CLI_PATH;

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome criterion_1() {
  auto game = fixtures::example_game();
  const auto pg = sdnes::pseudogradient(game);
  const Eigen::VectorXd ne = sdnes::nash_equilibrium(pg);
  Eigen::VectorXd expect(2);
  expect << -1.0, -1.0;
  const double residual = (pg.A * ne + pg.B).cwiseAbs().maxCoeff();
  const double dev = (ne - expect).cwiseAbs().maxCoeff();
  const double c1 = game.cost(0, ne), c2 = game.cost(1, ne);
  std::ostringstream d;
  d << "ne dev " << dev << ", residual " << residual << ", costs (" << c1
    << ", " << c2 << ")";
  const bool ok = dev <= 1e-12 && residual <= 1e-12 &&
                  std::abs(c1 - (-1.0)) <= 1e-12 &&
                  std::abs(c2 - 0.5) <= 1e-12;
  return {ok, d.str()};
}

Outcome criterion_2() {
  auto game = fixtures::example_game();
  auto ds = fixtures::example_deception();
  const double r = sdnes::stability_radius(game, ds);
  std::ostringstream d;
  d << "r = " << r;
  return {std::abs(r - 1.0 / 3.0) <= 1e-12, d.str()};
}

Outcome criterion_3() {
  auto game = fixtures::example_game();
  auto ds = fixtures::example_deception();
  const auto att = sdnes::solve_attainability(game, ds);
  const double eps2 = 0.001;
  const double j2 = game.cost(1, att.x_delta);
  std::ostringstream d;
  d << "delta* = " << att.delta_star(0) << ", x = (" << att.x_delta(0) << ", "
    << att.x_delta(1) << "), J2 = " << j2
    << ", lambda = " << att.lambda(0, 0) / eps2 << " eps2, hurwitz "
    << att.lambda_hurwitz;
  const bool ok = std::abs(att.delta_star(0) - 0.1989) <= 5e-4 &&
                  std::abs(att.x_delta(0) - (-0.6385)) <= 1e-3 &&
                  std::abs(att.x_delta(1) - (-1.1808)) <= 1e-3 &&
                  std::abs(j2 - (-2.0)) <= 2e-3 &&
                  std::abs(att.lambda(0, 0) - (-12.0 * eps2)) <= 0.1 * eps2 &&
                  att.lambda_hurwitz;
  return {ok, d.str()};
}

Outcome criterion_4() {
  std::mt19937_64 rng(0xACCE9741u);
  std::uniform_int_distribution<int> nsize(2, 5);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long total = 0, hurwitz_ok = 0;
  for (int g = 0; g < 1000; ++g) {
    const int n = nsize(rng);
    auto game = fixtures::random_assumption1_game(rng, n);
    auto ds = fixtures::random_deception(rng, n);
    const double r = sdnes::stability_radius(game, ds);
    const double r_eff = std::min(r, 10.0) * (1.0 - 1e-9);
    const int nd = ds.num_deceivers();
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd d(nd);
      for (int j = 0; j < nd; ++j) d(j) = gauss(rng);
      d *= r_eff * std::pow(unif(rng), 1.0 / nd) / std::max(d.norm(), 1e-300);
      ++total;
      if (sdnes::in_stability_set(game, ds, d)) ++hurwitz_ok;
    }
  }
  std::ostringstream det;
  det << hurwitz_ok << "/" << total << " stable inside B_r(0)";
  return {hurwitz_ok == total, det.str()};
}

Outcome criterion_5() {
  const auto sine = sdnes::DitherFunction::sine();
  double worst = 0.0;
  for (double q : {0.01, 0.07, 0.1, 0.5, 1.0, 2.0}) {
    const double expect = 0.5 * (1.0 - std::exp(-q * q));
    worst = std::max(worst,
                     std::abs(sdnes::gamma_constant(sine, q) - expect));
  }
  const auto sat = sdnes::DitherFunction::saturation();
  double sat_gap = 0.0;
  bool sat_ok = true;
  try {
    const double g64 = sdnes::detail::gamma_gauss_hermite(sat, 0.1, 64);
    const double g128 = sdnes::detail::gamma_gauss_hermite(sat, 0.1, 128);
    sat_gap = std::abs(g128 - g64);
    sdnes::gamma_constant(sat, 0.1);
  } catch (const sdnes::Error&) {
    sat_ok = false;
  }
  std::ostringstream d;
  d << "sine worst closed-form gap " << worst << ", sat doubling gap "
    << sat_gap;
  return {worst <= 1e-10 && sat_ok && sat_gap <= 1e-9, d.str()};
}

Outcome criterion_6() {
  std::mt19937_64 rng(0xACCE9746u);
  std::uniform_int_distribution<int> nsize(2, 3);
  std::uniform_int_distribution<int> pick_i(0, 100);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  const int n_samp = 10'000'000;
  int ok = 0;
  double worst_z = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = nsize(rng);
    auto game = fixtures::random_assumption1_game(rng, n);
    auto ds = fixtures::random_deception(rng, n);
    Eigen::VectorXd delta(ds.num_deceivers());
    for (int j = 0; j < ds.num_deceivers(); ++j) delta(j) = unif(rng);
    const int i = pick_i(rng) % n;
    const Eigen::VectorXd a = game.amplitudes();
    const Eigen::VectorXd g = game.gamma_vector();
    const Eigen::VectorXd q = game.noise_scales();
    const double closed = sdnes::p_term(game, &ds, i, a, delta, g);

    const Eigen::MatrixXd& Ai = game.cost_params(i).A;
    double acc = 0.0, acc2 = 0.0;
    Eigen::VectorXd z(n), raw(n), e(n);
    for (int s = 0; s < n_samp; ++s) {
      for (int p = 0; p < n; ++p) {
        z(p) = q(p) / std::sqrt(2.0) * gauss(rng);
        raw(p) = a(p) * std::sin(z(p));
      }
      e = raw;
      // injected copies use the target's raw dither, even when the target
      // is itself a deceiver
      for (int sl = 0; sl < ds.num_deceivers(); ++sl) {
        const auto& dec = ds.deceiver(sl);
        double inj = 0.0;
        for (int t : dec.targets) inj += raw(t);
        e(dec.player) += delta(sl) * inj;
      }
      const double v = 0.5 * e.dot(Ai * e);
      acc += v;
      acc2 += v * v;
    }
    const double mean = acc / n_samp;
    const double se =
        std::sqrt(std::max(0.0, acc2 / n_samp - mean * mean) / n_samp);
    const double zscore = se > 0.0 ? std::abs(closed - mean) / se : 0.0;
    worst_z = std::max(worst_z, zscore);
    if (zscore < 3.0) ++ok;
  }
  std::ostringstream d;
  d << ok << "/50 within 3 standard errors, worst z = " << worst_z;
  return {ok == 50, d.str()};
}

Outcome criterion_7() {
  const auto sc = sdnes::parse_scenario_file(kExamples / "sec5.json");
  const int n = sc.game.num_players();
  const auto traj = sdnes::integrate_averaged(
      sc.game, sc.ds(), Eigen::VectorXd::Zero(n),
      Eigen::VectorXd::Zero(sc.ds()->num_deceivers()), 0.01,
      sc.dynamics.horizon, 100);
  if (traj.blowup_time) return {false, "averaged system diverged"};
  const double dT = traj.delta.back()(0);
  const double j2 = traj.cost.back()(1);
  double a_max = 0.0;
  for (int i = 0; i < n; ++i)
    a_max = std::max(a_max, sc.game.tuning(i).a);
  const double a2_norm = sc.game.cost_params(1).A.operatorNorm();
  const double j_tol = std::max(5e-3, 2.0 * a_max * a_max * a2_norm);
  std::ostringstream d;
  d << "delta(T) = " << dT << ", J2(u(T)) = " << j2 << ", J tol " << j_tol;
  return {std::abs(dT - 0.1989) <= 5e-3 && std::abs(j2 + 2.0) <= j_tol,
          d.str()};
}

Outcome criterion_8() {
  const auto sc = sdnes::parse_scenario_file(kExamples / "sec5.json");
  const sdnes::BatchParams bp{sc.dynamics.dt, sc.dynamics.horizon,
                              sc.dynamics.stride};
  const auto rep =
      sdnes::run_batch(sc.game, sc.ds(), sc.ou, bp, *sc.experiment);
  int blowups = 0;
  for (const auto& t : rep.trials) blowups += t.blowup ? 1 : 0;
  std::ostringstream d;
  d << "success " << rep.success_fraction << " (need >= "
    << sc.experiment->min_success.value_or(0.8) << "), " << blowups << "/"
    << rep.trials.size() << " trials diverged";
  return {rep.success_fraction >= sc.experiment->min_success.value_or(0.8),
          d.str()};
}

Outcome criterion_9() {
  const auto sc = sdnes::parse_scenario_file(kExamples / "sec5_sweep.json");
  const int n = sc.game.num_players();
  const auto averaged = sdnes::integrate_averaged(
      sc.game, sc.ds(), Eigen::VectorXd::Zero(n),
      Eigen::VectorXd::Zero(sc.ds()->num_deceivers()), 0.01,
      sc.dynamics.horizon, 10);
  const sdnes::BatchParams bp{sc.dynamics.dt, sc.dynamics.horizon,
                              sc.dynamics.stride};
  const auto rows = sdnes::theta_sweep(sc.game, sc.ds(), sc.ou, bp,
                                       *sc.experiment, averaged);
  std::ostringstream d;
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].mean_dev > rows[i - 1].mean_dev) monotone = false;
    d << "theta " << rows[i].theta << ": mean dev " << rows[i].mean_dev
      << (i + 1 < rows.size() ? "; " : "");
  }
  const bool small_tail = rows.back().mean_dev < 0.15;
  return {monotone && small_tail, d.str()};
}

int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_10() {
  const fs::path dir = fs::temp_directory_path() / "sdnes_acceptance";
  fs::create_directories(dir);
  bool ok = true;
  std::ostringstream d;
  const std::string nominal = (kExamples / "nominal.json").string();
  const std::string sweep = (kExamples / "sec5_sweep.json").string();

  const auto check_repeat = [&](const std::string& label,
                                const std::string& args,
                                const std::string& out_name) {
    const fs::path a = dir / (out_name + "_a");
    const fs::path b = dir / (out_name + "_b");
    const int ra = run_cmd(kCli + " " + args + " --out " + a.string() +
                           " > /dev/null 2>&1");
    const int rb = run_cmd(kCli + " " + args + " --out " + b.string() +
                           " > /dev/null 2>&1");
    const bool same = ra == rb && slurp(a) == slurp(b) && !slurp(a).empty();
    if (!same) ok = false;
    d << label << (same ? " identical; " : " DIFFERS; ");
  };
  check_repeat("simulate", "simulate --config " + nominal + " --seed 7",
               "sim.csv");
  check_repeat("average", "average --config " + nominal, "avg.csv");
  check_repeat("montecarlo", "montecarlo --config " + nominal, "mc.json");
  check_repeat("analyze", "analyze --config " + nominal, "an.json");
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1..10>\n";
    return 2;
  }
  const int c = std::atoi(argv[1]);
  Outcome o{false, "unknown criterion"};
  try {
    switch (c) {
      case 1: o = criterion_1(); break;
      case 2: o = criterion_2(); break;
      case 3: o = criterion_3(); break;
      case 4: o = criterion_4(); break;
      case 5: o = criterion_5(); break;
      case 6: o = criterion_6(); break;
      case 7: o = criterion_7(); break;
      case 8: o = criterion_8(); break;
      case 9: o = criterion_9(); break;
      case 10: o = criterion_10(); break;
      default:
        std::cerr << "criterion must be 1..10\n";
        return 2;
    }
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << c << ": "
            << o.detail << "\n";
  return o.pass ? 0 : 1;
}
