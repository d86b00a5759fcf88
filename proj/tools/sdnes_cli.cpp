// Command-line front end: analysis, attainability, SDE simulation, averaged
// integration, and Monte Carlo batches over JSON scenario configs.
//
// Exit codes: 0 ok, 1 parse error, 2 Assumption 1 violated, 3 not
// attainable, 4 simulation blow-up, 5 declared thresholds failed.

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "sdnes/config.hpp"
#include "sdnes/csv.hpp"
#include "sdnes/deception.hpp"
#include "sdnes/dynamics.hpp"
#include "sdnes/experiment.hpp"
#include "sdnes/game.hpp"

namespace {

constexpr int kExitParse = 1;
constexpr int kExitAssumption = 2;
constexpr int kExitNotAttainable = 3;
constexpr int kExitBlowup = 4;
constexpr int kExitThresholds = 5;

sdnes::json vec_to_json(const Eigen::VectorXd& v) {
  sdnes::json arr = sdnes::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

void write_or_print(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw sdnes::Error("cannot open output file: " + out_path);
    out << text << "\n";
  }
}

int cmd_analyze(const sdnes::Scenario& sc, const std::string& out_path) {
  const auto pg = sdnes::pseudogradient(sc.game);
  const bool assumption = sdnes::check_assumption_diag_dominant(pg.A);
  sdnes::json result;
  result["assumption_diag_dominant"] = assumption;
  if (assumption) {
    const Eigen::VectorXd ne = sdnes::nash_equilibrium(pg);
    Eigen::VectorXd costs(sc.game.num_players());
    for (int i = 0; i < sc.game.num_players(); ++i)
      costs(i) = sc.game.cost(i, ne);
    result["nash_equilibrium"] = vec_to_json(ne);
    result["costs_at_ne"] = vec_to_json(costs);
    if (sc.ds() != nullptr)
      result["stability_radius"] = sdnes::stability_radius(sc.game, *sc.ds());
  }
  write_or_print(out_path, result.dump(2));
  return assumption ? 0 : kExitAssumption;
}

int cmd_attain(const sdnes::Scenario& sc, const std::string& out_path) {
  if (sc.ds() == nullptr)
    throw sdnes::ParseError("attain: config has no deceivers");
  const auto att = sdnes::solve_attainability(sc.game, *sc.ds());
  Eigen::VectorXd costs(sc.game.num_players());
  for (int i = 0; i < sc.game.num_players(); ++i)
    costs(i) = sc.game.cost(i, att.x_delta);
  Eigen::EigenSolver<Eigen::MatrixXd> es(att.lambda, false);
  sdnes::json lam_eigs = sdnes::json::array();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    lam_eigs.push_back(sdnes::json{{"re", es.eigenvalues()(i).real()},
                                   {"im", es.eigenvalues()(i).imag()}});
  sdnes::json result;
  result["delta_star"] = vec_to_json(att.delta_star);
  result["x_delta"] = vec_to_json(att.x_delta);
  result["costs_at_x_delta"] = vec_to_json(costs);
  result["lambda_eigenvalues"] = lam_eigs;
  result["lambda_hurwitz"] = att.lambda_hurwitz;
  result["stability_radius"] = sdnes::stability_radius(sc.game, *sc.ds());
  result["in_stability_set"] =
      sdnes::in_stability_set(sc.game, *sc.ds(), att.delta_star);
  write_or_print(out_path, result.dump(2));
  return 0;
}

int cmd_simulate(const sdnes::Scenario& sc, std::uint64_t seed,
                 const std::string& out_path) {
  sdnes::ClosedLoopSim sim(sc.game, sc.ds(), sc.ou, seed);
  sdnes::SystemState init = sim.initial_state();
  if (sc.dynamics.u0) init.u = *sc.dynamics.u0;
  if (sc.dynamics.delta0) init.delta = *sc.dynamics.delta0;
  if (sc.dynamics.eta0) init.eta = *sc.dynamics.eta0;
  const sdnes::Trajectory traj = sim.simulate(init, sc.dynamics.dt,
                                              sc.dynamics.horizon,
                                              sc.dynamics.stride);
  std::ostringstream csv;
  sdnes::write_trajectory_csv(csv, traj, sc.game.num_players(),
                              sc.ds() ? sc.ds()->num_deceivers() : 0);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw sdnes::Error("cannot open output file: " + out_path);
    out << csv.str();
  }
  sdnes::json summary;
  summary["seed"] = seed;
  summary["final_t"] = traj.t.back();
  summary["final_x"] = vec_to_json(traj.x.back());
  summary["final_J"] = vec_to_json(traj.cost.back());
  summary["final_delta"] = vec_to_json(traj.delta.back());
  if (traj.blowup_time) summary["blowup_time"] = *traj.blowup_time;
  std::cout << summary.dump(2) << "\n";
  return traj.blowup_time ? kExitBlowup : 0;
}

int cmd_average(const sdnes::Scenario& sc, const std::string& out_path) {
  const int n = sc.game.num_players();
  const int nd = sc.ds() ? sc.ds()->num_deceivers() : 0;
  const Eigen::VectorXd u0 = sc.dynamics.u0.value_or(Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd d0 =
      sc.dynamics.delta0.value_or(Eigen::VectorXd::Zero(nd));
  const double dt_avg = std::min(0.01, sc.dynamics.horizon / 1000.0);
  const auto traj = sdnes::integrate_averaged(sc.game, sc.ds(), u0, d0, dt_avg,
                                              sc.dynamics.horizon);
  if (traj.blowup_time) {
    std::cerr << "averaged system blew up at t=" << *traj.blowup_time << "\n";
    return kExitBlowup;
  }
  std::ostringstream csv;
  sdnes::write_averaged_csv(csv, traj, n, nd);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw sdnes::Error("cannot open output file: " + out_path);
    out << csv.str();
  }
  sdnes::json summary;
  summary["final_t"] = traj.t.back();
  summary["final_u"] = vec_to_json(traj.u.back());
  summary["final_delta"] = vec_to_json(traj.delta.back());
  summary["final_J"] = vec_to_json(traj.cost.back());
  if (sc.experiment && !sc.experiment->seeds.empty()) {
    sdnes::ExperimentPlan plan = *sc.experiment;
    plan.theta_sweep.clear();
    plan.envelope.reset();
    plan.min_success.reset();
    const sdnes::BatchParams bp{sc.dynamics.dt, sc.dynamics.horizon,
                                sc.dynamics.stride};
    const auto rep =
        sdnes::run_batch(sc.game, sc.ds(), sc.ou, bp, plan, &traj);
    sdnes::json devs = sdnes::json::array();
    for (const auto& tr : rep.trials)
      devs.push_back(sdnes::json{{"seed", tr.seed},
                                 {"sup_dev", tr.sup_dev.value_or(-1.0)},
                                 {"blowup", tr.blowup}});
    summary["sde_vs_averaged"] = devs;
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_montecarlo(const sdnes::Scenario& sc, const std::string& out_path) {
  if (!sc.experiment)
    throw sdnes::ParseError("montecarlo: config has no experiment plan");
  const sdnes::BatchParams bp{sc.dynamics.dt, sc.dynamics.horizon,
                              sc.dynamics.stride};
  const int n = sc.game.num_players();
  const int nd = sc.ds() ? sc.ds()->num_deceivers() : 0;

  // common averaged reference, shared by the base batch and the sweep
  const Eigen::VectorXd u0 = sc.dynamics.u0.value_or(Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd d0 =
      sc.dynamics.delta0.value_or(Eigen::VectorXd::Zero(nd));
  const double dt_avg = std::min(0.01, sc.dynamics.horizon / 1000.0);
  const auto averaged = sdnes::integrate_averaged(sc.game, sc.ds(), u0, d0,
                                                  dt_avg, sc.dynamics.horizon);

  const auto rep = sdnes::run_batch(sc.game, sc.ds(), sc.ou, bp,
                                    *sc.experiment, &averaged);
  sdnes::json out;
  out["success_fraction"] = rep.success_fraction;
  out["x_ref"] = vec_to_json(rep.x_ref);
  if (rep.delta_star.size() > 0) out["delta_star"] = vec_to_json(rep.delta_star);
  sdnes::json trials = sdnes::json::array();
  for (const auto& tr : rep.trials) {
    sdnes::json t;
    t["seed"] = tr.seed;
    t["blowup"] = tr.blowup;
    if (tr.blowup) t["blowup_time"] = tr.blowup_time;
    t["final_x"] = vec_to_json(tr.final_x);
    t["final_J"] = vec_to_json(tr.final_cost);
    t["final_delta"] = vec_to_json(tr.final_delta);
    t["err_x"] = tr.err_x;
    t["err_j"] = tr.err_j;
    if (tr.sup_dev) t["sup_dev"] = *tr.sup_dev;
    if (tr.envelope_violation_time)
      t["envelope_violation_time"] = *tr.envelope_violation_time;
    trials.push_back(std::move(t));
  }
  out["trials"] = std::move(trials);

  bool thresholds_ok = rep.thresholds_passed;
  if (!sc.experiment->theta_sweep.empty()) {
    const auto rows = sdnes::theta_sweep(sc.game, sc.ds(), sc.ou, bp,
                                         *sc.experiment, averaged);
    sdnes::json table = sdnes::json::array();
    for (const auto& row : rows)
      table.push_back(sdnes::json{{"theta", row.theta},
                                  {"mean_dev", row.mean_dev},
                                  {"std_dev", row.std_dev},
                                  {"max_dev", row.max_dev},
                                  {"blowups", row.blowups}});
    out["theta_sweep"] = std::move(table);
  }
  out["thresholds_passed"] = thresholds_ok;
  write_or_print(out_path, out.dump(2));
  return thresholds_ok ? 0 : kExitThresholds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic deceptive Nash equilibrium seeking toolkit"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 1;
  bool dump_config = false;
  app.add_option("--config", config_path, "scenario config (JSON)");
  app.add_option("--seed", seed, "trial seed for simulate");
  app.add_option("--out", out_path, "output file (CSV or JSON)");
  app.add_flag("--dump-config", dump_config,
               "echo the parsed config as canonical JSON and exit");

  auto* analyze = app.add_subcommand(
      "analyze", "Nash equilibrium, Assumption 1, stability radius");
  auto* attain = app.add_subcommand(
      "attain", "solve attainability for the configured reference payoffs");
  auto* simulate = app.add_subcommand(
      "simulate", "integrate the closed-loop stochastic dynamics");
  auto* average = app.add_subcommand(
      "average", "integrate the averaged system, optionally vs SDE seeds");
  auto* montecarlo = app.add_subcommand(
      "montecarlo", "run the configured experiment plan");

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_path.empty()) throw sdnes::ParseError("--config is required");
    const sdnes::Scenario sc = sdnes::parse_scenario_file(config_path);
    if (dump_config) {
      std::cout << sc.to_json().dump(2) << "\n";
      return 0;
    }
    if (analyze->parsed()) return cmd_analyze(sc, out_path);
    if (attain->parsed()) return cmd_attain(sc, out_path);
    if (simulate->parsed()) return cmd_simulate(sc, seed, out_path);
    if (average->parsed()) return cmd_average(sc, out_path);
    if (montecarlo->parsed()) return cmd_montecarlo(sc, out_path);
    std::cerr << app.help() << "\n";
    return kExitParse;
  } catch (const sdnes::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const sdnes::AssumptionViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAssumption;
  } catch (const sdnes::NotAttainable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotAttainable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 10;
  }
}
