#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdnes/deception.hpp"
#include "sdnes/errors.hpp"
#include "sdnes/experiment.hpp"
#include "sdnes/game.hpp"
#include "sdnes/perturbation.hpp"

namespace sdnes {

using json = nlohmann::ordered_json;

struct ParseError : Error {
  using Error::Error;
};

struct DynamicsParams {
  double dt = 0.0;
  double horizon = 0.0;
  std::int64_t stride = 1;
  std::optional<Eigen::VectorXd> u0;
  std::optional<Eigen::VectorXd> delta0;
  std::optional<Eigen::VectorXd> eta0;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  if (!j.is_object()) throw ParseError(ctx + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok) throw ParseError(ctx + ": unknown field \"" + key + "\"");
  }
}

inline double get_number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key))
    throw ParseError(ctx + ": missing field \"" + key + "\"");
  if (!j[key].is_number())
    throw ParseError(ctx + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline Eigen::VectorXd get_vector(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array of numbers");
  Eigen::VectorXd out(v.size());
  Eigen::Index i = 0;
  for (const auto& e : v) {
    if (!e.is_number()) throw ParseError(ctx + ": expected numbers");
    out(i++) = e.get<double>();
  }
  return out;
}

// A_i accepts either a nested array of N rows or a flat row-major array
// of N*N numbers.
inline Eigen::MatrixXd get_matrix(const json& v, int n, const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array");
  Eigen::MatrixXd A(n, n);
  if (!v.empty() && v.front().is_array()) {
    if (static_cast<int>(v.size()) != n)
      throw ParseError(ctx + ": expected " + std::to_string(n) + " rows");
    for (int r = 0; r < n; ++r) {
      const Eigen::VectorXd row = get_vector(v[static_cast<std::size_t>(r)], ctx);
      if (row.size() != n) throw ParseError(ctx + ": ragged matrix rows");
      A.row(r) = row.transpose();
    }
  } else {
    if (static_cast<int>(v.size()) != n * n)
      throw ParseError(ctx + ": expected " + std::to_string(n * n) +
                       " row-major entries");
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        A(r, c) = v[static_cast<std::size_t>(r * n + c)].get<double>();
  }
  return A;
}

inline DitherFunction parse_dither(const std::string& id, const std::string& ctx) {
  if (id == "sin") return DitherFunction::sine();
  if (id == "sat") return DitherFunction::saturation();
  throw ParseError(ctx + ": dither must be \"sin\" or \"sat\"");
}

}  // namespace detail

inline QuadraticGame parse_game(const json& g) {
  detail::check_keys(g, {"n_players", "costs", "tuning"}, "game");
  if (!g.contains("n_players") || !g["n_players"].is_number_integer())
    throw ParseError("game: missing integer field \"n_players\"");
  const int n = g["n_players"].get<int>();
  if (!g.contains("costs") || !g["costs"].is_array() ||
      static_cast<int>(g["costs"].size()) != n)
    throw ParseError("game: \"costs\" must be an array of n_players entries");
  if (!g.contains("tuning") || !g["tuning"].is_array() ||
      static_cast<int>(g["tuning"].size()) != n)
    throw ParseError("game: \"tuning\" must be an array of n_players entries");
  std::vector<PlayerCost> costs;
  std::vector<PlayerTuning> tuning;
  for (int i = 0; i < n; ++i) {
    const std::string ctx = "game.costs[" + std::to_string(i) + "]";
    const json& c = g["costs"][static_cast<std::size_t>(i)];
    detail::check_keys(c, {"A", "b", "c"}, ctx);
    PlayerCost pc;
    if (!c.contains("A")) throw ParseError(ctx + ": missing \"A\"");
    pc.A = detail::get_matrix(c["A"], n, ctx + ".A");
    if (!c.contains("b")) throw ParseError(ctx + ": missing \"b\"");
    pc.b = detail::get_vector(c["b"], ctx + ".b");
    if (pc.b.size() != n) throw ParseError(ctx + ".b: wrong length");
    pc.c = c.contains("c") ? detail::get_number(c, "c", ctx) : 0.0;
    costs.push_back(std::move(pc));

    const std::string tctx = "game.tuning[" + std::to_string(i) + "]";
    const json& t = g["tuning"][static_cast<std::size_t>(i)];
    detail::check_keys(t, {"a", "k", "q", "dither"}, tctx);
    if (!t.contains("dither") || !t["dither"].is_string())
      throw ParseError(tctx + ": missing string field \"dither\"");
    tuning.push_back(PlayerTuning{
        detail::get_number(t, "a", tctx), detail::get_number(t, "k", tctx),
        detail::get_number(t, "q", tctx),
        detail::parse_dither(t["dither"].get<std::string>(), tctx)});
  }
  try {
    return QuadraticGame(std::move(costs), std::move(tuning));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("game: ") + e.what());
  }
}

inline DeceptionStructure parse_deceivers(const json& arr, int n_players) {
  if (!arr.is_array() || arr.empty())
    throw ParseError("deceivers: expected a non-empty array");
  std::vector<Deceiver> deceivers;
  for (std::size_t s = 0; s < arr.size(); ++s) {
    const std::string ctx = "deceivers[" + std::to_string(s) + "]";
    const json& d = arr[s];
    detail::check_keys(d, {"player", "targets", "eps", "j_ref"}, ctx);
    if (!d.contains("player") || !d["player"].is_number_integer())
      throw ParseError(ctx + ": missing integer field \"player\"");
    if (!d.contains("targets") || !d["targets"].is_array())
      throw ParseError(ctx + ": missing array field \"targets\"");
    Deceiver dec;
    dec.player = d["player"].get<int>() - 1;  // file uses 1-based players
    for (const auto& t : d["targets"]) {
      if (!t.is_number_integer())
        throw ParseError(ctx + ".targets: expected integers");
      dec.targets.push_back(t.get<int>() - 1);
    }
    dec.eps = detail::get_number(d, "eps", ctx);
    dec.j_ref = detail::get_number(d, "j_ref", ctx);
    deceivers.push_back(std::move(dec));
  }
  try {
    return DeceptionStructure(n_players, std::move(deceivers));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("deceivers: ") + e.what());
  }
}

// A fully parsed scenario: everything a CLI command needs.
struct Scenario {
  QuadraticGame game;
  std::optional<DeceptionStructure> deception;
  OUParams ou;
  DynamicsParams dynamics;
  std::optional<ExperimentPlan> experiment;

  const DeceptionStructure* ds() const {
    return deception ? &*deception : nullptr;
  }

  SystemState initial_state_template() const {
    SystemState s;
    const int n = game.num_players();
    s.u = dynamics.u0.value_or(Eigen::VectorXd::Zero(n));
    s.delta = dynamics.delta0.value_or(
        Eigen::VectorXd::Zero(deception ? deception->num_deceivers() : 0));
    s.eta = Eigen::VectorXd::Zero(n);  // overwritten by a stationary draw
    s.t = 0.0;
    return s;
  }

  json to_json() const;
};

inline Scenario parse_scenario_json(const json& root,
                                    const std::filesystem::path& base_dir) {
  detail::check_keys(root, {"game", "deceivers", "ou", "dynamics", "experiment"},
                     "scenario");
  if (!root.contains("game")) throw ParseError("scenario: missing \"game\"");
  json game_json = root["game"];
  if (game_json.is_string()) {
    const auto path = base_dir / game_json.get<std::string>();
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open game file: " + path.string());
    try {
      game_json = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError("game file " + path.string() + ": " + e.what());
    }
  }
  QuadraticGame game = parse_game(game_json);
  const int n = game.num_players();

  std::optional<DeceptionStructure> ds;
  if (root.contains("deceivers")) ds = parse_deceivers(root["deceivers"], n);

  if (!root.contains("ou")) throw ParseError("scenario: missing \"ou\"");
  const json& ouj = root["ou"];
  detail::check_keys(ouj, {"theta", "theta_bar"}, "ou");
  const double theta = detail::get_number(ouj, "theta", "ou");
  Eigen::VectorXd theta_bar = Eigen::VectorXd::Ones(n);
  if (ouj.contains("theta_bar")) {
    theta_bar = detail::get_vector(ouj["theta_bar"], "ou.theta_bar");
    if (theta_bar.size() != n) throw ParseError("ou.theta_bar: wrong length");
  }
  std::optional<OUParams> ou;
  try {
    ou.emplace(theta, theta_bar, game.noise_scales());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("ou: ") + e.what());
  }

  if (!root.contains("dynamics")) throw ParseError("scenario: missing \"dynamics\"");
  const json& dj = root["dynamics"];
  detail::check_keys(dj, {"dt", "T", "stride", "u0", "delta0", "eta0"},
                     "dynamics");
  DynamicsParams dyn;
  dyn.dt = detail::get_number(dj, "dt", "dynamics");
  dyn.horizon = detail::get_number(dj, "T", "dynamics");
  if (!(dyn.dt > 0.0) || !(dyn.horizon > 0.0))
    throw ParseError("dynamics: dt and T must be positive");
  if (dj.contains("stride")) {
    if (!dj["stride"].is_number_integer() || dj["stride"].get<std::int64_t>() < 1)
      throw ParseError("dynamics.stride: expected a positive integer");
    dyn.stride = dj["stride"].get<std::int64_t>();
  }
  const int nd = ds ? ds->num_deceivers() : 0;
  if (dj.contains("u0")) {
    dyn.u0 = detail::get_vector(dj["u0"], "dynamics.u0");
    if (dyn.u0->size() != n) throw ParseError("dynamics.u0: wrong length");
  }
  if (dj.contains("delta0")) {
    dyn.delta0 = detail::get_vector(dj["delta0"], "dynamics.delta0");
    if (dyn.delta0->size() != nd) throw ParseError("dynamics.delta0: wrong length");
  }
  if (dj.contains("eta0")) {
    dyn.eta0 = detail::get_vector(dj["eta0"], "dynamics.eta0");
    if (dyn.eta0->size() != n) throw ParseError("dynamics.eta0: wrong length");
  }

  std::optional<ExperimentPlan> plan;
  if (root.contains("experiment")) {
    const json& ej = root["experiment"];
    detail::check_keys(ej,
                       {"seeds", "theta_sweep", "envelope", "j_tol", "x_tol",
                        "min_success"},
                       "experiment");
    ExperimentPlan p;
    if (!ej.contains("seeds") || !ej["seeds"].is_array())
      throw ParseError("experiment: missing array field \"seeds\"");
    for (const auto& s : ej["seeds"]) {
      if (!s.is_number_integer())
        throw ParseError("experiment.seeds: expected integers");
      p.seeds.push_back(s.get<std::uint64_t>());
    }
    if (ej.contains("theta_sweep"))
      for (const auto& t : ej["theta_sweep"])
        p.theta_sweep.push_back(t.get<double>());
    if (ej.contains("envelope")) {
      const json& env = ej["envelope"];
      detail::check_keys(env, {"C", "M", "r"}, "experiment.envelope");
      p.envelope = EnvelopeSpec{detail::get_number(env, "C", "envelope"),
                                detail::get_number(env, "M", "envelope"),
                                detail::get_number(env, "r", "envelope")};
    }
    if (ej.contains("j_tol")) p.j_tol = ej["j_tol"].get<double>();
    if (ej.contains("x_tol")) p.x_tol = ej["x_tol"].get<double>();
    if (ej.contains("min_success"))
      p.min_success = ej["min_success"].get<double>();
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("experiment: ") + e.what());
    }
    plan = std::move(p);
  }

  return Scenario{std::move(game), std::move(ds), std::move(*ou),
                  std::move(dyn), std::move(plan)};
}

inline Scenario parse_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return parse_scenario_json(root, path.parent_path());
}

inline json Scenario::to_json() const {
  const int n = game.num_players();
  json g;
  g["n_players"] = n;
  g["costs"] = json::array();
  g["tuning"] = json::array();
  for (int i = 0; i < n; ++i) {
    const auto& pc = game.cost_params(i);
    json rows = json::array();
    for (int r = 0; r < n; ++r) {
      json row = json::array();
      for (int c = 0; c < n; ++c) row.push_back(pc.A(r, c));
      rows.push_back(std::move(row));
    }
    json b = json::array();
    for (int r = 0; r < n; ++r) b.push_back(pc.b(r));
    g["costs"].push_back(json{{"A", rows}, {"b", b}, {"c", pc.c}});
    const auto& t = game.tuning(i);
    g["tuning"].push_back(
        json{{"a", t.a},
             {"k", t.k},
             {"q", t.q},
             {"dither", t.dither.kind() == DitherKind::Sine ? "sin" : "sat"}});
  }
  json root;
  root["game"] = std::move(g);
  if (deception) {
    json arr = json::array();
    for (int s = 0; s < deception->num_deceivers(); ++s) {
      const auto& d = deception->deceiver(s);
      json targets = json::array();
      for (int t : d.targets) targets.push_back(t + 1);
      arr.push_back(json{{"player", d.player + 1},
                         {"targets", targets},
                         {"eps", d.eps},
                         {"j_ref", d.j_ref}});
    }
    root["deceivers"] = std::move(arr);
  }
  json theta_bar = json::array();
  for (Eigen::Index i = 0; i < ou.theta_bar.size(); ++i)
    theta_bar.push_back(ou.theta_bar(i));
  root["ou"] = json{{"theta", ou.theta}, {"theta_bar", theta_bar}};
  json dj;
  dj["dt"] = dynamics.dt;
  dj["T"] = dynamics.horizon;
  dj["stride"] = dynamics.stride;
  auto put_vec = [&](const char* key, const std::optional<Eigen::VectorXd>& v) {
    if (!v) return;
    json arr = json::array();
    for (Eigen::Index i = 0; i < v->size(); ++i) arr.push_back((*v)(i));
    dj[key] = std::move(arr);
  };
  put_vec("u0", dynamics.u0);
  put_vec("delta0", dynamics.delta0);
  put_vec("eta0", dynamics.eta0);
  root["dynamics"] = std::move(dj);
  if (experiment) {
    json ej;
    ej["seeds"] = experiment->seeds;
    if (!experiment->theta_sweep.empty())
      ej["theta_sweep"] = experiment->theta_sweep;
    if (experiment->envelope)
      ej["envelope"] = json{{"C", experiment->envelope->C},
                            {"M", experiment->envelope->M},
                            {"r", experiment->envelope->r_tilde}};
    if (experiment->j_tol) ej["j_tol"] = *experiment->j_tol;
    if (experiment->x_tol) ej["x_tol"] = *experiment->x_tol;
    if (experiment->min_success) ej["min_success"] = *experiment->min_success;
    root["experiment"] = std::move(ej);
  }
  return root;
}

}  // namespace sdnes
