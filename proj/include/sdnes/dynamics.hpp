#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "sdnes/deception.hpp"
#include "sdnes/errors.hpp"
#include "sdnes/game.hpp"
#include "sdnes/perturbation.hpp"

namespace sdnes {

// Full closed-loop state: filtered actions u, deceptive gains delta, OU
// dither states eta.
struct SystemState {
  Eigen::VectorXd u;
  Eigen::VectorXd delta;
  Eigen::VectorXd eta;
  double t = 0.0;
};

// Time-stamped record of a simulation. Sample times are strictly
// increasing; x and cost are re-evaluations at the recorded state.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> delta;
  std::vector<Eigen::VectorXd> eta;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> cost;
  std::optional<double> blowup_time;

  std::size_t size() const { return t.size(); }
};

// Realized actions: x_i = u_i + a_i f_i(eta_i), plus the injected copy of
// the victims' dithers for deceptive players. ds may be null (no deception).
inline Eigen::VectorXd action(const QuadraticGame& game,
                              const DeceptionStructure* ds,
                              const SystemState& state) {
  const int n = game.num_players();
  if (state.u.size() != n || state.eta.size() != n)
    throw InvalidArgument("state dimensions do not match the game");
  Eigen::VectorXd dither(n);
  for (int i = 0; i < n; ++i) {
    const auto& t = game.tuning(i);
    dither(i) = t.a * t.dither(state.eta(i));
  }
  Eigen::VectorXd x = state.u + dither;
  if (ds != nullptr) {
    if (state.delta.size() != ds->num_deceivers())
      throw InvalidArgument("delta dimension does not match the deceiver set");
    for (int s = 0; s < ds->num_deceivers(); ++s) {
      const auto& d = ds->deceiver(s);
      double injected = 0.0;
      for (int j : d.targets) injected += dither(j);
      x(d.player) += state.delta(s) * injected;
    }
  }
  return x;
}

// One explicit step of the closed loop: eta advances by its exact OU
// transition, then u and delta take an Euler step with x evaluated at the
// pre-step (u, delta) and post-step eta. The u and delta equations are
// ODEs driven pathwise by eta, so no Ito correction arises.
//
// The u gain is k_i/(gamma_i a_i): the 1/gamma_i factor normalizes
// E[f_i^2] so the averaged drift is exactly -k_i [Abar u + Bbar]_i.
inline SystemState step(const QuadraticGame& game, const DeceptionStructure* ds,
                        const OUParams& ou, const Eigen::VectorXd& gammas,
                        SystemState state, double dt,
                        const Eigen::VectorXd& noise) {
  const int n = game.num_players();
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be > 0");
  double theta_min = ou.theta_i(0);
  for (int i = 1; i < n; ++i) theta_min = std::min(theta_min, ou.theta_i(i));
  if (dt > theta_min / 10.0)
    throw InvalidArgument("step: dt must not exceed theta_min/10");
  if (noise.size() != n) throw InvalidArgument("step: need N noise draws");

  for (int i = 0; i < n; ++i)
    state.eta(i) = ou_step(state.eta(i), ou.theta_i(i), ou.q(i), dt, noise(i));
  const Eigen::VectorXd x = action(game, ds, state);
  Eigen::VectorXd cost(n);
  for (int i = 0; i < n; ++i) cost(i) = game.cost(i, x);
  for (int i = 0; i < n; ++i) {
    const auto& tu = game.tuning(i);
    state.u(i) -= dt * (tu.k / (gammas(i) * tu.a)) * tu.dither(state.eta(i)) *
                  cost(i);
  }
  if (ds != nullptr) {
    for (int s = 0; s < ds->num_deceivers(); ++s) {
      const auto& d = ds->deceiver(s);
      state.delta(s) += dt * d.eps * (cost(d.player) - d.j_ref);
    }
  }
  state.t += dt;
  return state;
}

// Owns the per-player RNG streams and precomputed step coefficients for one
// trial. Not shareable across threads; movable between them.
class ClosedLoopSim {
 public:
  ClosedLoopSim(const QuadraticGame& game, const DeceptionStructure* ds,
                OUParams ou, std::uint64_t seed)
      : game_(game), ds_(ds), ou_(std::move(ou)), seed_(seed),
        gammas_(game.gamma_vector()) {
    const int n = game_.num_players();
    if (ou_.size() != n)
      throw InvalidArgument("OU parameter dimensions do not match the game");
    if (ds_ != nullptr && ds_->num_players() != n)
      throw InvalidArgument("deception structure does not match the game");
    for (int i = 0; i < n; ++i)
      streams_.push_back(make_stream(seed_, static_cast<std::uint64_t>(i)));
  }

  const Eigen::VectorXd& gammas() const { return gammas_; }

  // Default initial state: u = 0, delta = 0, eta drawn from the stationary
  // law N(0, q_i^2/2) using stream i.
  SystemState initial_state() {
    const int n = game_.num_players();
    SystemState s;
    s.u = Eigen::VectorXd::Zero(n);
    s.delta = Eigen::VectorXd::Zero(ds_ ? ds_->num_deceivers() : 0);
    s.eta = Eigen::VectorXd(n);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < n; ++i)
      s.eta(i) = ou_.q(i) / std::sqrt(2.0) * gauss(streams_[static_cast<std::size_t>(i)]);
    s.t = 0.0;
    return s;
  }

  // Integrates the closed loop to horizon T, recording every `stride`
  // steps (and the final step). Deterministic given the seed. A non-finite
  // state stops the run and records the blow-up time.
  Trajectory simulate(SystemState state, double dt, double horizon,
                      std::int64_t stride) {
    const int n = game_.num_players();
    if (!(dt > 0.0) || !(horizon > 0.0))
      throw InvalidArgument("simulate: dt and horizon must be > 0");
    double theta_min = ou_.theta_i(0);
    for (int i = 1; i < n; ++i) theta_min = std::min(theta_min, ou_.theta_i(i));
    if (dt > theta_min / 10.0)
      throw InvalidArgument("simulate: dt must not exceed theta_min/10; the "
                            "dither is the fastest time scale");
    if (stride < 1) throw InvalidArgument("simulate: stride must be >= 1");
    const auto n_steps = static_cast<std::int64_t>(std::llround(horizon / dt));

    const int nd = ds_ ? ds_->num_deceivers() : 0;
    if (state.u.size() != n || state.eta.size() != n || state.delta.size() != nd)
      throw InvalidArgument("simulate: initial state dimensions mismatch");

    // hoisted per-player constants
    std::vector<double> decay(static_cast<std::size_t>(n)),
        noise_sd(static_cast<std::size_t>(n)), amp(static_cast<std::size_t>(n)),
        ucoef(static_cast<std::size_t>(n));
    std::vector<DitherKind> kind(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& tu = game_.tuning(i);
      const double th = ou_.theta_i(i);
      decay[static_cast<std::size_t>(i)] = std::exp(-dt / th);
      noise_sd[static_cast<std::size_t>(i)] = std::sqrt(
          0.5 * ou_.q(i) * ou_.q(i) *
          (1.0 - decay[static_cast<std::size_t>(i)] * decay[static_cast<std::size_t>(i)]));
      amp[static_cast<std::size_t>(i)] = tu.a;
      ucoef[static_cast<std::size_t>(i)] = tu.k / (gammas_(i) * tu.a);
      kind[static_cast<std::size_t>(i)] = tu.dither.kind();
    }
    std::normal_distribution<double> gauss;

    Trajectory traj;
    traj.t.reserve(static_cast<std::size_t>(n_steps / stride + 2));
    Eigen::VectorXd f(n), x(n), cost(n);
    auto eval_f = [&](int i, double s) {
      switch (kind[static_cast<std::size_t>(i)]) {
        case DitherKind::Sine: return std::sin(s);
        case DitherKind::Saturation: return std::clamp(s, -1.0, 1.0);
        default: return game_.tuning(i).dither(s);
      }
    };
    auto record = [&]() {
      for (int i = 0; i < n; ++i) f(i) = eval_f(i, state.eta(i));
      compute_action(state, f, x);
      for (int i = 0; i < n; ++i) cost(i) = eval_cost(i, x);
      traj.t.push_back(state.t);
      traj.u.push_back(state.u);
      traj.delta.push_back(state.delta);
      traj.eta.push_back(state.eta);
      traj.x.push_back(x);
      traj.cost.push_back(cost);
    };
    record();
    for (std::int64_t s = 1; s <= n_steps; ++s) {
      for (int i = 0; i < n; ++i) {
        state.eta(i) = state.eta(i) * decay[static_cast<std::size_t>(i)] +
                       noise_sd[static_cast<std::size_t>(i)] *
                           gauss(streams_[static_cast<std::size_t>(i)]);
        f(i) = eval_f(i, state.eta(i));
      }
      compute_action(state, f, x);
      for (int i = 0; i < n; ++i) cost(i) = eval_cost(i, x);
      for (int i = 0; i < n; ++i)
        state.u(i) -= dt * ucoef[static_cast<std::size_t>(i)] * f(i) * cost(i);
      if (ds_ != nullptr) {
        for (int sd = 0; sd < nd; ++sd) {
          const auto& d = ds_->deceiver(sd);
          state.delta(sd) += dt * d.eps * (cost(d.player) - d.j_ref);
        }
      }
      state.t = dt * static_cast<double>(s);
      if (!state.u.allFinite() || !state.delta.allFinite()) {
        traj.blowup_time = state.t;
        break;
      }
      if (s % stride == 0 || s == n_steps) record();
    }
    return traj;
  }

 private:
  void compute_action(const SystemState& st, const Eigen::VectorXd& f,
                      Eigen::VectorXd& x) const {
    const int n = game_.num_players();
    for (int i = 0; i < n; ++i)
      x(i) = st.u(i) + game_.tuning(i).a * f(i);
    if (ds_ != nullptr) {
      for (int s = 0; s < ds_->num_deceivers(); ++s) {
        const auto& d = ds_->deceiver(s);
        double injected = 0.0;
        for (int j : d.targets) injected += game_.tuning(j).a * f(j);
        x(d.player) += st.delta(s) * injected;
      }
    }
  }

  double eval_cost(int i, const Eigen::VectorXd& x) const {
    const auto& pc = game_.cost_params(i);
    return 0.5 * x.dot(pc.A * x) + pc.b.dot(x) + pc.c;
  }

  const QuadraticGame& game_;
  const DeceptionStructure* ds_;
  OUParams ou_;
  std::uint64_t seed_;
  Eigen::VectorXd gammas_;
  std::vector<std::mt19937_64> streams_;
};

inline Trajectory simulate(const QuadraticGame& game,
                           const DeceptionStructure* ds, const OUParams& ou,
                           const SystemState& initial, double dt,
                           double horizon, std::uint64_t seed,
                           std::int64_t stride = 1) {
  ClosedLoopSim sim(game, ds, ou, seed);
  return sim.simulate(initial, dt, horizon, stride);
}

// Second-moment matrix of the dither vector eta_bar under the product
// invariant measure: Sigma = C diag(gamma) C', where C_{kp} collects the
// coefficient of f_p(z_p) in eta_bar_k (own dither plus injected copies).
// Covers overlapping target sets and deceivers deceiving deceivers.
inline Eigen::MatrixXd dither_second_moment(const QuadraticGame& game,
                                            const DeceptionStructure* ds,
                                            const Eigen::VectorXd& amplitudes,
                                            const Eigen::VectorXd& delta,
                                            const Eigen::VectorXd& gammas) {
  const int n = game.num_players();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) C(i, i) = amplitudes(i);
  if (ds != nullptr) {
    for (int s = 0; s < ds->num_deceivers(); ++s) {
      const auto& d = ds->deceiver(s);
      for (int j : d.targets) C(d.player, j) += delta(s) * amplitudes(j);
    }
  }
  return C * gammas.asDiagonal() * C.transpose();
}

// Quadratic bias entering the averaged delta dynamics:
// P_i = E[ 1/2 eta_bar' A_i eta_bar ] = 1/2 tr(A_i Sigma). Vanishes at
// zero amplitudes.
inline double p_term(const QuadraticGame& game, const DeceptionStructure* ds,
                     int i, const Eigen::VectorXd& amplitudes,
                     const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& gammas) {
  const Eigen::MatrixXd sigma =
      dither_second_moment(game, ds, amplitudes, delta, gammas);
  return 0.5 * (game.cost_params(i).A * sigma).trace();
}

inline double p_term(const QuadraticGame& game, const DeceptionStructure* ds,
                     int i, const Eigen::VectorXd& amplitudes,
                     const Eigen::VectorXd& delta) {
  return p_term(game, ds, i, amplitudes, delta, game.gamma_vector());
}

// The averaged two-time-scale system: u follows the perturbed
// pseudogradient flow, delta integrates the (biased) payoff error.
class AveragedSystem {
 public:
  AveragedSystem(const QuadraticGame& game, const DeceptionStructure* ds)
      : game_(game), ds_(ds), gammas_(game.gamma_vector()),
        amplitudes_(game.amplitudes()) {}

  std::pair<Eigen::VectorXd, Eigen::VectorXd> rhs(
      const Eigen::VectorXd& u, const Eigen::VectorXd& delta) const {
    const int n = game_.num_players();
    Eigen::VectorXd du(n);
    Eigen::VectorXd ddelta(ds_ ? ds_->num_deceivers() : 0);
    const auto pp = ds_ ? perturbed_pseudogradient(game_, *ds_, delta)
                        : [&] {
                            auto pg = pseudogradient(game_);
                            return PerturbedPseudogradient{
                                std::move(pg.A), std::move(pg.B),
                                Eigen::VectorXd()};
                          }();
    const Eigen::VectorXd grad = pp.A * u + pp.B;
    for (int i = 0; i < n; ++i) du(i) = -game_.tuning(i).k * grad(i);
    if (ds_ != nullptr) {
      for (int s = 0; s < ds_->num_deceivers(); ++s) {
        const auto& d = ds_->deceiver(s);
        const double p =
            p_term(game_, ds_, d.player, amplitudes_, delta, gammas_);
        ddelta(s) = d.eps * (game_.cost(d.player, u) - d.j_ref + p);
      }
    }
    return {du, ddelta};
  }

  const Eigen::VectorXd& gammas() const { return gammas_; }

 private:
  const QuadraticGame& game_;
  const DeceptionStructure* ds_;
  Eigen::VectorXd gammas_;
  Eigen::VectorXd amplitudes_;
};

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> averaged_rhs(
    const QuadraticGame& game, const DeceptionStructure* ds,
    const Eigen::VectorXd& u, const Eigen::VectorXd& delta) {
  return AveragedSystem(game, ds).rhs(u, delta);
}

// Deterministic trajectory of the averaged system; x coincides with u and
// eta is absent.
struct AveragedTrajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> delta;
  std::vector<Eigen::VectorXd> cost;
  std::optional<double> blowup_time;
  // max over checked steps of |y_full - y_two_halves| / dt
  double step_error_rate = 0.0;

  std::size_t size() const { return t.size(); }
};

// Classical RK4 with periodic step-halving error monitoring.
inline AveragedTrajectory integrate_averaged(const QuadraticGame& game,
                                             const DeceptionStructure* ds,
                                             Eigen::VectorXd u0,
                                             Eigen::VectorXd delta0, double dt,
                                             double horizon,
                                             std::int64_t stride = 1) {
  if (!(dt > 0.0) || !(horizon > 0.0))
    throw InvalidArgument("integrate_averaged: dt and horizon must be > 0");
  if (stride < 1) throw InvalidArgument("integrate_averaged: stride must be >= 1");
  AveragedSystem sys(game, ds);
  const int n = game.num_players();
  const int nd = ds ? ds->num_deceivers() : 0;
  if (u0.size() != n || delta0.size() != nd)
    throw InvalidArgument("integrate_averaged: initial state mismatch");

  auto rk4 = [&](Eigen::VectorXd& u, Eigen::VectorXd& d, double h) {
    const auto [k1u, k1d] = sys.rhs(u, d);
    const auto [k2u, k2d] = sys.rhs(u + 0.5 * h * k1u, d + 0.5 * h * k1d);
    const auto [k3u, k3d] = sys.rhs(u + 0.5 * h * k2u, d + 0.5 * h * k2d);
    const auto [k4u, k4d] = sys.rhs(u + h * k3u, d + h * k3d);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    d += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
  };

  const auto n_steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  const std::int64_t check_every = std::max<std::int64_t>(1, n_steps / 64);
  AveragedTrajectory traj;
  auto record = [&](double t, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& d) {
    Eigen::VectorXd cost(n);
    for (int i = 0; i < n; ++i) cost(i) = game.cost(i, u);
    traj.t.push_back(t);
    traj.u.push_back(u);
    traj.delta.push_back(d);
    traj.cost.push_back(cost);
  };
  record(0.0, u0, delta0);
  for (std::int64_t s = 1; s <= n_steps; ++s) {
    if (s % check_every == 0) {
      Eigen::VectorXd uh = u0, dh = delta0;
      rk4(uh, dh, 0.5 * dt);
      rk4(uh, dh, 0.5 * dt);
      rk4(u0, delta0, dt);
      const double err =
          std::sqrt((u0 - uh).squaredNorm() + (delta0 - dh).squaredNorm());
      traj.step_error_rate = std::max(traj.step_error_rate, err / dt);
    } else {
      rk4(u0, delta0, dt);
    }
    const double t = dt * static_cast<double>(s);
    if (!u0.allFinite() || !delta0.allFinite()) {
      traj.blowup_time = t;
      break;
    }
    if (s % stride == 0 || s == n_steps) record(t, u0, delta0);
  }
  return traj;
}

}  // namespace sdnes
