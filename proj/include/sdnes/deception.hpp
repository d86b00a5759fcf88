#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "sdnes/errors.hpp"
#include "sdnes/game.hpp"

namespace sdnes {

// One deceptive player: who they deceive, the adaptation gain (the product
// epsilon * epsilon_i, see the config schema) and their reference payoff.
struct Deceiver {
  int player;                // 0-based player index
  std::vector<int> targets;  // D_i, 0-based, never containing `player`
  double eps;                // epsilon * epsilon_i > 0
  double j_ref;
};

// The deception topology: the ordered deceiver list D = {d_1,...,d_n},
// with derived victim sets and deceiver-of sets K_j cross-checked on
// construction. Immutable afterwards.
class DeceptionStructure {
 public:
  DeceptionStructure(int n_players, std::vector<Deceiver> deceivers)
      : n_players_(n_players), deceivers_(std::move(deceivers)) {
    if (deceivers_.empty()) throw InvalidArgument("need at least one deceiver");
    slot_of_.assign(static_cast<std::size_t>(n_players_), -1);
    deceivers_of_.assign(static_cast<std::size_t>(n_players_), {});
    for (int s = 0; s < num_deceivers(); ++s) {
      const auto& d = deceivers_[static_cast<std::size_t>(s)];
      if (d.player < 0 || d.player >= n_players_)
        throw InvalidArgument("deceiver index out of range");
      if (slot_of_[static_cast<std::size_t>(d.player)] != -1)
        throw InvalidArgument("duplicate deceiver");
      if (d.targets.empty()) throw InvalidArgument("deceiver has no targets");
      if (!(d.eps >= 0.0)) throw InvalidArgument("eps must be non-negative");
      std::set<int> seen;
      for (int t : d.targets) {
        if (t < 0 || t >= n_players_)
          throw InvalidArgument("target index out of range");
        if (t == d.player)
          throw InvalidArgument("a player cannot deceive itself");
        if (!seen.insert(t).second) throw InvalidArgument("duplicate target");
      }
      slot_of_[static_cast<std::size_t>(d.player)] = s;
    }
    // derived sets; K_j holds deceiver slots, ordered as in D
    for (int s = 0; s < num_deceivers(); ++s)
      for (int t : deceivers_[static_cast<std::size_t>(s)].targets)
        deceivers_of_[static_cast<std::size_t>(t)].push_back(s);
    for (int j = 0; j < n_players_; ++j)
      if (!deceivers_of_[static_cast<std::size_t>(j)].empty())
        victims_.push_back(j);
  }

  int num_players() const { return n_players_; }
  int num_deceivers() const { return static_cast<int>(deceivers_.size()); }
  const Deceiver& deceiver(int slot) const {
    return deceivers_[static_cast<std::size_t>(slot)];
  }
  // -1 when player i is not deceptive.
  int slot_of(int i) const { return slot_of_[static_cast<std::size_t>(i)]; }
  // K_j as deceiver slots.
  const std::vector<int>& deceivers_of(int j) const {
    return deceivers_of_[static_cast<std::size_t>(j)];
  }
  const std::vector<int>& victims() const { return victims_; }

  Eigen::VectorXd eps_vector() const {
    Eigen::VectorXd e(num_deceivers());
    for (int s = 0; s < num_deceivers(); ++s) e(s) = deceiver(s).eps;
    return e;
  }
  Eigen::VectorXd j_ref_vector() const {
    Eigen::VectorXd r(num_deceivers());
    for (int s = 0; s < num_deceivers(); ++s) r(s) = deceiver(s).j_ref;
    return r;
  }

 private:
  int n_players_;
  std::vector<Deceiver> deceivers_;
  std::vector<int> slot_of_;
  std::vector<std::vector<int>> deceivers_of_;
  std::vector<int> victims_;
};

// Effective affine gradient field under frozen deceptive gains delta:
// row i of A picks up sum_{k in K_i} delta_k * (row d_k of A_i), and entry
// i of B picks up sum_{k in K_i} delta_k * (b_i)_{d_k}. Non-victim rows
// equal the unperturbed pseudogradient exactly.
struct PerturbedPseudogradient {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::VectorXd delta;
};

inline PerturbedPseudogradient perturbed_pseudogradient(
    const QuadraticGame& game, const DeceptionStructure& ds,
    const Eigen::VectorXd& delta) {
  if (ds.num_players() != game.num_players())
    throw InvalidArgument("deception structure does not match the game");
  if (delta.size() != ds.num_deceivers() || !delta.allFinite())
    throw InvalidArgument("delta must be a finite n-vector");
  Pseudogradient pg = pseudogradient(game);
  PerturbedPseudogradient out{std::move(pg.A), std::move(pg.B), delta};
  for (int i = 0; i < game.num_players(); ++i) {
    const auto& pc = game.cost_params(i);
    for (int slot : ds.deceivers_of(i)) {
      const int k = ds.deceiver(slot).player;
      out.A.row(i) += delta(slot) * pc.A.row(k);
      out.B(i) += delta(slot) * pc.b(k);
    }
  }
  return out;
}

// Explicit radius r with B_r(0) inside the stability preserving set, from
// the diagonal dominance margin of the unperturbed pseudogradient. p/0 is
// +infinity for p > 0. Requires Assumption 1.
inline double stability_radius(const QuadraticGame& game,
                               const DeceptionStructure& ds) {
  const Pseudogradient pg = pseudogradient(game);
  if (!check_assumption_diag_dominant(pg.A))
    throw AssumptionViolation("pseudogradient is not strictly diagonally "
                              "dominant with positive diagonal");
  const double inf = std::numeric_limits<double>::infinity();
  double r = inf;
  for (int i : ds.victims()) {
    const auto& pc = game.cost_params(i);
    double margin = pg.A(i, i);
    for (int j = 0; j < game.num_players(); ++j)
      if (j != i) margin -= std::abs(pg.A(i, j));
    double full_sum = 0.0;  // sum over K_i of the l1 norm of row d_k of A_i
    double col_sum = 0.0;   // sum over K_i of |[A_i]_{d_k, i}|
    for (int slot : ds.deceivers_of(i)) {
      const int k = ds.deceiver(slot).player;
      full_sum += pc.A.row(k).cwiseAbs().sum();
      col_sum += std::abs(pc.A(k, i));
    }
    const double r1 = full_sum > 0.0 ? margin / full_sum : inf;
    const double r2 = col_sum > 0.0 ? pg.A(i, i) / col_sum : inf;
    r = std::min({r, r1, r2});
  }
  return r;
}

// Membership in the stability preserving set: -diag(k) Abar(delta) Hurwitz.
inline bool in_stability_set(const QuadraticGame& game,
                             const DeceptionStructure& ds,
                             const Eigen::VectorXd& delta) {
  const auto pp = perturbed_pseudogradient(game, ds, delta);
  const Eigen::MatrixXd M = -(game.gains().asDiagonal() * pp.A);
  return is_hurwitz(M);
}

// Operating point the deceived averaged dynamics settle at:
// x_delta = -Abar(delta)^{-1} Bbar(delta).
inline Eigen::VectorXd deceptive_equilibrium(const QuadraticGame& game,
                                             const DeceptionStructure& ds,
                                             const Eigen::VectorXd& delta) {
  const auto pp = perturbed_pseudogradient(game, ds, delta);
  return solve_checked(pp.A, -pp.B);
}

// xi_k(delta) = eps_{d_k} * J_{d_k}(x_delta).
inline double xi(const QuadraticGame& game, const DeceptionStructure& ds,
                 const Eigen::VectorXd& delta, int slot) {
  const auto& d = ds.deceiver(slot);
  return d.eps * game.cost(d.player, deceptive_equilibrium(game, ds, delta));
}

// Sensitivity matrix [Lambda]_{jk} = d xi_k / d delta_j by central
// differences with one Richardson extrapolation step.
inline Eigen::MatrixXd lambda_matrix(const QuadraticGame& game,
                                     const DeceptionStructure& ds,
                                     const Eigen::VectorXd& delta) {
  const int n = ds.num_deceivers();
  auto xi_all = [&](const Eigen::VectorXd& d) {
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v(k) = xi(game, ds, d, k);
    return v;
  };
  Eigen::MatrixXd lam(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(delta(j)));
    auto central = [&](double step) {
      Eigen::VectorXd dp = delta, dm = delta;
      dp(j) += step;
      dm(j) -= step;
      return ((xi_all(dp) - xi_all(dm)) / (2.0 * step)).eval();
    };
    // D(h/2) refined once: (4 D(h/2) - D(h)) / 3
    lam.row(j) = ((4.0 * central(0.5 * h) - central(h)) / 3.0).transpose();
  }
  return lam;
}

struct AttainabilityResult {
  Eigen::VectorXd delta_star;
  Eigen::VectorXd x_delta;
  Eigen::MatrixXd lambda;
  bool lambda_hurwitz = false;
};

namespace detail {

// Damped Newton on F(delta) = [J_{d_k}(x_delta) - jref_k]_k with a
// finite-difference Jacobian; iterates backtrack to stay in the stability
// preserving set. Returns the root or nothing.
inline std::optional<Eigen::VectorXd> newton_attain(
    const QuadraticGame& game, const DeceptionStructure& ds,
    const Eigen::VectorXd& j_ref, Eigen::VectorXd delta) {
  const int n = ds.num_deceivers();
  auto residual = [&](const Eigen::VectorXd& d) {
    const Eigen::VectorXd x = deceptive_equilibrium(game, ds, d);
    Eigen::VectorXd F(n);
    for (int k = 0; k < n; ++k)
      F(k) = game.cost(ds.deceiver(k).player, x) - j_ref(k);
    return F;
  };
  if (!in_stability_set(game, ds, delta)) return std::nullopt;
  Eigen::VectorXd F;
  try {
    F = residual(delta);
  } catch (const SingularMatrix&) {
    return std::nullopt;
  }
  for (int iter = 0; iter < 100; ++iter) {
    if (F.lpNorm<Eigen::Infinity>() <= 1e-8) return delta;
    Eigen::MatrixXd Jac(n, n);
    try {
      for (int j = 0; j < n; ++j) {
        const double h = std::max(1e-7, 1e-7 * std::abs(delta(j)));
        Eigen::VectorXd dp = delta, dm = delta;
        dp(j) += h;
        dm(j) -= h;
        Jac.col(j) = (residual(dp) - residual(dm)) / (2.0 * h);
      }
    } catch (const SingularMatrix&) {
      return std::nullopt;  // stencil left the invertible region
    }
    Eigen::VectorXd step;
    try {
      step = solve_checked(Jac, -F);
    } catch (const SingularMatrix&) {
      return std::nullopt;  // singular Jacobian, caller restarts
    }
    // Armijo backtracking on |F|^2, also projecting back into the
    // stability set by shrinking the step.
    const double f0 = F.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const Eigen::VectorXd cand = delta + t * step;
      try {
        if (!in_stability_set(game, ds, cand)) continue;
        const Eigen::VectorXd Fc = residual(cand);
        if (Fc.squaredNorm() <= f0 * (1.0 - 1e-4 * t) ||
            Fc.lpNorm<Eigen::Infinity>() <= 1e-8) {
          delta = cand;
          F = Fc;
          accepted = true;
          break;
        }
      } catch (const SingularMatrix&) {
        continue;
      }
    }
    if (!accepted) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

// Solves Definition-2 attainability for the given reference payoffs:
// delta* in the stability set with J_{d_k}(x_{delta*}) = jref_k to 1e-8,
// plus the Hurwitz verdict on Lambda(delta*). Newton from 0 with 8
// deterministic random restarts inside B_r(0) before giving up.
inline AttainabilityResult solve_attainability(const QuadraticGame& game,
                                               const DeceptionStructure& ds,
                                               const Eigen::VectorXd& j_ref) {
  if (j_ref.size() != ds.num_deceivers())
    throw InvalidArgument("j_ref size must equal the number of deceivers");
  const int n = ds.num_deceivers();
  const double r = stability_radius(game, ds);  // also checks Assumption 1
  const double r_start = std::min(r, 10.0);

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Zero(n));
  std::mt19937_64 rng(0x5DCE5u);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 8; ++s) {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v(j) = gauss(rng);
    v *= r_start * std::pow(unif(rng), 1.0 / n) / std::max(v.norm(), 1e-300);
    starts.push_back(v);
  }
  for (const auto& d0 : starts) {
    auto root = detail::newton_attain(game, ds, j_ref, d0);
    if (!root) continue;
    AttainabilityResult res;
    res.delta_star = *root;
    res.x_delta = deceptive_equilibrium(game, ds, res.delta_star);
    res.lambda = lambda_matrix(game, ds, res.delta_star);
    res.lambda_hurwitz = is_hurwitz(res.lambda);
    return res;
  }
  throw NotAttainable("no deceptive gain in the stability set achieves the "
                      "reference payoffs");
}

inline AttainabilityResult solve_attainability(const QuadraticGame& game,
                                               const DeceptionStructure& ds) {
  return solve_attainability(game, ds, ds.j_ref_vector());
}

}  // namespace sdnes
