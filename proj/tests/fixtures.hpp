#pragma once

// Shared two-player example instance used across the test suite, plus
// small helpers for building random Assumption-1 games.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "sdnes/deception.hpp"
#include "sdnes/game.hpp"
#include "sdnes/perturbation.hpp"

namespace fixtures {

inline sdnes::QuadraticGame example_game() {
  Eigen::MatrixXd A1(2, 2), A2(2, 2);
  A1 << 3, 1, 1, 5;
  A2 << 7, 2, 2, 4;
  Eigen::VectorXd b1(2), b2(2);
  b1 << 4, 2;
  b2 << 1, 6;
  std::vector<sdnes::PlayerCost> costs{{A1, b1, 0.0}, {A2, b2, 0.0}};
  std::vector<sdnes::PlayerTuning> tuning{
      {0.1, 0.06, 0.1, sdnes::DitherFunction::saturation()},
      {0.12, 0.05, 0.07, sdnes::DitherFunction::sine()}};
  return sdnes::QuadraticGame(std::move(costs), std::move(tuning));
}

inline sdnes::DeceptionStructure example_deception(double j_ref = -2.0,
                                                   double eps = 0.001) {
  return sdnes::DeceptionStructure(2, {sdnes::Deceiver{1, {0}, eps, j_ref}});
}

inline sdnes::OUParams example_ou(double theta = 5e-4) {
  Eigen::VectorXd tb(2), q(2);
  tb << 1.0, 0.8;
  q << 0.1, 0.07;
  return sdnes::OUParams(theta, tb, q);
}

// Random N-player quadratic game whose pseudogradient is strictly row
// diagonally dominant with positive diagonal.
inline sdnes::QuadraticGame random_assumption1_game(std::mt19937_64& rng,
                                                    int n) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.05, 1.0);
  std::vector<sdnes::PlayerCost> costs;
  std::vector<sdnes::PlayerTuning> tuning;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd M(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) M(r, c) = unif(rng);
    Eigen::MatrixXd A = 0.5 * (M + M.transpose());
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += std::abs(A(i, j));
    A(i, i) = off + pos(rng);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) b(r) = unif(rng);
    costs.push_back({A, b, unif(rng)});
    tuning.push_back({pos(rng), pos(rng), pos(rng),
                      sdnes::DitherFunction::sine()});
  }
  return sdnes::QuadraticGame(std::move(costs), std::move(tuning));
}

// Random deception structure over n players with one or two deceivers.
inline sdnes::DeceptionStructure random_deception(std::mt19937_64& rng,
                                                  int n) {
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<sdnes::Deceiver> ds;
  const int n_dec = (n > 2 && coin(rng)) ? 2 : 1;
  std::vector<int> players;
  while (static_cast<int>(players.size()) < n_dec) {
    const int p = pick(rng);
    bool dup = false;
    for (int q : players) dup |= (q == p);
    if (!dup) players.push_back(p);
  }
  for (int p : players) {
    std::vector<int> targets;
    for (int j = 0; j < n; ++j)
      if (j != p && (coin(rng) || targets.empty())) targets.push_back(j);
    ds.push_back(sdnes::Deceiver{p, targets, 0.001, -1.0});
  }
  return sdnes::DeceptionStructure(n, std::move(ds));
}

}  // namespace fixtures
