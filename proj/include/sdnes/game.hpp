#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <utility>
#include <vector>

#include "sdnes/errors.hpp"
#include "sdnes/perturbation.hpp"

namespace sdnes {

// One player's quadratic cost J(x) = 1/2 x'Ax + b'x + c.
struct PlayerCost {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;
};

// Per-player seeking parameters: dither amplitude a, learning gain k, OU
// noise scale q, probing function f.
struct PlayerTuning {
  double a;
  double k;
  double q;
  DitherFunction dither;
};

// An N-player quadratic game together with each player's NES tuning.
// Immutable after construction; construction validates symmetry of every
// A_i (to 1e-12), positivity of the gains, and N >= 2.
class QuadraticGame {
 public:
  QuadraticGame(std::vector<PlayerCost> costs, std::vector<PlayerTuning> tuning)
      : costs_(std::move(costs)), tuning_(std::move(tuning)) {
    const auto n = static_cast<Eigen::Index>(costs_.size());
    if (n < 2) throw InvalidArgument("a game needs at least 2 players");
    if (tuning_.size() != costs_.size())
      throw InvalidArgument("tuning entries must match the player count");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pc = costs_[static_cast<std::size_t>(i)];
      if (pc.A.rows() != n || pc.A.cols() != n || pc.b.size() != n)
        throw InvalidArgument("cost dimensions must equal the player count");
      if (!pc.A.allFinite() || !pc.b.allFinite() || !std::isfinite(pc.c))
        throw InvalidArgument("cost parameters must be finite");
      if ((pc.A - pc.A.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidArgument("A_i must be symmetric to 1e-12");
      const auto& t = tuning_[static_cast<std::size_t>(i)];
      if (!(t.a > 0.0) || !(t.k > 0.0) || !(t.q > 0.0))
        throw InvalidArgument("a_i, k_i, q_i must be strictly positive");
    }
  }

  int num_players() const { return static_cast<int>(costs_.size()); }

  double cost(int i, const Eigen::VectorXd& x) const {
    check_player(i);
    if (x.size() != num_players() || !x.allFinite())
      throw InvalidArgument("cost: x must be a finite N-vector");
    const auto& pc = costs_[static_cast<std::size_t>(i)];
    return 0.5 * x.dot(pc.A * x) + pc.b.dot(x) + pc.c;
  }

  const PlayerCost& cost_params(int i) const {
    check_player(i);
    return costs_[static_cast<std::size_t>(i)];
  }

  const PlayerTuning& tuning(int i) const {
    check_player(i);
    return tuning_[static_cast<std::size_t>(i)];
  }

  Eigen::VectorXd amplitudes() const { return collect(&PlayerTuning::a); }
  Eigen::VectorXd gains() const { return collect(&PlayerTuning::k); }
  Eigen::VectorXd noise_scales() const { return collect(&PlayerTuning::q); }

  // gamma_i = E[f_i(X_i)^2] under each player's OU invariant law.
  Eigen::VectorXd gamma_vector() const {
    Eigen::VectorXd g(num_players());
    for (int i = 0; i < num_players(); ++i) {
      const auto& t = tuning_[static_cast<std::size_t>(i)];
      g(i) = gamma_constant(t.dither, t.q);
    }
    return g;
  }

 private:
  void check_player(int i) const {
    if (i < 0 || i >= num_players())
      throw InvalidArgument("player index out of range");
  }

  Eigen::VectorXd collect(double PlayerTuning::* field) const {
    Eigen::VectorXd v(num_players());
    for (int i = 0; i < num_players(); ++i)
      v(i) = tuning_[static_cast<std::size_t>(i)].*field;
    return v;
  }

  std::vector<PlayerCost> costs_;
  std::vector<PlayerTuning> tuning_;
};

// Stacked own-action gradient of the game: row i of A is row i of A_i and
// entry i of B is entry i of b_i, so G(x) = A x + B.
struct Pseudogradient {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
};

inline Pseudogradient pseudogradient(const QuadraticGame& game) {
  const int n = game.num_players();
  Pseudogradient pg{Eigen::MatrixXd(n, n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    const auto& pc = game.cost_params(i);
    pg.A.row(i) = pc.A.row(i);
    pg.B(i) = pc.b(i);
  }
  return pg;
}

// Solves M y = rhs by partially pivoted LU, refusing when the reciprocal
// condition estimate indicates cond > 1e12.
inline Eigen::VectorXd solve_checked(const Eigen::MatrixXd& M,
                                     const Eigen::VectorXd& rhs) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    throw SingularMatrix("matrix is singular or near-singular (rcond estimate " +
                         std::to_string(rcond) + ")");
  return lu.solve(rhs);
}

// Unique zero of the affine pseudogradient, x* = -A^{-1} B.
inline Eigen::VectorXd nash_equilibrium(const Pseudogradient& pg) {
  return solve_checked(pg.A, -pg.B);
}

// Strict row diagonal dominance with positive diagonal, exact comparisons.
inline bool check_assumption_diag_dominant(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("matrix must be square");
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (!(A(i, i) > 0.0)) return false;
    double off = 0.0;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (j != i) off += std::abs(A(i, j));
    if (!(A(i, i) > off)) return false;
  }
  return true;
}

// True iff every eigenvalue of M has real part < -1e-12. The margin keeps
// marginally stable matrices (purely imaginary spectra) out.
inline bool is_hurwitz(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw InvalidArgument("matrix must be square");
  if (!M.allFinite()) throw InvalidArgument("matrix must be finite");
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw EigenSolverFailure("eigenvalue iteration did not converge");
  return (es.eigenvalues().real().array() < -1e-12).all();
}

}  // namespace sdnes
