#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <utility>

#include "sdnes/errors.hpp"

namespace sdnes {

enum class DitherKind { Sine, Saturation, Custom };

// Bounded odd probing function f_i chosen by a player. The bound is the
// smallest known B with |f(s)| <= B.
class DitherFunction {
 public:
  static DitherFunction sine() {
    return DitherFunction(DitherKind::Sine, 1.0,
                          [](double s) { return std::sin(s); });
  }

  static DitherFunction saturation() {
    return DitherFunction(DitherKind::Saturation, 1.0,
                          [](double s) { return std::clamp(s, -1.0, 1.0); });
  }

  // Library-only extension point; the CLI config parser does not expose it.
  static DitherFunction custom(std::function<double(double)> fn, double bound) {
    if (!fn || !(bound > 0.0))
      throw InvalidArgument("custom dither needs an evaluator and bound > 0");
    return DitherFunction(DitherKind::Custom, bound, std::move(fn));
  }

  double operator()(double s) const { return fn_(s); }
  DitherKind kind() const { return kind_; }
  double bound() const { return bound_; }

 private:
  DitherFunction(DitherKind kind, double bound, std::function<double(double)> fn)
      : kind_(kind), bound_(bound), fn_(std::move(fn)) {}

  DitherKind kind_;
  double bound_;
  std::function<double(double)> fn_;
};

inline double dither_eval(const DitherFunction& f, double s) { return f(s); }

// Per-player OU time scales theta_i = theta * theta_bar_i and noise scales
// q_i. The first relative scale is normalized to 1.
struct OUParams {
  double theta;
  Eigen::VectorXd theta_bar;
  Eigen::VectorXd q;

  OUParams(double theta_, Eigen::VectorXd theta_bar_, Eigen::VectorXd q_)
      : theta(theta_), theta_bar(std::move(theta_bar_)), q(std::move(q_)) {
    if (!(theta > 0.0)) throw InvalidArgument("theta must be > 0");
    if (theta_bar.size() != q.size() || theta_bar.size() == 0)
      throw InvalidArgument("theta_bar and q must have equal positive length");
    if (theta_bar(0) != 1.0)
      throw InvalidArgument("theta_bar[0] must equal 1 exactly");
    for (Eigen::Index i = 0; i < theta_bar.size(); ++i) {
      if (!(theta_bar(i) > 0.0) || !(q(i) > 0.0))
        throw InvalidArgument("theta_bar and q entries must be > 0");
    }
  }

  double theta_i(Eigen::Index i) const { return theta * theta_bar(i); }
  Eigen::Index size() const { return theta_bar.size(); }
};

// Exact transition of d(eta) = -(1/theta) eta dt + (q/sqrt(theta)) dW over a
// step dt, driven by one standard normal draw. Valid for any dt > 0; the
// stationary law is N(0, q^2/2).
inline double ou_step(double eta, double theta, double q, double dt,
                      double noise) {
  if (!(dt > 0.0)) throw InvalidArgument("ou_step: dt must be > 0");
  const double decay = std::exp(-dt / theta);
  const double sd = std::sqrt(0.5 * q * q * (1.0 - decay * decay));
  return eta * decay + sd * noise;
}

namespace detail {

// Physicists' Gauss-Hermite rule (weight e^{-t^2}): Newton iteration on
// the orthonormal three-term recurrence, largest root inward. Cached per
// node count.
inline const std::pair<Eigen::VectorXd, Eigen::VectorXd>& hermite_rule(int n) {
  static std::map<int, std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Eigen::VectorXd nodes(n), weights(n);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) -
          1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * nodes(0);
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * nodes(1);
    } else {
      z = 2.0 * z - nodes(i - 2);
    }
    double pp = 0.0;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = std::pow(M_PI, -0.25);
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-14 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw QuadratureFailure("Gauss-Hermite node iteration did not converge");
    nodes(i) = z;
    nodes(n - 1 - i) = -z;
    weights(i) = 2.0 / (pp * pp);
    weights(n - 1 - i) = weights(i);
  }
  return cache.emplace(n, std::make_pair(std::move(nodes), std::move(weights)))
      .first->second;
}

inline double gamma_gauss_hermite(const DitherFunction& f, double q, int n) {
  const auto& [t, w] = hermite_rule(n);
  // substitution s = q t turns the q-scaled Gaussian into the GH weight
  double acc = 0.0;
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    const double fs = f(q * t(j));
    acc += w(j) * fs * fs;
  }
  return acc / std::sqrt(M_PI);
}

}  // namespace detail

// Normalization constant gamma = E[f(X)^2] for X with density
// (1/(sqrt(pi) q)) e^{-s^2/q^2}, i.e. the OU invariant law. Gauss-Hermite
// with node doubling from 64 nodes until two consecutive rules agree.
inline double gamma_constant(const DitherFunction& f, double q) {
  if (!(q > 0.0)) throw InvalidArgument("gamma_constant: q must be > 0");
  double prev = detail::gamma_gauss_hermite(f, q, 64);
  for (int n = 128; n <= 4096; n *= 2) {
    const double cur = detail::gamma_gauss_hermite(f, q, n);
    if (std::abs(cur - prev) <= 1e-9 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw QuadratureFailure("gamma quadrature did not stabilize to 1e-9");
}

// SplitMix64, used only to derive decorrelated seeds for per-player streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Independent per-player generator: stream `index` of master seed `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = seed ^ (0xA3EC647659359ACDull * (index + 1));
  std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace sdnes
