#pragma once

#include <charconv>
#include <ostream>
#include <string>

#include "sdnes/dynamics.hpp"
#include "sdnes/errors.hpp"

namespace sdnes {

// Shortest decimal representation that round-trips the IEEE-754 value.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Header: t,u_1..u_N,delta_1..delta_n,x_1..x_N,J_1..J_N
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 int n_players, int n_deceivers) {
  os << "t";
  for (int i = 1; i <= n_players; ++i) os << ",u_" << i;
  for (int i = 1; i <= n_deceivers; ++i) os << ",delta_" << i;
  for (int i = 1; i <= n_players; ++i) os << ",x_" << i;
  for (int i = 1; i <= n_players; ++i) os << ",J_" << i;
  os << "\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    os << format_double(traj.t[s]);
    for (Eigen::Index i = 0; i < traj.u[s].size(); ++i)
      os << "," << format_double(traj.u[s](i));
    for (Eigen::Index i = 0; i < traj.delta[s].size(); ++i)
      os << "," << format_double(traj.delta[s](i));
    for (Eigen::Index i = 0; i < traj.x[s].size(); ++i)
      os << "," << format_double(traj.x[s](i));
    for (Eigen::Index i = 0; i < traj.cost[s].size(); ++i)
      os << "," << format_double(traj.cost[s](i));
    os << "\n";
  }
}

// Same schema; the averaged system has no dither, so x coincides with u.
inline void write_averaged_csv(std::ostream& os, const AveragedTrajectory& traj,
                               int n_players, int n_deceivers) {
  os << "t";
  for (int i = 1; i <= n_players; ++i) os << ",u_" << i;
  for (int i = 1; i <= n_deceivers; ++i) os << ",delta_" << i;
  for (int i = 1; i <= n_players; ++i) os << ",x_" << i;
  for (int i = 1; i <= n_players; ++i) os << ",J_" << i;
  os << "\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    os << format_double(traj.t[s]);
    for (Eigen::Index i = 0; i < traj.u[s].size(); ++i)
      os << "," << format_double(traj.u[s](i));
    for (Eigen::Index i = 0; i < traj.delta[s].size(); ++i)
      os << "," << format_double(traj.delta[s](i));
    for (Eigen::Index i = 0; i < traj.u[s].size(); ++i)
      os << "," << format_double(traj.u[s](i));
    for (Eigen::Index i = 0; i < traj.cost[s].size(); ++i)
      os << "," << format_double(traj.cost[s](i));
    os << "\n";
  }
}

}  // namespace sdnes
