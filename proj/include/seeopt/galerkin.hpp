#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "seeopt/path_array.hpp"

namespace seeopt {

/// Uniform grid on [0, T] with N steps, t_i = i*T/N.
struct TimeGrid {
  TimeGrid(double horizon, int n_steps);

  double horizon;
  int n_steps;

  double dt() const { return horizon / n_steps; }
  double t(int i) const { return horizon * i / n_steps; }
};

/// Truncated eigenbasis of the generator: the state space keeps the leading
/// n_state modes, the semigroup acts diagonally as e^{lambda_k t}. The
/// truncation is self-adjoint, so the adjoint semigroup is the same action.
class GalerkinSpace {
 public:
  GalerkinSpace(int n_state, int n_control, int n_noise, Eigen::VectorXd eigenvalues);

  int n_state() const { return n_state_; }
  int n_control() const { return n_control_; }
  int n_noise() const { return n_noise_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

  /// (e^{lambda_k t})_k, t >= 0.
  Eigen::VectorXd semigroup_factors(double t) const;

  /// S(t) v. Rejects t < 0 and dimension mismatches.
  Eigen::VectorXd semigroup_apply(double t, const Eigen::VectorXd& v) const;

 private:
  int n_state_;
  int n_control_;
  int n_noise_;
  Eigen::VectorXd eigenvalues_;
};

namespace detail {

/// SplitMix64 finalizer; the avalanche primitive for the counter-based RNG.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Standard normal as a pure function of (seed, path, step, mode): hash the
/// counter tuple, derive two uniforms, Box-Muller. Makes every increment
/// reproducible independent of evaluation order and worker count.
double counter_gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                        std::uint64_t mode);

/// Gaussian increments dW indexed (path, step, mode), mean 0, variance dt
/// per mode; bit-reproducible for fixed (seed, dimensions, grid).
class NoiseEnsemble {
 public:
  NoiseEnsemble() = default;
  NoiseEnsemble(std::int64_t seed, int n_paths, int n_steps, int n_noise, double dt);

  std::int64_t seed() const { return seed_; }
  int n_paths() const { return n_paths_; }
  int n_steps() const { return n_steps_; }
  int n_noise() const { return n_noise_; }
  double dt() const { return dt_; }

  Eigen::Map<const Eigen::VectorXd> dw(int path, int step) const {
    return increments_.vec(path, step);
  }
  Eigen::Map<Eigen::VectorXd> dw(int path, int step) {
    return increments_.vec(path, step);
  }

  const PathArray& increments() const { return increments_; }

  /// Identity of the sample; used to enforce common-random-numbers
  /// discipline across an epsilon ladder.
  std::uint64_t fingerprint() const;

  /// Pairwise-summed increments: the same Brownian paths on a grid with
  /// half the steps. Requires an even step count.
  NoiseEnsemble coarsened() const;

 private:
  std::int64_t seed_ = 0;
  int n_paths_ = 0;
  int n_steps_ = 0;
  int n_noise_ = 0;
  double dt_ = 0.0;
  PathArray increments_;
};

/// Draws the ensemble for (space, grid); identical inputs give identical
/// output regardless of `workers`.
NoiseEnsemble sample_noise(const GalerkinSpace& space, const TimeGrid& grid,
                           int n_paths, std::int64_t seed, int workers = 1);

}  // namespace seeopt
