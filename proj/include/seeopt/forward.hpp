#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>

#include "seeopt/galerkin.hpp"
#include "seeopt/path_array.hpp"
#include "seeopt/problem.hpp"

namespace seeopt {

/// Control path, piecewise constant on [t_i, t_{i+1}). Deterministic
/// controls share one value row across paths; per-path controls carry a
/// full (path, step) table. Values are expected to lie in the admissible
/// set; adaptedness is structural (per-path values may only be produced
/// from information available at t_i).
class ControlProcess {
 public:
  /// Empty control (no steps); assign a factory result before use.
  ControlProcess() = default;

  /// values: n_control x n_steps, column i = value on [t_i, t_{i+1}).
  static ControlProcess deterministic(Eigen::MatrixXd values);
  static ControlProcess constant(const Eigen::VectorXd& value, int n_steps);
  static ControlProcess zero(int n_control, int n_steps);
  static ControlProcess per_path(PathArray values);

  bool is_deterministic() const { return deterministic_; }
  int n_control() const;
  int n_steps() const;
  int n_paths() const;  // 1 for deterministic controls

  Eigen::Map<const Eigen::VectorXd> value(int path, int step) const;

  /// Deterministic accessor; throws for per-path controls.
  const Eigen::MatrixXd& values() const;

  /// this + scale * other (per-path if either side is).
  ControlProcess axpy(double scale, const ControlProcess& other) const;

  /// Largest distance of any value from the admissible set.
  double admissibility_gap(const AdmissibleSet& set) const;

  /// Time-L2 norm sqrt(sum_i |nu_i|^2 dt), path-averaged for per-path
  /// controls.
  double time_l2_norm(double dt) const;

 private:
  bool deterministic_ = true;
  Eigen::MatrixXd det_values_;  // n_control x n_steps
  PathArray path_values_;
};

/// Distance between two aligned controls in time-L2, path-averaged.
double control_distance(const ControlProcess& a, const ControlProcess& b, double dt);

/// The same piecewise-constant control on a grid with `factor` times the
/// steps: every value repeated `factor` times. Exact as a function of time.
ControlProcess refine_control(const ControlProcess& control, int factor);

/// Monte Carlo ensemble of forward state paths on the grid; states(p, i)
/// holds X(t_i) for path p, i = 0..N. Keeps the driving noise so backward
/// solvers can pair each transition with its increment.
struct StateEnsemble {
  PathArray states;  // (n_paths, n_steps + 1, n_state)
  NoiseEnsemble noise;
  std::int64_t seed = 0;

  int n_paths() const { return states.n_paths(); }
  int n_steps() const { return states.n_slots() - 1; }

  Eigen::Map<const Eigen::VectorXd> state(int p, int i) const { return states.vec(p, i); }
  std::uint64_t noise_fingerprint() const { return noise.fingerprint(); }
};

/// sup over grid points of the ensemble mean of |X(t_i)|^2; the magnitude
/// reference for relative floors.
double state_scale(const StateEnsemble& ensemble);

/// Integrates the controlled evolution equation in mild form with the
/// exponential Euler recursion
///   X_{i+1} = S(dt) (X_i + dt b(X_i, nu_i) + sigma(X_i, nu_i) dW_i),
/// one path per noise path. Non-finite states abort with a diagnostic
/// naming path and step.
StateEnsemble integrate_forward(const ProblemSpec& spec, const GalerkinSpace& space,
                                const TimeGrid& grid, const ControlProcess& control,
                                const NoiseEnsemble& noise, int workers = 1);

/// Integrates the base control and its perturbation nu_star + eps * dir
/// with the same noise (common random numbers). The perturbed control must
/// stay admissible.
std::pair<StateEnsemble, StateEnsemble> perturbed_pair(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const ControlProcess& nu_star, const ControlProcess& dir, double eps,
    const NoiseEnsemble& noise, int workers = 1);

}  // namespace seeopt
