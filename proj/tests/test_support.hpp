#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "seeopt/config.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/scenarios.hpp"

namespace seeopt::testsupport {

/// Brownian motion with constant diagonal diffusion s0, drift nu, zero
/// generator, and terminal cost <rho, x> + |x|^2 / 2. The adjoint pair is
/// known in closed form: Y_t = rho + X_t + integral of nu over [t, T], and
/// Z_t = s0 * I.
inline ProblemSpec additive_quadratic_problem(int n, double s0,
                                              const Eigen::VectorXd& rho) {
  ProblemSpec spec;
  spec.n_state = n;
  spec.n_control = n;
  spec.n_noise = n;
  spec.x0 = Eigen::VectorXd::Constant(n, 0.3);
  spec.admissible = AdmissibleSet::unconstrained();
  spec.drift = [](const Eigen::VectorXd&, const Eigen::VectorXd& nu) {
    return Eigen::VectorXd(nu);
  };
  spec.drift_dx = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(n, n));
  };
  spec.drift_dnu = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n));
  };
  spec.diffusion = [n, s0](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(s0 * Eigen::MatrixXd::Identity(n, n));
  };
  spec.diffusion_dx = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return MatList(n, Eigen::MatrixXd::Zero(n, n));
  };
  spec.diffusion_dnu = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return MatList(n, Eigen::MatrixXd::Zero(n, n));
  };
  spec.running_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 0.0; };
  spec.running_cost_dx = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(n));
  };
  spec.running_cost_dnu = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(n));
  };
  spec.terminal_cost = [rho](const Eigen::VectorXd& x) {
    return rho.dot(x) + 0.5 * x.squaredNorm();
  };
  spec.terminal_gradient = [rho](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(rho + x);
  };
  return spec;
}

/// Scalar controlled integrator: n = 1, lambda = 0, drift nu, no noise,
/// cost integral |nu|^2 dt + x(T). The minimizer is nu* = -1/2 with optimal
/// cost -1/4 when x0 = 0 and T = 1.
inline LqSpec scalar_lq() {
  LqSpec lq;
  lq.n_state = 1;
  lq.n_control = 1;
  lq.n_noise = 1;
  lq.x0 = Eigen::VectorXd::Zero(1);
  lq.B = Eigen::MatrixXd::Identity(1, 1);
  lq.D = MatList(1, Eigen::MatrixXd::Zero(1, 1));
  lq.rho = Eigen::VectorXd::Ones(1);
  return lq;
}

inline ScenarioConfig scenario_config(const std::string& name, int paths = 0,
                                      int steps = 0) {
  ScenarioConfig config;
  config.scenario = name;
  if (paths > 0) config.n_paths = paths;
  if (steps > 0) config.n_steps = steps;
  return config;
}

}  // namespace seeopt::testsupport
