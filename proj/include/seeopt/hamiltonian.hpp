#pragma once

#include <Eigen/Dense>

#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/problem.hpp"

namespace seeopt {

/// H(x, nu, y, z) = ell(x, nu) + <b(x, nu), y> + <sigma(x, nu), z>_F.
double hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& z);

/// ell_x + b_x^T y + sigma_x^T : z, the x-gradient of the Hamiltonian.
/// The diffusion term contracts over both state and noise indices:
/// (sigma_x^T z)_j = sum_{k,m} d sigma_{km} / d x_j * z_{km}.
Eigen::VectorXd grad_x_hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& z);

/// ell_nu + b_nu^T y + sigma_nu^T : z, the control gradient.
Eigen::VectorXd grad_nu_hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& z);

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of the cost functional with left-point quadrature:
/// mean over paths of sum_i ell(X_i, nu_i) dt + phi(X_N), with its standard
/// error.
MeanSe evaluate_cost(const ProblemSpec& spec, const TimeGrid& grid,
                     const StateEnsemble& ensemble, const ControlProcess& control,
                     int workers = 1);

/// Pathwise cost values (quadrature + terminal), one entry per path.
Eigen::VectorXd pathwise_cost(const ProblemSpec& spec, const TimeGrid& grid,
                              const StateEnsemble& ensemble, const ControlProcess& control,
                              int workers = 1);

/// Mean and standard error of a sample.
MeanSe mean_se(const Eigen::VectorXd& values);

/// Verifies grad_x_hamiltonian and grad_nu_hamiltonian against central
/// finite differences of the scalar Hamiltonian at n_samples random
/// (x, nu, y, z) tuples.
DerivativeReport hamiltonian_derivative_selftest(const ProblemSpec& spec, int n_samples,
                                                 std::int64_t seed, double tolerance = 1e-6);

}  // namespace seeopt
