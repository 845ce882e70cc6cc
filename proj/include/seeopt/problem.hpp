#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seeopt/galerkin.hpp"

namespace seeopt {

using MatList = std::vector<Eigen::MatrixXd>;

/// Convex admissible set for the control values: the whole control space or
/// a coordinatewise box.
class AdmissibleSet {
 public:
  static AdmissibleSet unconstrained();
  static AdmissibleSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  bool is_unconstrained() const { return unconstrained_; }
  const Eigen::VectorXd& lower() const { return lo_; }
  const Eigen::VectorXd& upper() const { return hi_; }

  /// Euclidean projection; the identity when unconstrained. Idempotent.
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const;

 private:
  AdmissibleSet() = default;
  bool unconstrained_ = true;
  Eigen::VectorXd lo_, hi_;
};

/// Coefficient bundle of the control problem: drift b, diffusion sigma,
/// running cost ell, terminal cost phi, and their analytic derivatives.
///
/// Shapes (with n = n_state, m = n_control, r = n_noise):
///   drift(x, nu)            -> n-vector
///   diffusion(x, nu)        -> n x r matrix
///   drift_dx(x, nu)         -> n x n Jacobian, entry (k, j) = d b_k / d x_j
///   drift_dnu(x, nu)        -> n x m Jacobian
///   diffusion_dx(x, nu)     -> list of n matrices, [j] = d sigma / d x_j
///   diffusion_dnu(x, nu)    -> list of m matrices, [c] = d sigma / d nu_c
///   running_cost_dx / _dnu  -> n- / m-vector gradients
///   terminal_gradient(x)    -> n-vector
///
/// All callables must be pure; the bundle is immutable and shareable.
struct ProblemSpec {
  int n_state = 0;
  int n_control = 0;
  int n_noise = 0;

  Eigen::VectorXd x0;
  AdmissibleSet admissible = AdmissibleSet::unconstrained();

  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> diffusion;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> running_cost;
  std::function<double(const Eigen::VectorXd&)> terminal_cost;

  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> drift_dx;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> drift_dnu;
  std::function<MatList(const Eigen::VectorXd&, const Eigen::VectorXd&)> diffusion_dx;
  std::function<MatList(const Eigen::VectorXd&, const Eigen::VectorXd&)> diffusion_dnu;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> running_cost_dx;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> running_cost_dnu;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal_gradient;

  /// Fault injection for falsification tests: omits the sigma_nu : Z coupling
  /// term from the Hamiltonian control gradient and from the duality balance,
  /// modeling a missing-term assembly bug. The simulated dynamics and the
  /// coefficient derivatives themselves stay faithful.
  bool drop_noise_control_coupling = false;
};

/// Euclidean projection of a control value onto the admissible set.
Eigen::VectorXd project_onto_admissible(const ProblemSpec& spec, const Eigen::VectorXd& nu);

/// Linear-quadratic specialization: drift B nu, diffusion D nu (linear in
/// nu), running cost |nu|^2, terminal cost either <rho, x> or a custom
/// smooth functional.
struct LqSpec {
  int n_state = 0;
  int n_control = 0;
  int n_noise = 0;

  Eigen::VectorXd x0;
  AdmissibleSet admissible = AdmissibleSet::unconstrained();

  Eigen::MatrixXd B;             // n_state x n_control
  MatList D;                     // D[c] = D(e_c), each n_state x n_noise

  bool linear_terminal = true;
  Eigen::VectorXd rho;           // gradient of <rho, x>; used when linear_terminal
  std::function<double(const Eigen::VectorXd&)> terminal_cost;          // otherwise
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal_gradient;

  Eigen::MatrixXd apply_D(const Eigen::VectorXd& nu) const;
  Eigen::VectorXd apply_D_adjoint(const Eigen::MatrixXd& z) const;

  /// Materialize the generic coefficient bundle.
  ProblemSpec to_problem() const;
};

/// LqSpec instance with B = id, D nu = <nu, h> diag(sqrt(q)), terminal
/// <rho, x>; q must be positive (nuclear covariance eigenvalues).
LqSpec make_diagonal_lq(const GalerkinSpace& space, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& q, const Eigen::VectorXd& rho,
                        const Eigen::VectorXd& x0);

/// One derivative's worst observed finite-difference mismatch.
struct DerivativeCheck {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct DerivativeReport {
  std::vector<DerivativeCheck> checks;
  bool all_pass = false;
  double tolerance = 1e-6;
};

/// Verifies every declared derivative against central finite differences at
/// n_samples random (x, nu) points. Failures are reported, not thrown.
DerivativeReport derivative_selftest(const ProblemSpec& spec, int n_samples,
                                     std::int64_t seed, double tolerance = 1e-6);

}  // namespace seeopt
