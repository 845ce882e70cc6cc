#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "seeopt/adjoint.hpp"
#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/problem.hpp"

namespace seeopt {

/// Projected-gradient settings. step_size is the nominal step; rejected
/// steps halve a persistent working copy.
struct OptimizerConfig {
  double step_size = 0.1;
  int max_iters = 200;
  double grad_tol = 1e-6;  // time-L2 norm of the projected gradient
  bool use_armijo = true;
  double armijo_factor = 0.5;
  double armijo_slope = 1e-4;
  int max_backtracks = 30;

  void validate() const;
};

/// One optimizer iteration as recorded in the trace. Backtracking-phase
/// accepted steps have strictly nonincreasing cost; polish-phase steps
/// (fixed step size, no cost test) are marked so the monotonicity property
/// is scoped to the steps that actually enforced it.
struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double cost_se = 0.0;
  double grad_norm = 0.0;  // projected-gradient time-L2 norm at this iterate
  double gamma = 0.0;      // step size actually applied
  int backtracks = 0;
  bool accepted = false;
  bool polish = false;
};

/// Diagnostics of a single gradient step.
struct StepDiagnostics {
  double cost_before = 0.0;
  double cost_before_se = 0.0;
  double cost_after = 0.0;
  double cost_after_se = 0.0;
  double grad_norm = 0.0;
  double gamma_used = 0.0;
  int backtracks = 0;
  bool accepted = false;
  std::string note;
};

/// A probe point where the first-order inequality was violated.
struct ProbeViolation {
  int step = 0;
  int probe = 0;
  double value = 0.0;
  double std_error = 0.0;
};

/// Evidence that a control satisfies the first-order necessary condition:
/// at an optimum, E<grad_nu_hamiltonian, nu*(t) - nu> <= 0 for every
/// admissible nu and a.e. t. Carries the run identity for reproducibility.
struct OptimalityCertificate {
  double tol = 0.0;
  double final_cost = 0.0;
  double final_cost_se = 0.0;
  double grad_time_l2 = 0.0;      // time-L2 norm of the mean projected gradient
  double grad_norm_budget = 0.0;  // 3x propagated MC error of that norm
  double max_probe_value = 0.0;   // worst E<g, nu* - probe> over (t, probe)
  bool pass = false;
  std::vector<double> grad_norm_by_step;
  std::vector<ProbeViolation> violations;
  std::vector<IterationRecord> trace;
  std::int64_t seed = 0;
  OptimizerConfig config;
};

/// Converged control with its search history.
struct OptimizerResult {
  ControlProcess control;
  std::vector<IterationRecord> trace;
  double final_cost = 0.0;
  double final_cost_se = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
};

/// Closed-form optimum of the linear-quadratic problem with terminal cost
/// <rho, x>: the Hamiltonian |nu|^2 + <B nu, y> + <D nu, z>_F is minimized
/// pointwise at nu = -(B^T y + D^* z)/2, which under the deterministic
/// adjoint Y(t) = S*(T - t) rho, Z = 0 gives nu*(t_i) = -B^T S*(T-t_i) rho / 2.
struct LqSolution {
  ControlProcess control;
  double optimal_cost = 0.0;  // left-point quadrature of the closed form;
                              // equals the expected discrete cost at nu* exactly
};

/// Requires linear terminal cost and an unconstrained admissible set.
LqSolution solve_lq_analytic(const LqSpec& lq, const GalerkinSpace& space, const TimeGrid& grid);

/// One projected-gradient step: integrate forward under nu_k, solve the
/// adjoint pair, average grad_nu_hamiltonian over paths (deterministic
/// controls) and set nu_{k+1} = project(nu_k - gamma g) with Armijo
/// backtracking on the Monte Carlo cost (common noise). A step that fails
/// to decrease the cost after max_backtracks halvings is rejected.
std::pair<ControlProcess, StepDiagnostics> smp_gradient_step(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const ControlProcess& nu_k, const NoiseEnsemble& noise, const RegressionBasis& basis,
    const OptimizerConfig& config, double gamma, int workers = 1);

/// Runs smp_gradient_step until the projected-gradient norm falls under
/// grad_tol or max_iters is reached. The noise ensemble is fixed across
/// iterations, so the search is a deterministic function of its inputs.
///
/// The adjoint-based gradient estimates the population gradient (the
/// regression averages the sample noise out), while Armijo compares sample
/// costs; near the O(1/sqrt(n_paths)) floor the two disagree and every
/// backtracked step is rejected even though the iteration still contracts.
/// When that happens after at least one accepted step, the search switches
/// to a polish phase: fixed steps at the last accepted size, no cost test,
/// trace rows marked polish. A rejection before any acceptance means the
/// direction never descends (not a noise-floor artifact), and the search
/// stops where it stands.
OptimizerResult run_optimizer(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const ControlProcess& nu0,
                              const NoiseEnsemble& noise, const RegressionBasis& basis,
                              const OptimizerConfig& config, int workers = 1);

/// Probe values for the first-order inequality: the origin (projected),
/// coordinate steps, box vertices when the set is a box, and seeded random
/// points, all projected into the admissible set.
std::vector<Eigen::VectorXd> make_probe_set(const AdmissibleSet& set, int n_control,
                                            int n_random, std::uint64_t seed);

/// Certifies the first-order necessary condition at (control, adjoint):
/// for every grid step and probe, E<grad_nu_hamiltonian, control(t) - probe>
/// must stay below tol plus 3 standard errors; unconstrained sets must also
/// keep the time-L2 norm of the mean gradient below tol plus its MC budget.
OptimalityCertificate verify_maximum_principle(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const StateEnsemble& ensemble, const ControlProcess& control, const AdjointPair& adjoint,
    const std::vector<Eigen::VectorXd>& probe_controls, double tol, int workers = 1);

/// Directional derivative of the Monte Carlo cost along one direction,
/// estimated with common random numbers.
struct GateauxProbe {
  int probe = 0;
  double derivative = 0.0;
  double std_error = 0.0;  // of the pathwise difference quotient
  bool violation = false;
};

/// Descent-freeness evidence at a claimed optimum, built from the cost
/// alone (no derivative callbacks): along each admissible segment
/// control -> probe, the cost must not decrease to first order.
struct GateauxReport {
  double eps = 0.0;
  double tol = 0.0;
  std::vector<GateauxProbe> probes;
  double worst = 0.0;  // largest violation margin observed
  bool pass = false;
};

/// For each probe value nu_p, measures the derivative of eps ->
/// cost(control + eps (nu_p - control)) at 0 by a CRN difference quotient:
/// central when the set is unconstrained (where it must vanish within
/// tol + 3 SE), forward otherwise (where it must be >= -(tol + 3 SE); the
/// segment toward an admissible point stays admissible by convexity).
/// Detects optimizer fixed points that are not actual cost minimizers,
/// which a gradient-consistency check alone cannot.
GateauxReport verify_descent_free(const ProblemSpec& spec, const GalerkinSpace& space,
                                  const TimeGrid& grid, const ControlProcess& control,
                                  const NoiseEnsemble& noise,
                                  const std::vector<Eigen::VectorXd>& probe_controls,
                                  double eps, double tol, int workers = 1);

}  // namespace seeopt
