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

/// First-order sensitivity of the state flow in a control direction:
/// the solution of the linearized evolution equation around (X*, nu*),
/// driven by the same noise as the base ensemble and started at zero.
struct VariationalEnsemble {
  PathArray p;  // (n_paths, n_steps + 1, n_state); p[., 0] = 0
  std::uint64_t noise_fingerprint = 0;

  int n_paths() const { return p.n_paths(); }
  int n_steps() const { return p.n_slots() - 1; }
  Eigen::Map<const Eigen::VectorXd> at(int path, int i) const { return p.vec(path, i); }
};

/// One measured point of an epsilon ladder.
struct RatePoint {
  double eps = 0.0;
  double value = 0.0;
  double std_error = 0.0;
};

/// Outcome of an epsilon-ladder measurement: the per-epsilon values, the
/// fitted log-log slope when the values support one, and the verdict
/// against the declared band.
struct RateReport {
  std::string name;
  std::vector<RatePoint> points;  // epsilon decreasing
  double slope = 0.0;
  double intercept = 0.0;
  bool slope_valid = false;
  bool pass = false;
  std::string note;
};

/// Verdict of a two-sided identity check.
struct DualityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;        // mean over paths of (lhs - rhs)
  double std_error = 0.0;  // standard error of the pathwise gap
  double budget = 0.0;     // discretization allowance supplied by the caller
  bool pass = false;
  std::string note;
};

/// Verdict of the first-order optimality inequality over an epsilon ladder.
struct InequalityReport {
  std::vector<RatePoint> lhs_by_eps;
  std::vector<double> tolerance_by_eps;
  bool pass = false;
  std::string warning;  // set when the base control is not certified optimal
  std::string note;
};

/// Tunable pass bands for the ladder checks.
struct RateBands {
  double slope_lo = 1.8;
  double slope_hi = 2.2;
  double decay_factor = 0.1;  // smallest-eps value vs largest-eps value
  double sigma_mult = 3.0;
  double linear_floor = 1e-10;  // relative floor for exactly-linear systems
};

/// Requires an epsilon ladder with >= 4 strictly decreasing positive
/// entries; throws otherwise.
void validate_epsilon_ladder(const std::vector<double>& epsilons);

/// Integrates the linearized dynamics
///   dp = (A p + b_x(X*, nu*) p + b_nu(X*, nu*) v) dt
///        + (sigma_x(X*, nu*) p + sigma_nu(X*, nu*) v) dW
/// with the exponential Euler recursion on the noise stored in the star
/// ensemble. p vanishes identically when the direction is zero.
VariationalEnsemble integrate_variational(const ProblemSpec& spec, const GalerkinSpace& space,
                                          const TimeGrid& grid, const StateEnsemble& star,
                                          const ControlProcess& star_control,
                                          const ControlProcess& direction, int workers = 1);

/// Measures m(eps) = sup_i mean |X_eps(t_i) - X*(t_i)|^2 over the ladder
/// (common noise across every eps) and fits the log-log slope; passes when
/// the slope lies in [bands.slope_lo, bands.slope_hi]. All-zero differences
/// short-circuit to a pass with a note.
RateReport check_rate_O_eps2(const ProblemSpec& spec, const GalerkinSpace& space,
                             const TimeGrid& grid, const ControlProcess& star_control,
                             const ControlProcess& direction,
                             const std::vector<double>& epsilons, const NoiseEnsemble& noise,
                             const RateBands& bands = {}, int workers = 1);

/// Measures e(eps) = sup_i mean |(X_eps(t_i) - X*(t_i))/eps - p(t_i)|^2.
/// Passes when either every value sits at the linear floor (flows that are
/// exactly linear in the control), or the ladder is nonincreasing within
/// 2 standard errors and the smallest-eps value is <= decay_factor times
/// the largest.
RateReport check_eta_vanishes(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const ControlProcess& star_control,
                              const ControlProcess& direction,
                              const std::vector<double>& epsilons, const NoiseEnsemble& noise,
                              const RateBands& bands = {}, int workers = 1);

/// Checks the first-order cost expansion: the cost difference
/// J(nu* + eps v) - J(nu*) minus the predicted terms
///   eps mean<terminal_gradient(X*_N), p_N>
///   + eps mean sum_i running_cost_dx(X*_i, nu*_i) . p_i dt
///   + mean sum_i (ell(X*_i, nu_eps_i) - ell(X*_i, nu*_i)) dt
/// leaves a remainder r(eps) with r(eps)/eps decaying over the ladder and
/// r(eps_min)/eps_min below decay_factor times the linear scale plus
/// sigma_mult standard errors. Pathwise-zero remainders short-circuit to a
/// pass with a note.
RateReport check_variational_equation(const ProblemSpec& spec, const GalerkinSpace& space,
                                      const TimeGrid& grid, const ControlProcess& star_control,
                                      const ControlProcess& direction,
                                      const std::vector<double>& epsilons,
                                      const NoiseEnsemble& noise, const RateBands& bands = {},
                                      int workers = 1);

/// Checks the adjoint duality identity
///   mean<Y_N, p_N> = - mean sum_i running_cost_dx . p_i dt
///                    + mean sum_i <drift_dnu v_i, Y_i> dt
///                    + mean sum_i <diffusion_dnu v_i, Z_i>_F dt
/// by Monte Carlo with left-point quadrature. Passes iff
/// |gap| <= sigma_mult * std_error + budget, where budget is the caller's
/// discretization allowance (typically from a grid-refinement pair).
DualityReport check_duality(const ProblemSpec& spec, const GalerkinSpace& space,
                            const TimeGrid& grid, const StateEnsemble& star,
                            const ControlProcess& star_control, const AdjointPair& adjoint,
                            const ControlProcess& direction, double budget,
                            const RateBands& bands = {}, int workers = 1);

/// Evaluates, for each eps, the first-order optimality expression
///   eps mean<Y_N, p_N> + eps mean sum_i running_cost_dx . p_i dt
///   + mean sum_i (dH - <db, Y_i> - <dsigma, Z_i>_F) dt
/// where dH, db, dsigma are differences of two evaluations of the base
/// maps at nu_eps vs nu*. Passes iff every value is >= -(decay_factor *
/// linear scale + sigma_mult * std_error). When the base control's
/// optimality residual exceeds its declared tolerance the report carries a
/// warning (the inequality's premise fails) but is still evaluated.
InequalityReport check_variational_inequality(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const StateEnsemble& star, const ControlProcess& star_control, const AdjointPair& adjoint,
    const ControlProcess& direction, const std::vector<double>& epsilons,
    double optimality_residual, double optimality_tol, const RateBands& bands = {},
    int workers = 1);

}  // namespace seeopt
