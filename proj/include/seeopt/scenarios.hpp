#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "seeopt/adjoint.hpp"
#include "seeopt/config.hpp"
#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/optimizer.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/variational.hpp"

namespace seeopt {

/// A fully materialized experiment: spaces, coefficients, solver settings,
/// and the perturbation direction used by the verification harness. The
/// problem bundle already carries any requested mutation; `lq` is set for
/// the linear-quadratic scenarios and always unmutated (it feeds the
/// closed-form oracle, not the code under test).
struct Scenario {
  std::string name;
  GalerkinSpace space;
  TimeGrid grid;
  ProblemSpec problem;
  std::optional<LqSpec> lq;

  RegressionBasis basis;
  OptimizerConfig optimizer;
  std::vector<double> epsilons;
  RateBands bands;

  int n_paths = 0;
  std::int64_t seed = 0;
  int workers = 1;
  Mutation mutation = Mutation::none;
  double certificate_tol_factor = 1e-3;
  Eigen::VectorXd direction_value;  // admissible perturbation direction (control space)
  std::string out_dir;
};

/// Injects the named implementation fault, leaving the base maps intact;
/// imitates a hand-coded gradient or assembly bug so harness checks can
/// demonstrate detection power. flip-b-nu-sign and drop-ell-x-term break a
/// derivative callback; drop-sigma-nu-term omits the sigma_nu : Z coupling
/// from the Hamiltonian gradient and the duality balance.
ProblemSpec apply_mutation(const ProblemSpec& spec, Mutation m);

/// Builds the named scenario with config overrides applied on top of the
/// scenario defaults (zero-valued dimension fields select the defaults).
///
///   lq-linear-phi     diagonal LQ, n = 8, lambda_k = -k^2/2, terminal
///                     <rho, x>; every module has a closed-form reference.
///   lq-quadratic-phi  same dynamics, terminal |x|^2/2; the adjoint is
///                     state-dependent, so the regression carries weight.
///   tanh-drift        n = 4, lambda_k = -k/2, tanh drift and diffusion
///                     nonlinearities with control-modulated noise.
Scenario make_scenario(const ScenarioConfig& config);

/// The harness perturbation direction as a piecewise-constant process:
/// scenario.direction_value scaled by 1 + cos(pi t_i)/2 (positive, so the
/// time integral of any aligned quantity cannot cancel).
ControlProcess scenario_direction(const Scenario& scenario);

}  // namespace seeopt
