#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/path_array.hpp"
#include "seeopt/problem.hpp"

namespace seeopt {

/// Polynomial regression basis for conditional expectations: all monomials
/// of total degree <= degree in the selected state coordinates. Degree 2
/// with a active modes gives 1 + a + a(a+1)/2 features.
struct RegressionBasis {
  int degree = 2;
  std::vector<int> active_modes;

  /// degree 2 on the first min(n_state, 4) coordinates.
  static RegressionBasis defaults(int n_state);

  int feature_count(int at_degree) const;

  /// Writes the feature row for state x; row.size() must equal
  /// feature_count(at_degree).
  void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, int at_degree,
                Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) const;
};

/// Per-run record of how the backward regressions behaved.
struct AdjointDiagnostics {
  std::vector<int> degree_by_step;  // degree actually used at each step
  int fallback_count = 0;           // steps where the degree was reduced
  double z_noise_floor = 0.0;       // 3x the largest cross-validated
                                    // standard error of a fitted Z entry
  double max_abs_z = 0.0;
  std::vector<std::string> notes;
};

/// Adjoint pair on the same (path, step) table as the forward ensemble.
/// Y holds state-vectors, Z holds state x noise matrices; Z at the final
/// step is identically zero (the scheme defines Z on [t_i, t_{i+1}) only).
struct AdjointPair {
  PathArray Y;  // (n_paths, n_steps + 1, n_state)
  PathArray Z;  // (n_paths, n_steps + 1, n_state, n_noise)
  std::uint64_t noise_fingerprint = 0;
  AdjointDiagnostics diagnostics;

  int n_paths() const { return Y.n_paths(); }
  int n_steps() const { return Y.n_slots() - 1; }

  Eigen::Map<const Eigen::VectorXd> y(int p, int i) const { return Y.vec(p, i); }
  Eigen::Map<const Eigen::MatrixXd> z(int p, int i) const { return Z.mat(p, i); }
};

/// Backward regression scheme for the adjoint pair:
///   Y_N = terminal_gradient(X_N);
///   for i = N-1..0, with Ytil = S*(dt) Y_{i+1} and yhat its regression
///   on basis(X_i):
///     Z_i = (1/dt) Regress[(Ytil - yhat) dW_i^T | basis(X_i)],
///     Y_i = yhat + dt grad_x_hamiltonian(X_i, nu_i, yhat, Z_i).
/// Centering the Z target on the regression residual keeps Z exactly zero
/// whenever Ytil is a function of the regressors, and the driver evaluated
/// at yhat keeps Y_i a function of time-t_i information only.
/// Rank-deficient design matrices trigger a logged degree reduction;
/// non-finite values abort.
AdjointPair solve_bsee(const ProblemSpec& spec, const GalerkinSpace& space,
                       const TimeGrid& grid, const StateEnsemble& ensemble,
                       const ControlProcess& control, const RegressionBasis& basis,
                       int workers = 1);

/// Driverless fast path for problems whose adjoint equation has no Y or Z
/// dependence in the driver. Linear terminal cost gives the closed form
/// Y(t_i) = S*(T - t_i) rho with Z = 0, exact to machine precision; other
/// terminal costs run the regression recursion with the driver skipped.
AdjointPair solve_bsee_lq_explicit(const LqSpec& lq, const GalerkinSpace& space,
                                   const TimeGrid& grid, const StateEnsemble& ensemble,
                                   const RegressionBasis& basis, int workers = 1);

/// Per-path defect of the pair in the summed mild form over [t_i, T]:
///   Y_i - S*(T-t_i) Y_N - sum_{j>=i} S*(t_j-t_i) [dt g_j - Z_j dW_j],
/// g_j = grad_x_hamiltonian at step j. The Monte Carlo mean should vanish
/// within sampling error when (Y, Z) solves the equation.
Eigen::MatrixXd mild_residual(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const StateEnsemble& ensemble,
                              const ControlProcess& control, const AdjointPair& pair,
                              int from_step);

}  // namespace seeopt
