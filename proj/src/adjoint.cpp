#include "seeopt/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seeopt/hamiltonian.hpp"
#include "seeopt/parallel.hpp"

namespace seeopt {

RegressionBasis RegressionBasis::defaults(int n_state) {
  RegressionBasis basis;
  basis.degree = 2;
  const int a = std::min(n_state, 4);
  basis.active_modes.resize(static_cast<std::size_t>(a));
  for (int k = 0; k < a; ++k) basis.active_modes[static_cast<std::size_t>(k)] = k;
  return basis;
}

int RegressionBasis::feature_count(int at_degree) const {
  const int a = static_cast<int>(active_modes.size());
  if (at_degree < 0) {
    throw std::invalid_argument("RegressionBasis: negative degree");
  }
  // monomials of total degree <= d in a variables: C(a + d, d)
  long long count = 1;
  for (int i = 1; i <= at_degree; ++i) {
    count = count * (a + i) / i;
  }
  return static_cast<int>(count);
}

namespace {

void fill_monomials(const std::vector<double>& vals, std::size_t var, int remaining,
                    double acc, double* row, int& pos) {
  if (var == vals.size()) {
    row[pos++] = acc;
    return;
  }
  double power = 1.0;
  for (int e = 0; e <= remaining; ++e) {
    fill_monomials(vals, var + 1, remaining - e, acc * power, row, pos);
    power *= vals[var];
  }
}

}  // namespace

void RegressionBasis::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, int at_degree,
                               Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) const {
  const int want = feature_count(at_degree);
  if (static_cast<int>(row.size()) != want) {
    throw std::invalid_argument("RegressionBasis::evaluate: row size mismatch");
  }
  std::vector<double> vals(active_modes.size());
  for (std::size_t k = 0; k < active_modes.size(); ++k) {
    const int mode = active_modes[k];
    if (mode < 0 || mode >= x.size()) {
      throw std::invalid_argument("RegressionBasis::evaluate: active mode out of range");
    }
    vals[k] = x[mode];
  }
  std::vector<double> buffer(static_cast<std::size_t>(want));
  int pos = 0;
  fill_monomials(vals, 0, at_degree, 1.0, buffer.data(), pos);
  for (int c = 0; c < want; ++c) row[c] = buffer[static_cast<std::size_t>(c)];
}

namespace {

/// One backward step's design matrix with its factorization; the degree is
/// lowered until the design has full column rank on this ensemble.
struct StepFit {
  Eigen::MatrixXd phi;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Eigen::VectorXd leverage;
  int degree_used = 0;
};

Eigen::MatrixXd design_matrix(const PathArray& states, int step, const RegressionBasis& basis,
                              int degree, int workers) {
  const int n_paths = states.n_paths();
  Eigen::MatrixXd phi(n_paths, basis.feature_count(degree));
  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t p) {
    const int pi = static_cast<int>(p);
    basis.evaluate(states.vec(pi, step), degree, phi.row(pi));
  });
  return phi;
}

StepFit fit_step(const PathArray& states, int step, const RegressionBasis& basis, int workers) {
  StepFit fit;
  for (int d = std::max(basis.degree, 0);; --d) {
    fit.phi = design_matrix(states, step, basis, d, workers);
    fit.qr.compute(fit.phi);
    if (fit.qr.rank() == fit.phi.cols() || d == 0) {
      fit.degree_used = d;
      break;
    }
  }
  const int k = static_cast<int>(fit.phi.cols());
  Eigen::MatrixXd q1 = fit.phi * fit.qr.colsPermutation();
  const Eigen::MatrixXd r1 =
      fit.qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  r1.triangularView<Eigen::Upper>().template solveInPlace<Eigen::OnTheRight>(q1);
  fit.leverage = q1.rowwise().squaredNorm();
  return fit;
}

struct FitResult {
  Eigen::MatrixXd fitted;   // n_paths x n_targets
  Eigen::VectorXd cv_se;    // per target: leave-one-out rmse * sqrt(k/n)
};

FitResult regress(const StepFit& fit, const Eigen::MatrixXd& targets) {
  FitResult out;
  const Eigen::MatrixXd coeffs = fit.qr.solve(targets);
  out.fitted = fit.phi * coeffs;
  const auto n = fit.phi.rows();
  const auto k = fit.phi.cols();
  const double mean_leverage = static_cast<double>(k) / static_cast<double>(n);
  out.cv_se.resize(targets.cols());
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double denom = std::max(1e-12, 1.0 - fit.leverage[r]);
      const double loo = (targets(r, c) - out.fitted(r, c)) / denom;
      acc += loo * loo;
    }
    out.cv_se[c] = std::sqrt(acc / static_cast<double>(n)) * std::sqrt(mean_leverage);
  }
  return out;
}

void check_step_finite(const AdjointPair& pair, int step, const char* who) {
  for (int p = 0; p < pair.n_paths(); ++p) {
    if (!pair.Y.vec(p, step).allFinite() || !pair.Z.vec(p, step).allFinite()) {
      throw std::runtime_error(std::string(who) + ": non-finite adjoint value at path " +
                               std::to_string(p) + ", step " + std::to_string(step));
    }
  }
}

void validate_backward_inputs(const GalerkinSpace& space, const TimeGrid& grid,
                              const StateEnsemble& ensemble, const RegressionBasis& basis,
                              const char* who) {
  const std::string name(who);
  if (ensemble.n_steps() != grid.n_steps) {
    throw std::invalid_argument(name + ": ensemble and grid step counts differ");
  }
  if (ensemble.states.rows() != space.n_state()) {
    throw std::invalid_argument(name + ": ensemble state dimension mismatch");
  }
  if (ensemble.noise.n_steps() != grid.n_steps || ensemble.noise.n_paths() != ensemble.n_paths() ||
      ensemble.noise.n_noise() != space.n_noise()) {
    throw std::invalid_argument(name + ": ensemble noise does not match grid/space");
  }
  if (basis.active_modes.empty()) {
    throw std::invalid_argument(name + ": regression basis has no active modes");
  }
  for (int mode : basis.active_modes) {
    if (mode < 0 || mode >= space.n_state()) {
      throw std::invalid_argument(name + ": regression basis mode out of range");
    }
  }
}

}  // namespace

AdjointPair solve_bsee(const ProblemSpec& spec, const GalerkinSpace& space,
                       const TimeGrid& grid, const StateEnsemble& ensemble,
                       const ControlProcess& control, const RegressionBasis& basis,
                       int workers) {
  validate_backward_inputs(space, grid, ensemble, basis, "solve_bsee");
  const int N = grid.n_steps;
  const int P = ensemble.n_paths();
  const int n = space.n_state();
  const int m = space.n_noise();
  if (control.n_steps() != N) {
    throw std::invalid_argument("solve_bsee: control and grid step counts differ");
  }
  if (!control.is_deterministic() && control.n_paths() != P) {
    throw std::invalid_argument("solve_bsee: control and ensemble path counts differ");
  }
  const double dt = grid.dt();
  const Eigen::VectorXd sfac = space.semigroup_factors(dt);

  AdjointPair out;
  out.Y = PathArray(P, N + 1, n);
  out.noise_fingerprint = ensemble.noise.fingerprint();
  out.Z = PathArray(P, N + 1, n, m);
  out.diagnostics.degree_by_step.assign(static_cast<std::size_t>(N), basis.degree);

  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
    const int pi = static_cast<int>(p);
    out.Y.vec(pi, N) = spec.terminal_gradient(ensemble.state(pi, N));
  });
  check_step_finite(out, N, "solve_bsee");

  for (int i = N - 1; i >= 0; --i) {
    const StepFit fit = fit_step(ensemble.states, i, basis, workers);
    out.diagnostics.degree_by_step[static_cast<std::size_t>(i)] = fit.degree_used;
    if (fit.degree_used != basis.degree) {
      ++out.diagnostics.fallback_count;
      if (out.diagnostics.notes.size() < 8) {
        out.diagnostics.notes.push_back("step " + std::to_string(i) +
                                        ": rank-deficient design, degree reduced to " +
                                        std::to_string(fit.degree_used));
      }
    }

    Eigen::MatrixXd target_y(P, n);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      target_y.row(pi) = sfac.cwiseProduct(out.Y.vec(pi, i + 1)).transpose();
    });
    const FitResult fy = regress(fit, target_y);

    Eigen::MatrixXd target_z(P, n * m);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      const auto dw = ensemble.noise.dw(pi, i);
      for (int mm = 0; mm < m; ++mm) {
        for (int j = 0; j < n; ++j) {
          target_z(pi, mm * n + j) =
              (target_y(pi, j) - fy.fitted(pi, j)) * dw[mm] / dt;
        }
      }
    });
    const FitResult fz = regress(fit, target_z);

    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      out.Z.vec(pi, i) = fz.fitted.row(pi).transpose();
      const Eigen::VectorXd yhat = fy.fitted.row(pi).transpose();
      out.Y.vec(pi, i) =
          yhat + dt * grad_x_hamiltonian(spec, ensemble.state(pi, i), control.value(pi, i),
                                         yhat, out.Z.mat(pi, i));
    });
    check_step_finite(out, i, "solve_bsee");

    // allowance for pure-rounding residuals when the target sits in the
    // basis span exactly
    const double rounding = 1e-12 * (1.0 + target_y.cwiseAbs().maxCoeff()) / std::sqrt(dt);
    out.diagnostics.z_noise_floor = std::max(
        out.diagnostics.z_noise_floor, 3.0 * fz.cv_se.maxCoeff() + rounding);
    out.diagnostics.max_abs_z = std::max(
        out.diagnostics.max_abs_z, fz.fitted.cwiseAbs().maxCoeff());
  }
  return out;
}

AdjointPair solve_bsee_lq_explicit(const LqSpec& lq, const GalerkinSpace& space,
                                   const TimeGrid& grid, const StateEnsemble& ensemble,
                                   const RegressionBasis& basis, int workers) {
  validate_backward_inputs(space, grid, ensemble, basis, "solve_bsee_lq_explicit");
  const int N = grid.n_steps;
  const int P = ensemble.n_paths();
  const int n = space.n_state();
  const int m = space.n_noise();
  const double dt = grid.dt();

  AdjointPair out;
  out.Y = PathArray(P, N + 1, n);
  out.noise_fingerprint = ensemble.noise.fingerprint();
  out.Z = PathArray(P, N + 1, n, m);

  if (lq.linear_terminal) {
    if (lq.rho.size() != n) {
      throw std::invalid_argument("solve_bsee_lq_explicit: rho length mismatch");
    }
    for (int i = 0; i <= N; ++i) {
      const Eigen::VectorXd yi =
          space.semigroup_factors(grid.horizon - grid.t(i)).cwiseProduct(lq.rho);
      for (int p = 0; p < P; ++p) out.Y.vec(p, i) = yi;
    }
    out.diagnostics.notes.push_back("linear terminal cost: closed-form adjoint, Z = 0");
    return out;
  }

  const Eigen::VectorXd sfac = space.semigroup_factors(dt);
  out.diagnostics.degree_by_step.assign(static_cast<std::size_t>(N), basis.degree);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
    const int pi = static_cast<int>(p);
    out.Y.vec(pi, N) = lq.terminal_gradient(ensemble.state(pi, N));
  });
  check_step_finite(out, N, "solve_bsee_lq_explicit");

  for (int i = N - 1; i >= 0; --i) {
    const StepFit fit = fit_step(ensemble.states, i, basis, workers);
    out.diagnostics.degree_by_step[static_cast<std::size_t>(i)] = fit.degree_used;
    if (fit.degree_used != basis.degree) ++out.diagnostics.fallback_count;

    Eigen::MatrixXd target_y(P, n);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      target_y.row(pi) = sfac.cwiseProduct(out.Y.vec(pi, i + 1)).transpose();
    });
    const FitResult fy = regress(fit, target_y);

    Eigen::MatrixXd target_z(P, n * m);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      const auto dw = ensemble.noise.dw(pi, i);
      for (int mm = 0; mm < m; ++mm) {
        for (int j = 0; j < n; ++j) {
          target_z(pi, mm * n + j) =
              (target_y(pi, j) - fy.fitted(pi, j)) * dw[mm] / dt;
        }
      }
    });
    const FitResult fz = regress(fit, target_z);

    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t p) {
      const int pi = static_cast<int>(p);
      out.Z.vec(pi, i) = fz.fitted.row(pi).transpose();
      out.Y.vec(pi, i) = fy.fitted.row(pi).transpose();
    });
    check_step_finite(out, i, "solve_bsee_lq_explicit");

    const double rounding = 1e-12 * (1.0 + target_y.cwiseAbs().maxCoeff()) / std::sqrt(dt);
    out.diagnostics.z_noise_floor = std::max(
        out.diagnostics.z_noise_floor, 3.0 * fz.cv_se.maxCoeff() + rounding);
    out.diagnostics.max_abs_z = std::max(
        out.diagnostics.max_abs_z, fz.fitted.cwiseAbs().maxCoeff());
  }
  return out;
}

Eigen::MatrixXd mild_residual(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const StateEnsemble& ensemble,
                              const ControlProcess& control, const AdjointPair& pair,
                              int from_step) {
  const int N = grid.n_steps;
  const int P = ensemble.n_paths();
  const int n = space.n_state();
  if (from_step < 0 || from_step > N) {
    throw std::invalid_argument("mild_residual: from_step out of range");
  }
  if (pair.n_paths() != P || pair.n_steps() != N) {
    throw std::invalid_argument("mild_residual: pair does not match ensemble");
  }
  if (!control.is_deterministic() && control.n_paths() != P) {
    throw std::invalid_argument("mild_residual: control and ensemble path counts differ");
  }
  const double dt = grid.dt();
  Eigen::MatrixXd res(P, n);
  for (int p = 0; p < P; ++p) {
    Eigen::VectorXd acc =
        space.semigroup_factors(grid.horizon - grid.t(from_step)).cwiseProduct(
            Eigen::VectorXd(pair.y(p, N)));
    for (int j = from_step; j < N; ++j) {
      const Eigen::VectorXd prop = space.semigroup_factors(grid.t(j) - grid.t(from_step));
      const Eigen::VectorXd g = grad_x_hamiltonian(spec, ensemble.state(p, j),
                                                   control.value(p, j), pair.y(p, j),
                                                   pair.z(p, j));
      acc += prop.cwiseProduct(dt * g - pair.z(p, j) * ensemble.noise.dw(p, j));
    }
    res.row(p) = (Eigen::VectorXd(pair.y(p, from_step)) - acc).transpose();
  }
  return res;
}

}  // namespace seeopt
