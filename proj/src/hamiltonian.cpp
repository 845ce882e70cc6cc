#include "seeopt/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

#include "seeopt/parallel.hpp"

namespace seeopt {

double hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& z) {
  const double ell = spec.running_cost(x, nu);
  const double drift_term = spec.drift(x, nu).dot(y);
  const double diff_term = spec.diffusion(x, nu).cwiseProduct(z).sum();
  return ell + drift_term + diff_term;
}

Eigen::VectorXd grad_x_hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& z) {
  Eigen::VectorXd g = spec.running_cost_dx(x, nu);
  g += spec.drift_dx(x, nu).transpose() * y;
  const MatList sig_x = spec.diffusion_dx(x, nu);
  if (static_cast<int>(sig_x.size()) != spec.n_state) {
    throw std::invalid_argument("grad_x_hamiltonian: diffusion_dx must return n_state matrices");
  }
  for (int j = 0; j < spec.n_state; ++j) {
    g[j] += sig_x[static_cast<std::size_t>(j)].cwiseProduct(z).sum();
  }
  return g;
}

Eigen::VectorXd grad_nu_hamiltonian(const ProblemSpec& spec, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& nu, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& z) {
  Eigen::VectorXd g = spec.running_cost_dnu(x, nu);
  g += spec.drift_dnu(x, nu).transpose() * y;
  if (spec.drop_noise_control_coupling) return g;
  const MatList sig_nu = spec.diffusion_dnu(x, nu);
  if (static_cast<int>(sig_nu.size()) != spec.n_control) {
    throw std::invalid_argument("grad_nu_hamiltonian: diffusion_dnu must return n_control matrices");
  }
  for (int c = 0; c < spec.n_control; ++c) {
    g[c] += sig_nu[static_cast<std::size_t>(c)].cwiseProduct(z).sum();
  }
  return g;
}

Eigen::VectorXd pathwise_cost(const ProblemSpec& spec, const TimeGrid& grid,
                              const StateEnsemble& ensemble, const ControlProcess& control,
                              int workers) {
  const int n_paths = ensemble.n_paths();
  const int n_steps = ensemble.n_steps();
  if (control.n_steps() != n_steps) {
    throw std::invalid_argument("pathwise_cost: control and ensemble step counts differ");
  }
  if (!control.is_deterministic() && control.n_paths() != n_paths) {
    throw std::invalid_argument("pathwise_cost: control and ensemble path counts differ");
  }
  const double dt = grid.dt();
  Eigen::VectorXd costs(n_paths);
  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t p) {
    const int pi = static_cast<int>(p);
    double acc = 0.0;
    for (int i = 0; i < n_steps; ++i) {
      acc += spec.running_cost(ensemble.state(pi, i), control.value(pi, i)) * dt;
    }
    acc += spec.terminal_cost(ensemble.state(pi, n_steps));
    costs[pi] = acc;
  });
  return costs;
}

MeanSe mean_se(const Eigen::VectorXd& values) {
  const auto n = values.size();
  if (n < 1) {
    throw std::invalid_argument("mean_se: empty sample");
  }
  MeanSe out;
  out.mean = values.mean();
  if (n == 1) {
    out.std_error = 0.0;
    return out;
  }
  const double var = (values.array() - out.mean).square().sum() / static_cast<double>(n - 1);
  out.std_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

MeanSe evaluate_cost(const ProblemSpec& spec, const TimeGrid& grid,
                     const StateEnsemble& ensemble, const ControlProcess& control,
                     int workers) {
  return mean_se(pathwise_cost(spec, grid, ensemble, control, workers));
}

namespace {

constexpr double kFdStep = 1e-5;

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace

DerivativeReport hamiltonian_derivative_selftest(const ProblemSpec& spec, int n_samples,
                                                 std::int64_t seed, double tolerance) {
  if (n_samples < 1) {
    throw std::invalid_argument("hamiltonian_derivative_selftest: n_samples must be >= 1");
  }
  DerivativeReport report;
  report.tolerance = tolerance;
  report.checks = {{"hamiltonian_grad_x", 0.0, true}, {"hamiltonian_grad_nu", 0.0, true}};
  const auto useed = static_cast<std::uint64_t>(seed);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd x(spec.n_state), nu(spec.n_control), y(spec.n_state);
    Eigen::MatrixXd z(spec.n_state, spec.n_noise);
    for (int k = 0; k < spec.n_state; ++k) {
      x[k] = counter_gaussian(useed, s, 0, static_cast<std::uint64_t>(k));
      y[k] = counter_gaussian(useed, s, 2, static_cast<std::uint64_t>(k));
    }
    for (int c = 0; c < spec.n_control; ++c) {
      nu[c] = counter_gaussian(useed, s, 1, static_cast<std::uint64_t>(c));
    }
    for (int k = 0; k < spec.n_state; ++k) {
      for (int m = 0; m < spec.n_noise; ++m) {
        z(k, m) = counter_gaussian(useed, s, 3,
                                   static_cast<std::uint64_t>(k * spec.n_noise + m));
      }
    }
    nu = spec.admissible.project(nu);

    const Eigen::VectorXd gx = grad_x_hamiltonian(spec, x, nu, y, z);
    for (int j = 0; j < spec.n_state; ++j) {
      Eigen::VectorXd hi = x, lo = x;
      hi[j] += kFdStep;
      lo[j] -= kFdStep;
      const double numeric =
          (hamiltonian(spec, hi, nu, y, z) - hamiltonian(spec, lo, nu, y, z)) / (2.0 * kFdStep);
      report.checks[0].max_rel_error =
          std::max(report.checks[0].max_rel_error, rel_err(gx[j], numeric));
    }

    const Eigen::VectorXd gnu = grad_nu_hamiltonian(spec, x, nu, y, z);
    for (int c = 0; c < spec.n_control; ++c) {
      Eigen::VectorXd hi = nu, lo = nu;
      hi[c] += kFdStep;
      lo[c] -= kFdStep;
      const double numeric =
          (hamiltonian(spec, x, hi, y, z) - hamiltonian(spec, x, lo, y, z)) / (2.0 * kFdStep);
      report.checks[1].max_rel_error =
          std::max(report.checks[1].max_rel_error, rel_err(gnu[c], numeric));
    }
  }
  report.all_pass = true;
  for (auto& c : report.checks) {
    c.pass = c.max_rel_error <= tolerance;
    report.all_pass = report.all_pass && c.pass;
  }
  return report;
}

}  // namespace seeopt
