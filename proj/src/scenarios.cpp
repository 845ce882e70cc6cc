#include "seeopt/scenarios.hpp"

#include <cmath>
#include <stdexcept>

namespace seeopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// log cosh without overflow for large |u|.
double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

Eigen::VectorXd inverse_index_vector(int n, double norm) {
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v[k] = 1.0 / (k + 1);
  return v * (norm / v.norm());
}

struct CommonSettings {
  RegressionBasis basis;
  OptimizerConfig optimizer;
  RateBands bands;
};

CommonSettings common_settings(const ScenarioConfig& config, int n_state) {
  CommonSettings s;
  s.basis = RegressionBasis::defaults(n_state);
  s.basis.degree = config.regression_degree;
  if (config.regression_modes > 0) {
    const int modes = std::min(config.regression_modes, n_state);
    s.basis.active_modes.resize(modes);
    for (int k = 0; k < modes; ++k) s.basis.active_modes[k] = k;
  }
  s.optimizer.step_size = config.step_size;
  s.optimizer.max_iters = config.max_iters;
  s.optimizer.grad_tol = config.grad_tol;
  s.optimizer.use_armijo = config.armijo;
  s.bands.slope_lo = config.slope_lo;
  s.bands.slope_hi = config.slope_hi;
  s.bands.decay_factor = config.decay_factor;
  s.bands.sigma_mult = config.sigma_mult;
  s.bands.linear_floor = config.linear_floor;
  return s;
}

Scenario make_lq_scenario(const ScenarioConfig& config, bool quadratic_terminal) {
  const int n = config.n_state > 0 ? config.n_state : 8;
  Eigen::VectorXd eigenvalues(n);
  for (int k = 0; k < n; ++k) eigenvalues[k] = -0.5 * double(k + 1) * double(k + 1);
  GalerkinSpace space(n, n, n, eigenvalues);

  const Eigen::VectorXd h = inverse_index_vector(n, 0.5);
  Eigen::VectorXd q(n);
  for (int k = 0; k < n; ++k) q[k] = std::pow(4.0, -(k + 1));
  Eigen::VectorXd rho_raw(n), x0(n);
  for (int k = 0; k < n; ++k) rho_raw[k] = 1.0 / (k + 1);
  x0 = rho_raw;

  LqSpec lq = make_diagonal_lq(space, h, q, rho_raw, x0);
  if (quadratic_terminal) {
    lq.linear_terminal = false;
    lq.terminal_cost = [](const Eigen::VectorXd& x) { return 0.5 * x.squaredNorm(); };
    lq.terminal_gradient = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x); };
  }

  const CommonSettings s = common_settings(config, n);
  return Scenario{
      .name = quadratic_terminal ? "lq-quadratic-phi" : "lq-linear-phi",
      .space = space,
      .grid = TimeGrid(config.horizon, config.n_steps),
      .problem = apply_mutation(lq.to_problem(), config.mutate),
      .lq = lq,
      .basis = s.basis,
      .optimizer = s.optimizer,
      .epsilons = config.epsilons,
      .bands = s.bands,
      .n_paths = config.n_paths > 0 ? config.n_paths : 2000,
      .seed = config.seed,
      .workers = config.workers,
      .mutation = config.mutate,
      .certificate_tol_factor = config.certificate_tol_factor,
      .direction_value = inverse_index_vector(n, 1.0),
      .out_dir = config.out_dir,
  };
}

Scenario make_tanh_scenario(const ScenarioConfig& config) {
  const int n = config.n_state > 0 ? config.n_state : 4;
  Eigen::VectorXd eigenvalues(n);
  for (int k = 0; k < n; ++k) eigenvalues[k] = -0.5 * double(k + 1);
  GalerkinSpace space(n, n, n, eigenvalues);

  const Eigen::VectorXd h = inverse_index_vector(n, 1.0);
  Eigen::VectorXd sq(n);
  for (int k = 0; k < n; ++k) sq[k] = std::pow(2.0, -0.5 * (k + 1));
  Eigen::VectorXd rho(n), x0(n);
  for (int k = 0; k < n; ++k) rho[k] = 1.0 / (k + 1);
  x0 = rho;

  const double drift_scale = 0.5;
  const double diff_scale = 0.4;
  // Keeps the state factor of the diffusion strictly positive, so the
  // regressed martingale density has an O(1) mean and the control coupling
  // of the noise carries a visible share of the duality balance.
  const double sigma_base = 1.5;
  const double cost_scale = 0.5;

  ProblemSpec p;
  p.n_state = n;
  p.n_control = n;
  p.n_noise = n;
  p.x0 = x0;
  p.admissible = AdmissibleSet::unconstrained();

  p.drift = [n, drift_scale](const Eigen::VectorXd& x, const Eigen::VectorXd& nu) {
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) out[k] = drift_scale * std::tanh(x[k]) + nu[k];
    return out;
  };
  p.diffusion = [n, h, sq, diff_scale, sigma_base](const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& nu) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    const double load = h.dot(nu);
    for (int k = 0; k < n; ++k) {
      out(k, k) = diff_scale * (sigma_base + std::tanh(x[k])) + load * sq[k];
    }
    return out;
  };
  p.running_cost = [n, cost_scale](const Eigen::VectorXd& x, const Eigen::VectorXd& nu) {
    double state = 0.0;
    for (int k = 0; k < n; ++k) state += log_cosh(x[k]);
    return nu.squaredNorm() + cost_scale * state;
  };
  p.terminal_cost = [n, rho, cost_scale](const Eigen::VectorXd& x) {
    double state = 0.0;
    for (int k = 0; k < n; ++k) state += log_cosh(x[k]);
    return rho.dot(x) + cost_scale * state;
  };

  p.drift_dx = [n, drift_scale](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      const double t = std::tanh(x[k]);
      out(k, k) = drift_scale * (1.0 - t * t);
    }
    return out;
  };
  p.drift_dnu = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n));
  };
  p.diffusion_dx = [n, diff_scale](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    MatList out(n, Eigen::MatrixXd::Zero(n, n));
    for (int j = 0; j < n; ++j) {
      const double t = std::tanh(x[j]);
      out[j](j, j) = diff_scale * (1.0 - t * t);
    }
    return out;
  };
  p.diffusion_dnu = [n, h, sq](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    MatList out(n, Eigen::MatrixXd::Zero(n, n));
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < n; ++k) out[c](k, k) = h[c] * sq[k];
    return out;
  };
  p.running_cost_dx = [n, cost_scale](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) out[k] = cost_scale * std::tanh(x[k]);
    return out;
  };
  p.running_cost_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd& nu) {
    return Eigen::VectorXd(2.0 * nu);
  };
  p.terminal_gradient = [n, rho, cost_scale](const Eigen::VectorXd& x) {
    Eigen::VectorXd out = rho;
    for (int k = 0; k < n; ++k) out[k] += cost_scale * std::tanh(x[k]);
    return out;
  };

  const CommonSettings s = common_settings(config, n);
  return Scenario{
      .name = "tanh-drift",
      .space = space,
      .grid = TimeGrid(config.horizon, config.n_steps),
      .problem = apply_mutation(p, config.mutate),
      .lq = std::nullopt,
      .basis = s.basis,
      .optimizer = s.optimizer,
      .epsilons = config.epsilons,
      .bands = s.bands,
      .n_paths = config.n_paths > 0 ? config.n_paths : 1000,
      .seed = config.seed,
      .workers = config.workers,
      .mutation = config.mutate,
      .certificate_tol_factor = config.certificate_tol_factor,
      .direction_value = h / h.norm(),
      .out_dir = config.out_dir,
  };
}

}  // namespace

ProblemSpec apply_mutation(const ProblemSpec& spec, Mutation m) {
  ProblemSpec out = spec;
  switch (m) {
    case Mutation::none:
      break;
    case Mutation::drop_sigma_nu_term:
      // An assembly fault, not a coefficient fault: a consistently zeroed
      // diffusion_dnu would drop the same term from the sensitivity flow and
      // from the duality balance, and the identity would close again.
      out.drop_noise_control_coupling = true;
      break;
    case Mutation::flip_b_nu_sign: {
      auto inner = spec.drift_dnu;
      out.drift_dnu = [inner](const Eigen::VectorXd& x, const Eigen::VectorXd& nu) {
        return Eigen::MatrixXd(-inner(x, nu));
      };
      break;
    }
    case Mutation::drop_ell_x_term: {
      const int n = spec.n_state;
      out.running_cost_dx = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::VectorXd(Eigen::VectorXd::Zero(n));
      };
      break;
    }
  }
  return out;
}

Scenario make_scenario(const ScenarioConfig& config) {
  config.validate();
  if (config.scenario == "lq-linear-phi") return make_lq_scenario(config, false);
  if (config.scenario == "lq-quadratic-phi") return make_lq_scenario(config, true);
  if (config.scenario == "tanh-drift") return make_tanh_scenario(config);
  throw std::runtime_error("unknown scenario '" + config.scenario + "'");
}

ControlProcess scenario_direction(const Scenario& scenario) {
  const int n_steps = scenario.grid.n_steps;
  Eigen::MatrixXd values(scenario.direction_value.size(), n_steps);
  for (int i = 0; i < n_steps; ++i) {
    const double t = scenario.grid.t(i);
    values.col(i) = scenario.direction_value * (1.0 + 0.5 * std::cos(kPi * t));
  }
  return ControlProcess::deterministic(std::move(values));
}

}  // namespace seeopt
