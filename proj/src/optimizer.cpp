#include "seeopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "seeopt/hamiltonian.hpp"
#include "seeopt/parallel.hpp"

namespace seeopt {

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("OptimizerConfig: step_size must be > 0");
  if (max_iters < 0) throw std::invalid_argument("OptimizerConfig: max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("OptimizerConfig: grad_tol must be > 0");
  if (!(armijo_factor > 0.0 && armijo_factor < 1.0)) {
    throw std::invalid_argument("OptimizerConfig: armijo_factor must lie in (0, 1)");
  }
  if (!(armijo_slope > 0.0)) throw std::invalid_argument("OptimizerConfig: armijo_slope must be > 0");
  if (max_backtracks < 0) throw std::invalid_argument("OptimizerConfig: max_backtracks must be >= 0");
}

LqSolution solve_lq_analytic(const LqSpec& lq, const GalerkinSpace& space, const TimeGrid& grid) {
  if (!lq.linear_terminal) {
    throw std::invalid_argument("solve_lq_analytic: terminal cost must be linear");
  }
  if (!lq.admissible.is_unconstrained()) {
    throw std::invalid_argument("solve_lq_analytic: admissible set must be unconstrained");
  }
  if (lq.rho.size() != space.n_state()) {
    throw std::invalid_argument("solve_lq_analytic: rho length mismatch");
  }
  const int N = grid.n_steps;
  const double dt = grid.dt();
  Eigen::MatrixXd values(lq.n_control, N);
  double quad = 0.0;
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd weighted =
        lq.B.transpose() * space.semigroup_factors(grid.horizon - grid.t(i)).cwiseProduct(lq.rho);
    values.col(i) = -0.5 * weighted;
    quad += weighted.squaredNorm() * dt;
  }
  LqSolution out{ControlProcess::deterministic(std::move(values)), 0.0};
  out.optimal_cost =
      lq.rho.dot(space.semigroup_factors(grid.horizon).cwiseProduct(lq.x0)) - 0.25 * quad;
  return out;
}

namespace {

ControlProcess project_control(const AdmissibleSet& set, const ControlProcess& c) {
  if (set.is_unconstrained()) return c;
  if (c.is_deterministic()) {
    Eigen::MatrixXd values = c.values();
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
      values.col(i) = set.project(values.col(i));
    }
    return ControlProcess::deterministic(std::move(values));
  }
  PathArray values(c.n_paths(), c.n_steps(), c.n_control());
  for (int p = 0; p < c.n_paths(); ++p) {
    for (int i = 0; i < c.n_steps(); ++i) {
      values.vec(p, i) = set.project(c.value(p, i));
    }
  }
  return ControlProcess::per_path(std::move(values));
}

struct IterateEval {
  StateEnsemble ensemble;
  AdjointPair adjoint;
  ControlProcess gradient;  // path-averaged for deterministic controls
  double pg_norm = 0.0;     // time-L2 distance to the unit projected step
  MeanSe cost;
};

IterateEval evaluate_iterate(const ProblemSpec& spec, const GalerkinSpace& space,
                             const TimeGrid& grid, const ControlProcess& nu,
                             const NoiseEnsemble& noise, const RegressionBasis& basis,
                             int workers) {
  IterateEval eval;
  eval.ensemble = integrate_forward(spec, space, grid, nu, noise, workers);
  eval.cost = evaluate_cost(spec, grid, eval.ensemble, nu, workers);
  eval.adjoint = solve_bsee(spec, space, grid, eval.ensemble, nu, basis, workers);

  const int P = eval.ensemble.n_paths();
  const int N = grid.n_steps;
  const int m = spec.n_control;
  PathArray g_all(P, N, m);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    for (int i = 0; i < N; ++i) {
      g_all.vec(p, i) = grad_nu_hamiltonian(spec, eval.ensemble.state(p, i), nu.value(p, i),
                                            eval.adjoint.y(p, i), eval.adjoint.z(p, i));
    }
  });

  if (nu.is_deterministic()) {
    Eigen::MatrixXd mean_g = Eigen::MatrixXd::Zero(m, N);
    for (int p = 0; p < P; ++p) {
      for (int i = 0; i < N; ++i) mean_g.col(i) += g_all.vec(p, i);
    }
    mean_g /= static_cast<double>(P);
    eval.gradient = ControlProcess::deterministic(std::move(mean_g));
  } else {
    eval.gradient = ControlProcess::per_path(std::move(g_all));
  }

  const ControlProcess unit_step =
      project_control(spec.admissible, nu.axpy(-1.0, eval.gradient));
  eval.pg_norm = control_distance(nu, unit_step, grid.dt());
  return eval;
}

std::pair<ControlProcess, StepDiagnostics> armijo_step(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const ControlProcess& nu, const IterateEval& eval, const NoiseEnsemble& noise,
    const OptimizerConfig& config, double gamma, int workers) {
  StepDiagnostics diag;
  diag.cost_before = eval.cost.mean;
  diag.cost_before_se = eval.cost.std_error;
  diag.grad_norm = eval.pg_norm;

  double gamma_try = gamma;
  const int attempts = config.use_armijo ? config.max_backtracks + 1 : 1;
  for (int bt = 0; bt < attempts; ++bt) {
    const ControlProcess trial =
        project_control(spec.admissible, nu.axpy(-gamma_try, eval.gradient));
    const double dist = control_distance(nu, trial, grid.dt());
    if (config.use_armijo && dist == 0.0) {
      // The step vanished in floating point; a no-op cannot count as descent.
      gamma_try *= config.armijo_factor;
      continue;
    }
    const StateEnsemble trial_ens = integrate_forward(spec, space, grid, trial, noise, workers);
    const MeanSe trial_cost = evaluate_cost(spec, grid, trial_ens, trial, workers);
    const double required =
        config.use_armijo ? eval.cost.mean - config.armijo_slope / gamma_try * dist * dist
                          : eval.cost.mean + std::numeric_limits<double>::infinity();
    // The strict comparison against the current cost matters when the required
    // decrement rounds to zero at tiny gamma: equality is stagnation, not descent.
    if (!config.use_armijo ||
        (trial_cost.mean < eval.cost.mean && trial_cost.mean <= required)) {
      diag.cost_after = trial_cost.mean;
      diag.cost_after_se = trial_cost.std_error;
      diag.gamma_used = gamma_try;
      diag.backtracks = bt;
      diag.accepted = true;
      return {trial, diag};
    }
    gamma_try *= config.armijo_factor;
  }
  diag.cost_after = eval.cost.mean;
  diag.cost_after_se = eval.cost.std_error;
  diag.gamma_used = 0.0;
  diag.backtracks = attempts;
  diag.accepted = false;
  diag.note = "backtracking exhausted; step rejected";
  return {nu, diag};
}

}  // namespace

std::pair<ControlProcess, StepDiagnostics> smp_gradient_step(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const ControlProcess& nu_k, const NoiseEnsemble& noise, const RegressionBasis& basis,
    const OptimizerConfig& config, double gamma, int workers) {
  config.validate();
  if (!(gamma > 0.0)) throw std::invalid_argument("smp_gradient_step: gamma must be > 0");
  if (nu_k.admissibility_gap(spec.admissible) > 1e-12) {
    throw std::invalid_argument("smp_gradient_step: starting control is not admissible");
  }
  const IterateEval eval = evaluate_iterate(spec, space, grid, nu_k, noise, basis, workers);
  return armijo_step(spec, space, grid, nu_k, eval, noise, config, gamma, workers);
}

OptimizerResult run_optimizer(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const ControlProcess& nu0,
                              const NoiseEnsemble& noise, const RegressionBasis& basis,
                              const OptimizerConfig& config, int workers) {
  config.validate();
  if (nu0.admissibility_gap(spec.admissible) > 1e-12) {
    throw std::invalid_argument("run_optimizer: starting control is not admissible");
  }
  OptimizerResult result;
  result.control = nu0;
  double gamma_work = config.step_size;
  double gamma_polish = 0.0;
  double polish_prev_pg = std::numeric_limits<double>::infinity();
  bool polish = false;
  bool any_accepted = false;

  for (int k = 0; k < config.max_iters; ++k) {
    const IterateEval eval =
        evaluate_iterate(spec, space, grid, result.control, noise, basis, workers);
    IterationRecord rec;
    rec.iter = k;
    rec.cost = eval.cost.mean;
    rec.cost_se = eval.cost.std_error;
    rec.grad_norm = eval.pg_norm;

    if (eval.pg_norm <= config.grad_tol) {
      rec.gamma = 0.0;
      rec.accepted = false;
      result.trace.push_back(rec);
      result.final_cost = eval.cost.mean;
      result.final_cost_se = eval.cost.std_error;
      result.final_grad_norm = eval.pg_norm;
      result.converged = true;
      return result;
    }

    if (!polish) {
      auto [next, diag] = armijo_step(spec, space, grid, result.control, eval, noise, config,
                                      gamma_work, workers);
      rec.gamma = diag.gamma_used;
      rec.backtracks = diag.backtracks;
      rec.accepted = diag.accepted;
      result.trace.push_back(rec);
      if (diag.accepted) {
        result.control = std::move(next);
        gamma_work = std::min(config.step_size, 2.0 * diag.gamma_used);
        gamma_polish = std::max(gamma_polish, diag.gamma_used);
        any_accepted = true;
        continue;
      }
      if (!any_accepted) break;  // never descended: not a noise-floor stall
      polish = true;
      continue;
    }

    // Fixed-step descent on the sampled gradient; halve the step whenever the
    // projected gradient norm fails to contract so the recursion stays stable.
    if (eval.pg_norm >= polish_prev_pg) gamma_polish *= 0.5;
    polish_prev_pg = eval.pg_norm;
    result.control =
        project_control(spec.admissible, result.control.axpy(-gamma_polish, eval.gradient));
    rec.gamma = gamma_polish;
    rec.accepted = true;
    rec.polish = true;
    result.trace.push_back(rec);
  }

  const IterateEval final_eval =
      evaluate_iterate(spec, space, grid, result.control, noise, basis, workers);
  result.final_cost = final_eval.cost.mean;
  result.final_cost_se = final_eval.cost.std_error;
  result.final_grad_norm = final_eval.pg_norm;
  result.converged = final_eval.pg_norm <= config.grad_tol;
  return result;
}

namespace {

double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t key = detail::mix64(seed);
  key = detail::mix64(key ^ a);
  key = detail::mix64(key ^ b);
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Eigen::VectorXd> make_probe_set(const AdmissibleSet& set, int n_control,
                                            int n_random, std::uint64_t seed) {
  if (n_control < 1) throw std::invalid_argument("make_probe_set: n_control must be >= 1");
  std::vector<Eigen::VectorXd> probes;

  if (set.is_unconstrained()) {
    probes.push_back(Eigen::VectorXd::Zero(n_control));
    for (int c = 0; c < n_control; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n_control);
      e[c] = 1.0;
      probes.push_back(e);
      probes.push_back(-e);
    }
    for (int k = 0; k < n_random; ++k) {
      Eigen::VectorXd v(n_control);
      for (int c = 0; c < n_control; ++c) {
        v[c] = counter_gaussian(seed, static_cast<std::uint64_t>(k),
                                0x9e1ULL, static_cast<std::uint64_t>(c));
      }
      probes.push_back(v);
    }
    return probes;
  }

  const Eigen::VectorXd lo = set.lower();
  const Eigen::VectorXd hi = set.upper();
  probes.push_back(0.5 * (lo + hi));
  if (n_control <= 4) {
    const int corners = 1 << n_control;
    for (int mask = 0; mask < corners; ++mask) {
      Eigen::VectorXd v(n_control);
      for (int c = 0; c < n_control; ++c) v[c] = (mask >> c) & 1 ? hi[c] : lo[c];
      probes.push_back(v);
    }
  } else {
    for (int k = 0; k < 2 * n_control; ++k) {
      Eigen::VectorXd v(n_control);
      for (int c = 0; c < n_control; ++c) {
        const std::uint64_t bit =
            detail::mix64(seed ^ (static_cast<std::uint64_t>(k) << 20) ^
                          static_cast<std::uint64_t>(c)) &
            1ULL;
        v[c] = bit ? hi[c] : lo[c];
      }
      probes.push_back(v);
    }
  }
  for (int c = 0; c < n_control; ++c) {
    Eigen::VectorXd v = 0.5 * (lo + hi);
    v[c] = hi[c];
    probes.push_back(v);
    v[c] = lo[c];
    probes.push_back(v);
  }
  for (int k = 0; k < n_random; ++k) {
    Eigen::VectorXd v(n_control);
    for (int c = 0; c < n_control; ++c) {
      const double u = counter_uniform(seed, static_cast<std::uint64_t>(k + 7),
                                       static_cast<std::uint64_t>(c));
      v[c] = lo[c] + u * (hi[c] - lo[c]);
    }
    probes.push_back(v);
  }
  return probes;
}

OptimalityCertificate verify_maximum_principle(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const StateEnsemble& ensemble, const ControlProcess& control, const AdjointPair& adjoint,
    const std::vector<Eigen::VectorXd>& probe_controls, double tol, int workers) {
  const int P = ensemble.n_paths();
  const int N = grid.n_steps;
  const int m = spec.n_control;
  if (adjoint.n_paths() != P || adjoint.n_steps() != N) {
    throw std::invalid_argument("verify_maximum_principle: adjoint does not match ensemble");
  }
  if (adjoint.noise_fingerprint != ensemble.noise.fingerprint()) {
    throw std::invalid_argument("verify_maximum_principle: adjoint and ensemble use different noise");
  }
  if (control.n_steps() != N || control.n_control() != m) {
    throw std::invalid_argument("verify_maximum_principle: control shape mismatch");
  }
  for (const Eigen::VectorXd& probe : probe_controls) {
    if (probe.size() != m) {
      throw std::invalid_argument("verify_maximum_principle: probe dimension mismatch");
    }
    if (!spec.admissible.contains(probe, 1e-12)) {
      throw std::invalid_argument("verify_maximum_principle: probe outside the admissible set");
    }
  }

  OptimalityCertificate cert;
  cert.tol = tol;
  cert.seed = ensemble.seed;
  const MeanSe cost = evaluate_cost(spec, grid, ensemble, control, workers);
  cert.final_cost = cost.mean;
  cert.final_cost_se = cost.std_error;

  PathArray g_all(P, N, m);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    for (int i = 0; i < N; ++i) {
      g_all.vec(p, i) = grad_nu_hamiltonian(spec, ensemble.state(p, i), control.value(p, i),
                                            adjoint.y(p, i), adjoint.z(p, i));
    }
  });

  const double dt = grid.dt();
  double norm_sq = 0.0;
  double budget_sq = 0.0;
  cert.grad_norm_by_step.resize(static_cast<std::size_t>(N));
  Eigen::VectorXd mean_g(m), se_g(m), nu_bar(m);
  for (int i = 0; i < N; ++i) {
    mean_g.setZero();
    for (int p = 0; p < P; ++p) mean_g += g_all.vec(p, i);
    mean_g /= static_cast<double>(P);
    se_g.setZero();
    if (P > 1) {
      for (int p = 0; p < P; ++p) {
        se_g += (Eigen::VectorXd(g_all.vec(p, i)) - mean_g).cwiseAbs2();
      }
      se_g = (se_g / static_cast<double>(P - 1) / static_cast<double>(P)).cwiseSqrt();
    }
    if (control.is_deterministic()) {
      nu_bar = control.value(0, i);
    } else {
      nu_bar.setZero();
      for (int p = 0; p < P; ++p) nu_bar += control.value(p, i);
      nu_bar /= static_cast<double>(P);
    }
    const Eigen::VectorXd pg = nu_bar - spec.admissible.project(nu_bar - mean_g);
    cert.grad_norm_by_step[static_cast<std::size_t>(i)] = pg.norm();
    norm_sq += pg.squaredNorm() * dt;
    budget_sq += se_g.squaredNorm() * dt;
  }
  cert.grad_time_l2 = std::sqrt(norm_sq);
  cert.grad_norm_budget = 3.0 * std::sqrt(budget_sq);

  cert.max_probe_value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd dots(P);
  for (int i = 0; i < N; ++i) {
    for (std::size_t q = 0; q < probe_controls.size(); ++q) {
      const Eigen::VectorXd& probe = probe_controls[q];
      for (int p = 0; p < P; ++p) {
        dots[p] = g_all.vec(p, i).dot(Eigen::VectorXd(control.value(p, i)) - probe);
      }
      const MeanSe est = mean_se(dots);
      cert.max_probe_value = std::max(cert.max_probe_value, est.mean);
      if (est.mean > tol + 3.0 * est.std_error) {
        cert.violations.push_back({i, static_cast<int>(q), est.mean, est.std_error});
      }
    }
  }
  if (probe_controls.empty()) cert.max_probe_value = 0.0;

  cert.pass = cert.violations.empty();
  if (spec.admissible.is_unconstrained()) {
    cert.pass = cert.pass && cert.grad_time_l2 <= tol + cert.grad_norm_budget;
  }
  return cert;
}

GateauxReport verify_descent_free(const ProblemSpec& spec, const GalerkinSpace& space,
                                  const TimeGrid& grid, const ControlProcess& control,
                                  const NoiseEnsemble& noise,
                                  const std::vector<Eigen::VectorXd>& probe_controls,
                                  double eps, double tol, int workers) {
  if (!(eps > 0.0)) throw std::invalid_argument("verify_descent_free: eps must be > 0");
  if (!(tol >= 0.0)) throw std::invalid_argument("verify_descent_free: tol must be >= 0");
  if (control.n_steps() != grid.n_steps) {
    throw std::invalid_argument("verify_descent_free: control does not match grid");
  }
  for (const Eigen::VectorXd& probe : probe_controls) {
    if (probe.size() != spec.n_control) {
      throw std::invalid_argument("verify_descent_free: probe dimension mismatch");
    }
    if (!spec.admissible.contains(probe, 1e-12)) {
      throw std::invalid_argument("verify_descent_free: probe outside admissible set");
    }
  }

  GateauxReport report;
  report.eps = eps;
  report.tol = tol;
  const bool central = spec.admissible.is_unconstrained();
  const int N = grid.n_steps;

  Eigen::VectorXd base;
  if (!central) {
    const StateEnsemble e0 = integrate_forward(spec, space, grid, control, noise, workers);
    base = pathwise_cost(spec, grid, e0, control);
  }

  report.pass = true;
  report.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < probe_controls.size(); ++q) {
    const ControlProcess probe = ControlProcess::constant(probe_controls[q], N);
    const ControlProcess direction = probe.axpy(-1.0, control);
    const ControlProcess plus = control.axpy(eps, direction);

    const StateEnsemble ep = integrate_forward(spec, space, grid, plus, noise, workers);
    Eigen::VectorXd quotient = pathwise_cost(spec, grid, ep, plus);
    if (central) {
      const ControlProcess minus = control.axpy(-eps, direction);
      const StateEnsemble em = integrate_forward(spec, space, grid, minus, noise, workers);
      quotient = (quotient - pathwise_cost(spec, grid, em, minus)) / (2.0 * eps);
    } else {
      quotient = (quotient - base) / eps;
    }

    const MeanSe est = mean_se(quotient);
    const double threshold = tol + 3.0 * est.std_error;
    const double margin = (central ? std::abs(est.mean) : -est.mean) - threshold;
    GateauxProbe entry;
    entry.probe = static_cast<int>(q);
    entry.derivative = est.mean;
    entry.std_error = est.std_error;
    entry.violation = margin > 0.0;
    report.probes.push_back(entry);
    report.worst = std::max(report.worst, margin);
    if (entry.violation) report.pass = false;
  }
  if (probe_controls.empty()) report.worst = 0.0;
  return report;
}

}  // namespace seeopt
