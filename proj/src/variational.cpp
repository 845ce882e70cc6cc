#include "seeopt/variational.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seeopt/hamiltonian.hpp"
#include "seeopt/parallel.hpp"

namespace seeopt {

void validate_epsilon_ladder(const std::vector<double>& epsilons) {
  if (epsilons.size() < 4) {
    throw std::invalid_argument("epsilon ladder needs at least 4 points");
  }
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] > 0.0)) {
      throw std::invalid_argument("epsilon ladder entries must be positive");
    }
    if (k > 0 && !(epsilons[k] < epsilons[k - 1])) {
      throw std::invalid_argument("epsilon ladder must be strictly decreasing");
    }
  }
}

namespace {

Eigen::MatrixXd combine_matrices(const MatList& mats, const Eigen::VectorXd& weights,
                                 const char* who) {
  if (mats.size() != static_cast<std::size_t>(weights.size())) {
    throw std::invalid_argument(std::string(who) + ": weight count mismatch");
  }
  Eigen::MatrixXd out = weights[0] * mats[0];
  for (Eigen::Index k = 1; k < weights.size(); ++k) {
    out += weights[k] * mats[static_cast<std::size_t>(k)];
  }
  return out;
}

struct SupPoint {
  double value = 0.0;
  double std_error = 0.0;
  int step = 0;
};

/// sup over grid points of mean(sq(p, i)), with the standard error taken at
/// the attaining step. sq must fill per-path squared quantities for step i.
template <class SqFn>
SupPoint sup_mean(int n_paths, int n_steps, SqFn&& sq) {
  SupPoint out;
  Eigen::VectorXd vals(n_paths);
  Eigen::VectorXd best(n_paths);
  for (int i = 0; i <= n_steps; ++i) {
    for (int p = 0; p < n_paths; ++p) vals[p] = sq(p, i);
    const double m = vals.mean();
    if (i == 0 || m > out.value) {
      out.value = m;
      out.step = i;
      best = vals;
    }
  }
  const MeanSe ms = mean_se(best);
  out.std_error = ms.std_error;
  return out;
}

void fit_loglog(RateReport& report) {
  const std::size_t k = report.points.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const RatePoint& pt : report.points) {
    const double x = std::log(pt.eps);
    const double y = std::log(pt.value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(k);
  const double denom = n * sxx - sx * sx;
  report.slope = (n * sxy - sx * sy) / denom;
  report.intercept = (sy - report.slope * sx) / n;
  report.slope_valid = true;
}

ControlProcess admissible_shift(const ProblemSpec& spec, const ControlProcess& base,
                                const ControlProcess& direction, double eps,
                                const char* who) {
  ControlProcess shifted = base.axpy(eps, direction);
  if (shifted.admissibility_gap(spec.admissible) > 1e-12) {
    throw std::invalid_argument(std::string(who) + ": perturbed control leaves the admissible set");
  }
  return shifted;
}

}  // namespace

VariationalEnsemble integrate_variational(const ProblemSpec& spec, const GalerkinSpace& space,
                                          const TimeGrid& grid, const StateEnsemble& star,
                                          const ControlProcess& star_control,
                                          const ControlProcess& direction, int workers) {
  const int N = grid.n_steps;
  const int P = star.n_paths();
  const int n = space.n_state();
  if (star.n_steps() != N) {
    throw std::invalid_argument("integrate_variational: star ensemble and grid step counts differ");
  }
  if (star_control.n_steps() != N || direction.n_steps() != N) {
    throw std::invalid_argument("integrate_variational: control and grid step counts differ");
  }
  if (star_control.n_control() != spec.n_control || direction.n_control() != spec.n_control) {
    throw std::invalid_argument("integrate_variational: control dimension mismatch");
  }
  if ((!star_control.is_deterministic() && star_control.n_paths() != P) ||
      (!direction.is_deterministic() && direction.n_paths() != P)) {
    throw std::invalid_argument("integrate_variational: control and ensemble path counts differ");
  }
  if (star.noise.n_steps() != N || star.noise.n_paths() != P ||
      star.noise.n_noise() != space.n_noise()) {
    throw std::invalid_argument("integrate_variational: star ensemble noise mismatch");
  }
  const double dt = grid.dt();
  const Eigen::VectorXd sfac = space.semigroup_factors(dt);

  VariationalEnsemble out;
  out.p = PathArray(P, N + 1, n);
  out.noise_fingerprint = star.noise.fingerprint();

  std::vector<std::string> failures(static_cast<std::size_t>(P));
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int path = static_cast<int>(pp);
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(n);
    out.p.vec(path, 0) = cur;
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd xs = star.state(path, i);
      const Eigen::VectorXd us = star_control.value(path, i);
      const Eigen::VectorXd v = direction.value(path, i);
      const Eigen::MatrixXd bx = spec.drift_dx(xs, us);
      const Eigen::MatrixXd bnu = spec.drift_dnu(xs, us);
      Eigen::MatrixXd load = combine_matrices(spec.diffusion_dx(xs, us), cur,
                                              "integrate_variational");
      load += combine_matrices(spec.diffusion_dnu(xs, us), v, "integrate_variational");
      const Eigen::VectorXd next =
          sfac.cwiseProduct(cur + dt * (bx * cur + bnu * v) + load * star.noise.dw(path, i));
      if (!next.allFinite()) {
        failures[pp] = "integrate_variational: non-finite sensitivity at path " +
                       std::to_string(path) + ", step " + std::to_string(i + 1);
        return;
      }
      cur = next;
      out.p.vec(path, i + 1) = cur;
    }
  });
  for (const std::string& f : failures) {
    if (!f.empty()) throw std::runtime_error(f);
  }
  return out;
}

RateReport check_rate_O_eps2(const ProblemSpec& spec, const GalerkinSpace& space,
                             const TimeGrid& grid, const ControlProcess& star_control,
                             const ControlProcess& direction,
                             const std::vector<double>& epsilons, const NoiseEnsemble& noise,
                             const RateBands& bands, int workers) {
  validate_epsilon_ladder(epsilons);
  RateReport report;
  report.name = "state-perturbation-rate";

  const StateEnsemble star = integrate_forward(spec, space, grid, star_control, noise, workers);
  const double floor = 1e-20 * std::max(1.0, state_scale(star));

  for (double eps : epsilons) {
    const ControlProcess shifted =
        admissible_shift(spec, star_control, direction, eps, "check_rate_O_eps2");
    const StateEnsemble xe = integrate_forward(spec, space, grid, shifted, noise, workers);
    const SupPoint sup = sup_mean(star.n_paths(), star.n_steps(), [&](int p, int i) {
      return (xe.state(p, i) - star.state(p, i)).squaredNorm();
    });
    report.points.push_back({eps, sup.value, sup.std_error});
  }

  bool all_floor = true;
  for (const RatePoint& pt : report.points) all_floor = all_floor && pt.value <= floor;
  if (all_floor) {
    report.pass = true;
    report.note = "state differences at the floating-point floor; slope fit skipped";
    return report;
  }
  for (const RatePoint& pt : report.points) {
    if (pt.value <= 0.0) {
      report.note = "mixed zero and nonzero ladder values; slope undefined";
      return report;
    }
  }
  fit_loglog(report);
  report.pass = report.slope >= bands.slope_lo && report.slope <= bands.slope_hi;
  return report;
}

RateReport check_eta_vanishes(const ProblemSpec& spec, const GalerkinSpace& space,
                              const TimeGrid& grid, const ControlProcess& star_control,
                              const ControlProcess& direction,
                              const std::vector<double>& epsilons, const NoiseEnsemble& noise,
                              const RateBands& bands, int workers) {
  validate_epsilon_ladder(epsilons);
  RateReport report;
  report.name = "sensitivity-remainder";

  const StateEnsemble star = integrate_forward(spec, space, grid, star_control, noise, workers);
  const VariationalEnsemble var =
      integrate_variational(spec, space, grid, star, star_control, direction, workers);
  const double scale = std::max(1.0, state_scale(star));

  for (double eps : epsilons) {
    const ControlProcess shifted =
        admissible_shift(spec, star_control, direction, eps, "check_eta_vanishes");
    const StateEnsemble xe = integrate_forward(spec, space, grid, shifted, noise, workers);
    const SupPoint sup = sup_mean(star.n_paths(), star.n_steps(), [&](int p, int i) {
      return ((xe.state(p, i) - star.state(p, i)) / eps - var.at(p, i)).squaredNorm();
    });
    report.points.push_back({eps, sup.value, sup.std_error});
  }

  const double floor = bands.linear_floor * scale;
  bool linear_pass = true;
  for (const RatePoint& pt : report.points) linear_pass = linear_pass && pt.value <= floor;
  if (linear_pass) {
    report.pass = true;
    report.note = "remainder at the linear-flow floor (" + std::to_string(floor) + ")";
    return report;
  }

  bool nonincreasing = true;
  for (std::size_t k = 1; k < report.points.size(); ++k) {
    const RatePoint& prev = report.points[k - 1];
    const RatePoint& cur = report.points[k];
    if (cur.value > prev.value + 2.0 * (cur.std_error + prev.std_error)) {
      nonincreasing = false;
    }
  }
  const double first = report.points.front().value;
  const double last = report.points.back().value;
  report.pass = nonincreasing && last <= bands.decay_factor * first;
  report.note = nonincreasing ? "decay ladder" : "ladder not monotone within 2 standard errors";
  return report;
}

RateReport check_variational_equation(const ProblemSpec& spec, const GalerkinSpace& space,
                                      const TimeGrid& grid, const ControlProcess& star_control,
                                      const ControlProcess& direction,
                                      const std::vector<double>& epsilons,
                                      const NoiseEnsemble& noise, const RateBands& bands,
                                      int workers) {
  validate_epsilon_ladder(epsilons);
  RateReport report;
  report.name = "cost-expansion-remainder";

  const StateEnsemble star = integrate_forward(spec, space, grid, star_control, noise, workers);
  const VariationalEnsemble var =
      integrate_variational(spec, space, grid, star, star_control, direction, workers);
  const Eigen::VectorXd base_cost = pathwise_cost(spec, grid, star, star_control, workers);
  const int P = star.n_paths();
  const int N = star.n_steps();
  const double dt = grid.dt();

  Eigen::VectorXd linear_path(P);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    double acc = spec.terminal_gradient(star.state(p, N)).dot(var.at(p, N));
    for (int i = 0; i < N; ++i) {
      acc += spec.running_cost_dx(star.state(p, i), star_control.value(p, i)).dot(var.at(p, i)) *
             dt;
    }
    linear_path[p] = acc;
  });

  std::vector<double> remainder_se;
  double linear_scale = 0.0;
  for (double eps : epsilons) {
    const ControlProcess shifted =
        admissible_shift(spec, star_control, direction, eps, "check_variational_equation");
    const StateEnsemble xe = integrate_forward(spec, space, grid, shifted, noise, workers);
    const Eigen::VectorXd shifted_cost = pathwise_cost(spec, grid, xe, shifted, workers);

    Eigen::VectorXd r_path(P);
    Eigen::VectorXd predicted_path(P);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
      const int p = static_cast<int>(pp);
      double delta_ell = 0.0;
      for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd xs = star.state(p, i);
        delta_ell += (spec.running_cost(xs, shifted.value(p, i)) -
                      spec.running_cost(xs, star_control.value(p, i))) *
                     dt;
      }
      predicted_path[p] = eps * linear_path[p] + delta_ell;
      r_path[p] = shifted_cost[p] - base_cost[p] - predicted_path[p];
    });
    const MeanSe r = mean_se(r_path);
    report.points.push_back({eps, std::abs(r.mean), r.std_error});
    remainder_se.push_back(r.std_error);
    linear_scale = std::abs(predicted_path.mean()) / eps;
  }

  const MeanSe base = mean_se(base_cost);
  const double floor = bands.linear_floor * std::max(1.0, std::abs(base.mean));
  bool all_floor = true;
  for (const RatePoint& pt : report.points) all_floor = all_floor && pt.value <= floor;
  if (all_floor) {
    report.pass = true;
    report.note = "remainder at the floating-point floor; expansion is exact here";
    return report;
  }

  bool decaying = true;
  for (std::size_t k = 1; k < report.points.size(); ++k) {
    const RatePoint& prev = report.points[k - 1];
    const RatePoint& cur = report.points[k];
    const double slack = 2.0 * (cur.std_error / cur.eps + prev.std_error / prev.eps);
    if (cur.value / cur.eps > prev.value / prev.eps + slack) decaying = false;
  }
  const RatePoint& last = report.points.back();
  const double tol = bands.decay_factor * linear_scale +
                     bands.sigma_mult * remainder_se.back() / last.eps;
  report.pass = decaying && (last.value / last.eps <= tol);
  report.note = decaying ? "remainder-over-eps decays" : "remainder-over-eps not decreasing";
  return report;
}

DualityReport check_duality(const ProblemSpec& spec, const GalerkinSpace& space,
                            const TimeGrid& grid, const StateEnsemble& star,
                            const ControlProcess& star_control, const AdjointPair& adjoint,
                            const ControlProcess& direction, double budget,
                            const RateBands& bands, int workers) {
  const int P = star.n_paths();
  const int N = star.n_steps();
  if (adjoint.n_paths() != P || adjoint.n_steps() != N) {
    throw std::invalid_argument("check_duality: adjoint pair does not match ensemble");
  }
  if (adjoint.noise_fingerprint != star.noise.fingerprint()) {
    throw std::invalid_argument("check_duality: adjoint and ensemble use different noise");
  }
  const VariationalEnsemble var =
      integrate_variational(spec, space, grid, star, star_control, direction, workers);
  const double dt = grid.dt();

  Eigen::VectorXd gap_path(P);
  Eigen::VectorXd lhs_path(P);
  Eigen::VectorXd rhs_path(P);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    lhs_path[p] = adjoint.y(p, N).dot(var.at(p, N));
    double rhs = 0.0;
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd xs = star.state(p, i);
      const Eigen::VectorXd us = star_control.value(p, i);
      const Eigen::VectorXd v = direction.value(p, i);
      rhs -= spec.running_cost_dx(xs, us).dot(var.at(p, i)) * dt;
      rhs += (spec.drift_dnu(xs, us) * v).dot(adjoint.y(p, i)) * dt;
      if (spec.drop_noise_control_coupling) continue;
      const Eigen::MatrixXd load = combine_matrices(spec.diffusion_dnu(xs, us), v,
                                                    "check_duality");
      rhs += load.cwiseProduct(adjoint.z(p, i)).sum() * dt;
    }
    rhs_path[p] = rhs;
    gap_path[p] = lhs_path[p] - rhs;
  });

  DualityReport report;
  report.lhs = lhs_path.mean();
  report.rhs = rhs_path.mean();
  const MeanSe gap = mean_se(gap_path);
  report.gap = gap.mean;
  report.std_error = gap.std_error;
  report.budget = budget;
  report.pass = std::abs(report.gap) <= bands.sigma_mult * report.std_error + budget;
  return report;
}

InequalityReport check_variational_inequality(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const StateEnsemble& star, const ControlProcess& star_control, const AdjointPair& adjoint,
    const ControlProcess& direction, const std::vector<double>& epsilons,
    double optimality_residual, double optimality_tol, const RateBands& bands, int workers) {
  validate_epsilon_ladder(epsilons);
  const int P = star.n_paths();
  const int N = star.n_steps();
  if (adjoint.n_paths() != P || adjoint.n_steps() != N) {
    throw std::invalid_argument("check_variational_inequality: adjoint pair does not match ensemble");
  }
  if (adjoint.noise_fingerprint != star.noise.fingerprint()) {
    throw std::invalid_argument("check_variational_inequality: adjoint and ensemble use different noise");
  }
  const VariationalEnsemble var =
      integrate_variational(spec, space, grid, star, star_control, direction, workers);
  const double dt = grid.dt();

  Eigen::VectorXd lin1_path(P);
  Eigen::VectorXd lin2_path(P);
  parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
    const int p = static_cast<int>(pp);
    lin1_path[p] = adjoint.y(p, N).dot(var.at(p, N));
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      acc += spec.running_cost_dx(star.state(p, i), star_control.value(p, i)).dot(var.at(p, i)) *
             dt;
    }
    lin2_path[p] = acc;
  });

  InequalityReport report;
  if (optimality_residual > optimality_tol) {
    report.warning = "base control optimality residual " + std::to_string(optimality_residual) +
                     " exceeds tolerance " + std::to_string(optimality_tol) +
                     "; the inequality's premise may fail";
  }

  report.pass = true;
  for (double eps : epsilons) {
    const ControlProcess shifted =
        admissible_shift(spec, star_control, direction, eps, "check_variational_inequality");
    Eigen::VectorXd term3_path(P);
    parallel_for(static_cast<std::size_t>(P), workers, [&](std::size_t pp) {
      const int p = static_cast<int>(pp);
      double acc = 0.0;
      for (int i = 0; i < N; ++i) {
        const Eigen::VectorXd xs = star.state(p, i);
        const Eigen::VectorXd us = star_control.value(p, i);
        const Eigen::VectorXd ue = shifted.value(p, i);
        const Eigen::VectorXd y = adjoint.y(p, i);
        const Eigen::MatrixXd z = adjoint.z(p, i);
        const double dh = hamiltonian(spec, xs, ue, y, z) - hamiltonian(spec, xs, us, y, z);
        const double db = (spec.drift(xs, ue) - spec.drift(xs, us)).dot(y);
        const double ds =
            (spec.diffusion(xs, ue) - spec.diffusion(xs, us)).cwiseProduct(z).sum();
        acc += (dh - db - ds) * dt;
      }
      term3_path[p] = acc;
    });
    Eigen::VectorXd lhs_path = eps * (lin1_path + lin2_path) + term3_path;
    const MeanSe lhs = mean_se(lhs_path);
    const double scale = std::abs(eps * lin1_path.mean()) + std::abs(eps * lin2_path.mean()) +
                         std::abs(term3_path.mean());
    const double tol = bands.decay_factor * scale + bands.sigma_mult * lhs.std_error;
    report.lhs_by_eps.push_back({eps, lhs.mean, lhs.std_error});
    report.tolerance_by_eps.push_back(tol);
    if (lhs.mean < -tol) report.pass = false;
  }
  return report;
}

}  // namespace seeopt
