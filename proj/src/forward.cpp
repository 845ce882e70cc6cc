#include "seeopt/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seeopt/parallel.hpp"

namespace seeopt {

ControlProcess ControlProcess::deterministic(Eigen::MatrixXd values) {
  if (values.rows() < 1 || values.cols() < 1) {
    throw std::invalid_argument("ControlProcess: empty value table");
  }
  ControlProcess c;
  c.deterministic_ = true;
  c.det_values_ = std::move(values);
  return c;
}

ControlProcess ControlProcess::constant(const Eigen::VectorXd& value, int n_steps) {
  return deterministic(value.replicate(1, n_steps));
}

ControlProcess ControlProcess::zero(int n_control, int n_steps) {
  return deterministic(Eigen::MatrixXd::Zero(n_control, n_steps));
}

ControlProcess ControlProcess::per_path(PathArray values) {
  ControlProcess c;
  c.deterministic_ = false;
  c.path_values_ = std::move(values);
  return c;
}

int ControlProcess::n_control() const {
  return deterministic_ ? static_cast<int>(det_values_.rows()) : path_values_.rows();
}

int ControlProcess::n_steps() const {
  return deterministic_ ? static_cast<int>(det_values_.cols()) : path_values_.n_slots();
}

int ControlProcess::n_paths() const { return deterministic_ ? 1 : path_values_.n_paths(); }

Eigen::Map<const Eigen::VectorXd> ControlProcess::value(int path, int step) const {
  if (deterministic_) {
    return {det_values_.col(step).data(), det_values_.rows()};
  }
  return path_values_.vec(path, step);
}

const Eigen::MatrixXd& ControlProcess::values() const {
  if (!deterministic_) {
    throw std::logic_error("ControlProcess::values: control is per-path");
  }
  return det_values_;
}

ControlProcess ControlProcess::axpy(double scale, const ControlProcess& other) const {
  if (n_control() != other.n_control() || n_steps() != other.n_steps()) {
    throw std::invalid_argument("ControlProcess::axpy: shape mismatch");
  }
  if (deterministic_ && other.deterministic_) {
    return deterministic(det_values_ + scale * other.det_values_);
  }
  const int paths = std::max(n_paths(), other.n_paths());
  if (!deterministic_ && !other.deterministic_ && n_paths() != other.n_paths()) {
    throw std::invalid_argument("ControlProcess::axpy: path count mismatch");
  }
  PathArray out(paths, n_steps(), n_control());
  for (int p = 0; p < paths; ++p) {
    for (int i = 0; i < n_steps(); ++i) {
      out.vec(p, i) = value(deterministic_ ? 0 : p, i) +
                      scale * other.value(other.deterministic_ ? 0 : p, i);
    }
  }
  return per_path(std::move(out));
}

double ControlProcess::admissibility_gap(const AdmissibleSet& set) const {
  double gap = 0.0;
  for (int p = 0; p < n_paths(); ++p) {
    for (int i = 0; i < n_steps(); ++i) {
      const Eigen::VectorXd v = value(p, i);
      gap = std::max(gap, (v - set.project(v)).lpNorm<Eigen::Infinity>());
    }
  }
  return gap;
}

double ControlProcess::time_l2_norm(double dt) const {
  double acc = 0.0;
  for (int p = 0; p < n_paths(); ++p) {
    for (int i = 0; i < n_steps(); ++i) {
      acc += value(p, i).squaredNorm() * dt;
    }
  }
  return std::sqrt(acc / n_paths());
}

double control_distance(const ControlProcess& a, const ControlProcess& b, double dt) {
  if (a.n_control() != b.n_control() || a.n_steps() != b.n_steps()) {
    throw std::invalid_argument("control_distance: shape mismatch");
  }
  const int paths = std::max(a.n_paths(), b.n_paths());
  double acc = 0.0;
  for (int p = 0; p < paths; ++p) {
    for (int i = 0; i < a.n_steps(); ++i) {
      acc += (a.value(std::min(p, a.n_paths() - 1), i) -
              b.value(std::min(p, b.n_paths() - 1), i))
                 .squaredNorm() *
             dt;
    }
  }
  return std::sqrt(acc / paths);
}

ControlProcess refine_control(const ControlProcess& control, int factor) {
  if (factor < 1) throw std::invalid_argument("refine_control: factor must be >= 1");
  if (factor == 1) return control;
  if (control.is_deterministic()) {
    const Eigen::MatrixXd& coarse = control.values();
    Eigen::MatrixXd fine(coarse.rows(), coarse.cols() * factor);
    for (Eigen::Index i = 0; i < coarse.cols(); ++i) {
      for (int r = 0; r < factor; ++r) fine.col(i * factor + r) = coarse.col(i);
    }
    return ControlProcess::deterministic(std::move(fine));
  }
  PathArray fine(control.n_paths(), control.n_steps() * factor, control.n_control());
  for (int p = 0; p < control.n_paths(); ++p) {
    for (int i = 0; i < control.n_steps(); ++i) {
      for (int r = 0; r < factor; ++r) fine.vec(p, i * factor + r) = control.value(p, i);
    }
  }
  return ControlProcess::per_path(std::move(fine));
}

double state_scale(const StateEnsemble& ensemble) {
  double sup = 0.0;
  for (int i = 0; i <= ensemble.n_steps(); ++i) {
    double acc = 0.0;
    for (int p = 0; p < ensemble.n_paths(); ++p) acc += ensemble.state(p, i).squaredNorm();
    sup = std::max(sup, acc / ensemble.n_paths());
  }
  return sup;
}

StateEnsemble integrate_forward(const ProblemSpec& spec, const GalerkinSpace& space,
                                const TimeGrid& grid, const ControlProcess& control,
                                const NoiseEnsemble& noise, int workers) {
  const int n_paths = noise.n_paths();
  const int N = grid.n_steps;
  if (noise.n_steps() != N) {
    throw std::invalid_argument("integrate_forward: noise and grid step counts differ");
  }
  if (control.n_steps() != N) {
    throw std::invalid_argument("integrate_forward: control and grid step counts differ");
  }
  if (!control.is_deterministic() && control.n_paths() != n_paths) {
    throw std::invalid_argument("integrate_forward: control and noise path counts differ");
  }
  if (spec.x0.size() != space.n_state()) {
    throw std::invalid_argument("integrate_forward: x0 length does not match n_state");
  }

  StateEnsemble out;
  out.states = PathArray(n_paths, N + 1, space.n_state());
  out.seed = noise.seed();
  out.noise = noise;

  const Eigen::VectorXd step_factors = space.semigroup_factors(grid.dt());
  const double dt = grid.dt();
  std::vector<std::string> failures(n_paths);

  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t up) {
    const int p = static_cast<int>(up);
    const int cp = control.is_deterministic() ? 0 : p;
    out.states.vec(p, 0) = spec.x0;
    Eigen::VectorXd x = spec.x0;
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd nu = control.value(cp, i);
      Eigen::VectorXd next = x + dt * spec.drift(x, nu) + spec.diffusion(x, nu) * noise.dw(p, i);
      next = step_factors.cwiseProduct(next);
      if (!next.allFinite()) {
        failures[p] = "non-finite state at path " + std::to_string(p) + ", step " +
                      std::to_string(i + 1);
        return;
      }
      out.states.vec(p, i + 1) = next;
      x = std::move(next);
    }
  });

  for (const auto& f : failures) {
    if (!f.empty()) throw std::runtime_error("integrate_forward: " + f);
  }
  return out;
}

std::pair<StateEnsemble, StateEnsemble> perturbed_pair(
    const ProblemSpec& spec, const GalerkinSpace& space, const TimeGrid& grid,
    const ControlProcess& nu_star, const ControlProcess& dir, double eps,
    const NoiseEnsemble& noise, int workers) {
  if (eps < 0.0 || eps > 1.0) {
    throw std::invalid_argument("perturbed_pair: eps must lie in [0, 1]");
  }
  const ControlProcess perturbed = nu_star.axpy(eps, dir);
  if (perturbed.admissibility_gap(spec.admissible) > 1e-12) {
    throw std::invalid_argument("perturbed_pair: perturbed control leaves the admissible set");
  }
  StateEnsemble base = integrate_forward(spec, space, grid, nu_star, noise, workers);
  StateEnsemble shifted = integrate_forward(spec, space, grid, perturbed, noise, workers);
  return {std::move(base), std::move(shifted)};
}

}  // namespace seeopt
