#include "seeopt/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace seeopt {

AdmissibleSet AdmissibleSet::unconstrained() {
  AdmissibleSet s;
  s.unconstrained_ = true;
  return s;
}

AdmissibleSet AdmissibleSet::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() != hi.size()) {
    throw std::invalid_argument("AdmissibleSet::box: lo and hi must have equal length");
  }
  if ((lo.array() > hi.array()).any()) {
    throw std::invalid_argument("AdmissibleSet::box: requires lo <= hi coordinatewise");
  }
  AdmissibleSet s;
  s.unconstrained_ = false;
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

Eigen::VectorXd AdmissibleSet::project(const Eigen::VectorXd& v) const {
  if (unconstrained_) return v;
  if (v.size() != lo_.size()) {
    throw std::invalid_argument("AdmissibleSet::project: dimension mismatch");
  }
  return v.cwiseMax(lo_).cwiseMin(hi_);
}

bool AdmissibleSet::contains(const Eigen::VectorXd& v, double tol) const {
  if (unconstrained_) return true;
  return (v - project(v)).lpNorm<Eigen::Infinity>() <= tol;
}

Eigen::VectorXd project_onto_admissible(const ProblemSpec& spec, const Eigen::VectorXd& nu) {
  if (!nu.allFinite()) {
    throw std::invalid_argument("project_onto_admissible: control must be finite");
  }
  return spec.admissible.project(nu);
}

Eigen::MatrixXd LqSpec::apply_D(const Eigen::VectorXd& nu) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_state, n_noise);
  for (int c = 0; c < n_control; ++c) out += nu[c] * D[c];
  return out;
}

Eigen::VectorXd LqSpec::apply_D_adjoint(const Eigen::MatrixXd& z) const {
  Eigen::VectorXd out(n_control);
  for (int c = 0; c < n_control; ++c) out[c] = D[c].cwiseProduct(z).sum();
  return out;
}

ProblemSpec LqSpec::to_problem() const {
  ProblemSpec p;
  p.n_state = n_state;
  p.n_control = n_control;
  p.n_noise = n_noise;
  p.x0 = x0;
  p.admissible = admissible;

  const LqSpec lq = *this;  // capture by value: the bundle must be self-contained
  p.drift = [lq](const Eigen::VectorXd&, const Eigen::VectorXd& nu) -> Eigen::VectorXd {
    return lq.B * nu;
  };
  p.diffusion = [lq](const Eigen::VectorXd&, const Eigen::VectorXd& nu) {
    return lq.apply_D(nu);
  };
  p.running_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd& nu) {
    return nu.squaredNorm();
  };
  p.drift_dx = [lq](const Eigen::VectorXd&, const Eigen::VectorXd&) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Zero(lq.n_state, lq.n_state);
  };
  p.drift_dnu = [lq](const Eigen::VectorXd&, const Eigen::VectorXd&) { return lq.B; };
  p.diffusion_dx = [lq](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return MatList(lq.n_state, Eigen::MatrixXd::Zero(lq.n_state, lq.n_noise));
  };
  p.diffusion_dnu = [lq](const Eigen::VectorXd&, const Eigen::VectorXd&) { return lq.D; };
  p.running_cost_dx = [lq](const Eigen::VectorXd&, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return Eigen::VectorXd::Zero(lq.n_state);
  };
  p.running_cost_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd& nu) -> Eigen::VectorXd {
    return 2.0 * nu;
  };
  if (linear_terminal) {
    const Eigen::VectorXd r = rho;
    p.terminal_cost = [r](const Eigen::VectorXd& x) { return r.dot(x); };
    p.terminal_gradient = [r](const Eigen::VectorXd&) { return r; };
  } else {
    p.terminal_cost = terminal_cost;
    p.terminal_gradient = terminal_gradient;
  }
  return p;
}

LqSpec make_diagonal_lq(const GalerkinSpace& space, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& q, const Eigen::VectorXd& rho,
                        const Eigen::VectorXd& x0) {
  if (h.size() != space.n_control()) {
    throw std::invalid_argument("make_diagonal_lq: h must have length n_control");
  }
  if (q.size() != space.n_noise() || (q.array() <= 0.0).any()) {
    throw std::invalid_argument("make_diagonal_lq: q must be positive with length n_noise");
  }
  if (rho.size() != space.n_state() || x0.size() != space.n_state()) {
    throw std::invalid_argument("make_diagonal_lq: rho and x0 must have length n_state");
  }
  if (space.n_control() != space.n_state()) {
    throw std::invalid_argument("make_diagonal_lq: B = id requires n_control == n_state");
  }
  LqSpec lq;
  lq.n_state = space.n_state();
  lq.n_control = space.n_control();
  lq.n_noise = space.n_noise();
  lq.x0 = x0;
  lq.B = Eigen::MatrixXd::Identity(lq.n_state, lq.n_control);
  const Eigen::VectorXd sq = q.array().sqrt();
  lq.D.resize(lq.n_control);
  for (int c = 0; c < lq.n_control; ++c) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(lq.n_state, lq.n_noise);
    const int diag = std::min(lq.n_state, lq.n_noise);
    for (int k = 0; k < diag; ++k) block(k, k) = h[c] * sq[k];
    lq.D[c] = std::move(block);
  }
  lq.linear_terminal = true;
  lq.rho = rho;
  return lq;
}

namespace {

// central difference step tuned for ~1e-10 relative error on smooth maps
constexpr double kFdStep = 1e-5;

double rel_err(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

template <class F>
double check_vector_map(const F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                        const Eigen::MatrixXd& jac, bool wrt_x) {
  // jac: (dim f) x (dim arg)
  const Eigen::VectorXd& arg = wrt_x ? x : nu;
  double worst = 0.0;
  for (int j = 0; j < arg.size(); ++j) {
    Eigen::VectorXd hi = arg, lo = arg;
    hi[j] += kFdStep;
    lo[j] -= kFdStep;
    const Eigen::VectorXd fp = wrt_x ? f(hi, nu) : f(x, hi);
    const Eigen::VectorXd fm = wrt_x ? f(lo, nu) : f(x, lo);
    const Eigen::VectorXd fd = (fp - fm) / (2.0 * kFdStep);
    for (int k = 0; k < fd.size(); ++k) {
      worst = std::max(worst, rel_err(jac(k, j), fd[k]));
    }
  }
  return worst;
}

template <class F>
double check_matrix_map(const F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                        const MatList& jac, bool wrt_x) {
  const Eigen::VectorXd& arg = wrt_x ? x : nu;
  double worst = 0.0;
  for (int j = 0; j < arg.size(); ++j) {
    Eigen::VectorXd hi = arg, lo = arg;
    hi[j] += kFdStep;
    lo[j] -= kFdStep;
    const Eigen::MatrixXd fp = wrt_x ? f(hi, nu) : f(x, hi);
    const Eigen::MatrixXd fm = wrt_x ? f(lo, nu) : f(x, lo);
    const Eigen::MatrixXd fd = (fp - fm) / (2.0 * kFdStep);
    const Eigen::MatrixXd& an = jac[j];
    for (int r = 0; r < fd.rows(); ++r) {
      for (int c = 0; c < fd.cols(); ++c) {
        worst = std::max(worst, rel_err(an(r, c), fd(r, c)));
      }
    }
  }
  return worst;
}

template <class F>
double check_scalar_map(const F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                        const Eigen::VectorXd& grad, bool wrt_x) {
  const Eigen::VectorXd& arg = wrt_x ? x : nu;
  double worst = 0.0;
  for (int j = 0; j < arg.size(); ++j) {
    Eigen::VectorXd hi = arg, lo = arg;
    hi[j] += kFdStep;
    lo[j] -= kFdStep;
    const double fp = wrt_x ? f(hi, nu) : f(x, hi);
    const double fm = wrt_x ? f(lo, nu) : f(x, lo);
    worst = std::max(worst, rel_err(grad[j], (fp - fm) / (2.0 * kFdStep)));
  }
  return worst;
}

}  // namespace

DerivativeReport derivative_selftest(const ProblemSpec& spec, int n_samples,
                                     std::int64_t seed, double tolerance) {
  if (n_samples < 1) {
    throw std::invalid_argument("derivative_selftest: n_samples must be >= 1");
  }
  DerivativeReport report;
  report.tolerance = tolerance;
  report.checks = {
      {"drift_dx", 0.0, true},       {"drift_dnu", 0.0, true},
      {"diffusion_dx", 0.0, true},   {"diffusion_dnu", 0.0, true},
      {"running_cost_dx", 0.0, true}, {"running_cost_dnu", 0.0, true},
      {"terminal_gradient", 0.0, true},
  };
  const auto useed = static_cast<std::uint64_t>(seed);
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd x(spec.n_state), nu(spec.n_control);
    for (int k = 0; k < spec.n_state; ++k) {
      x[k] = counter_gaussian(useed, s, 0, static_cast<std::uint64_t>(k));
    }
    for (int c = 0; c < spec.n_control; ++c) {
      nu[c] = counter_gaussian(useed, s, 1, static_cast<std::uint64_t>(c));
    }
    nu = spec.admissible.project(nu);

    auto bump = [&](int idx, double err) {
      report.checks[idx].max_rel_error = std::max(report.checks[idx].max_rel_error, err);
    };
    bump(0, check_vector_map(spec.drift, x, nu, spec.drift_dx(x, nu), true));
    bump(1, check_vector_map(spec.drift, x, nu, spec.drift_dnu(x, nu), false));
    bump(2, check_matrix_map(spec.diffusion, x, nu, spec.diffusion_dx(x, nu), true));
    bump(3, check_matrix_map(spec.diffusion, x, nu, spec.diffusion_dnu(x, nu), false));
    bump(4, check_scalar_map(spec.running_cost, x, nu, spec.running_cost_dx(x, nu), true));
    bump(5, check_scalar_map(spec.running_cost, x, nu, spec.running_cost_dnu(x, nu), false));

    double worst_phi = 0.0;
    const Eigen::VectorXd gphi = spec.terminal_gradient(x);
    for (int j = 0; j < spec.n_state; ++j) {
      Eigen::VectorXd hi = x, lo = x;
      hi[j] += kFdStep;
      lo[j] -= kFdStep;
      worst_phi = std::max(
          worst_phi,
          rel_err(gphi[j], (spec.terminal_cost(hi) - spec.terminal_cost(lo)) / (2.0 * kFdStep)));
    }
    bump(6, worst_phi);
  }
  report.all_pass = true;
  for (auto& c : report.checks) {
    c.pass = c.max_rel_error <= tolerance;
    report.all_pass = report.all_pass && c.pass;
  }
  return report;
}

}  // namespace seeopt
