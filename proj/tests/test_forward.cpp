#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/problem.hpp"
#include "test_support.hpp"

using namespace seeopt;

namespace {

/// Noise-free scalar problem dX = cos(X) dt with A = 0; reference solution
/// by classical fourth-order Runge-Kutta on a much finer grid.
ProblemSpec cosine_drift_problem() {
  ProblemSpec spec;
  spec.n_state = 1;
  spec.n_control = 1;
  spec.n_noise = 1;
  spec.x0 = Eigen::VectorXd::Constant(1, 0.2);
  spec.admissible = AdmissibleSet::unconstrained();
  spec.drift = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, std::cos(x[0])));
  };
  spec.drift_dx = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, -std::sin(x[0])));
  };
  spec.drift_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 1));
  };
  spec.diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(1, 1));
  };
  spec.diffusion_dx = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return MatList(1, Eigen::MatrixXd::Zero(1, 1));
  };
  spec.diffusion_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return MatList(1, Eigen::MatrixXd::Zero(1, 1));
  };
  spec.running_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 0.0; };
  spec.running_cost_dx = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(1));
  };
  spec.running_cost_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(1));
  };
  spec.terminal_cost = [](const Eigen::VectorXd& x) { return x[0]; };
  spec.terminal_gradient = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Ones(1));
  };
  return spec;
}

double rk4_reference(double x0, double horizon, int steps) {
  double x = x0;
  const double h = horizon / steps;
  for (int i = 0; i < steps; ++i) {
    const double k1 = std::cos(x);
    const double k2 = std::cos(x + 0.5 * h * k1);
    const double k3 = std::cos(x + 0.5 * h * k2);
    const double k4 = std::cos(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_CASE("drift-free diffusion-free flow reproduces the semigroup exactly") {
  Eigen::VectorXd lambda(3);
  lambda << -1.0, -0.25, 0.0;
  GalerkinSpace space(3, 3, 3, lambda);
  TimeGrid grid(1.5, 10);

  // The additive bundle at zero control has drift nu = 0 and sigma = 0, so
  // the exponential Euler recursion collapses to X_i = S(t_i) x0.
  ProblemSpec spec = testsupport::additive_quadratic_problem(3, 0.0, Eigen::VectorXd::Ones(3));
  NoiseEnsemble noise = sample_noise(space, grid, 3, 5);
  ControlProcess zero = ControlProcess::zero(3, grid.n_steps);
  StateEnsemble ens = integrate_forward(spec, space, grid, zero, noise, 1);

  for (int i = 0; i <= grid.n_steps; ++i) {
    const Eigen::VectorXd expect = space.semigroup_apply(grid.t(i), spec.x0);
    CHECK((Eigen::VectorXd(ens.state(0, i)) - expect).norm() <= 1e-14);
  }
}

TEST_CASE("noise-free nonlinear drift converges to the ode solution at first order") {
  const ProblemSpec spec = cosine_drift_problem();
  GalerkinSpace space(1, 1, 1, Eigen::VectorXd::Zero(1));
  const double horizon = 1.0;
  const double reference = rk4_reference(0.2, horizon, 4096);

  std::vector<double> errors;
  for (int steps : {16, 32, 64}) {
    TimeGrid grid(horizon, steps);
    NoiseEnsemble noise = sample_noise(space, grid, 1, 3);
    StateEnsemble ens = integrate_forward(spec, space, grid, ControlProcess::zero(1, steps),
                                          noise, 1);
    errors.push_back(std::abs(ens.state(0, steps)[0] - reference));
  }
  CHECK(errors[0] < 1.5e-2);
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
  CHECK(errors[0] / errors[1] == doctest::Approx(2.0).epsilon(0.25));
  CHECK(errors[1] / errors[2] == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("lq state response is exactly linear in the control") {
  ScenarioConfig config = testsupport::scenario_config("lq-linear-phi", 40, 20);
  Scenario sc = make_scenario(config);
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  ControlProcess dir = scenario_direction(sc);

  auto [star, shifted1] = perturbed_pair(sc.problem, sc.space, sc.grid, base, dir, 0.2, noise);
  auto [star2, shifted2] = perturbed_pair(sc.problem, sc.space, sc.grid, base, dir, 0.05, noise);

  for (int p = 0; p < sc.n_paths; ++p) {
    for (int i = 0; i <= sc.grid.n_steps; ++i) {
      const Eigen::VectorXd d1 = (shifted1.state(p, i) - star.state(p, i)) / 0.2;
      const Eigen::VectorXd d2 = (shifted2.state(p, i) - star2.state(p, i)) / 0.05;
      CHECK((d1 - d2).norm() <= 1e-10 * (1.0 + d1.norm()));
    }
  }
}

TEST_CASE("integration is reproducible and worker-count independent") {
  ScenarioConfig config = testsupport::scenario_config("tanh-drift", 30, 15);
  Scenario sc = make_scenario(config);
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess nu = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);

  StateEnsemble a = integrate_forward(sc.problem, sc.space, sc.grid, nu, noise, 1);
  StateEnsemble b = integrate_forward(sc.problem, sc.space, sc.grid, nu, noise, 4);
  StateEnsemble c = integrate_forward(sc.problem, sc.space, sc.grid, nu, noise, 1);
  for (int p = 0; p < sc.n_paths; ++p) {
    for (int i = 0; i <= sc.grid.n_steps; ++i) {
      CHECK((a.state(p, i) - b.state(p, i)).norm() == 0.0);
      CHECK((a.state(p, i) - c.state(p, i)).norm() == 0.0);
    }
  }
}

TEST_CASE("refined control is the same step function of time") {
  Eigen::MatrixXd values(2, 3);
  values << 1.0, 2.0, 3.0, -1.0, -2.0, -3.0;
  ControlProcess c = ControlProcess::deterministic(values);
  ControlProcess fine = refine_control(c, 4);
  REQUIRE(fine.n_steps() == 12);
  for (int i = 0; i < 12; ++i) {
    CHECK((fine.value(0, i) - c.value(0, i / 4)).norm() == 0.0);
  }
  ControlProcess same = refine_control(c, 1);
  CHECK(same.n_steps() == 3);
  CHECK_THROWS(refine_control(c, 0));
}

TEST_CASE("control algebra: axpy, distance, norms") {
  Eigen::MatrixXd va(1, 4), vb(1, 4);
  va << 1.0, 2.0, 3.0, 4.0;
  vb << 0.5, 0.5, 0.5, 0.5;
  ControlProcess a = ControlProcess::deterministic(va);
  ControlProcess b = ControlProcess::deterministic(vb);
  const double dt = 0.25;

  ControlProcess sum = a.axpy(2.0, b);
  for (int i = 0; i < 4; ++i) CHECK(sum.value(0, i)[0] == doctest::Approx(va(0, i) + 1.0));

  CHECK(a.time_l2_norm(dt) ==
        doctest::Approx(std::sqrt((1.0 + 4.0 + 9.0 + 16.0) * dt)).epsilon(1e-14));
  CHECK(control_distance(a, a, dt) == 0.0);
  CHECK(control_distance(a, b, dt) ==
        doctest::Approx(std::sqrt((0.25 + 2.25 + 6.25 + 12.25) * dt)).epsilon(1e-12));
}

TEST_CASE("expected lq state matches the discrete convolution formula") {
  ScenarioConfig config = testsupport::scenario_config("lq-linear-phi", 4000, 25);
  Scenario sc = make_scenario(config);
  REQUIRE(sc.lq.has_value());
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess nu = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  StateEnsemble ens = integrate_forward(sc.problem, sc.space, sc.grid, nu, noise, 1);

  const int N = sc.grid.n_steps;
  const double dt = sc.grid.dt();
  Eigen::VectorXd mean_exact = sc.problem.x0;
  for (int i = 1; i <= N; ++i) {
    mean_exact = sc.space.semigroup_factors(dt).cwiseProduct(
        mean_exact + dt * (sc.lq->B * Eigen::VectorXd(nu.value(0, i - 1))));
    Eigen::VectorXd mean_mc = Eigen::VectorXd::Zero(sc.space.n_state());
    for (int p = 0; p < sc.n_paths; ++p) mean_mc += ens.state(p, i);
    mean_mc /= sc.n_paths;
    // The noise is mean zero, so the sample mean sits within Monte Carlo
    // error of the deterministic recursion.
    Eigen::VectorXd spread = Eigen::VectorXd::Zero(sc.space.n_state());
    for (int p = 0; p < sc.n_paths; ++p) {
      spread += (Eigen::VectorXd(ens.state(p, i)) - mean_mc).cwiseAbs2();
    }
    const Eigen::VectorXd se = (spread / (sc.n_paths - 1.0) / sc.n_paths).cwiseSqrt();
    for (int k = 0; k < sc.space.n_state(); ++k) {
      CHECK(std::abs(mean_mc[k] - mean_exact[k]) <= 5.0 * se[k] + 1e-12);
    }
  }
}
