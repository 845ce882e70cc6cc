#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/hamiltonian.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/scenarios.hpp"
#include "test_support.hpp"

using namespace seeopt;

TEST_CASE("hamiltonian matches its definition on a linear-quadratic bundle") {
  ScenarioConfig config = testsupport::scenario_config("lq-linear-phi");
  Scenario sc = make_scenario(config);
  REQUIRE(sc.lq.has_value());
  const int n = sc.space.n_state();
  const int m = sc.space.n_control();

  Eigen::VectorXd x(n), y(n), nu(m);
  for (int k = 0; k < n; ++k) {
    x[k] = 0.3 * std::sin(1.0 + k);
    y[k] = 0.7 * std::cos(2.0 + k);
  }
  for (int c = 0; c < m; ++c) nu[c] = 0.2 * std::sin(3.0 + c);
  Eigen::MatrixXd z(n, sc.space.n_noise());
  for (int k = 0; k < n; ++k)
    for (int r = 0; r < sc.space.n_noise(); ++r) z(k, r) = 0.1 * std::cos(k + 2.0 * r);

  const double expect = nu.squaredNorm() + y.dot(sc.lq->B * nu) +
                        (sc.lq->apply_D(nu).array() * z.array()).sum();
  CHECK(hamiltonian(sc.problem, x, nu, y, z) == doctest::Approx(expect).epsilon(1e-13));

  const Eigen::VectorXd gnu = grad_nu_hamiltonian(sc.problem, x, nu, y, z);
  const Eigen::VectorXd gnu_expect =
      2.0 * nu + sc.lq->B.transpose() * y + sc.lq->apply_D_adjoint(z);
  CHECK((gnu - gnu_expect).norm() <= 1e-13 * (1.0 + gnu_expect.norm()));

  // The LQ Hamiltonian has no state dependence beyond ell = |nu|^2.
  CHECK(grad_x_hamiltonian(sc.problem, x, nu, y, z).norm() == 0.0);
}

TEST_CASE("hamiltonian gradients pass finite-difference screening") {
  for (const char* name : {"lq-quadratic-phi", "tanh-drift"}) {
    CAPTURE(name);
    Scenario sc = make_scenario(testsupport::scenario_config(name));
    const DerivativeReport report = hamiltonian_derivative_selftest(sc.problem, 40, 11);
    CHECK(report.all_pass);
  }
}

TEST_CASE("omitting the noise-control coupling is caught by the screening") {
  Scenario sc = make_scenario(testsupport::scenario_config("tanh-drift"));
  ProblemSpec broken = sc.problem;
  broken.drop_noise_control_coupling = true;

  // The scalar Hamiltonian still carries the <sigma, z> term, so the
  // truncated control gradient disagrees with finite differences.
  const DerivativeReport report = hamiltonian_derivative_selftest(broken, 40, 11);
  CHECK_FALSE(report.all_pass);

  bool nu_flagged = false;
  for (const auto& check : report.checks) {
    if (check.name.find("nu") != std::string::npos && !check.pass) nu_flagged = true;
  }
  CHECK(nu_flagged);
}

TEST_CASE("cost evaluation integrates the running cost exactly") {
  // ell = |nu|^2 with a constant control gives a deterministic quadrature;
  // phi adds <rho, X_N> on top.
  Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 50, 16));
  REQUIRE(sc.lq.has_value());
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  Eigen::VectorXd value = Eigen::VectorXd::Constant(sc.space.n_control(), 0.4);
  ControlProcess nu = ControlProcess::constant(value, sc.grid.n_steps);
  StateEnsemble ens = integrate_forward(sc.problem, sc.space, sc.grid, nu, noise, 1);

  const MeanSe cost = evaluate_cost(sc.problem, sc.grid, ens, nu, 1);
  const Eigen::VectorXd pathwise = pathwise_cost(sc.problem, sc.grid, ens, nu, 1);
  REQUIRE(pathwise.size() == sc.n_paths);

  const double quadrature = value.squaredNorm() * sc.grid.horizon;
  double mean_terminal = 0.0;
  for (int p = 0; p < sc.n_paths; ++p) {
    const double expect_p = quadrature + sc.lq->rho.dot(ens.state(p, sc.grid.n_steps));
    CHECK(pathwise[p] == doctest::Approx(expect_p).epsilon(1e-12));
    mean_terminal += expect_p;
  }
  mean_terminal /= sc.n_paths;
  CHECK(cost.mean == doctest::Approx(mean_terminal).epsilon(1e-12));

  const MeanSe direct = mean_se(pathwise);
  CHECK(cost.mean == doctest::Approx(direct.mean).epsilon(1e-13));
  CHECK(cost.std_error == doctest::Approx(direct.std_error).epsilon(1e-13));
}

TEST_CASE("mean and standard error follow the textbook formulas") {
  Eigen::VectorXd values(4);
  values << 1.0, 2.0, 3.0, 6.0;
  const MeanSe stats = mean_se(values);
  CHECK(stats.mean == doctest::Approx(3.0).epsilon(1e-15));
  // Sample variance 14/3, standard error sqrt(14/3/4).
  CHECK(stats.std_error == doctest::Approx(std::sqrt(14.0 / 3.0 / 4.0)).epsilon(1e-13));

  const MeanSe single = mean_se(Eigen::VectorXd::Constant(1, 5.0));
  CHECK(single.mean == doctest::Approx(5.0));
  CHECK(single.std_error == 0.0);
}
