#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "seeopt/adjoint.hpp"
#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/optimizer.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/scenarios.hpp"
#include "seeopt/variational.hpp"
#include "test_support.hpp"

using namespace seeopt;

TEST_CASE("epsilon ladders must be long, positive, strictly decreasing") {
  CHECK_NOTHROW(validate_epsilon_ladder({0.2, 0.1, 0.05, 0.025}));
  CHECK_THROWS_AS(validate_epsilon_ladder({0.2, 0.1, 0.05}), std::exception);
  CHECK_THROWS_AS(validate_epsilon_ladder({0.2, 0.1, 0.1, 0.05}), std::exception);
  CHECK_THROWS_AS(validate_epsilon_ladder({0.2, 0.1, 0.05, -0.01}), std::exception);
  CHECK_THROWS_AS(validate_epsilon_ladder({0.1, 0.2, 0.05, 0.025}), std::exception);
  CHECK_THROWS_AS(validate_epsilon_ladder({}), std::exception);
}

TEST_CASE("linearized lq flow obeys its defining recursion") {
  Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 20, 10));
  REQUIRE(sc.lq.has_value());
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  ControlProcess dir = scenario_direction(sc);
  StateEnsemble star = integrate_forward(sc.problem, sc.space, sc.grid, base, noise, 1);
  VariationalEnsemble var =
      integrate_variational(sc.problem, sc.space, sc.grid, star, base, dir, 1);

  const double dt = sc.grid.dt();
  const Eigen::VectorXd factors = sc.space.semigroup_factors(dt);
  for (int p = 0; p < sc.n_paths; ++p) {
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(sc.space.n_state());
    CHECK(var.at(p, 0).norm() == 0.0);
    for (int i = 0; i < sc.grid.n_steps; ++i) {
      const Eigen::VectorXd v = dir.value(0, i);
      expect = factors.cwiseProduct(expect + dt * (sc.lq->B * v) +
                                    sc.lq->apply_D(v) * Eigen::VectorXd(noise.dw(p, i)));
      CHECK((var.at(p, i + 1) - expect).norm() <= 1e-14 * (1.0 + expect.norm()));
    }
  }
  CHECK(var.noise_fingerprint == noise.fingerprint());
}

TEST_CASE("zero direction gives an identically zero sensitivity") {
  Scenario sc = make_scenario(testsupport::scenario_config("tanh-drift", 15, 8));
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  StateEnsemble star = integrate_forward(sc.problem, sc.space, sc.grid, base, noise, 1);
  ControlProcess zero = ControlProcess::zero(sc.space.n_control(), sc.grid.n_steps);
  VariationalEnsemble var =
      integrate_variational(sc.problem, sc.space, sc.grid, star, base, zero, 1);
  for (int p = 0; p < sc.n_paths; ++p) {
    for (int i = 0; i <= sc.grid.n_steps; ++i) {
      CHECK(var.at(p, i).norm() == 0.0);
    }
  }
}

TEST_CASE("lq difference quotient equals the sensitivity for any epsilon") {
  Scenario sc = make_scenario(testsupport::scenario_config("lq-quadratic-phi", 25, 12));
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  ControlProcess dir = scenario_direction(sc);
  StateEnsemble star = integrate_forward(sc.problem, sc.space, sc.grid, base, noise, 1);
  VariationalEnsemble var =
      integrate_variational(sc.problem, sc.space, sc.grid, star, base, dir, 1);

  auto [star2, shifted] = perturbed_pair(sc.problem, sc.space, sc.grid, base, dir, 0.37, noise);
  for (int p = 0; p < sc.n_paths; ++p) {
    for (int i = 0; i <= sc.grid.n_steps; ++i) {
      const Eigen::VectorXd quotient = (shifted.state(p, i) - star2.state(p, i)) / 0.37;
      CHECK((quotient - var.at(p, i)).norm() <= 1e-10 * (1.0 + quotient.norm()));
    }
  }
}

TEST_CASE("perturbation growth is quadratic in epsilon") {
  SUBCASE("exactly two for a control-linear flow") {
    Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 60, 16));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_rate_O_eps2(sc.problem, sc.space, sc.grid, base, scenario_direction(sc),
                          sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
    CHECK(report.slope_valid);
    CHECK(report.slope == doctest::Approx(2.0).epsilon(1e-6));
    REQUIRE(report.points.size() == sc.epsilons.size());
    for (std::size_t j = 0; j < report.points.size(); ++j) {
      CHECK(report.points[j].eps == sc.epsilons[j]);
      CHECK(report.points[j].value > 0.0);
    }
  }
  SUBCASE("within the declared band for the nonlinear flow") {
    Scenario sc = make_scenario(testsupport::scenario_config("tanh-drift", 400, 24));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_rate_O_eps2(sc.problem, sc.space, sc.grid, base, scenario_direction(sc),
                          sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
    CHECK(report.slope >= sc.bands.slope_lo);
    CHECK(report.slope <= sc.bands.slope_hi);
  }
}

TEST_CASE("normalized linearization error vanishes with epsilon") {
  SUBCASE("control-linear flows sit at the floor") {
    Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 60, 16));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_eta_vanishes(sc.problem, sc.space, sc.grid, base, scenario_direction(sc),
                           sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
    for (const RatePoint& pt : report.points) CHECK(pt.value <= 1e-12);
  }
  SUBCASE("nonlinear flows decay across the ladder") {
    Scenario sc = make_scenario(testsupport::scenario_config("tanh-drift", 400, 24));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_eta_vanishes(sc.problem, sc.space, sc.grid, base, scenario_direction(sc),
                           sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
    REQUIRE(report.points.size() >= 2);
    CHECK(report.points.back().value <=
          sc.bands.decay_factor * report.points.front().value);
  }
}

TEST_CASE("first-order cost expansion closes and flags a zeroed state gradient") {
  SUBCASE("pathwise-exact for the linear terminal cost") {
    Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 60, 16));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_variational_equation(sc.problem, sc.space, sc.grid, base,
                                   scenario_direction(sc), sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
  }
  SUBCASE("statistical decay for the nonlinear scenario") {
    Scenario sc = make_scenario(testsupport::scenario_config("tanh-drift", 600, 24));
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_variational_equation(sc.problem, sc.space, sc.grid, base,
                                   scenario_direction(sc), sc.epsilons, noise, sc.bands, 1);
    CHECK(report.pass);
  }
  SUBCASE("a dropped running-cost gradient breaks the expansion") {
    ScenarioConfig config = testsupport::scenario_config("tanh-drift", 600, 24);
    config.mutate = Mutation::drop_ell_x_term;
    Scenario sc = make_scenario(config);
    NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
    ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
    const RateReport report =
        check_variational_equation(sc.problem, sc.space, sc.grid, base,
                                   scenario_direction(sc), sc.epsilons, noise, sc.bands, 1);
    CHECK_FALSE(report.pass);
  }
}

TEST_CASE("duality identity closes and detects a dropped noise-control coupling") {
  Scenario sc = make_scenario(testsupport::scenario_config("lq-quadratic-phi", 2000, 12));
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  ControlProcess base = ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
  ControlProcess dir = scenario_direction(sc);
  StateEnsemble star = integrate_forward(sc.problem, sc.space, sc.grid, base, noise, 1);
  AdjointPair adjoint = solve_bsee(sc.problem, sc.space, sc.grid, star, base, sc.basis, 1);

  RateBands bands = sc.bands;
  bands.sigma_mult = 5.0;
  const DualityReport good =
      check_duality(sc.problem, sc.space, sc.grid, star, base, adjoint, dir, 0.0, bands, 1);
  CHECK(good.pass);
  CHECK(std::abs(good.gap) <= 5.0 * good.std_error);

  ProblemSpec broken = sc.problem;
  broken.drop_noise_control_coupling = true;
  const DualityReport bad =
      check_duality(broken, sc.space, sc.grid, star, base, adjoint, dir, 0.0, bands, 1);
  CHECK_FALSE(bad.pass);
  // The missing term is a deterministic share of the balance, far outside
  // the Monte Carlo band of the faithful check.
  CHECK(std::abs(bad.gap) > 5.0 * std::abs(good.gap));
}

TEST_CASE("optimality inequality warns when its premise fails") {
  Scenario sc = make_scenario(testsupport::scenario_config("lq-linear-phi", 400, 16));
  REQUIRE(sc.lq.has_value());
  NoiseEnsemble noise = sample_noise(sc.space, sc.grid, sc.n_paths, sc.seed);
  const LqSolution analytic = solve_lq_analytic(*sc.lq, sc.space, sc.grid);
  ControlProcess dir = scenario_direction(sc);

  StateEnsemble star =
      integrate_forward(sc.problem, sc.space, sc.grid, analytic.control, noise, 1);
  AdjointPair adjoint =
      solve_bsee(sc.problem, sc.space, sc.grid, star, analytic.control, sc.basis, 1);
  const InequalityReport at_optimum = check_variational_inequality(
      sc.problem, sc.space, sc.grid, star, analytic.control, adjoint, dir, sc.epsilons,
      1e-9, 1e-3, sc.bands, 1);
  CHECK(at_optimum.pass);
  CHECK(at_optimum.warning.empty());

  ControlProcess origin = ControlProcess::zero(sc.space.n_control(), sc.grid.n_steps);
  StateEnsemble star0 = integrate_forward(sc.problem, sc.space, sc.grid, origin, noise, 1);
  AdjointPair adjoint0 = solve_bsee(sc.problem, sc.space, sc.grid, star0, origin, sc.basis, 1);
  const InequalityReport off_optimum = check_variational_inequality(
      sc.problem, sc.space, sc.grid, star0, origin, adjoint0, dir, sc.epsilons, 0.5, 1e-3,
      sc.bands, 1);
  CHECK_FALSE(off_optimum.warning.empty());
}
