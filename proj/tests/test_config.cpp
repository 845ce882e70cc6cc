#include <doctest.h>

#include <string>

#include "seeopt/config.hpp"

using namespace seeopt;

TEST_CASE("config text round-trips every field") {
  ScenarioConfig c;
  c.scenario = "tanh-drift";
  c.n_state = 6;
  c.horizon = 2.5;
  c.n_steps = 80;
  c.n_paths = 1234;
  c.seed = -7;
  c.workers = 4;
  c.noise_scale = 0.75;
  c.regression_degree = 3;
  c.regression_modes = 2;
  c.step_size = 0.05;
  c.max_iters = 17;
  c.grad_tol = 1e-8;
  c.armijo = false;
  c.epsilons = {0.4, 0.2, 0.1, 0.05, 0.025};
  c.slope_lo = 1.7;
  c.slope_hi = 2.3;
  c.decay_factor = 0.2;
  c.sigma_mult = 2.5;
  c.linear_floor = 1e-9;
  c.certificate_tol_factor = 5e-4;
  c.mutate = Mutation::flip_b_nu_sign;
  c.out_dir = "elsewhere";

  const ScenarioConfig back = parse_config_text(config_to_text(c));
  CHECK(back.scenario == c.scenario);
  CHECK(back.n_state == c.n_state);
  CHECK(back.horizon == c.horizon);
  CHECK(back.n_steps == c.n_steps);
  CHECK(back.n_paths == c.n_paths);
  CHECK(back.seed == c.seed);
  CHECK(back.workers == c.workers);
  CHECK(back.noise_scale == c.noise_scale);
  CHECK(back.regression_degree == c.regression_degree);
  CHECK(back.regression_modes == c.regression_modes);
  CHECK(back.step_size == c.step_size);
  CHECK(back.max_iters == c.max_iters);
  CHECK(back.grad_tol == c.grad_tol);
  CHECK(back.armijo == c.armijo);
  CHECK(back.epsilons == c.epsilons);
  CHECK(back.slope_lo == c.slope_lo);
  CHECK(back.slope_hi == c.slope_hi);
  CHECK(back.decay_factor == c.decay_factor);
  CHECK(back.sigma_mult == c.sigma_mult);
  CHECK(back.linear_floor == c.linear_floor);
  CHECK(back.certificate_tol_factor == c.certificate_tol_factor);
  CHECK(back.mutate == c.mutate);
  CHECK(back.out_dir == c.out_dir);
}

namespace {

std::string thrown_message(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parser reports bad input with its line") {
  CHECK(thrown_message("nonsense = 1\n").find("line 1") != std::string::npos);
  CHECK(thrown_message("seed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK_THROWS(parse_config_text("n_steps = lots\n"));
  CHECK_THROWS(parse_config_text("armijo = maybe\n"));
  CHECK_THROWS(parse_config_text("no equals sign here\n"));
}

TEST_CASE("config parser skips comments and blank lines") {
  const ScenarioConfig c = parse_config_text(
      "# leading comment\n"
      "\n"
      "seed = 5   # trailing comment\n"
      "n_paths = 77\n");
  CHECK(c.seed == 5);
  CHECK(c.n_paths == 77);
  CHECK(c.scenario == "lq-linear-phi");
}

TEST_CASE("config validation rejects out-of-range values") {
  ScenarioConfig c;
  c.n_steps = 0;
  CHECK_THROWS(c.validate());

  c = ScenarioConfig{};
  c.epsilons = {0.1, 0.2, 0.3, 0.4};
  CHECK_THROWS(c.validate());

  c = ScenarioConfig{};
  c.epsilons = {0.2, 0.1, 0.05};
  CHECK_THROWS(c.validate());

  c = ScenarioConfig{};
  c.noise_scale = -1.0;
  CHECK_THROWS(c.validate());

  c = ScenarioConfig{};
  c.validate();
}

TEST_CASE("mutation names round-trip") {
  for (Mutation m : {Mutation::none, Mutation::drop_sigma_nu_term,
                     Mutation::flip_b_nu_sign, Mutation::drop_ell_x_term}) {
    CHECK(parse_mutation(mutation_name(m)) == m);
  }
  CHECK_THROWS(parse_mutation("drop-everything"));
}
