#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seeopt {

/// Fault injections for harness-power tests: each one breaks a single
/// derivative map while leaving the base maps intact, imitating a missing
/// or sign-flipped term in a hand-coded gradient.
enum class Mutation {
  none,
  drop_sigma_nu_term,  // diffusion_dnu returns all-zero matrices
  flip_b_nu_sign,      // drift_dnu returns its negative
  drop_ell_x_term,     // running_cost_dx returns zero
};

Mutation parse_mutation(const std::string& name);
std::string mutation_name(Mutation m);

/// Run settings parsed from a key=value file. Every field has the
/// documented default below; unknown keys are errors.
struct ScenarioConfig {
  std::string scenario = "lq-linear-phi";  // lq-linear-phi | lq-quadratic-phi | tanh-drift
  int n_state = 0;         // 0 = scenario default (8 for LQ, 4 for tanh-drift)
  double horizon = 1.0;
  int n_steps = 50;
  int n_paths = 0;         // 0 = scenario default (2000 for LQ, 1000 for tanh-drift)
  std::int64_t seed = 91;
  int workers = 1;
  double noise_scale = 1.0;  // multiplies the sampled increments; 0 = deterministic flow

  int regression_degree = 2;
  int regression_modes = 0;  // 0 = first min(n_state, 4) coordinates

  double step_size = 0.1;
  int max_iters = 200;
  double grad_tol = 1e-6;
  bool armijo = true;

  std::vector<double> epsilons = {0.2, 0.1, 0.05, 0.025};
  double slope_lo = 1.8;
  double slope_hi = 2.2;
  double decay_factor = 0.1;
  double sigma_mult = 3.0;
  double linear_floor = 1e-10;
  double certificate_tol_factor = 1e-3;  // times the cost scale

  Mutation mutate = Mutation::none;
  std::string out_dir = "out";

  /// Rejects out-of-range values (dimensions, tolerances, ladder shape).
  void validate() const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys, bad
/// values, and malformed lines throw std::runtime_error naming the line.
ScenarioConfig parse_config_text(const std::string& text);

/// parse_config_text over the file's contents; failure to open throws.
ScenarioConfig load_config_file(const std::string& path);

/// The config serialized back to the key=value format it parses from;
/// echoed into run manifests so outputs are reproducible from them.
std::string config_to_text(const ScenarioConfig& config);

}  // namespace seeopt
