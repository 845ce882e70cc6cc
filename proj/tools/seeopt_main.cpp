#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "seeopt/config.hpp"
#include "seeopt/forward.hpp"
#include "seeopt/galerkin.hpp"
#include "seeopt/hamiltonian.hpp"
#include "seeopt/io.hpp"
#include "seeopt/optimizer.hpp"
#include "seeopt/problem.hpp"
#include "seeopt/scenarios.hpp"
#include "seeopt/variational.hpp"

namespace {

using namespace seeopt;

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

int print_checks(const std::vector<CheckLine>& checks) {
  bool all = true;
  for (const CheckLine& c : checks) {
    std::printf("[%s] %-24s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.pass;
  }
  std::printf("%s\n", all ? "all checks passed" : "CHECKS FAILED");
  return all ? 0 : 1;
}

NoiseEnsemble sample_scaled(const GalerkinSpace& space, const TimeGrid& grid, int n_paths,
                            std::int64_t seed, int workers, double scale) {
  NoiseEnsemble noise = sample_noise(space, grid, n_paths, seed, workers);
  if (scale != 1.0) {
    for (int p = 0; p < noise.n_paths(); ++p) {
      for (int i = 0; i < noise.n_steps(); ++i) noise.dw(p, i) *= scale;
    }
  }
  return noise;
}

void finish_outputs(const ScenarioConfig& config, std::vector<WrittenFile>& files) {
  const Json manifest = make_manifest(config, files);
  write_file(config.out_dir, "manifest.json", manifest.dump(2) + "\n");
  for (const WrittenFile& f : files) {
    std::printf("wrote %s/%s\n", config.out_dir.c_str(), f.name.c_str());
  }
  std::printf("wrote %s/manifest.json\n", config.out_dir.c_str());
}

// Canonical nonzero driving control for simulate/adjoint runs; keeps the
// control-modulated diffusion active (a zero control would silence it on
// the LQ scenarios).
ControlProcess driving_control(const Scenario& sc) {
  return ControlProcess::constant(sc.direction_value, sc.grid.n_steps);
}

int cmd_simulate(const ScenarioConfig& config) {
  const Scenario sc = make_scenario(config);
  const NoiseEnsemble noise =
      sample_scaled(sc.space, sc.grid, sc.n_paths, sc.seed, sc.workers, config.noise_scale);
  const ControlProcess control = driving_control(sc);
  const StateEnsemble ensemble =
      integrate_forward(sc.problem, sc.space, sc.grid, control, noise, sc.workers);

  std::vector<WrittenFile> files;
  files.push_back(write_file(config.out_dir, "states.csv", states_csv(ensemble, sc.grid)));
  finish_outputs(config, files);
  std::printf("simulated %d paths, %d steps, scenario %s\n", ensemble.n_paths(),
              ensemble.n_steps(), sc.name.c_str());
  return 0;
}

int cmd_adjoint(const ScenarioConfig& config) {
  const Scenario sc = make_scenario(config);
  const NoiseEnsemble noise =
      sample_scaled(sc.space, sc.grid, sc.n_paths, sc.seed, sc.workers, config.noise_scale);
  const ControlProcess control = driving_control(sc);
  const StateEnsemble ensemble =
      integrate_forward(sc.problem, sc.space, sc.grid, control, noise, sc.workers);
  const AdjointPair pair =
      solve_bsee(sc.problem, sc.space, sc.grid, ensemble, control, sc.basis, sc.workers);

  std::vector<WrittenFile> files;
  files.push_back(write_file(config.out_dir, "adjoint.csv",
                             adjoint_csv(pair, sc.grid, sc.space.n_state(), sc.space.n_noise())));
  files.push_back(write_file(config.out_dir, "adjoint_diagnostics.json",
                             to_json(pair.diagnostics).dump(2) + "\n"));

  std::vector<CheckLine> checks;
  checks.push_back({"adjoint_finite", pair.Y.all_finite() && pair.Z.all_finite(), ""});

  if (sc.lq.has_value()) {
    const AdjointPair byhand =
        solve_bsee_lq_explicit(*sc.lq, sc.space, sc.grid, ensemble, sc.basis, sc.workers);
    std::string csv = "step,t,max_rel_dev_y,max_abs_dev_z\n";
    double worst_y = 0.0;
    for (int i = 0; i <= sc.grid.n_steps; ++i) {
      double dev_y = 0.0, dev_z = 0.0;
      for (int p = 0; p < pair.n_paths(); ++p) {
        const double ref = std::max(1e-300, byhand.y(p, i).norm());
        dev_y = std::max(dev_y, (pair.y(p, i) - byhand.y(p, i)).norm() / ref);
        dev_z = std::max(dev_z, (pair.z(p, i) - byhand.z(p, i)).cwiseAbs().maxCoeff());
      }
      worst_y = std::max(worst_y, dev_y);
      csv += std::to_string(i) + "," + format_double(sc.grid.t(i)) + "," +
             format_double(dev_y) + "," + format_double(dev_z) + "\n";
    }
    files.push_back(write_file(config.out_dir, "adjoint_deviation.csv", csv));

    if (sc.lq->linear_terminal) {
      // Closed form for linear terminal cost: Y(t) = S*(T - t) rho, Z = 0.
      double rel = 0.0;
      for (int i = 0; i <= sc.grid.n_steps; ++i) {
        const Eigen::VectorXd y_ref =
            sc.space.semigroup_factors(sc.grid.horizon - sc.grid.t(i)).cwiseProduct(sc.lq->rho);
        for (int p = 0; p < pair.n_paths(); ++p) {
          rel = std::max(rel, (pair.y(p, i) - y_ref).norm() / y_ref.norm());
        }
      }
      checks.push_back({"adjoint_y_analytic", rel <= 1e-6,
                        "max relative deviation " + format_double(rel)});
      checks.push_back({"z_within_noise_floor",
                        pair.diagnostics.max_abs_z <= pair.diagnostics.z_noise_floor,
                        "max |Z| " + format_double(pair.diagnostics.max_abs_z) + ", floor " +
                            format_double(pair.diagnostics.z_noise_floor)});
    } else {
      checks.push_back({"cross_solver_y", worst_y <= 1e-10,
                        "max relative deviation " + format_double(worst_y)});
      std::printf("noise floor report: max |Z| = %s, floor = %s\n",
                  format_double(pair.diagnostics.max_abs_z).c_str(),
                  format_double(pair.diagnostics.z_noise_floor).c_str());
    }
  }

  finish_outputs(config, files);
  return print_checks(checks);
}

struct OptimizeArtifacts {
  OptimizerResult result;
  StateEnsemble star;
  AdjointPair adjoint;
  OptimalityCertificate certificate;
  GateauxReport descent;
  double tol = 0.0;
  std::vector<Eigen::VectorXd> probes;
};

OptimizeArtifacts optimize_and_certify(const Scenario& sc, const NoiseEnsemble& noise) {
  OptimizeArtifacts out;
  const ControlProcess nu0 = ControlProcess::zero(sc.space.n_control(), sc.grid.n_steps);
  out.result =
      run_optimizer(sc.problem, sc.space, sc.grid, nu0, noise, sc.basis, sc.optimizer, sc.workers);
  out.star =
      integrate_forward(sc.problem, sc.space, sc.grid, out.result.control, noise, sc.workers);
  out.adjoint = solve_bsee(sc.problem, sc.space, sc.grid, out.star, out.result.control, sc.basis,
                           sc.workers);
  out.tol = sc.certificate_tol_factor * std::max(1e-6, std::abs(out.result.final_cost));
  out.probes = make_probe_set(sc.problem.admissible, sc.space.n_control(), 100,
                              detail::mix64(static_cast<std::uint64_t>(sc.seed) ^ 0x50b3u));
  out.certificate =
      verify_maximum_principle(sc.problem, sc.space, sc.grid, out.star, out.result.control,
                               out.adjoint, out.probes, out.tol, sc.workers);
  out.certificate.trace = out.result.trace;
  out.certificate.seed = sc.seed;
  out.certificate.config = sc.optimizer;

  std::vector<Eigen::VectorXd> descent_probes(
      out.probes.begin(), out.probes.begin() + std::min<std::size_t>(8, out.probes.size()));
  out.descent = verify_descent_free(sc.problem, sc.space, sc.grid, out.result.control, noise,
                                    descent_probes, 0.05, out.tol, sc.workers);
  return out;
}

int cmd_optimize(const ScenarioConfig& config) {
  const Scenario sc = make_scenario(config);
  const NoiseEnsemble noise =
      sample_scaled(sc.space, sc.grid, sc.n_paths, sc.seed, sc.workers, config.noise_scale);
  OptimizeArtifacts art = optimize_and_certify(sc, noise);

  std::vector<WrittenFile> files;
  files.push_back(write_file(config.out_dir, "trace.csv", trace_csv(art.result.trace)));
  files.push_back(write_file(config.out_dir, "control.csv",
                             control_csv(art.result.control, sc.grid)));
  files.push_back(write_file(config.out_dir, "certificate.json",
                             to_json(art.certificate).dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "descent.json",
                             to_json(art.descent).dump(2) + "\n"));

  std::vector<CheckLine> checks;
  checks.push_back({"maximum_principle", art.certificate.pass,
                    "grad time-L2 " + format_double(art.certificate.grad_time_l2) + ", tol " +
                        format_double(art.tol)});
  checks.push_back({"descent_free", art.descent.pass,
                    "worst margin " + format_double(art.descent.worst)});
  if (!sc.problem.admissible.is_unconstrained()) {
    const double gap = art.result.control.admissibility_gap(sc.problem.admissible);
    checks.push_back({"control_in_box", gap <= 1e-12, "gap " + format_double(gap)});
  }

  if (sc.lq.has_value() && sc.lq->linear_terminal) {
    const LqSolution analytic = solve_lq_analytic(*sc.lq, sc.space, sc.grid);
    const double dt = sc.grid.dt();
    const double rel_err = control_distance(art.result.control, analytic.control, dt) /
                           analytic.control.time_l2_norm(dt);

    const TimeGrid fine_grid(sc.grid.horizon, 2 * sc.grid.n_steps);
    const NoiseEnsemble fine_noise = sample_scaled(sc.space, fine_grid, sc.n_paths, sc.seed,
                                                   sc.workers, config.noise_scale);
    const NoiseEnsemble coarse_noise = fine_noise.coarsened();
    const LqSolution fine_analytic = solve_lq_analytic(*sc.lq, sc.space, fine_grid);
    const MeanSe cost_coarse = evaluate_cost(
        sc.problem, sc.grid,
        integrate_forward(sc.problem, sc.space, sc.grid, analytic.control, coarse_noise,
                          sc.workers),
        analytic.control, sc.workers);
    const MeanSe cost_fine = evaluate_cost(
        sc.problem, fine_grid,
        integrate_forward(sc.problem, sc.space, fine_grid, fine_analytic.control, fine_noise,
                          sc.workers),
        fine_analytic.control, sc.workers);
    const double budget = std::abs(cost_coarse.mean - cost_fine.mean);
    const double cost_gap = std::abs(art.result.final_cost - analytic.optimal_cost);

    std::string csv = "step,t";
    for (int c = 0; c < sc.space.n_control(); ++c) {
      csv += ",nu" + std::to_string(c) + ",nu_ref" + std::to_string(c);
    }
    csv += "\n";
    for (int i = 0; i < sc.grid.n_steps; ++i) {
      csv += std::to_string(i) + "," + format_double(sc.grid.t(i));
      for (int c = 0; c < sc.space.n_control(); ++c) {
        csv += "," + format_double(art.result.control.value(0, i)[c]);
        csv += "," + format_double(analytic.control.value(0, i)[c]);
      }
      csv += "\n";
    }
    files.push_back(write_file(config.out_dir, "control_vs_analytic.csv", csv));

    const Json comparison{{"relative_control_error", rel_err},
                          {"optimal_cost", analytic.optimal_cost},
                          {"final_cost", art.result.final_cost},
                          {"final_cost_se", art.result.final_cost_se},
                          {"cost_gap", cost_gap},
                          {"refinement_budget", budget}};
    files.push_back(
        write_file(config.out_dir, "lq_comparison.json", comparison.dump(2) + "\n"));

    checks.push_back({"lq_control_error", rel_err <= 0.05,
                      "relative error " + format_double(rel_err)});
    checks.push_back({"lq_cost_match",
                      cost_gap <= 3.0 * art.result.final_cost_se + budget,
                      "gap " + format_double(cost_gap) + " vs 3 SE + budget " +
                          format_double(3.0 * art.result.final_cost_se + budget)});
  }

  finish_outputs(config, files);
  std::printf("final cost %s (SE %s), %d iterations, converged=%d\n",
              format_double(art.result.final_cost).c_str(),
              format_double(art.result.final_cost_se).c_str(),
              static_cast<int>(art.result.trace.size()), art.result.converged ? 1 : 0);
  return print_checks(checks);
}

int cmd_verify(const ScenarioConfig& config) {
  const Scenario sc = make_scenario(config);
  const NoiseEnsemble noise =
      sample_scaled(sc.space, sc.grid, sc.n_paths, sc.seed, sc.workers, config.noise_scale);
  OptimizeArtifacts art = optimize_and_certify(sc, noise);
  const ControlProcess& star_control = art.result.control;
  const ControlProcess direction = scenario_direction(sc);

  // The perturbation-expansion statements hold at any admissible control, so
  // they are probed at the canonical driving control, where the linear term of
  // the expansion is O(1) and the relative pass bands are informative.  At the
  // optimizer's fixed point that term cancels to zero by construction.
  const ControlProcess probe_control = driving_control(sc);
  const RateReport rate = check_rate_O_eps2(sc.problem, sc.space, sc.grid, probe_control,
                                            direction, sc.epsilons, noise, sc.bands, sc.workers);
  const RateReport eta = check_eta_vanishes(sc.problem, sc.space, sc.grid, probe_control,
                                            direction, sc.epsilons, noise, sc.bands, sc.workers);
  const RateReport vareq =
      check_variational_equation(sc.problem, sc.space, sc.grid, probe_control, direction,
                                 sc.epsilons, noise, sc.bands, sc.workers);

  // Discretization allowance for the duality identity: Richardson estimate
  // from a step-doubling pair driven by the same Brownian paths.
  double budget = 0.0;
  double gap_coarse = 0.0, gap_fine = 0.0;
  {
    const TimeGrid fine_grid(sc.grid.horizon, 2 * sc.grid.n_steps);
    const ControlProcess fine_control = refine_control(star_control, 2);
    const ControlProcess fine_direction = refine_control(direction, 2);
    const NoiseEnsemble fine_noise = sample_scaled(sc.space, fine_grid, sc.n_paths, sc.seed,
                                                   sc.workers, config.noise_scale);
    {
      const StateEnsemble fine_star = integrate_forward(sc.problem, sc.space, fine_grid,
                                                        fine_control, fine_noise, sc.workers);
      const AdjointPair fine_adjoint = solve_bsee(sc.problem, sc.space, fine_grid, fine_star,
                                                  fine_control, sc.basis, sc.workers);
      gap_fine = check_duality(sc.problem, sc.space, fine_grid, fine_star, fine_control,
                               fine_adjoint, fine_direction, 0.0, sc.bands, sc.workers)
                     .gap;
    }
    const NoiseEnsemble coarse_noise = fine_noise.coarsened();
    const StateEnsemble coarse_star = integrate_forward(sc.problem, sc.space, sc.grid,
                                                        star_control, coarse_noise, sc.workers);
    const AdjointPair coarse_adjoint = solve_bsee(sc.problem, sc.space, sc.grid, coarse_star,
                                                  star_control, sc.basis, sc.workers);
    gap_coarse = check_duality(sc.problem, sc.space, sc.grid, coarse_star, star_control,
                               coarse_adjoint, direction, 0.0, sc.bands, sc.workers)
                     .gap;
    budget = 2.0 * std::abs(gap_coarse - gap_fine) + 1e-12;
  }
  const DualityReport duality =
      check_duality(sc.problem, sc.space, sc.grid, art.star, star_control, art.adjoint,
                    direction, budget, sc.bands, sc.workers);

  const InequalityReport inequality = check_variational_inequality(
      sc.problem, sc.space, sc.grid, art.star, star_control, art.adjoint, direction, sc.epsilons,
      art.certificate.grad_time_l2, art.tol, sc.bands, sc.workers);

  const DerivativeReport coeff_derivs = derivative_selftest(sc.problem, 100, sc.seed);
  const DerivativeReport ham_derivs = hamiltonian_derivative_selftest(sc.problem, 100, sc.seed);

  std::vector<WrittenFile> files;
  files.push_back(write_file(config.out_dir, "rate_eps2.json", to_json(rate).dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "eta_decay.json", to_json(eta).dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "variational_equation.json",
                             to_json(vareq).dump(2) + "\n"));
  Json duality_json = to_json(duality);
  duality_json["gap_coarse"] = gap_coarse;
  duality_json["gap_fine"] = gap_fine;
  files.push_back(write_file(config.out_dir, "duality.json", duality_json.dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "variational_inequality.json",
                             to_json(inequality).dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "certificate.json",
                             to_json(art.certificate).dump(2) + "\n"));
  files.push_back(write_file(config.out_dir, "descent.json",
                             to_json(art.descent).dump(2) + "\n"));
  const Json derivs{{"coefficients", to_json(coeff_derivs)},
                    {"hamiltonian", to_json(ham_derivs)}};
  files.push_back(write_file(config.out_dir, "derivative_checks.json", derivs.dump(2) + "\n"));

  std::vector<CheckLine> checks;
  checks.push_back({"rate_eps2", rate.pass,
                    rate.slope_valid ? "slope " + format_double(rate.slope) : rate.note});
  checks.push_back({"eta_decay", eta.pass, eta.note.empty() ? "" : eta.note});
  checks.push_back({"variational_equation", vareq.pass,
                    vareq.note.empty() ? "remainder decays" : vareq.note});
  checks.push_back({"duality", duality.pass,
                    "gap " + format_double(duality.gap) + " vs 3 SE + budget " +
                        format_double(3.0 * duality.std_error + budget)});
  checks.push_back({"variational_inequality", inequality.pass, inequality.warning});
  checks.push_back({"maximum_principle", art.certificate.pass,
                    "grad time-L2 " + format_double(art.certificate.grad_time_l2) + ", " +
                        std::to_string(art.certificate.violations.size()) + " probe violations"});
  checks.push_back({"descent_free", art.descent.pass,
                    "worst margin " + format_double(art.descent.worst)});
  checks.push_back({"coefficient_derivatives", coeff_derivs.all_pass, ""});
  checks.push_back({"hamiltonian_derivatives", ham_derivs.all_pass, ""});

  Json summary = Json::array();
  for (const CheckLine& c : checks) {
    summary.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  files.push_back(write_file(config.out_dir, "summary.json", summary.dump(2) + "\n"));

  finish_outputs(config, files);
  return print_checks(checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic maximum principle toolkit for controlled evolution equations"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mutate_name, scenario_name;
  std::int64_t seed = 0;
  int paths = 0, steps = 0, workers = 0, max_iters = -1;
  std::vector<double> epsilons;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "noise seed override");
    cmd->add_option("--epsilons", epsilons, "perturbation ladder override")->delimiter(',');
    cmd->add_option("--mutate", mutate_name,
                    "fault injection: drop-sigma-nu-term | flip-b-nu-sign | drop-ell-x-term");
    cmd->add_option("--paths", paths, "Monte Carlo path count override");
    cmd->add_option("--steps", steps, "time step count override");
    cmd->add_option("--workers", workers, "worker thread count");
    cmd->add_option("--scenario", scenario_name,
                    "scenario override: lq-linear-phi | lq-quadratic-phi | tanh-drift");
    cmd->add_option("--max-iters", max_iters, "optimizer iteration cap override");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "integrate forward state paths");
  CLI::App* adjoint = app.add_subcommand("adjoint", "solve the adjoint backward pair");
  CLI::App* verify = app.add_subcommand("verify", "run the verification harness");
  CLI::App* optimize = app.add_subcommand("optimize", "run the projected-gradient search");
  for (CLI::App* cmd : {simulate, adjoint, verify, optimize}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);
  CLI::App* cmd = app.get_subcommands().front();

  try {
    ScenarioConfig config;
    if (cmd->count("--config")) config = load_config_file(config_path);
    if (cmd->count("--scenario")) config.scenario = scenario_name;
    if (cmd->count("--out")) config.out_dir = out_dir;
    if (cmd->count("--seed")) config.seed = seed;
    if (cmd->count("--epsilons")) config.epsilons = epsilons;
    if (cmd->count("--mutate")) config.mutate = parse_mutation(mutate_name);
    if (cmd->count("--paths")) config.n_paths = paths;
    if (cmd->count("--steps")) config.n_steps = steps;
    if (cmd->count("--workers")) config.workers = workers;
    if (cmd->count("--max-iters")) config.max_iters = max_iters;
    config.validate();

    if (cmd == simulate) return cmd_simulate(config);
    if (cmd == adjoint) return cmd_adjoint(config);
    if (cmd == verify) return cmd_verify(config);
    return cmd_optimize(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
