#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "seeopt/galerkin.hpp"
#include "seeopt/problem.hpp"
#include "test_support.hpp"

using namespace seeopt;

TEST_CASE("box projection clamps, is idempotent and nonexpansive") {
  Eigen::VectorXd lo(2), hi(2);
  lo << -1.0, 0.0;
  hi << 1.0, 2.0;
  const AdmissibleSet box = AdmissibleSet::box(lo, hi);

  Eigen::VectorXd v(2);
  v << 3.0, -0.5;
  Eigen::VectorXd pv = box.project(v);
  CHECK(pv[0] == 1.0);
  CHECK(pv[1] == 0.0);
  CHECK((box.project(pv) - pv).norm() == 0.0);
  CHECK(box.contains(pv));
  CHECK_FALSE(box.contains(v));
  CHECK(box.contains(v, 2.0));

  std::uint64_t s = 9;
  auto unif = [&s]() {
    s = detail::mix64(s);
    return 6.0 * (double(s >> 11) * 0x1.0p-53) - 3.0;
  };
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd a(2), b(2);
    a << unif(), unif();
    b << unif(), unif();
    CHECK((box.project(a) - box.project(b)).norm() <= (a - b).norm() + 1e-15);
  }

  const AdmissibleSet free = AdmissibleSet::unconstrained();
  CHECK((free.project(v) - v).norm() == 0.0);
  CHECK(free.contains(v));
}

TEST_CASE("diagonal lq bundle matches its defining maps") {
  Eigen::VectorXd lambda(3);
  lambda << -0.5, -1.0, -1.5;
  GalerkinSpace space(3, 3, 3, lambda);
  Eigen::VectorXd h(3), q(3), rho(3), x0(3);
  h << 1.0, 0.5, 0.25;
  q << 0.5, 0.25, 0.125;
  rho << 1.0, 0.5, 0.33;
  x0 << 0.2, 0.1, 0.05;
  const LqSpec lq = make_diagonal_lq(space, h, q, rho, x0);
  const ProblemSpec spec = lq.to_problem();

  Eigen::VectorXd x(3), nu(3);
  x << 0.3, -0.2, 0.7;
  nu << 0.4, -0.1, 0.2;

  CHECK((spec.drift(x, nu) - lq.B * nu).norm() == 0.0);
  const Eigen::MatrixXd sig = spec.diffusion(x, nu);
  const double load = h.dot(nu);
  for (int k = 0; k < 3; ++k) {
    CHECK(sig(k, k) == doctest::Approx(load * std::sqrt(q[k])).epsilon(1e-14));
  }
  CHECK(spec.running_cost(x, nu) == doctest::Approx(nu.squaredNorm()).epsilon(1e-14));
  CHECK(spec.terminal_cost(x) == doctest::Approx(rho.dot(x)).epsilon(1e-14));

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  z(0, 0) = 1.0;
  z(1, 2) = -2.0;
  CHECK(std::abs(lq.apply_D(nu).cwiseProduct(z).sum() - nu.dot(lq.apply_D_adjoint(z))) <=
        1e-13);
}

TEST_CASE("derivative selftest accepts exact derivatives and flags broken ones") {
  Eigen::VectorXd rho(2);
  rho << 1.0, -0.5;
  ProblemSpec spec = testsupport::additive_quadratic_problem(2, 0.6, rho);
  const DerivativeReport ok = derivative_selftest(spec, 60, 11);
  CHECK(ok.all_pass);

  ProblemSpec broken = spec;
  broken.drift_dnu = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(-Eigen::MatrixXd::Identity(2, 2));
  };
  const DerivativeReport bad = derivative_selftest(broken, 60, 11);
  CHECK_FALSE(bad.all_pass);
  bool flagged = false;
  for (const DerivativeCheck& c : bad.checks) {
    if (c.name == "drift_dnu") flagged = !c.pass;
  }
  CHECK(flagged);
}
