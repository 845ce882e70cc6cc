#include "seeopt/galerkin.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "seeopt/parallel.hpp"

namespace seeopt {

TimeGrid::TimeGrid(double horizon_, int n_steps_) : horizon(horizon_), n_steps(n_steps_) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("TimeGrid: horizon must be a positive real");
  }
  if (n_steps < 1) {
    throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
  }
}

GalerkinSpace::GalerkinSpace(int n_state, int n_control, int n_noise,
                             Eigen::VectorXd eigenvalues)
    : n_state_(n_state), n_control_(n_control), n_noise_(n_noise),
      eigenvalues_(std::move(eigenvalues)) {
  if (n_state_ < 1 || n_control_ < 1 || n_noise_ < 1) {
    throw std::invalid_argument("GalerkinSpace: all dimensions must be >= 1");
  }
  if (eigenvalues_.size() != n_state_) {
    throw std::invalid_argument("GalerkinSpace: eigenvalues must have length n_state");
  }
  if (!eigenvalues_.allFinite()) {
    throw std::invalid_argument("GalerkinSpace: eigenvalues must be finite");
  }
}

Eigen::VectorXd GalerkinSpace::semigroup_factors(double t) const {
  if (t < 0.0 || !std::isfinite(t)) {
    throw std::invalid_argument("semigroup: t must be a finite nonnegative real");
  }
  return (eigenvalues_.array() * t).exp();
}

Eigen::VectorXd GalerkinSpace::semigroup_apply(double t, const Eigen::VectorXd& v) const {
  if (v.size() != n_state_) {
    throw std::invalid_argument("semigroup: vector length does not match n_state");
  }
  if (t == 0.0) return v;  // S(0) = I exactly
  return semigroup_factors(t).cwiseProduct(v);
}

double counter_gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                        std::uint64_t mode) {
  using detail::mix64;
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ path);
  key = mix64(key ^ step);
  key = mix64(key ^ mode);
  const std::uint64_t a = mix64(key ^ 0xd1b54a32d192ed03ULL);
  const std::uint64_t b = mix64(key ^ 0x8cb92ba72f3d8dd7ULL);
  // u1 in (0, 1], u2 in [0, 1)
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseEnsemble::NoiseEnsemble(std::int64_t seed, int n_paths, int n_steps, int n_noise,
                             double dt)
    : seed_(seed), n_paths_(n_paths), n_steps_(n_steps), n_noise_(n_noise), dt_(dt),
      increments_(n_paths, n_steps, n_noise) {
  if (n_paths < 1) throw std::invalid_argument("NoiseEnsemble: n_paths must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("NoiseEnsemble: dt must be positive");
}

std::uint64_t NoiseEnsemble::fingerprint() const {
  using detail::mix64;
  std::uint64_t h = mix64(static_cast<std::uint64_t>(seed_));
  h = mix64(h ^ static_cast<std::uint64_t>(n_paths_));
  h = mix64(h ^ static_cast<std::uint64_t>(n_steps_));
  h = mix64(h ^ static_cast<std::uint64_t>(n_noise_));
  std::uint64_t dt_bits;
  static_assert(sizeof(dt_bits) == sizeof(dt_));
  std::memcpy(&dt_bits, &dt_, sizeof(dt_bits));
  h = mix64(h ^ dt_bits);
  // fold in every increment: any content difference must change the hash,
  // since the fingerprint guards backward solvers against mismatched noise
  const auto& raw = increments_.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &raw[i], sizeof(bits));
    h = mix64(h ^ bits);
  }
  return h;
}

NoiseEnsemble NoiseEnsemble::coarsened() const {
  if (n_steps_ % 2 != 0) {
    throw std::invalid_argument("NoiseEnsemble::coarsened: step count must be even");
  }
  NoiseEnsemble out(seed_, n_paths_, n_steps_ / 2, n_noise_, 2.0 * dt_);
  for (int p = 0; p < n_paths_; ++p) {
    for (int i = 0; i < n_steps_ / 2; ++i) {
      out.dw(p, i) = dw(p, 2 * i) + dw(p, 2 * i + 1);
    }
  }
  return out;
}

NoiseEnsemble sample_noise(const GalerkinSpace& space, const TimeGrid& grid,
                           int n_paths, std::int64_t seed, int workers) {
  if (n_paths < 1) throw std::invalid_argument("sample_noise: n_paths must be >= 1");
  NoiseEnsemble out(seed, n_paths, grid.n_steps, space.n_noise(), grid.dt());
  const double scale = std::sqrt(grid.dt());
  const auto useed = static_cast<std::uint64_t>(seed);
  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t p) {
    for (int i = 0; i < grid.n_steps; ++i) {
      auto slot = out.dw(static_cast<int>(p), i);
      for (int m = 0; m < space.n_noise(); ++m) {
        slot[m] = scale * counter_gaussian(useed, p, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(m));
      }
    }
  });
  return out;
}

}  // namespace seeopt
