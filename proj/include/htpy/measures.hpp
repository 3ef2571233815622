#pragma once

// Pitman-Yor family random measures: stick-breaking draws, positive stable
// variates, Gamma and stable subordinator paths, and random tail trajectories
// 1 - G(y) of the Dirichlet and stable law processes.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "numeric.hpp"
#include "random.hpp"

namespace htpy {

/// Discount D and precision M of PYP(D, M, G0).
struct PyParams {
  double discount = 0.0;
  double precision = 1.0;

  void validate() const {
    detail::require(discount >= 0.0 && discount < 1.0, "discount must lie in [0, 1)");
    detail::require(precision > -discount, "precision must exceed -discount");
    detail::require(!(discount == 0.0 && precision == 0.0),
                    "discount and precision cannot both be zero");
  }

  /// Parameters of the Beta law of the h-th stick (h is 1-based).
  [[nodiscard]] double stick_a() const noexcept { return 1.0 - discount; }
  [[nodiscard]] double stick_b(std::size_t h) const noexcept {
    return precision + static_cast<double>(h) * discount;
  }
};

/// Truncated realisation of a random measure. `atoms` is row-major with
/// `dim` coordinates per atom and may be empty when only weights were drawn.
struct RandomMeasureDraw {
  std::vector<double> weights;
  std::vector<double> atoms;
  std::size_t dim = 1;
  double residual_mass = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
};

/// Stick-breaking weights with sticks supplied by `next_stick(h)`, h = 1..H.
template <class StickSource>
[[nodiscard]] RandomMeasureDraw draw_stick_weights(std::size_t truncation, StickSource&& next_stick) {
  detail::require(truncation >= 1, "truncation must be at least 1");
  RandomMeasureDraw draw;
  draw.weights.reserve(truncation);
  double remaining = 1.0;
  for (std::size_t h = 1; h <= truncation; ++h) {
    const double v = next_stick(h);
    draw.weights.push_back(v * remaining);
    remaining *= 1.0 - v;
  }
  draw.residual_mass = remaining;
  return draw;
}

[[nodiscard]] inline RandomMeasureDraw draw_stick_weights(const PyParams& params, std::size_t truncation,
                                                          Rng& rng) {
  params.validate();
  return draw_stick_weights(truncation,
                            [&](std::size_t h) { return rng.beta(params.stick_a(), params.stick_b(h)); });
}

/// E[prod_{k<=H} (1 - V_k)] = prod_k (M + kD) / (M + kD + 1 - D).
[[nodiscard]] inline double expected_residual_mass(const PyParams& params, std::size_t truncation) {
  params.validate();
  detail::require(truncation >= 1, "truncation must be at least 1");
  double log_mass = 0.0;
  for (std::size_t k = 1; k <= truncation; ++k) {
    const double b = params.stick_b(k);
    log_mass += std::log(b) - std::log(b + params.stick_a());
  }
  return std::exp(log_mass);
}

/// Smallest H whose expected residual mass is at most `eps`, capped at `max_truncation`.
[[nodiscard]] inline std::size_t truncation_level(const PyParams& params, double eps = 1e-4,
                                                  std::size_t max_truncation = 10'000'000) {
  params.validate();
  detail::require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
  const double target = std::log(eps);
  double log_mass = 0.0;
  for (std::size_t k = 1; k <= max_truncation; ++k) {
    const double b = params.stick_b(k);
    log_mass += std::log(b) - std::log(b + params.stick_a());
    if (log_mass <= target) return k;
  }
  return max_truncation;
}

/// Stick-breaking measure with atoms drawn i.i.d. from `centering(rng)`,
/// which returns one point (a double or a container of doubles).
template <class Centering>
[[nodiscard]] RandomMeasureDraw draw_measure(const PyParams& params, std::size_t truncation,
                                             Centering&& centering, Rng& rng) {
  RandomMeasureDraw draw = draw_stick_weights(params, truncation, rng);
  draw.atoms.reserve(truncation);
  for (std::size_t h = 0; h < truncation; ++h) {
    auto atom = centering(rng);
    if constexpr (std::is_arithmetic_v<decltype(atom)>) {
      draw.atoms.push_back(static_cast<double>(atom));
      draw.dim = 1;
    } else {
      draw.dim = atom.size();
      draw.atoms.insert(draw.atoms.end(), atom.begin(), atom.end());
    }
  }
  return draw;
}

// ---------------------------------------------------------------------------
// Positive stable variates

/// log S for S positive stable with E[exp(-t S)] = exp(-t^D).
///
/// Kanter's representation: S = (A(U) / E)^{(1-D)/D} with U uniform on
/// (0, pi), E standard exponential and
/// A(u) = [sin(Du)^D sin((1-D)u)^{1-D} / sin(u)]^{1/(1-D)}.
[[nodiscard]] inline double log_positive_stable(double discount, Rng& rng) {
  detail::require(discount > 0.0 && discount < 1.0, "stable index must lie in (0, 1)");
  const double d = discount;
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double log_a = (d * std::log(std::sin(d * u)) + (1.0 - d) * std::log(std::sin((1.0 - d) * u)) -
                        std::log(std::sin(u))) /
                       (1.0 - d);
  return (1.0 - d) / d * (log_a - std::log(e));
}

[[nodiscard]] inline double sample_positive_stable(double discount, Rng& rng) {
  return std::exp(log_positive_stable(discount, rng));
}

// ---------------------------------------------------------------------------
// Subordinators

struct SubordinatorSpec {
  enum class Kind { gamma, stable };
  Kind kind = Kind::stable;
  /// Time scale M for the Gamma kind, stable index D for the stable kind.
  double parameter = 0.5;
  double killing_rate = 0.0;
  double drift = 0.0;

  static SubordinatorSpec gamma(double precision) { return {Kind::gamma, precision}; }
  static SubordinatorSpec stable(double discount) { return {Kind::stable, discount}; }

  void validate() const {
    detail::require(killing_rate == 0.0 && drift == 0.0,
                    "only subordinators without killing or drift are supported");
    if (kind == Kind::gamma) {
      detail::require(parameter > 0.0, "Gamma process time scale must be positive");
    } else {
      detail::require(parameter > 0.0 && parameter < 1.0, "stable index must lie in (0, 1)");
    }
  }

  /// log of an increment over a time step of length dt > 0.
  [[nodiscard]] double log_increment(double dt, Rng& rng) const {
    if (kind == Kind::gamma) return rng.log_gamma_variate(dt * parameter);
    return std::log(dt) / parameter + log_positive_stable(parameter, rng);
  }
};

struct SubordinatorPath {
  std::vector<double> grid;
  std::vector<double> values;
  /// Natural log of `values`; stays finite where `values` underflows.
  std::vector<double> log_values;
};

/// One path evaluated on an increasing grid in [0, 1], built from
/// independent increments between consecutive grid points.
[[nodiscard]] inline SubordinatorPath subordinator_path(const SubordinatorSpec& spec,
                                                        std::span<const double> grid, Rng& rng) {
  spec.validate();
  detail::require<InputError>(strictly_increasing(grid), "subordinator grid must be strictly increasing");
  detail::require<InputError>(grid.empty() || (grid.front() >= 0.0 && grid.back() <= 1.0),
                              "subordinator grid must lie in [0, 1]");
  SubordinatorPath path;
  path.grid.assign(grid.begin(), grid.end());
  path.values.reserve(grid.size());
  path.log_values.reserve(grid.size());
  double log_value = -kInf;
  double previous = 0.0;
  for (double t : grid) {
    if (t > previous) log_value = log_add_exp(log_value, spec.log_increment(t - previous, rng));
    previous = t;
    path.log_values.push_back(log_value);
    path.values.push_back(std::exp(log_value));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Tail trajectories

/// One realisation of 1 - G(y) on a grid, in log coordinates.
struct TailTrajectory {
  /// log{1 - G(y_i)}, aligned with the input tail values.
  std::vector<double> log_survival;
  /// log S(t_i) with t_i = 1 - G0(y_i), unnormalised subordinator values.
  std::vector<double> log_subordinator;
  /// log S(1).
  double log_total = 0.0;

  [[nodiscard]] std::vector<double> survival() const {
    std::vector<double> out(log_survival.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_survival[i]);
    return out;
  }
};

/// 1 - G(y) =d S(t) / S(1) with t = 1 - G0(y), for the subordinator `spec`
/// (stable index D gives SP(D, G0); Gamma time scale M gives DP(M, G0)).
/// `g0_tail` holds 1 - G0(y) on an increasing y-grid, so it must be strictly
/// decreasing inside (0, 1).
[[nodiscard]] inline TailTrajectory tail_trajectory(const SubordinatorSpec& spec,
                                                    std::span<const double> g0_tail, Rng& rng) {
  spec.validate();
  for (std::size_t i = 0; i < g0_tail.size(); ++i) {
    if (!(g0_tail[i] > 0.0 && g0_tail[i] < 1.0)) {
      throw InputError("centering tail value at index " + std::to_string(i) + " is outside (0, 1)");
    }
    if (i > 0 && !(g0_tail[i] < g0_tail[i - 1])) {
      throw InputError("centering tail values must be strictly decreasing (index " + std::to_string(i) +
                       ")");
    }
  }
  const std::size_t n = g0_tail.size();
  TailTrajectory out;
  out.log_subordinator.assign(n, -kInf);
  double log_value = -kInf;
  double previous = 0.0;
  // Walk t upwards, i.e. from the last (smallest) tail value to the first.
  for (std::size_t j = n; j-- > 0;) {
    const double t = g0_tail[j];
    log_value = log_add_exp(log_value, spec.log_increment(t - previous, rng));
    previous = t;
    out.log_subordinator[j] = log_value;
  }
  out.log_total = log_add_exp(log_value, spec.log_increment(1.0 - previous, rng));
  out.log_survival.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.log_survival[i] = out.log_subordinator[i] - out.log_total;
  return out;
}

[[nodiscard]] inline std::vector<double> sp_tail_trajectory(double discount, std::span<const double> g0_tail,
                                                            Rng& rng) {
  return tail_trajectory(SubordinatorSpec::stable(discount), g0_tail, rng).survival();
}

[[nodiscard]] inline std::vector<double> dp_tail_trajectory(double precision, std::span<const double> g0_tail,
                                                            Rng& rng) {
  return tail_trajectory(SubordinatorSpec::gamma(precision), g0_tail, rng).survival();
}

}  // namespace htpy
