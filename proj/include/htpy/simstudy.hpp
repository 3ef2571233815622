#pragma once

// Data-generating processes for the simulation scenarios: a unit Pareto
// univariate case and bivariate / conditional log-Gamma mixtures joined by a
// Gumbel copula. Log-Gamma components whose rate is not listed use b = 3.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "dists.hpp"
#include "error.hpp"
#include "random.hpp"

namespace htpy {

enum class ScenarioId { uni_pareto, biv1, biv2, biv3, cond1, cond2, cond3 };

[[nodiscard]] inline std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::uni_pareto: return "uni_pareto";
    case ScenarioId::biv1: return "biv1";
    case ScenarioId::biv2: return "biv2";
    case ScenarioId::biv3: return "biv3";
    case ScenarioId::cond1: return "cond1";
    case ScenarioId::cond2: return "cond2";
    case ScenarioId::cond3: return "cond3";
  }
  return "?";
}

[[nodiscard]] inline ScenarioId scenario_from_string(const std::string& s) {
  for (auto id : {ScenarioId::uni_pareto, ScenarioId::biv1, ScenarioId::biv2, ScenarioId::biv3, ScenarioId::cond1,
                  ScenarioId::cond2, ScenarioId::cond3}) {
    if (to_string(id) == s) return id;
  }
  throw InputError("unknown scenario '" + s + "'");
}

inline constexpr double kDefaultLogGammaRate = 3.0;

/// Affine parameter c0 + c1 x.
struct Affine {
  double c0 = 0.0;
  double c1 = 0.0;
  [[nodiscard]] double at(double x) const noexcept { return c0 + c1 * x; }
  [[nodiscard]] bool varies() const noexcept { return c1 != 0.0; }
};

/// w LG(a1, b1) + (1 - w) LG(a2, b2), parameters possibly affine in x.
struct LogGammaMixture {
  Affine a1, b1, a2, b2;
  double w = 1.0;

  [[nodiscard]] std::array<LogGamma, 2> components(double x) const {
    return {LogGamma{a1.at(x), b1.at(x)}, LogGamma{a2.at(x), b2.at(x)}};
  }
  [[nodiscard]] double pdf(double y, double x = 0.0) const {
    const auto c = components(x);
    double f = w * c[0].pdf(y);
    if (w < 1.0) f += (1.0 - w) * c[1].pdf(y);
    return f;
  }
  [[nodiscard]] double cdf(double y, double x = 0.0) const {
    if (!(y > 1.0)) return 0.0;
    const auto c = components(x);
    double F = w * c[0].cdf(y);
    if (w < 1.0) F += (1.0 - w) * c[1].cdf(y);
    return F;
  }
  /// Quantile by bisection on log y.
  [[nodiscard]] double quantile(double p, double x = 0.0) const {
    detail::require(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
    const auto c = components(x);
    double lo = std::log(std::min(c[0].quantile(p), w < 1.0 ? c[1].quantile(p) : kInf));
    double hi = std::log(std::max(c[0].quantile(p), w < 1.0 ? c[1].quantile(p) : 0.0));
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
      const double m = 0.5 * (lo + hi);
      if (cdf(std::exp(m), x) < p) {
        lo = m;
      } else {
        hi = m;
      }
    }
    return std::exp(0.5 * (lo + hi));
  }
  double sample(Rng& rng, double x = 0.0) const {
    const auto c = components(x);
    if (w >= 1.0 || rng.uniform() < w) return c[0].sample(rng);
    return c[1].sample(rng);
  }
};

struct ScenarioParams {
  ScenarioId id = ScenarioId::uni_pareto;
  std::size_t dim = 1;
  bool conditional = false;
  std::array<LogGammaMixture, 2> margins{};
  double theta = 1.0;
};

struct ScenarioSpec {
  ScenarioId id = ScenarioId::uni_pareto;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
};

namespace detail {

inline LogGammaMixture single(Affine a) { return {a, {kDefaultLogGammaRate, 0.0}, a, {kDefaultLogGammaRate, 0.0}, 1.0}; }

}  // namespace detail

/// The seven scenarios with their parameters fully resolved.
[[nodiscard]] inline std::vector<ScenarioParams> scenario_table() {
  using detail::single;
  std::vector<ScenarioParams> t;
  t.push_back({ScenarioId::uni_pareto, 1, false, {}, 1.0});
  t.push_back({ScenarioId::biv1, 2, false, {single({5, 0}), single({5, 0})}, 3.0});
  t.push_back({ScenarioId::biv2, 2, false, {single({5, 0}), single({5, 0})}, 1.0});
  t.push_back({ScenarioId::biv3,
               2,
               false,
               {LogGammaMixture{{13, 0}, {7, 0}, {10, 0}, {8, 0}, 0.4}, LogGammaMixture{{8, 0}, {7, 0}, {15, 0}, {8, 0}, 0.4}},
               1.0});
  auto cond_margin = [] {
    auto m = single({1, 4});
    m.a2 = {3, 0};
    return m;
  };
  t.push_back({ScenarioId::cond1, 2, true, {cond_margin(), cond_margin()}, 1.0});
  t.push_back({ScenarioId::cond2, 2, true, {cond_margin(), cond_margin()}, 3.0});
  t.push_back({ScenarioId::cond3,
               2,
               true,
               {LogGammaMixture{{11, 5}, {8, 5}, {7, 0}, {7, 0}, 0.4}, LogGammaMixture{{6, 5}, {12, 5}, {8, 0}, {8, 0}, 0.4}},
               1.0});
  return t;
}

[[nodiscard]] inline ScenarioParams scenario_params(ScenarioId id) {
  for (auto& p : scenario_table()) {
    if (p.id == id) return p;
  }
  throw InputError("unknown scenario");
}

struct GeneratedData {
  ScenarioParams params;
  Dataset data;
};

[[nodiscard]] inline GeneratedData generate(const ScenarioSpec& spec, Rng& rng) {
  detail::require<InputError>(spec.n >= 1, "sample size must be positive");
  GeneratedData out{scenario_params(spec.id), {}};
  const auto& p = out.params;
  auto& d = out.data;
  d.dim = p.dim;
  d.covariate_dim = p.conditional ? 1 : 0;
  d.y.reserve(spec.n * p.dim);
  const GumbelCopula copula(p.theta);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (p.id == ScenarioId::uni_pareto) {
      d.y.push_back(1.0 / rng.uniform());
      continue;
    }
    const double x = p.conditional ? rng.uniform() : 0.0;
    if (p.conditional) d.x.push_back(x);
    if (p.theta == 1.0) {
      for (std::size_t k = 0; k < 2; ++k) d.y.push_back(p.margins[k].sample(rng, x));
    } else {
      const auto uv = copula.sample(rng);
      for (std::size_t k = 0; k < 2; ++k) d.y.push_back(p.margins[k].quantile(uv[k], x));
    }
  }
  return out;
}

/// Exact density at y (and covariate x for conditional scenarios).
[[nodiscard]] inline double true_density(const ScenarioParams& p, std::span<const double> y, double x = 0.0) {
  detail::require<InputError>(y.size() == p.dim, "point dimension does not match the scenario");
  if (p.id == ScenarioId::uni_pareto) {
    detail::require<DomainError>(y[0] > 1.0, "unit Pareto support is y > 1");
    return 1.0 / (y[0] * y[0]);
  }
  detail::require<DomainError>(y[0] > 1.0 && y[1] > 1.0, "log-Gamma support is y > 1");
  const double f = p.margins[0].pdf(y[0], x) * p.margins[1].pdf(y[1], x);
  if (p.theta == 1.0 || f == 0.0) return f;
  const double u = p.margins[0].cdf(y[0], x);
  const double v = p.margins[1].cdf(y[1], x);
  if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) return 0.0;
  return f * GumbelCopula(p.theta).density(u, v);
}

/// Marginal cdf of margin k (unit Pareto for the univariate scenario).
[[nodiscard]] inline double true_marginal_cdf(const ScenarioParams& p, std::size_t k, double y, double x = 0.0) {
  if (p.id == ScenarioId::uni_pareto) return y > 1.0 ? 1.0 - 1.0 / y : 0.0;
  return p.margins.at(k).cdf(y, x);
}

[[nodiscard]] inline double true_marginal_quantile(const ScenarioParams& p, std::size_t k, double q, double x = 0.0) {
  if (p.id == ScenarioId::uni_pareto) return 1.0 / (1.0 - q);
  return p.margins.at(k).quantile(q, x);
}

/// n log-spaced cell midpoints on [lo, hi]: exp(log lo + (j + 1/2) step).
[[nodiscard]] inline std::vector<double> log_midpoint_grid(double lo, double hi, std::size_t n) {
  detail::require<InputError>(lo > 0.0 && hi > lo && n >= 1, "log grid needs 0 < lo < hi and n >= 1");
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(n);
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = std::exp(std::log(lo) + (static_cast<double>(j) + 0.5) * step);
  return g;
}

/// Log-spaced grid between the lo_q and hi_q true marginal quantiles.
[[nodiscard]] inline std::vector<double> quantile_box_grid(const ScenarioParams& p, std::size_t k, std::size_t n,
                                                           double lo_q = 0.0025, double hi_q = 0.9975,
                                                           double x = 0.0) {
  return log_midpoint_grid(true_marginal_quantile(p, k, lo_q, x), true_marginal_quantile(p, k, hi_q, x), n);
}

/// Integrated absolute error of a density on a log_midpoint_grid product
/// (row-major over grid1 x grid2), with the y1 y2 Jacobian of the log cells.
[[nodiscard]] inline double joint_iae(const ScenarioParams& p, std::span<const double> grid1,
                                      std::span<const double> grid2, std::span<const double> density,
                                      double x = 0.0) {
  detail::require<InputError>(grid1.size() >= 2 && grid2.size() >= 2, "grids need at least two points");
  detail::require<InputError>(density.size() == grid1.size() * grid2.size(), "density does not match the grid");
  const double d1 = std::log(grid1[1] / grid1[0]);
  const double d2 = std::log(grid2[1] / grid2[0]);
  double e = 0.0;
  for (std::size_t a = 0; a < grid1.size(); ++a) {
    for (std::size_t b = 0; b < grid2.size(); ++b) {
      const double y[2] = {grid1[a], grid2[b]};
      e += std::abs(density[a * grid2.size() + b] - true_density(p, y, x)) * grid1[a] * grid2[b] * d1 * d2;
    }
  }
  return e;
}

}  // namespace htpy
