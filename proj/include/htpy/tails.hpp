#pragma once

// Almost-sure tail envelopes for the Dirichlet process (Doss-Sellke type)
// and the stable law process, the lim-inf constant of the stable lower
// envelope, and the Hill tail-index estimator.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace htpy {

struct EnvelopeParams {
  double discount = 0.5;
  double precision = 1.0;
  double s = 0.5;
  double r = 2.0;

  void validate() const {
    detail::require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
    detail::require(precision > 0.0, "precision must be positive");
    detail::require(s < 1.0, "lower DP envelope requires s < 1");
    detail::require(r > 1.0, "upper envelopes require r > 1");
  }
};

namespace detail {

inline void require_unit_open(double t, const char* what) {
  require(t > 0.0 && t < 1.0, std::string(what) + ": argument must lie in (0, 1)");
}

}  // namespace detail

/// log g_s(t) = -s log|log t| / t.
[[nodiscard]] inline double log_envelope_g_s(double t, double s) {
  detail::require_unit_open(t, "envelope g_s");
  detail::require(s < 1.0, "envelope g_s requires s < 1");
  return -s * std::log(std::abs(std::log(t))) / t;
}

[[nodiscard]] inline double envelope_g_s(double t, double s) { return std::exp(log_envelope_g_s(t, s)); }

/// log h_r(t) = -1 / (t |log t|^r).
[[nodiscard]] inline double log_envelope_h_r(double t, double r) {
  detail::require_unit_open(t, "envelope h_r");
  detail::require(r > 1.0, "envelope h_r requires r > 1");
  return -1.0 / (t * std::pow(std::abs(std::log(t)), r));
}

[[nodiscard]] inline double envelope_h_r(double t, double r) { return std::exp(log_envelope_h_r(t, r)); }

/// log l(t) with l(t) = t^{1/D} (log|log t|)^{1 - 1/D}, defined for 0 < t < 1/e.
[[nodiscard]] inline double log_envelope_l(double t, double discount) {
  detail::require(discount > 0.0 && discount < 1.0, "envelope l: discount must lie in (0, 1)");
  detail::require(t > 0.0 && t < std::exp(-1.0), "envelope l: argument must lie in (0, exp(-1))");
  return std::log(t) / discount + (1.0 - 1.0 / discount) * std::log(std::log(-std::log(t)));
}

[[nodiscard]] inline double envelope_l(double t, double discount) {
  return std::exp(log_envelope_l(t, discount));
}

/// log u_r(t) with u_r(t) = t^{1/D} |log t|^{r/D}, defined for 0 < t <= exp(-r).
[[nodiscard]] inline double log_envelope_u_r(double t, double discount, double r) {
  detail::require(discount > 0.0 && discount < 1.0, "envelope u_r: discount must lie in (0, 1)");
  detail::require(r > 1.0, "envelope u_r requires r > 1");
  detail::require(t > 0.0 && t <= std::exp(-r), "envelope u_r: argument must lie in (0, exp(-r)]");
  return (std::log(t) + r * std::log(-std::log(t))) / discount;
}

[[nodiscard]] inline double envelope_u_r(double t, double discount, double r) {
  return std::exp(log_envelope_u_r(t, discount, r));
}

/// D (1 - D)^{(1 - D)/D}.
[[nodiscard]] inline double liminf_constant(double discount) {
  detail::require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  return discount * std::pow(1.0 - discount, (1.0 - discount) / discount);
}

/// Pointwise envelope curves; `log_*` hold the natural logs.
struct EnvelopeCurves {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> log_lower;
  std::vector<double> log_upper;
};

namespace detail {

template <class LogLower, class LogUpper>
EnvelopeCurves envelope_curves(std::span<const double> g0_tail, LogLower&& log_lower, LogUpper&& log_upper) {
  EnvelopeCurves out;
  const std::size_t n = g0_tail.size();
  out.lower.resize(n);
  out.upper.resize(n);
  out.log_lower.resize(n);
  out.log_upper.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      out.log_lower[i] = log_lower(g0_tail[i]);
      out.log_upper[i] = log_upper(g0_tail[i]);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " (grid index " + std::to_string(i) + ")");
    }
    out.lower[i] = std::exp(out.log_lower[i]);
    out.upper[i] = std::exp(out.log_upper[i]);
  }
  return out;
}

}  // namespace detail

/// Stable-law envelopes l(1 - G0(y)) and u_r(1 - G0(y)).
[[nodiscard]] inline EnvelopeCurves sp_envelopes(std::span<const double> g0_tail, double discount, double r) {
  return detail::envelope_curves(
      g0_tail, [&](double t) { return log_envelope_l(t, discount); },
      [&](double t) { return log_envelope_u_r(t, discount, r); });
}

/// Dirichlet-process envelopes g_s(M (1 - G0(y))) and h_r(M (1 - G0(y))).
[[nodiscard]] inline EnvelopeCurves dp_envelopes(std::span<const double> g0_tail, double precision, double s,
                                                 double r) {
  detail::require(precision > 0.0, "precision must be positive");
  return detail::envelope_curves(
      g0_tail, [&](double t) { return log_envelope_g_s(precision * t, s); },
      [&](double t) { return log_envelope_h_r(precision * t, r); });
}

// ---------------------------------------------------------------------------

struct TailIndexEstimate {
  double estimate = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
};

/// Hill estimator k / sum_{i<=k} log(X_(n-i+1) / X_(n-k)) on the k largest order statistics.
[[nodiscard]] inline TailIndexEstimate hill_estimate(std::span<const double> samples, std::size_t k) {
  const std::size_t n = samples.size();
  detail::require<InputError>(k >= 1 && k < n, "Hill estimator requires 1 <= k < n");
  std::vector<double> x(samples.begin(), samples.end());
  for (double v : x) detail::require<InputError>(v > 0.0, "Hill estimator requires positive samples");
  // Place the (k+1) largest values at the front, largest first.
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end(), std::greater<>());
  const double threshold = x[k];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(x[i] / threshold);
  detail::require<InputError>(sum > 0.0, "Hill estimator undefined: top order statistics are tied");
  return {static_cast<double>(k) / sum, k, n};
}

}  // namespace htpy
