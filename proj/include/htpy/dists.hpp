#pragma once

// Parametric building blocks: the Erlang kernel, Pareto-type kernels, the
// Pareto Type II centering margin, the log-Gamma law, the Gumbel copula and
// a rank-correlation helper.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"
#include "measures.hpp"
#include "numeric.hpp"
#include "random.hpp"

namespace htpy {

// ---------------------------------------------------------------------------
// Erlang

/// Fast log density of a Gamma law with integer-valued shape; no checks.
[[nodiscard]] inline double erlang_log_pdf_unchecked(double y, double shape, double scale) noexcept {
  return (shape - 1.0) * std::log(y) - y / scale - shape * std::log(scale) - std::lgamma(shape);
}

struct ErlangKernel {
  /// Integer-valued; held as double so very large atoms do not overflow.
  double shape = 1.0;
  double scale = 1.0;

  ErlangKernel() = default;
  ErlangKernel(double a, double b) : shape(a), scale(b) {
    detail::require(a >= 1.0 && a == std::floor(a) && std::isfinite(a), "Erlang shape must be a positive integer");
    detail::require(b > 0.0 && std::isfinite(b), "Erlang scale must be positive");
  }

  /// The model's Er(y; ceil(sigma), sigma / lambda) instantiation.
  static ErlangKernel from_atom(double sigma, double lambda) {
    detail::require(sigma > 0.0 && lambda > 0.0, "Erlang atom and lambda must be positive");
    return {std::ceil(sigma), sigma / lambda};
  }

  [[nodiscard]] double log_pdf(double y) const {
    detail::require(y > 0.0, "Erlang density requires y > 0");
    return erlang_log_pdf_unchecked(y, shape, scale);
  }
  [[nodiscard]] double pdf(double y) const { return std::exp(log_pdf(y)); }
  [[nodiscard]] double cdf(double y) const {
    detail::require(y > 0.0, "Erlang cdf requires y > 0");
    return boost::math::gamma_p(shape, y / scale, detail::quiet_policy());
  }
  [[nodiscard]] double survival(double y) const {
    detail::require(y > 0.0, "Erlang survival requires y > 0");
    return boost::math::gamma_q(shape, y / scale, detail::quiet_policy());
  }
  [[nodiscard]] double quantile(double p) const {
    detail::require(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    return scale * boost::math::gamma_p_inv(shape, p);
  }
  [[nodiscard]] double mean() const noexcept { return shape * scale; }
  double sample(Rng& rng) const { return scale * rng.gamma(shape); }
};

// ---------------------------------------------------------------------------
// Pareto-type kernels

enum class ParetoFamily { burr, f, gpd, pareto, student_t };

[[nodiscard]] inline std::string to_string(ParetoFamily f) {
  switch (f) {
    case ParetoFamily::burr: return "burr";
    case ParetoFamily::f: return "f";
    case ParetoFamily::gpd: return "gpd";
    case ParetoFamily::pareto: return "pareto";
    case ParetoFamily::student_t: return "student_t";
  }
  return "?";
}

[[nodiscard]] inline ParetoFamily pareto_family_from_string(const std::string& s) {
  if (s == "burr") return ParetoFamily::burr;
  if (s == "f") return ParetoFamily::f;
  if (s == "gpd") return ParetoFamily::gpd;
  if (s == "pareto") return ParetoFamily::pareto;
  if (s == "student_t") return ParetoFamily::student_t;
  throw InputError("unknown Pareto-type family '" + s + "'");
}

/// Heavy-tailed kernel with survival L(y) / y^alpha.
///
/// Parameterisations (first, second):
///   burr      (c, a)      density c a y^{c-1} (1 + y^c)^{-(a+1)},  y > 0,  tail index c a
///   f         (a, b)      density prop. to y^{a/2-1} (a + b y)^{-(a+b)/2},  tail index b/2
///   gpd       (xi, sigma) density (1 + xi y / sigma)^{-1/xi - 1} / sigma,  tail index 1/xi
///   pareto    (a, -)      density a y^{-(a+1)},  y > 1,  tail index a
///   student_t (a, -)      Student t with a degrees of freedom,  tail index a
struct ParetoTypeKernel {
  ParetoFamily family = ParetoFamily::pareto;
  double first = 1.0;
  double second = 0.0;

  static ParetoTypeKernel burr(double c, double a) { return make(ParetoFamily::burr, c, a); }
  static ParetoTypeKernel f(double a, double b) { return make(ParetoFamily::f, a, b); }
  static ParetoTypeKernel gpd(double xi, double sigma) { return make(ParetoFamily::gpd, xi, sigma); }
  static ParetoTypeKernel pareto(double a) { return make(ParetoFamily::pareto, a, 0.0); }
  static ParetoTypeKernel student_t(double a) { return make(ParetoFamily::student_t, a, 0.0); }

  static ParetoTypeKernel make(ParetoFamily family, double first, double second) {
    ParetoTypeKernel k{family, first, second};
    k.validate();
    return k;
  }

  void validate() const {
    switch (family) {
      case ParetoFamily::burr:
      case ParetoFamily::f:
      case ParetoFamily::gpd:
        detail::require(first > 0.0 && second > 0.0,
                        to_string(family) + " kernel parameters must be positive");
        break;
      case ParetoFamily::pareto:
      case ParetoFamily::student_t:
        detail::require(first > 0.0, to_string(family) + " kernel parameter must be positive");
        break;
    }
  }

  [[nodiscard]] double tail_index() const noexcept {
    switch (family) {
      case ParetoFamily::burr: return first * second;
      case ParetoFamily::f: return second / 2.0;
      case ParetoFamily::gpd: return 1.0 / first;
      case ParetoFamily::pareto:
      case ParetoFamily::student_t: return first;
    }
    return 0.0;
  }

  /// Same family with the tail-controlling parameter set so that the tail
  /// index equals `alpha`; the remaining parameter is kept.
  [[nodiscard]] ParetoTypeKernel with_tail_index(double alpha) const {
    detail::require(alpha > 0.0, "tail index must be positive");
    ParetoTypeKernel k = *this;
    switch (family) {
      case ParetoFamily::burr: k.second = alpha / first; break;
      case ParetoFamily::f: k.second = 2.0 * alpha; break;
      case ParetoFamily::gpd: k.first = 1.0 / alpha; break;
      case ParetoFamily::pareto:
      case ParetoFamily::student_t: k.first = alpha; break;
    }
    return k;
  }

  /// Infimum of the support.
  [[nodiscard]] double support_lower() const noexcept {
    switch (family) {
      case ParetoFamily::pareto: return 1.0;
      case ParetoFamily::student_t: return -kInf;
      default: return 0.0;
    }
  }

  [[nodiscard]] bool in_support(double y) const noexcept { return y > support_lower() && y < kInf; }

  [[nodiscard]] double log_pdf(double y) const {
    if (!in_support(y)) return -kInf;
    switch (family) {
      case ParetoFamily::burr: {
        const double c = first, a = second;
        return std::log(c * a) + (c - 1.0) * std::log(y) - (a + 1.0) * std::log1p(std::pow(y, c));
      }
      case ParetoFamily::f: {
        const double a = first, b = second;
        const double t = b * y / a;
        return std::log(b / a) + (a / 2.0 - 1.0) * std::log(t) - (a + b) / 2.0 * std::log1p(t) -
               std::log(boost::math::beta(a / 2.0, b / 2.0));
      }
      case ParetoFamily::gpd: {
        const double xi = first, sigma = second;
        return -std::log(sigma) - (1.0 / xi + 1.0) * std::log1p(xi * y / sigma);
      }
      case ParetoFamily::pareto: return std::log(first) - (first + 1.0) * std::log(y);
      case ParetoFamily::student_t: {
        const double a = first;
        return std::lgamma((a + 1.0) / 2.0) - std::lgamma(a / 2.0) - 0.5 * std::log(a * std::numbers::pi) -
               (a + 1.0) / 2.0 * std::log1p(y * y / a);
      }
    }
    return -kInf;
  }

  [[nodiscard]] double pdf(double y) const { return std::exp(log_pdf(y)); }

  [[nodiscard]] double survival(double y) const {
    if (y <= support_lower()) return 1.0;
    switch (family) {
      case ParetoFamily::burr: return std::pow(1.0 + std::pow(y, first), -second);
      case ParetoFamily::f: {
        const double t = second * y / first;
        return boost::math::ibetac(first / 2.0, second / 2.0, t / (1.0 + t));
      }
      case ParetoFamily::gpd: return std::pow(1.0 + first * y / second, -1.0 / first);
      case ParetoFamily::pareto: return std::pow(y, -first);
      case ParetoFamily::student_t:
        return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<>(first), y));
    }
    return 0.0;
  }

  [[nodiscard]] double log_survival(double y) const {
    if (y <= support_lower()) return 0.0;
    switch (family) {
      case ParetoFamily::burr: return -second * std::log1p(std::pow(y, first));
      case ParetoFamily::gpd: return -std::log1p(first * y / second) / first;
      case ParetoFamily::pareto: return -first * std::log(y);
      default: return std::log(survival(y));
    }
  }

  [[nodiscard]] double cdf(double y) const { return 1.0 - survival(y); }

  [[nodiscard]] double quantile(double p) const {
    detail::require(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    switch (family) {
      case ParetoFamily::burr: return std::pow(std::expm1(-std::log1p(-p) / second), 1.0 / first);
      case ParetoFamily::f: {
        const double x = boost::math::ibeta_inv(first / 2.0, second / 2.0, p);
        return first / second * x / (1.0 - x);
      }
      case ParetoFamily::gpd: return second * std::expm1(-first * std::log1p(-p)) / first;
      case ParetoFamily::pareto: return std::exp(-std::log1p(-p) / first);
      case ParetoFamily::student_t: return boost::math::quantile(boost::math::students_t_distribution<>(first), p);
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    switch (family) {
      case ParetoFamily::f: {
        const double t = std::exp(rng.log_gamma_variate(first / 2.0) - rng.log_gamma_variate(second / 2.0));
        return first / second * t;
      }
      case ParetoFamily::student_t: {
        const double chi2 = 2.0 * rng.gamma(first / 2.0);
        return rng.normal() / std::sqrt(chi2 / first);
      }
      default: return quantile(rng.uniform());
    }
  }
};

[[nodiscard]] inline double tail_index_of_kernel(const ParetoTypeKernel& k) { return k.tail_index(); }

// ---------------------------------------------------------------------------
// Pareto Type II centering margin

/// Survival (1 + sigma / beta)^{-alpha0} on sigma >= 0.
struct ParetoII {
  double alpha0 = 2.0;
  double scale = 1.0;

  ParetoII() = default;
  ParetoII(double a, double b) : alpha0(a), scale(b) {
    detail::require(a > 0.0, "Pareto II tail index must be positive");
    detail::require(b > 0.0, "Pareto II scale must be positive");
  }

  [[nodiscard]] double log_pdf(double sigma) const noexcept {
    if (sigma < 0.0) return -kInf;
    return std::log(alpha0 / scale) - (alpha0 + 1.0) * std::log1p(sigma / scale);
  }
  [[nodiscard]] double pdf(double sigma) const noexcept { return std::exp(log_pdf(sigma)); }
  [[nodiscard]] double log_survival(double sigma) const noexcept {
    return sigma <= 0.0 ? 0.0 : -alpha0 * std::log1p(sigma / scale);
  }
  [[nodiscard]] double survival(double sigma) const noexcept { return std::exp(log_survival(sigma)); }
  [[nodiscard]] double cdf(double sigma) const noexcept { return -std::expm1(log_survival(sigma)); }
  [[nodiscard]] double quantile(double p) const {
    detail::require(p >= 0.0 && p < 1.0, "probability must lie in [0, 1)");
    return scale * std::expm1(-std::log1p(-p) / alpha0);
  }
  double sample(Rng& rng) const { return quantile(rng.uniform()); }
};

// ---------------------------------------------------------------------------
// log-Gamma

/// Law of exp(X) with X ~ Gamma(shape a, rate b); support (1, inf).
struct LogGamma {
  double shape = 1.0;
  double rate = 1.0;

  LogGamma() = default;
  LogGamma(double a, double b) : shape(a), rate(b) {
    detail::require(a > 0.0 && b > 0.0, "log-Gamma shape and rate must be positive");
  }

  [[nodiscard]] double log_pdf(double y) const noexcept {
    if (!(y > 1.0)) return -kInf;
    const double ly = std::log(y);
    return shape * std::log(rate) + (shape - 1.0) * std::log(ly) - (rate + 1.0) * ly - std::lgamma(shape);
  }
  [[nodiscard]] double pdf(double y) const noexcept { return std::exp(log_pdf(y)); }
  [[nodiscard]] double cdf(double y) const {
    return y <= 1.0 ? 0.0 : boost::math::gamma_p(shape, rate * std::log(y), detail::quiet_policy());
  }
  [[nodiscard]] double survival(double y) const {
    return y <= 1.0 ? 1.0 : boost::math::gamma_q(shape, rate * std::log(y), detail::quiet_policy());
  }
  [[nodiscard]] double quantile(double p) const {
    detail::require(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
    return std::exp(boost::math::gamma_p_inv(shape, p) / rate);
  }
  double sample(Rng& rng) const { return std::exp(rng.gamma(shape) / rate); }
};

// ---------------------------------------------------------------------------
// Gumbel copula

/// C(u, v) = exp[-{(-log u)^theta + (-log v)^theta}^{1/theta}], theta >= 1.
struct GumbelCopula {
  double theta = 1.0;

  GumbelCopula() = default;
  explicit GumbelCopula(double t) : theta(t) {
    detail::require(t >= 1.0 && std::isfinite(t), "Gumbel copula requires theta >= 1");
  }

  [[nodiscard]] double cdf(double u, double v) const {
    detail::require(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0, "copula arguments must lie in (0, 1)");
    const double a = std::pow(-std::log(u), theta) + std::pow(-std::log(v), theta);
    return std::exp(-std::pow(a, 1.0 / theta));
  }

  /// log c(u, v), the mixed second derivative of C.
  [[nodiscard]] double log_density(double u, double v) const noexcept {
    return log_density_neglog(-std::log(u), -std::log(v));
  }

  /// log c at x = -log u, y = -log v.
  [[nodiscard]] double log_density_neglog(double x, double y) const noexcept {
    if (theta == 1.0) return 0.0;
    const double lx = std::log(x);
    const double ly = std::log(y);
    const double log_a = log_add_exp(theta * lx, theta * ly);
    const double a_root = std::exp(log_a / theta);
    return -a_root + x + y + (theta - 1.0) * (lx + ly) + (2.0 / theta - 2.0) * log_a +
           std::log1p((theta - 1.0) / a_root);
  }
  [[nodiscard]] double density(double u, double v) const noexcept { return std::exp(log_density(u, v)); }

  [[nodiscard]] double kendall_tau() const noexcept { return 1.0 - 1.0 / theta; }

  /// Marshall-Olkin frailty sampler: S positive stable with index 1/theta,
  /// U_j = exp{-(E_j / S)^{1/theta}}.
  std::array<double, 2> sample(Rng& rng) const {
    if (theta == 1.0) return {rng.uniform(), rng.uniform()};
    const double log_s = log_positive_stable(1.0 / theta, rng);
    std::array<double, 2> uv{};
    for (double& w : uv) {
      const double t = std::exp((std::log(rng.exponential()) - log_s) / theta);
      w = std::exp(-t);
      w = std::clamp(w, 1e-300, std::nextafter(1.0, 0.0));
    }
    return uv;
  }
};

[[nodiscard]] inline double gumbel_cdf(const GumbelCopula& c, double u, double v) { return c.cdf(u, v); }
inline std::array<double, 2> gumbel_sample(const GumbelCopula& c, Rng& rng) { return c.sample(rng); }

/// Joint centering point: Pareto II margins coupled by a Gumbel copula.
inline std::array<double, 2> copula_centering_sample(const GumbelCopula& copula,
                                                     std::span<const ParetoII> margins, Rng& rng) {
  detail::require<InputError>(margins.size() == 2, "copula centering is bivariate");
  const auto uv = copula.sample(rng);
  return {margins[0].quantile(uv[0]), margins[1].quantile(uv[1])};
}

/// Inverse of tau = 1 - 1/theta, clamped to theta >= 1.
[[nodiscard]] inline double gumbel_theta_from_tau(double tau) {
  if (!(tau > 0.0)) return 1.0;
  return 1.0 / (1.0 - std::min(tau, 0.999));
}

// ---------------------------------------------------------------------------
// Kendall's tau

namespace detail {

inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                                 std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

template <class It>
std::uint64_t tied_pairs(It first, It last) {
  std::uint64_t total = 0;
  while (first != last) {
    auto run = first;
    std::uint64_t len = 0;
    while (run != last && *run == *first) {
      ++run;
      ++len;
    }
    total += len * (len - 1) / 2;
    first = run;
  }
  return total;
}

}  // namespace detail

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
[[nodiscard]] inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  detail::require<InputError>(x.size() == y.size() && x.size() >= 2, "kendall_tau needs paired samples");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = detail::tied_pairs(xs.begin(), xs.end());
  std::uint64_t n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && xs[j] == xs[i]) ++j;
    n3 += detail::tied_pairs(ys.begin() + static_cast<std::ptrdiff_t>(i), ys.begin() + static_cast<std::ptrdiff_t>(j));
    i = j;
  }
  std::vector<double> buf(n);
  const std::uint64_t swaps = detail::merge_count(ys, buf, 0, n);
  const std::uint64_t n2 = detail::tied_pairs(ys.begin(), ys.end());
  const double numer = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                       static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return denom > 0.0 ? numer / denom : 0.0;
}

}  // namespace htpy
