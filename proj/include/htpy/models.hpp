#pragma once

// Model specifications for the four mixture classes and exact density /
// survival evaluation of their finite (truncated) realisations.
//
//   uni_scale    f(y)     = sum_h pi_h Er(y; ceil(s_h), s_h / lambda)
//   uni_shape    f(y)     = sum_h pi_h k(y; alpha_h)           (Pareto-type k)
//   multi_scale  f(y)     = sum_h pi_h prod_k Er(y_k; ceil(s_kh), s_kh / lambda)
//   cond_scale   f(y | x) = sum_h pi_h(x) prod_k Er(y_k; ceil(s_kh), s_kh / lambda)
//
// Scale classes mix under a stable law process (M = 0) centred on Pareto II
// margins, optionally joined by a Gumbel copula; the conditional class lets
// the discount of each stick depend on covariates through a logistic link.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "dists.hpp"
#include "error.hpp"
#include "numeric.hpp"

namespace htpy {

enum class ModelClass { uni_scale, uni_shape, multi_scale, cond_scale };

[[nodiscard]] inline std::string to_string(ModelClass c) {
  switch (c) {
    case ModelClass::uni_scale: return "uni_scale";
    case ModelClass::uni_shape: return "uni_shape";
    case ModelClass::multi_scale: return "multi_scale";
    case ModelClass::cond_scale: return "cond_scale";
  }
  return "?";
}

[[nodiscard]] inline ModelClass model_class_from_string(const std::string& s) {
  if (s == "uni_scale") return ModelClass::uni_scale;
  if (s == "uni_shape") return ModelClass::uni_shape;
  if (s == "multi_scale") return ModelClass::multi_scale;
  if (s == "cond_scale") return ModelClass::cond_scale;
  throw InputError("unknown model class '" + s + "'");
}

[[nodiscard]] constexpr bool is_scale_class(ModelClass c) noexcept { return c != ModelClass::uni_shape; }

/// Prior on the centering tail index alpha0: Jeffreys (1/alpha0) or Gamma(shape, rate).
struct TailIndexPrior {
  bool jeffreys = true;
  double shape = 0.0;
  double rate = 0.0;

  static TailIndexPrior gamma(double a, double b) { return {false, a, b}; }
};

/// Centering of the shape-mixture atoms: Gamma(shape, rate) shifted by `shift`.
struct ShapeCentering {
  double shape = 1.0;
  double rate = 1.0;
  double shift = 0.0;

  [[nodiscard]] double log_pdf(double alpha) const noexcept {
    const double z = alpha - shift;
    if (!(z > 0.0)) return -kInf;
    return shape * std::log(rate) + (shape - 1.0) * std::log(z) - rate * z - std::lgamma(shape);
  }
  double sample(Rng& rng) const { return shift + rng.gamma(shape) / rate; }
};

struct MixtureModelSpec {
  ModelClass model_class = ModelClass::uni_scale;
  std::size_t dim = 1;
  std::size_t covariate_dim = 0;

  // Pitman-Yor mixing: D ~ Beta(a_D, b_D) unless fixed; precision M.
  double precision = 0.0;
  double discount_prior_a = 0.5;
  double discount_prior_b = 0.5;
  std::optional<double> fixed_discount;

  // Erlang kernel: lambda ~ Gamma(a_lambda, b_lambda).
  double lambda_prior_shape = 0.1;
  double lambda_prior_rate = 0.1;

  // Pareto II centering margins (scale beta_k) and Gumbel copula.
  std::vector<double> centering_scale{1.0};
  TailIndexPrior alpha0_prior;
  std::optional<double> fixed_alpha0;
  double initial_alpha0 = 2.0;
  double copula_theta = 1.0;

  // Shape class.
  ParetoTypeKernel shape_kernel = ParetoTypeKernel::pareto(1.0);
  ShapeCentering shape_centering;

  // Conditional class: beta_h ~ N_p(0, s^2 I).
  double coefficient_prior_variance = 100.0;

  /// 0 selects slice-adaptive truncation; H > 0 fixes H components with V_H = 1.
  std::size_t truncation = 0;
  /// Cap on instantiated components under adaptive truncation.
  std::size_t max_components = 2000;

  [[nodiscard]] bool discount_sampled() const noexcept {
    return model_class != ModelClass::cond_scale && !fixed_discount.has_value();
  }
  [[nodiscard]] bool alpha0_sampled() const noexcept {
    return is_scale_class(model_class) && !fixed_alpha0.has_value();
  }
  [[nodiscard]] bool has_copula() const noexcept { return dim == 2 && copula_theta > 1.0; }

  [[nodiscard]] ParetoII centering_margin(std::size_t k, double alpha0) const {
    return {alpha0, centering_scale.size() == 1 ? centering_scale[0] : centering_scale.at(k)};
  }

  void validate() const {
    using detail::require;
    require<InputError>(dim >= 1, "dimension must be at least 1");
    switch (model_class) {
      case ModelClass::uni_scale:
      case ModelClass::uni_shape:
        require<InputError>(dim == 1, to_string(model_class) + " is univariate");
        break;
      case ModelClass::multi_scale: break;
      case ModelClass::cond_scale:
        require<InputError>(covariate_dim >= 1, "cond_scale requires covariate dimension p >= 1");
        break;
    }
    if (model_class != ModelClass::cond_scale) {
      require<InputError>(covariate_dim == 0, "only cond_scale takes covariates");
    }
    if (is_scale_class(model_class)) {
      require(centering_scale.size() == 1 || centering_scale.size() == dim,
              "centering scale needs one value or one per margin");
      for (double b : centering_scale) require(b > 0.0, "centering scale must be positive");
      require(lambda_prior_shape > 0.0 && lambda_prior_rate > 0.0, "lambda prior must be proper");
      require(copula_theta >= 1.0, "copula theta must be >= 1");
      require<InputError>(copula_theta == 1.0 || dim == 2, "copula centering is bivariate");
      if (!alpha0_prior.jeffreys) {
        require(alpha0_prior.shape > 0.0 && alpha0_prior.rate > 0.0, "alpha0 Gamma prior must be proper");
      }
      if (fixed_alpha0) require(*fixed_alpha0 > 0.0, "fixed alpha0 must be positive");
    } else {
      shape_kernel.validate();
      require(shape_centering.shape > 0.0 && shape_centering.rate > 0.0 && shape_centering.shift >= 0.0,
              "shape centering must be a proper Gamma law on [shift, inf)");
    }
    if (fixed_discount) {
      const double d = *fixed_discount;
      require(d >= 0.0 && d < 1.0, "discount must lie in [0, 1)");
      require(precision > -d && !(d == 0.0 && precision == 0.0), "invalid Pitman-Yor parameters");
    } else if (model_class != ModelClass::cond_scale) {
      require(discount_prior_a > 0.0 && discount_prior_b > 0.0, "discount prior must be a proper Beta");
      require(precision >= 0.0, "a sampled discount requires precision >= 0");
    }
    require(coefficient_prior_variance > 0.0, "coefficient prior variance must be positive");
    require<InputError>(max_components >= 1, "max_components must be positive");
  }
};

/// Parameter values needed to resolve the analytic tail index.
struct TailIndexInputs {
  std::vector<double> alpha0;
  double discount = 0.5;
};

/// Scale classes: alpha0_k / D per margin. Shape class: left endpoint of the
/// centering support of the atoms (a single value).
[[nodiscard]] inline std::vector<double> model_tail_index(const MixtureModelSpec& spec,
                                                          const TailIndexInputs& in) {
  if (!is_scale_class(spec.model_class)) return {spec.shape_centering.shift};
  detail::require<InputError>(in.alpha0.size() == spec.dim, "one alpha0 per margin is required");
  detail::require<InputError>(in.discount > 0.0 && in.discount < 1.0,
                              "tail index of a scale mixture needs a discount in (0, 1)");
  std::vector<double> out;
  for (double a : in.alpha0) {
    detail::require<InputError>(a > 0.0, "alpha0 must be positive");
    out.push_back(a / in.discount);
  }
  return out;
}

/// Prior mean of alpha0 / D under alpha0 ~ Gamma(a, b), D ~ Beta(a_D, b_D):
/// a (a_D + b_D - 1) / {b (a_D - 1)}; +inf when a_D <= 1.
[[nodiscard]] inline double induced_tail_prior_mean(double alpha0_shape, double alpha0_rate, double discount_a,
                                                    double discount_b) {
  detail::require(alpha0_shape > 0.0 && alpha0_rate > 0.0 && discount_a > 0.0 && discount_b > 0.0,
                  "hyperparameters must be positive");
  if (discount_a <= 1.0) return kInf;
  return alpha0_shape * (discount_a + discount_b - 1.0) / (alpha0_rate * (discount_a - 1.0));
}

// ---------------------------------------------------------------------------
// Covariate-dependent sticks

inline constexpr double kLinearPredictorClamp = 30.0;

/// D_h(x) = logistic(x' beta_h) with x' beta_h clamped to +-30.
[[nodiscard]] inline double dependent_discount(std::span<const double> coefficients, std::span<const double> x) {
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += coefficients[j] * x[j];
  return logistic(std::clamp(eta, -kLinearPredictorClamp, kLinearPredictorClamp));
}

/// V_h(x): the Beta(1 - D_h(x), h D_h(x)) quantile at the shared uniform U_h (h 1-based).
[[nodiscard]] inline double dependent_stick(double uniform, double discount, std::size_t h) {
  const double v = boost::math::ibeta_inv(1.0 - discount, static_cast<double>(h) * discount, uniform, detail::quiet_policy());
  return std::clamp(v, 1e-300, std::nextafter(1.0, 0.0));
}

struct DependentWeights {
  std::vector<double> weights;
  double residual_mass = 1.0;
};

/// Stick-breaking weights at covariate x. `coefficients` is H x p row-major,
/// `uniforms` holds U_1..U_H.
[[nodiscard]] inline DependentWeights dependent_weights(std::span<const double> coefficients,
                                                        std::span<const double> x,
                                                        std::span<const double> uniforms) {
  const std::size_t h_count = uniforms.size();
  const std::size_t p = x.size();
  detail::require<InputError>(h_count >= 1, "at least one stick is required");
  detail::require<InputError>(coefficients.size() == h_count * p, "coefficient matrix must be H x p");
  DependentWeights out;
  out.weights.reserve(h_count);
  double remaining = 1.0;
  for (std::size_t h = 0; h < h_count; ++h) {
    detail::require<InputError>(uniforms[h] > 0.0 && uniforms[h] < 1.0, "stick uniforms must lie in (0, 1)");
    const double d = dependent_discount(coefficients.subspan(h * p, p), x);
    const double v = dependent_stick(uniforms[h], d, h + 1);
    out.weights.push_back(v * remaining);
    remaining *= 1.0 - v;
  }
  out.residual_mass = remaining;
  return out;
}

// ---------------------------------------------------------------------------
// Finite mixtures

/// A truncated realisation of one of the mixture classes.
///
/// For the unconditional classes `weights` holds pi_h (not renormalised).
/// For cond_scale, `uniforms` and `coefficients` determine pi_h(x). `atoms`
/// is H x dim row-major (scale parameters sigma_kh, or tail indices alpha_h).
struct FiniteMixture {
  std::size_t dim = 1;
  std::vector<double> weights;
  std::vector<double> uniforms;
  std::vector<double> coefficients;
  std::size_t covariate_dim = 0;
  bool fixed_truncation = false;
  std::vector<double> atoms;
  double lambda = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return atoms.size() / std::max<std::size_t>(dim, 1); }
  [[nodiscard]] double atom(std::size_t h, std::size_t k) const { return atoms[h * dim + k]; }

  /// Mixture weights at x, renormalised over the instantiated components.
  [[nodiscard]] std::vector<double> weights_at(std::span<const double> x = {}) const {
    std::vector<double> w;
    if (covariate_dim == 0) {
      w = weights;
    } else {
      detail::require<InputError>(x.size() == covariate_dim, "covariate vector has the wrong length");
      w.reserve(size());
      double remaining = 1.0;
      for (std::size_t h = 0; h < size(); ++h) {
        double v = 1.0;
        if (!(fixed_truncation && h + 1 == size())) {
          const double d = dependent_discount(std::span(coefficients).subspan(h * covariate_dim, covariate_dim), x);
          v = dependent_stick(uniforms[h], d, h + 1);
        }
        w.push_back(v * remaining);
        remaining *= 1.0 - v;
      }
    }
    double total = 0.0;
    for (double v : w) total += v;
    detail::require<InputError>(total > 0.0, "mixture has no mass on its instantiated components");
    for (double& v : w) v /= total;
    return w;
  }
};

namespace detail {

inline void check_point(const MixtureModelSpec& spec, const FiniteMixture& fm, std::span<const double> y,
                        std::span<const double> x) {
  require<InputError>(y.size() == spec.dim && fm.dim == spec.dim, "point dimension does not match the model");
  if (spec.model_class == ModelClass::cond_scale) {
    require<InputError>(x.size() == spec.covariate_dim, "cond_scale density requires a covariate vector");
  } else {
    require<InputError>(x.empty(), "only cond_scale takes covariates");
  }
}

}  // namespace detail

/// Log density of component h at y.
[[nodiscard]] inline double component_log_pdf(const MixtureModelSpec& spec, const FiniteMixture& fm,
                                              std::size_t h, std::span<const double> y) {
  if (spec.model_class == ModelClass::uni_shape) {
    return spec.shape_kernel.with_tail_index(fm.atom(h, 0)).log_pdf(y[0]);
  }
  double lp = 0.0;
  for (std::size_t k = 0; k < spec.dim; ++k) {
    if (!(y[k] > 0.0)) return -kInf;
    const double s = fm.atom(h, k);
    lp += erlang_log_pdf_unchecked(y[k], std::ceil(s), s / fm.lambda);
  }
  return lp;
}

/// Survival of margin k of component h at y.
[[nodiscard]] inline double component_survival(const MixtureModelSpec& spec, const FiniteMixture& fm,
                                               std::size_t h, std::size_t k, double y) {
  if (spec.model_class == ModelClass::uni_shape) {
    return spec.shape_kernel.with_tail_index(fm.atom(h, 0)).survival(y);
  }
  if (!(y > 0.0)) return 1.0;
  const double s = fm.atom(h, k);
  return boost::math::gamma_q(std::ceil(s), y * fm.lambda / s, detail::quiet_policy());
}

/// Mixture density at y (and covariate x for cond_scale).
[[nodiscard]] inline double density(const MixtureModelSpec& spec, const FiniteMixture& fm,
                                    std::span<const double> y, std::span<const double> x = {}) {
  detail::check_point(spec, fm, y, x);
  const auto w = fm.weights_at(x);
  double f = 0.0;
  for (std::size_t h = 0; h < w.size(); ++h) {
    if (w[h] > 0.0) f += w[h] * std::exp(component_log_pdf(spec, fm, h, y));
  }
  return f;
}

/// Marginal log survival of margin k on a grid.
[[nodiscard]] inline std::vector<double> marginal_log_survival(const MixtureModelSpec& spec,
                                                               const FiniteMixture& fm, std::size_t k,
                                                               std::span<const double> y_grid,
                                                               std::span<const double> x = {}) {
  detail::require<InputError>(k < spec.dim, "margin index out of range");
  detail::require<InputError>(strictly_increasing(y_grid), "y grid must be increasing");
  const auto w = fm.weights_at(x);
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) {
    double s = 0.0;
    for (std::size_t h = 0; h < w.size(); ++h) {
      if (w[h] > 0.0) s += w[h] * component_survival(spec, fm, h, k, y);
    }
    out.push_back(std::log(s));
  }
  return out;
}

/// Log survival of a univariate model on a grid.
[[nodiscard]] inline std::vector<double> log_survival(const MixtureModelSpec& spec, const FiniteMixture& fm,
                                                      std::span<const double> y_grid,
                                                      std::span<const double> x = {}) {
  return marginal_log_survival(spec, fm, 0, y_grid, x);
}

}  // namespace htpy
