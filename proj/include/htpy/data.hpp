#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "models.hpp"

namespace htpy {

/// Responses (n x dim, row-major) and optional covariates (n x p).
struct Dataset {
  std::size_t dim = 1;
  std::size_t covariate_dim = 0;
  std::vector<double> y;
  std::vector<double> x;

  [[nodiscard]] std::size_t size() const noexcept { return dim == 0 ? 0 : y.size() / dim; }
  [[nodiscard]] std::span<const double> response(std::size_t i) const {
    return std::span(y).subspan(i * dim, dim);
  }
  [[nodiscard]] std::span<const double> covariates(std::size_t i) const {
    if (covariate_dim == 0) return {};
    return std::span(x).subspan(i * covariate_dim, covariate_dim);
  }
  [[nodiscard]] std::vector<double> margin(std::size_t k) const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(y[i * dim + k]);
    return out;
  }

  /// Shape and support checks against a model.
  void validate_for(const MixtureModelSpec& spec) const {
    using detail::require;
    require<InputError>(dim == spec.dim, "data dimension " + std::to_string(dim) + " does not match model dimension " +
                                             std::to_string(spec.dim));
    require<InputError>(covariate_dim == spec.covariate_dim, "covariate dimension does not match the model");
    require<InputError>(y.size() % dim == 0, "response array is not n x dim");
    require<InputError>(size() >= 1, "data set is empty");
    require<InputError>(x.size() == size() * covariate_dim, "covariate array is not n x p");
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double v = y[i];
      const std::string where = "response " + std::to_string(i / dim) + " margin " + std::to_string(i % dim);
      require<InputError>(std::isfinite(v), where + " is not finite");
      if (is_scale_class(spec.model_class)) {
        require<InputError>(v > 0.0, where + " must be positive");
      } else {
        require<InputError>(spec.shape_kernel.in_support(v), where + " lies outside the kernel support");
      }
    }
    for (double v : x) require<InputError>(std::isfinite(v), "covariates must be finite");
  }
};

}  // namespace htpy
