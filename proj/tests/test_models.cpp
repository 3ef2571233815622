#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "htpy/models.hpp"

using namespace htpy;

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

MixtureModelSpec uni_scale() { return MixtureModelSpec{}; }

MixtureModelSpec shape_spec() {
  MixtureModelSpec s;
  s.model_class = ModelClass::uni_shape;
  s.precision = 1.0;
  s.shape_kernel = ParetoTypeKernel::pareto(1.0);
  return s;
}

FiniteMixture one_atom(double sigma, double lambda = 1.0) {
  FiniteMixture fm;
  fm.weights = {1.0};
  fm.atoms = {sigma};
  fm.lambda = lambda;
  return fm;
}

FiniteMixture random_mixture(std::size_t h_count, std::size_t dim, Rng& rng) {
  FiniteMixture fm;
  fm.dim = dim;
  fm.lambda = rng.uniform(0.5, 2.0);
  const auto draw = draw_stick_weights(h_count, [&](std::size_t) { return rng.uniform(0.1, 0.9); });
  fm.weights = draw.weights;
  for (std::size_t i = 0; i < h_count * dim; ++i) fm.atoms.push_back(std::exp(rng.uniform(std::log(0.2), std::log(40.0))));
  return fm;
}

// Integral over (0, inf) of f in log coordinates, in unit-width panels so
// narrow peaks are not skipped.
template <class F>
double integrate_positive(F&& f) {
  double total = 0.0;
  for (double a = -25.0; a < 12.0; a += 1.0) {
    total += GK::integrate([&](double u) { return f(std::exp(u)) * std::exp(u); }, a, a + 1.0, 10, 1e-12);
  }
  return total;
}

// Fixed 20-point Gauss-Legendre panels; used for the tensor-product case.
template <class F>
double integrate_positive_fixed(F&& f) {
  double total = 0.0;
  for (double a = -25.0; a < 12.0; a += 1.0) {
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double u) { return f(std::exp(u)) * std::exp(u); }, a, a + 1.0);
  }
  return total;
}

}  // namespace

TEST(Density, ClosedForms) {
  const auto spec = uni_scale();
  std::vector<double> y{1.7};
  EXPECT_NEAR(density(spec, one_atom(1.0), y), std::exp(-1.7), 1e-15);
  FiniteMixture two;
  two.weights = {0.5, 0.5};
  two.atoms = {1.0, 1.0};
  EXPECT_NEAR(density(spec, two, y), std::exp(-1.7), 1e-15);
  FiniteMixture shape = one_atom(1.0);
  std::vector<double> two_pt{2.0};
  EXPECT_NEAR(density(shape_spec(), shape, two_pt), 0.25, 1e-15);
}

TEST(Density, WeightsAreRenormalised) {
  // A truncated measure with residual mass keeps a proper density.
  const auto spec = uni_scale();
  FiniteMixture fm = one_atom(1.0);
  fm.weights = {0.25};
  std::vector<double> y{0.3};
  EXPECT_NEAR(density(spec, fm, y), std::exp(-0.3), 1e-15);
}

TEST(Density, InputErrors) {
  const auto spec = uni_scale();
  std::vector<double> y2{1.0, 2.0};
  std::vector<double> x{0.5};
  std::vector<double> y{1.0};
  EXPECT_THROW((void)density(spec, one_atom(1.0), y2), InputError);
  EXPECT_THROW((void)density(spec, one_atom(1.0), y, x), InputError);
  MixtureModelSpec cond;
  cond.model_class = ModelClass::cond_scale;
  cond.dim = 1;
  cond.covariate_dim = 1;
  FiniteMixture fm = one_atom(1.0);
  fm.covariate_dim = 1;
  fm.uniforms = {0.5};
  fm.coefficients = {0.0};
  EXPECT_THROW((void)density(cond, fm, y), InputError);
  EXPECT_GT(density(cond, fm, y, x), 0.0);
}

TEST(Density, UnivariateMixturesIntegrateToOne) {
  Rng rng(1);
  const auto spec = uni_scale();
  for (int rep = 0; rep < 20; ++rep) {
    const auto fm = random_mixture(1 + rep, 1, rng);
    const double m = integrate_positive([&](double y) {
      std::vector<double> p{y};
      return density(spec, fm, p);
    });
    EXPECT_NEAR(m, 1.0, 1e-4) << rep;
  }
}

TEST(Density, BivariateMixturesIntegrateToOne) {
  Rng rng(2);
  MixtureModelSpec spec;
  spec.model_class = ModelClass::multi_scale;
  spec.dim = 2;
  for (int rep = 0; rep < 4; ++rep) {
    const auto fm = random_mixture(2 + 6 * rep, 2, rng);
    const double m = integrate_positive_fixed([&](double y1) {
      return integrate_positive_fixed([&](double y2) {
        std::vector<double> p{y1, y2};
        return density(spec, fm, p);
      });
    });
    EXPECT_NEAR(m, 1.0, 1e-4) << rep;
  }
}

TEST(Density, ConditionalMixtureIntegratesAtEachCovariate) {
  Rng rng(3);
  MixtureModelSpec spec;
  spec.model_class = ModelClass::cond_scale;
  spec.dim = 1;
  spec.covariate_dim = 2;
  FiniteMixture fm = random_mixture(6, 1, rng);
  fm.covariate_dim = 2;
  fm.weights.clear();
  for (int h = 0; h < 6; ++h) {
    fm.uniforms.push_back(rng.uniform());
    fm.coefficients.push_back(rng.normal());
    fm.coefficients.push_back(rng.normal());
  }
  for (double xv : {0.0, 0.5, 1.0}) {
    std::vector<double> x{1.0, xv};
    const double m = integrate_positive([&](double y) {
      std::vector<double> p{y};
      return density(spec, fm, p, x);
    });
    EXPECT_NEAR(m, 1.0, 1e-4);
  }
}

TEST(Survival, ClosedForms) {
  std::vector<double> grid{0.5, 1.0, 3.0};
  const auto ls = log_survival(uni_scale(), one_atom(1.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(ls[i], -grid[i], 1e-13);
  std::vector<double> pgrid{2.0, 10.0, 1e6};
  const auto lp = log_survival(shape_spec(), one_atom(1.0), pgrid);
  for (std::size_t i = 0; i < pgrid.size(); ++i) EXPECT_NEAR(lp[i], -std::log(pgrid[i]), 1e-13);
  std::vector<double> bad{2.0, 1.0};
  EXPECT_THROW((void)log_survival(uni_scale(), one_atom(1.0), bad), InputError);
}

TEST(Survival, MixtureDominatesWeightedComponents) {
  Rng rng(4);
  const auto spec = uni_scale();
  const auto fm = random_mixture(8, 1, rng);
  const auto w = fm.weights_at();
  std::vector<double> grid{0.1, 1.0, 10.0, 100.0};
  const auto ls = log_survival(spec, fm, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t h = 0; h < 8; ++h) EXPECT_GE(ls[i], std::log(w[h] * component_survival(spec, fm, h, 0, grid[i])) - 1e-12);
  }
}

TEST(Survival, ShapeMixtureTailFollowsHeaviestComponent) {
  // The log-log slope of S approaches minus the smallest tail index among the atoms.
  Rng rng(5);
  auto spec = shape_spec();
  spec.shape_centering = {2.0, 1.0, 0.0};
  FiniteMixture fm;
  double lowest = kInf;
  const auto draw = draw_stick_weights(PyParams{0.0, 1.0}, 30, rng);
  fm.weights = draw.weights;
  for (int h = 0; h < 30; ++h) {
    fm.atoms.push_back(spec.shape_centering.sample(rng));
    lowest = std::min(lowest, fm.atoms.back());
  }
  std::vector<double> grid{1e150, 1e300};
  const auto ls = log_survival(spec, fm, grid);
  EXPECT_NEAR(-(ls[1] - ls[0]) / (std::log(grid[1]) - std::log(grid[0])), lowest, 0.02 * lowest);
}

TEST(TailIndex, ModelAndPrior) {
  EXPECT_EQ(model_tail_index(uni_scale(), {{2.0}, 0.5}), std::vector<double>{4.0});
  auto shape = shape_spec();
  shape.shape_centering = {1.0, 1.0, 0.0};
  EXPECT_EQ(model_tail_index(shape, {}), std::vector<double>{0.0});
  shape.shape_centering.shift = 2.0;
  EXPECT_EQ(model_tail_index(shape, {}), std::vector<double>{2.0});
  EXPECT_THROW((void)model_tail_index(uni_scale(), {{2.0, 3.0}, 0.5}), InputError);
  EXPECT_THROW((void)model_tail_index(uni_scale(), {{2.0}, 0.0}), InputError);

  EXPECT_DOUBLE_EQ(induced_tail_prior_mean(2.0, 1.0, 2.0, 2.0), 6.0);
  EXPECT_EQ(induced_tail_prior_mean(2.0, 1.0, 0.5, 2.0), kInf);
  EXPECT_DOUBLE_EQ(induced_tail_prior_mean(1.3, 1.3, 3.0, 1.0), 1.5);
  EXPECT_THROW((void)induced_tail_prior_mean(0.0, 1.0, 2.0, 2.0), DomainError);
}

TEST(TailIndex, InducedPriorMeanMatchesSimulation) {
  Rng rng(6);
  const int n = 400000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += rng.gamma(2.0) / 1.0 / rng.beta(3.0, 2.0);
  EXPECT_NEAR(s / n, induced_tail_prior_mean(2.0, 1.0, 3.0, 2.0), 0.03);
}

TEST(DependentWeights, ClosedForms) {
  std::vector<double> beta{0.0, 0.0};
  std::vector<double> x{1.0, 3.0};
  EXPECT_DOUBLE_EQ(dependent_discount(beta, x), 0.5);
  std::vector<double> b1{0.0};
  std::vector<double> x1{1.0};
  std::vector<double> u{0.5};
  EXPECT_NEAR(dependent_weights(b1, x1, u).weights[0], 0.5, 1e-12);
  // Clamping keeps the discount away from 0 and 1.
  std::vector<double> big{1e6};
  EXPECT_NEAR(dependent_discount(big, x1), logistic(kLinearPredictorClamp), 1e-15);
}

TEST(DependentWeights, StickIdentityAndMarginalLaw) {
  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t h_count = 1 + rep % 15;
    std::vector<double> beta(h_count * 2);
    std::vector<double> u(h_count);
    for (double& b : beta) b = rng.normal();
    for (double& v : u) v = rng.uniform();
    std::vector<double> x{1.0, rng.normal()};
    const auto dw = dependent_weights(beta, x, u);
    EXPECT_NEAR(std::accumulate(dw.weights.begin(), dw.weights.end(), dw.residual_mass), 1.0, 1e-12);
  }
  // With U uniform, V_2(x) follows Beta(1 - D, 2 D).
  const double d = 0.3;
  std::vector<double> vs(50000);
  for (double& v : vs) v = dependent_stick(rng.uniform(), d, 2);
  EXPECT_NEAR(mean(vs), (1 - d) / (1 - d + 2 * d), 0.005);
}

TEST(DependentWeights, ContinuousInCovariate) {
  Rng rng(8);
  const std::size_t h_count = 10;
  std::vector<double> beta(h_count * 2);
  std::vector<double> u(h_count);
  for (double& b : beta) b = 3.0 * rng.normal();
  for (double& v : u) v = rng.uniform();
  std::vector<double> x{1.0, -1.0};
  auto prev = dependent_weights(beta, x, u).weights;
  for (int i = 1; i <= 20000; ++i) {
    x[1] = -1.0 + i * 1e-4;
    const auto w = dependent_weights(beta, x, u).weights;
    for (std::size_t h = 0; h < h_count; ++h) ASSERT_LT(std::abs(w[h] - prev[h]), 5e-3) << x[1];
    prev = w;
  }
}

TEST(DependentWeights, Errors) {
  std::vector<double> beta{0.0};
  std::vector<double> x{1.0};
  std::vector<double> bad_u{1.0};
  EXPECT_THROW((void)dependent_weights(beta, x, bad_u), InputError);
  std::vector<double> u2{0.5, 0.5};
  EXPECT_THROW((void)dependent_weights(beta, x, u2), InputError);
}

TEST(Spec, Validation) {
  MixtureModelSpec s;
  EXPECT_NO_THROW(s.validate());
  s.dim = 2;
  EXPECT_THROW(s.validate(), InputError);
  MixtureModelSpec c;
  c.model_class = ModelClass::cond_scale;
  EXPECT_THROW(c.validate(), InputError);
  MixtureModelSpec t;
  t.model_class = ModelClass::multi_scale;
  t.dim = 3;
  t.copula_theta = 2.0;
  EXPECT_THROW(t.validate(), InputError);
  MixtureModelSpec n;
  n.centering_scale = {-1.0};
  EXPECT_THROW(n.validate(), DomainError);
  EXPECT_THROW((void)model_class_from_string("mixture"), InputError);
  EXPECT_EQ(model_class_from_string("cond_scale"), ModelClass::cond_scale);
}
