#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "htpy/htpy.hpp"
#include "oracles.hpp"

using namespace htpy;

namespace {

double chi2_critical(double df) { return boost::math::quantile(boost::math::chi_squared(df), 0.99); }

}  // namespace

TEST(Scenarios, TableValues) {
  const auto biv1 = scenario_params(ScenarioId::biv1);
  EXPECT_EQ(biv1.margins[0].a1.c0, 5.0);
  EXPECT_EQ(biv1.margins[1].a1.c0, 5.0);
  EXPECT_EQ(biv1.margins[0].w, 1.0);
  EXPECT_EQ(biv1.margins[0].b1.c0, kDefaultLogGammaRate);
  EXPECT_EQ(biv1.theta, 3.0);
  const auto cond2 = scenario_params(ScenarioId::cond2);
  EXPECT_TRUE(cond2.conditional);
  EXPECT_EQ(cond2.margins[0].a1.at(0.5), 3.0);
  EXPECT_EQ(cond2.margins[0].a2.c0, 3.0);
  EXPECT_EQ(cond2.theta, 3.0);
  const auto& m = scenario_params(ScenarioId::biv3).margins;
  EXPECT_EQ(m[0].a1.c0, 13.0);
  EXPECT_EQ(m[0].b1.c0, 7.0);
  EXPECT_EQ(m[0].a2.c0, 10.0);
  EXPECT_EQ(m[0].b2.c0, 8.0);
  EXPECT_EQ(m[1].a1.c0, 8.0);
  EXPECT_EQ(m[1].b1.c0, 7.0);
  EXPECT_EQ(m[1].a2.c0, 15.0);
  EXPECT_EQ(m[1].b2.c0, 8.0);
  EXPECT_EQ(m[1].w, 0.4);
  EXPECT_EQ(scenario_table().size(), 7u);
  for (const auto& p : scenario_table()) EXPECT_EQ(scenario_from_string(to_string(p.id)), p.id);
  EXPECT_THROW((void)scenario_from_string("biv4"), InputError);
}

TEST(Scenarios, UnitParetoSurvival) {
  Rng rng(1);
  const auto g = generate({ScenarioId::uni_pareto, 100000, 1}, rng);
  std::size_t above = 0;
  for (double y : g.data.y) above += y > 10.0;
  EXPECT_NEAR(double(above) / 100000, 0.1, 0.003);
  std::vector<double> y{2.0};
  EXPECT_DOUBLE_EQ(true_density(g.params, y), 0.25);
}

TEST(Scenarios, KendallTau) {
  Rng rng(2);
  for (auto [id, tau, tol] : {std::tuple{ScenarioId::biv1, 2.0 / 3.0, 0.02}, std::tuple{ScenarioId::biv2, 0.0, 0.01}}) {
    const auto g = generate({id, 100000, 1}, rng);
    EXPECT_NEAR(kendall_tau(g.data.margin(0), g.data.margin(1)), tau, tol) << to_string(id);
  }
}

TEST(Scenarios, MarginsMatchQuadratureCdf) {
  Rng rng(3);
  const std::size_t n = 10000;
  for (auto id : {ScenarioId::biv1, ScenarioId::biv3}) {
    const auto g = generate({id, n, 1}, rng);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& lg = g.params.margins[k];
      // Cdf from the mixture density alone, integrated on log y.
      oracle::GridCdf cdf(1e-9, 8.0, 200001, oracle::log_of, [&](double z) {
        const double y = std::exp(z);
        return std::log(lg.pdf(y)) + z;
      });
      const double d = ks_distance(g.data.margin(k), cdf);
      EXPECT_GT(ks_pvalue(d, n), 0.01) << to_string(id) << " margin " << k;
    }
  }
}

TEST(Scenarios, DensityClosedForms) {
  const auto biv2 = scenario_params(ScenarioId::biv2);
  std::vector<double> y{2.0, 5.0};
  EXPECT_NEAR(true_density(biv2, y), biv2.margins[0].pdf(2.0) * biv2.margins[1].pdf(5.0), 1e-15);
  // biv1 at the marginal medians against a finite-difference mixed derivative of the joint cdf.
  const auto biv1 = scenario_params(ScenarioId::biv1);
  const double m1 = biv1.margins[0].quantile(0.5);
  const double m2 = biv1.margins[1].quantile(0.5);
  const GumbelCopula c(biv1.theta);
  auto joint = [&](double a, double b) { return c.cdf(biv1.margins[0].cdf(a), biv1.margins[1].cdf(b)); };
  const double h = 1e-3;
  const double fd = (joint(m1 + h, m2 + h) - joint(m1 + h, m2 - h) - joint(m1 - h, m2 + h) + joint(m1 - h, m2 - h)) /
                    (4 * h * h);
  std::vector<double> med{m1, m2};
  EXPECT_NEAR(true_density(biv1, med), fd, 1e-4);
  std::vector<double> outside{0.5, 2.0};
  EXPECT_THROW((void)true_density(biv1, outside), DomainError);
  std::vector<double> wrong{2.0};
  EXPECT_THROW((void)true_density(biv1, wrong), InputError);
}

TEST(Scenarios, DensityIntegratesToOne) {
  for (auto id : {ScenarioId::biv1, ScenarioId::biv3, ScenarioId::cond2}) {
    const auto p = scenario_params(id);
    const auto g1 = quantile_box_grid(p, 0, 400, 1e-4, 1.0 - 1e-4, 0.5);
    const auto g2 = quantile_box_grid(p, 1, 400, 1e-4, 1.0 - 1e-4, 0.5);
    const double d1 = std::log(g1[1] / g1[0]);
    const double d2 = std::log(g2[1] / g2[0]);
    double m = 0.0;
    for (double a : g1) {
      for (double b : g2) {
        const double y[2] = {a, b};
        m += true_density(p, y, 0.5) * a * b * d1 * d2;
      }
    }
    EXPECT_NEAR(m, 1.0, 1e-3) << to_string(id);
  }
}

TEST(Scenarios, ConditionalSubsampleMatchesDensity) {
  // Keep draws with x within 0.02 of 0.5 and bin them on a 4 x 4 grid of
  // equal-probability marginal cells at x = 0.5.
  Rng rng(4);
  const auto g = generate({ScenarioId::cond2, 600000, 1}, rng);
  const auto& p = g.params;
  const double x0 = 0.5;
  std::vector<double> q1;
  std::vector<double> q2;
  for (int j = 1; j < 4; ++j) {
    q1.push_back(true_marginal_quantile(p, 0, j / 4.0, x0));
    q2.push_back(true_marginal_quantile(p, 1, j / 4.0, x0));
  }
  std::vector<double> counts(16, 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (std::abs(g.data.x[i] - x0) > 0.02) continue;
    const auto y = g.data.response(i);
    const auto a = std::upper_bound(q1.begin(), q1.end(), y[0]) - q1.begin();
    const auto b = std::upper_bound(q2.begin(), q2.end(), y[1]) - q2.begin();
    counts[a * 4 + b] += 1.0;
    kept += 1.0;
  }
  const GumbelCopula c(p.theta);
  auto cdf = [&](double u, double v) { return u <= 0.0 || v <= 0.0 ? 0.0 : u >= 1.0 ? v : v >= 1.0 ? u : c.cdf(u, v); };
  double chi2 = 0.0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const double u0 = a / 4.0, u1 = (a + 1) / 4.0, v0 = b / 4.0, v1 = (b + 1) / 4.0;
      const double prob = cdf(u1, v1) - cdf(u0, v1) - cdf(u1, v0) + cdf(u0, v0);
      const double e = prob * kept;
      chi2 += (counts[a * 4 + b] - e) * (counts[a * 4 + b] - e) / e;
    }
  }
  EXPECT_GT(kept, 20000.0);
  EXPECT_LT(chi2, chi2_critical(15.0));
}

TEST(Scenarios, GeneratorShapes) {
  Rng rng(5);
  const auto g = generate({ScenarioId::cond1, 25, 1}, rng);
  EXPECT_EQ(g.data.dim, 2u);
  EXPECT_EQ(g.data.covariate_dim, 1u);
  EXPECT_EQ(g.data.y.size(), 50u);
  EXPECT_EQ(g.data.x.size(), 25u);
  for (double y : g.data.y) EXPECT_GT(y, 1.0);
  EXPECT_THROW((void)generate({ScenarioId::biv1, 0, 1}, rng), InputError);
}

TEST(Grids, LogMidpointsAndIae) {
  const auto g = log_midpoint_grid(1.0, 100.0, 2);
  EXPECT_NEAR(g[0], std::pow(10.0, 0.5), 1e-12);
  EXPECT_NEAR(g[1], std::pow(10.0, 1.5), 1e-12);
  EXPECT_THROW((void)log_midpoint_grid(0.0, 1.0, 3), InputError);
  const auto p = scenario_params(ScenarioId::biv2);
  const auto g1 = quantile_box_grid(p, 0, 30);
  const auto g2 = quantile_box_grid(p, 1, 30);
  EXPECT_NEAR(g1.front() / true_marginal_quantile(p, 0, 0.0025), std::exp(0.5 * std::log(g1[1] / g1[0])), 1e-9);
  std::vector<double> exact;
  std::vector<double> zero(g1.size() * g2.size(), 0.0);
  for (double a : g1) {
    for (double b : g2) {
      const double y[2] = {a, b};
      exact.push_back(true_density(p, y));
    }
  }
  EXPECT_EQ(joint_iae(p, g1, g2, exact), 0.0);
  // Against zero the error is the grid's mass, about 0.995^2.
  EXPECT_NEAR(joint_iae(p, g1, g2, zero), 0.995 * 0.995, 0.01);
  EXPECT_THROW((void)joint_iae(p, g1, g2, exact.data() ? std::span<const double>(exact).first(5) : exact), InputError);
}
