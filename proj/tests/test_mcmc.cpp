#include <gtest/gtest.h>

#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "htpy/htpy.hpp"
#include "oracles.hpp"

using namespace htpy;

namespace {

Dataset univariate(std::vector<double> y) {
  Dataset d;
  d.y = std::move(y);
  return d;
}

Dataset pareto_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.y.push_back(ParetoTypeKernel::pareto(1.0).sample(rng));
  return d;
}

SamplerConfig short_run(std::uint64_t seed, std::size_t burn = 50, std::size_t keep = 50) {
  SamplerConfig c;
  c.seed = seed;
  c.burn_in = burn;
  c.keep = keep;
  return c;
}

}  // namespace

TEST(Sampler, InitialStateIsValid) {
  SliceSampler s(MixtureModelSpec{}, univariate({3.0}));
  EXPECT_GE(s.state().components(), 1u);
  const auto& st = s.state();
  EXPECT_LT(st.slice[0], s.weight(0, st.allocation[0]));
}

// Sticks are redrawn from the allocations alone, so the slice invariants are
// checked right after the slice step of each cycle.
TEST(Sampler, SliceInvariantsHoldAfterEverySliceStep) {
  for (auto cls : {ModelClass::uni_scale, ModelClass::uni_shape}) {
    MixtureModelSpec spec;
    spec.model_class = cls;
    // A moderate discount keeps the number of components below the cap.
    if (cls == ModelClass::uni_shape) spec.precision = 1.0;
    if (cls == ModelClass::uni_scale) spec.fixed_discount = 0.25;
    SamplerConfig cfg;
    cfg.seed = 3;
    SliceSampler s(spec, pareto_data(60, 2), cfg);
    for (int t = 0; t < 100; ++t) {
      s.sweep(true);
      s.update_slices();
      const auto& st = s.state();
      double total = 0.0;
      for (std::size_t h = 0; h < st.components(); ++h) total += s.weight(0, h);
      const double u_min = *std::min_element(st.slice.begin(), st.slice.end());
      ASSERT_EQ(s.cap_hits(), 0u);
      ASSERT_GE(total, 1.0 - u_min - 1e-9) << to_string(cls) << " sweep " << t;
      for (std::size_t i = 0; i < st.allocation.size(); ++i) ASSERT_LT(st.slice[i], s.weight(i, st.allocation[i]));
    }
  }
}

TEST(Sampler, ConditionalSliceInvariants) {
  MixtureModelSpec spec;
  spec.model_class = ModelClass::cond_scale;
  spec.covariate_dim = 2;
  Rng rng(4);
  Dataset d;
  d.covariate_dim = 2;
  for (int i = 0; i < 40; ++i) {
    const double x = rng.uniform();
    d.x.insert(d.x.end(), {1.0, x});
    d.y.push_back(ParetoTypeKernel::pareto(1.0 + x).sample(rng));
  }
  SamplerConfig cfg;
  cfg.seed = 5;
  SliceSampler s(spec, d, cfg);
  for (int t = 0; t < 60; ++t) {
    s.sweep(true);
    s.update_slices();
    const auto& st = s.state();
    for (std::size_t i = 0; i < st.allocation.size(); ++i) ASSERT_LT(st.slice[i], s.weight(i, st.allocation[i]));
  }
}

TEST(Sampler, AllocationProbabilities) {
  // Two equally weighted components with every slice at zero: P(z = h) is
  // proportional to the kernel density at y.
  MixtureModelSpec spec;
  spec.truncation = 2;
  const double y = 1.5;
  SamplerConfig cfg;
  cfg.seed = 6;
  SliceSampler s(spec, univariate({y}), cfg);
  ChainState st;
  st.allocation = {0};
  st.slice = {0.0};
  st.sticks = {0.5, 1.0};
  st.atoms = {1.0, 3.0};
  st.alpha0 = {1.0};
  st.lambda = 1.0;
  s.set_state(st);
  const double f0 = ErlangKernel::from_atom(1.0, 1.0).pdf(y);
  const double f1 = ErlangKernel::from_atom(3.0, 1.0).pdf(y);
  const double p0 = f0 / (f0 + f1);
  const int n = 20000;
  int zero = 0;
  for (int t = 0; t < n; ++t) {
    s.update_allocations();
    zero += s.state().allocation[0] == 0;
  }
  EXPECT_NEAR(double(zero) / n, p0, 4 * std::sqrt(p0 * (1 - p0) / n));
}

TEST(Sampler, StickConjugacy) {
  // D = 0.5, M = 0, n_1 = 3, n_{>1} = 2 gives V_1 ~ Beta(3.5, 2.5).
  MixtureModelSpec spec;
  spec.truncation = 3;
  spec.fixed_discount = 0.5;
  SamplerConfig cfg;
  cfg.seed = 7;
  SliceSampler s(spec, univariate({1.0, 1.0, 1.0, 1.0, 1.0}), cfg);
  ChainState st;
  st.allocation = {0, 0, 0, 1, 2};
  st.slice.assign(5, 0.0);
  st.sticks = {0.5, 0.5, 1.0};
  st.atoms = {1.0, 1.0, 1.0};
  st.alpha0 = {1.0};
  st.discount = 0.5;
  s.set_state(st);
  std::vector<double> v(20000);
  for (double& x : v) {
    s.update_sticks();
    x = s.state().sticks[0];
    ASSERT_EQ(s.state().sticks[2], 1.0);
  }
  boost::math::beta_distribution<> law(3.5, 2.5);
  EXPECT_LT(ks_distance(v, [&](double x) { return boost::math::cdf(law, x); }), 1.63 / std::sqrt(double(v.size())));
}

TEST(Sampler, Alpha0GuardFallsBackToUnitGamma) {
  MixtureModelSpec spec;
  spec.truncation = 2;
  SamplerConfig cfg;
  cfg.seed = 8;
  SliceSampler s(spec, univariate({1.0}), cfg);
  ChainState st;
  st.allocation = {0};
  st.slice = {0.0};
  st.sticks = {0.5, 1.0};
  st.atoms = {0.0, 0.0};
  st.alpha0 = {1.0};
  s.set_state(st);
  std::vector<double> a(5000);
  for (double& x : a) {
    s.update_alpha0();
    x = s.state().alpha0[0];
  }
  EXPECT_EQ(s.alpha0_guards(), a.size());
  EXPECT_LT(ks_distance(a, [](double x) { return -std::expm1(-x); }), 1.63 / std::sqrt(double(a.size())));
}

TEST(Sampler, AcceptanceAtIdenticalProposalIsCertain) {
  // A zero step makes every random-walk proposal equal the current value.
  MixtureModelSpec spec;
  SamplerConfig cfg;
  cfg.seed = 9;
  cfg.initial_log_step = -1e4;
  SliceSampler s(spec, pareto_data(20, 1), cfg);
  for (int t = 0; t < 20; ++t) {
    s.update_atoms();
    s.update_discount();
  }
  EXPECT_EQ(s.moves().at("atom").accepted, s.moves().at("atom").proposed);
  EXPECT_EQ(s.moves().at("discount").accepted, s.moves().at("discount").proposed);
}

TEST(Sampler, InputErrors) {
  MixtureModelSpec spec;
  EXPECT_THROW(SliceSampler(spec, univariate({1.0, -2.0})), InputError);
  Dataset two;
  two.dim = 2;
  two.y = {1.0, 2.0};
  EXPECT_THROW(SliceSampler(spec, two), InputError);
  SamplerConfig bad;
  bad.thin = 0;
  EXPECT_THROW(SliceSampler(spec, univariate({1.0}), bad), InputError);
  SliceSampler s(spec, univariate({1.0, 2.0}));
  EXPECT_THROW(s.set_responses({1.0}), InputError);
}


TEST(Conditionals, FrozenTargetsMatchQuadrature) {
  for (const auto& c : oracle::conditional_checks(10000, 10000, 101)) {
    EXPECT_LT(c.ks, c.threshold) << c.name;
  }
}

TEST(Conditionals, ShortGewekeRunIsConsistent) {
  // A short joint-distribution run on the univariate scale class; the full
  // four-class test runs with the acceptance checks.
  for (const auto& g : oracle::geweke(ModelClass::uni_scale, 5000, 17)) EXPECT_LT(std::abs(g.z), 4.0) << g.name;
}

TEST(Chains, DeterministicGivenSeed) {
  const auto data = pareto_data(40, 3);
  const auto a = run_chain(MixtureModelSpec{}, data, short_run(11));
  const auto b = run_chain(MixtureModelSpec{}, data, short_run(11));
  const auto c = run_chain(MixtureModelSpec{}, data, short_run(12));
  ASSERT_EQ(a.snapshots.size(), 50u);
  bool differs = false;
  for (std::size_t t = 0; t < a.snapshots.size(); ++t) {
    EXPECT_EQ(a.snapshots[t].discount, b.snapshots[t].discount);
    EXPECT_EQ(a.snapshots[t].mixture.atoms, b.snapshots[t].mixture.atoms);
    EXPECT_EQ(a.snapshots[t].mixture.weights, b.snapshots[t].mixture.weights);
    differs = differs || a.snapshots[t].discount != c.snapshots[t].discount;
  }
  EXPECT_TRUE(differs);
}

TEST(Chains, KeepZeroAndThinning) {
  const auto data = pareto_data(10, 3);
  EXPECT_TRUE(run_chain(MixtureModelSpec{}, data, short_run(1, 5, 0)).snapshots.empty());
  auto cfg = short_run(1, 5, 4);
  cfg.thin = 3;
  const auto run = run_chain(MixtureModelSpec{}, data, cfg);
  ASSERT_EQ(run.snapshots.size(), 4u);
  EXPECT_EQ(run.snapshots[0].iteration, 8u);
  EXPECT_EQ(run.snapshots[3].iteration, 17u);
}

TEST(Chains, ObserverSeesEveryKeptDraw) {
  std::size_t seen = 0;
  const auto run = run_chain(MixtureModelSpec{}, pareto_data(10, 3), short_run(2, 5, 7),
                             [&](const Snapshot&) { ++seen; }, false);
  EXPECT_EQ(seen, 7u);
  EXPECT_TRUE(run.snapshots.empty());
}

TEST(ChainLog, RoundTripAndTruncation) {
  MixtureModelSpec spec;
  spec.model_class = ModelClass::cond_scale;
  spec.covariate_dim = 1;
  Dataset d;
  d.covariate_dim = 1;
  d.y = {1.0, 2.0, 5.0};
  d.x = {0.1, 0.5, 0.9};
  const auto run = run_chain(spec, d, short_run(4, 5, 6));
  const auto path = (std::filesystem::temp_directory_path() / "htpy_roundtrip.htpylog").string();
  {
    ChainLogWriter w(path, ChainLogHeader::from_spec(spec));
    for (const auto& s : run.snapshots) w.write(s);
  }
  auto log = read_chain_log(path);
  EXPECT_FALSE(log.truncated);
  EXPECT_EQ(log.header.model_class, ModelClass::cond_scale);
  ASSERT_EQ(log.snapshots.size(), run.snapshots.size());
  for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
    EXPECT_EQ(log.snapshots[t].iteration, run.snapshots[t].iteration);
    EXPECT_EQ(log.snapshots[t].mixture.uniforms, run.snapshots[t].mixture.uniforms);
    EXPECT_EQ(log.snapshots[t].mixture.coefficients, run.snapshots[t].mixture.coefficients);
    EXPECT_EQ(log.snapshots[t].mixture.atoms, run.snapshots[t].mixture.atoms);
  }
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
  log = read_chain_log(path);
  EXPECT_TRUE(log.truncated);
  EXPECT_EQ(log.snapshots.size(), run.snapshots.size() - 1);
  {
    std::ofstream junk(path, std::ios::binary | std::ios::trunc);
    junk << "nope";
  }
  EXPECT_THROW((void)read_chain_log(path), InputError);
  std::filesystem::remove(path);
  EXPECT_THROW((void)read_chain_log(path), InputError);
}

TEST(Summaries, SingleSnapshotCollapsesBands) {
  MixtureModelSpec spec;
  Snapshot s;
  s.discount = 0.5;
  s.alpha0 = {1.0};
  s.mixture.weights = {0.6, 0.4};
  s.mixture.atoms = {1.0, 4.0};
  std::vector<Snapshot> snaps{s};
  const auto sum = predictive_summaries(spec, snaps, {{0.5, 1.0, 2.0}});
  const auto& b = sum.margins[0].density;
  for (std::size_t g = 0; g < 3; ++g) {
    EXPECT_DOUBLE_EQ(b.q025[g], b.mean[g]);
    EXPECT_DOUBLE_EQ(b.q975[g], b.mean[g]);
    std::vector<double> y{sum.margins[0].grid[g]};
    EXPECT_NEAR(b.mean[g], density(spec, s.mixture, y), 1e-15);
  }
  EXPECT_EQ(sum.tail_index_draws[0], std::vector<double>{2.0});
}

TEST(Summaries, BandsAreNestedAndQuantilesInvertCdf) {
  MixtureModelSpec spec;
  const auto run = run_chain(spec, pareto_data(50, 5), short_run(6, 100, 100));
  std::vector<double> grid;
  for (int j = 0; j < 30; ++j) grid.push_back(std::exp(-1.0 + 0.25 * j));
  const auto sum = predictive_summaries(spec, run.snapshots, {grid});
  for (const auto* b : {&sum.margins[0].density, &sum.margins[0].log_survival}) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      EXPECT_LE(b->q025[g], b->q25[g]);
      EXPECT_LE(b->q25[g], b->q75[g]);
      EXPECT_LE(b->q75[g], b->q975[g]);
      EXPECT_LE(b->q025[g], b->mean[g]);
      EXPECT_LE(b->mean[g], b->q975[g]);
    }
  }
  const double q = predictive_quantile(spec, run.snapshots, 0.9);
  EXPECT_NEAR(predictive_cdf(spec, run.snapshots, 0, q), 0.9, 1e-8);
  EXPECT_THROW((void)predictive_summaries(spec, run.snapshots, {{2.0, 1.0}}), InputError);
  EXPECT_THROW((void)predictive_summaries(spec, {}, {grid}), InputError);
}

TEST(Residuals, MonotoneAndCentred) {
  MixtureModelSpec spec;
  Snapshot s;
  s.mixture.weights = {1.0};
  s.mixture.atoms = {2.0};
  std::vector<Snapshot> snaps{s};
  const double median = ErlangKernel::from_atom(2.0, 1.0).quantile(0.5);
  const auto r = randomized_quantile_residuals(spec, snaps, univariate({0.5, median, 10.0, 1e4}));
  EXPECT_NEAR(r.residuals[1], 0.0, 1e-9);
  EXPECT_LT(r.residuals[0], r.residuals[1]);
  EXPECT_LT(r.residuals[1], r.residuals[2]);
  EXPECT_EQ(r.clamped, 1u);
  EXPECT_EQ(r.clamped_flags, (std::vector<std::uint8_t>{0, 0, 0, 1}));
}

TEST(Residuals, ThinSnapshots) {
  std::vector<Snapshot> snaps(10);
  for (std::size_t i = 0; i < 10; ++i) snaps[i].iteration = i;
  const auto t = thin_snapshots(snaps, 4);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[1].iteration, 2u);
  EXPECT_EQ(thin_snapshots(snaps, 0).size(), 10u);
}
