// htpy: measure simulation, envelopes, data generation, fitting, diagnostics
// and replicated simulation studies. See README.md for the command reference.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "config.hpp"
#include "csv.hpp"
#include "htpy/htpy.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace htpy::cli {
namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string config;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--config", c.config, "Flat key = value configuration file (flags win)");
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->envname("HTPY_OUT_DIR")->capture_default_str();
}

std::string output_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

json header_json(const std::string& command, std::uint64_t seed) {
  return json{{"tool", "htpy"}, {"version", kVersion}, {"command", command}, {"seed", seed}};
}

json band_json(const Band& b) {
  return json{{"mean", b.mean}, {"q025", b.q025}, {"q25", b.q25}, {"q75", b.q75}, {"q975", b.q975}};
}

/// Runs task(i) for i < count on up to `threads` workers; results are written
/// by index, so the output does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads == 0 ? count : threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

// ---------------------------------------------------------------------------
// simulate-measure / envelopes

struct Centering {
  std::string name;
  /// y with 1 - G0(y) = t.
  double y_at_tail(double t) const {
    if (name == "pareto1") return 1.0 / t;
    if (name == "lomax") return 1.0 / t - 1.0;
    return -std::log(t);
  }
};

Centering centering_from_string(const std::string& s) {
  if (s != "pareto1" && s != "lomax" && s != "exp") {
    throw InputError("unknown centering '" + s + "' (pareto1, lomax, exp)");
  }
  return {s};
}

struct MeasureOpts {
  Common common;
  std::string kind = "sp";
  double discount = 0.5;
  double precision = 1.0;
  std::string centering = "pareto1";
  std::size_t paths = 50;
  double t_max = 0.1;
  double t_min = 1e-6;
  std::size_t points = 200;
  double r = 2.0;
  double s = 0.5;
  std::string output = "measure_paths.csv";
  std::string envelope_output = "envelopes.csv";
};

void add_grid_options(CLI::App* cmd, MeasureOpts& o) {
  cmd->add_option("--kind", o.kind, "sp (stable process) or dp (Dirichlet process)")
      ->check(CLI::IsMember({"sp", "dp"}))
      ->capture_default_str();
  cmd->add_option("--d", o.discount, "Discount D of the stable process")->capture_default_str();
  cmd->add_option("--m", o.precision, "Precision M of the Dirichlet process")->capture_default_str();
  cmd->add_option("--centering", o.centering, "pareto1, lomax or exp")->capture_default_str();
  cmd->add_option("--t-max", o.t_max, "Largest centering tail value 1 - G0(y) on the grid")->capture_default_str();
  cmd->add_option("--t-min", o.t_min, "Smallest centering tail value on the grid")->capture_default_str();
  cmd->add_option("--points", o.points, "Grid points (log-spaced in 1 - G0)")->capture_default_str();
  cmd->add_option("--r", o.r, "Upper envelope exponent r > 1")->capture_default_str();
  cmd->add_option("--s", o.s, "Lower envelope exponent s in (0, 1) (dp)")->capture_default_str();
  cmd->add_option("--envelope-output", o.envelope_output)->capture_default_str();
}

struct Grid {
  std::vector<double> y;
  std::vector<double> tail;
};

Grid measure_grid(const MeasureOpts& o) {
  htpy::detail::require<InputError>(o.points >= 2, "--points must be at least 2");
  htpy::detail::require<InputError>(o.t_min > 0.0 && o.t_min < o.t_max && o.t_max < 1.0,
                              "need 0 < t-min < t-max < 1");
  const auto c = centering_from_string(o.centering);
  Grid g;
  const double a = std::log(o.t_max);
  const double b = std::log(o.t_min);
  for (std::size_t j = 0; j < o.points; ++j) {
    const double t = std::exp(a + (b - a) * static_cast<double>(j) / static_cast<double>(o.points - 1));
    g.tail.push_back(t);
    g.y.push_back(c.y_at_tail(t));
  }
  return g;
}

EnvelopeCurves measure_envelopes(const MeasureOpts& o, const Grid& g) {
  if (o.kind == "sp") {
    htpy::detail::require<InputError>(o.discount > 0.0 && o.discount < 1.0, "--d must lie in (0, 1)");
    return sp_envelopes(g.tail, o.discount, o.r);
  }
  htpy::detail::require<InputError>(o.precision > 0.0, "--m must be positive");
  return dp_envelopes(g.tail, o.precision, o.s, o.r);
}

void write_envelopes(const MeasureOpts& o, const Grid& g, const EnvelopeCurves& env) {
  CsvWriter w(output_path(o.common, o.envelope_output), kVersion, o.common.seed,
              {"y", "log_g0_tail", "log_lower", "log_upper"});
  for (std::size_t i = 0; i < g.y.size(); ++i) {
    w.row({g.y[i], std::log(g.tail[i]), env.log_lower[i], env.log_upper[i]});
  }
}

int cmd_simulate_measure(const MeasureOpts& o) {
  htpy::detail::require<InputError>(o.paths >= 1, "--paths must be positive");
  const Grid g = measure_grid(o);
  const auto env = measure_envelopes(o, g);
  const auto sub = o.kind == "sp" ? SubordinatorSpec::stable(o.discount) : SubordinatorSpec::gamma(o.precision);
  Rng rng(o.common.seed);
  std::vector<TailTrajectory> paths;
  for (std::size_t p = 0; p < o.paths; ++p) paths.push_back(tail_trajectory(sub, g.tail, rng));

  std::vector<std::string> header{"y", "log_g0_tail"};
  for (std::size_t p = 0; p < o.paths; ++p) header.push_back("path_" + std::to_string(p + 1));
  header.push_back("log_lower");
  header.push_back("log_upper");
  CsvWriter w(output_path(o.common, o.output), kVersion, o.common.seed, header);
  for (std::size_t i = 0; i < g.y.size(); ++i) {
    std::vector<double> row{g.y[i], std::log(g.tail[i])};
    for (const auto& p : paths) row.push_back(p.log_survival[i]);
    row.push_back(env.log_lower[i]);
    row.push_back(env.log_upper[i]);
    w.row(row);
  }
  write_envelopes(o, g, env);
  return 0;
}

int cmd_envelopes(const MeasureOpts& o) {
  const Grid g = measure_grid(o);
  write_envelopes(o, g, measure_envelopes(o, g));
  return 0;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenOpts {
  Common common;
  std::string scenario = "uni_pareto";
  std::size_t n = 1000;
  std::string output = "data.csv";
};

json affine_json(const Affine& a) { return json{{"c0", a.c0}, {"c1", a.c1}}; }

json scenario_json(const ScenarioParams& p) {
  json j{{"scenario", to_string(p.id)}, {"dim", p.dim}, {"conditional", p.conditional}, {"theta", p.theta}};
  if (p.id == ScenarioId::uni_pareto) {
    j["margins"] = json::array({json{{"family", "pareto"}, {"tail_index", 1.0}, {"scale", 1.0}}});
    return j;
  }
  json margins = json::array();
  for (const auto& m : p.margins) {
    margins.push_back(json{{"family", "log_gamma_mixture"},
                           {"w", m.w},
                           {"a1", affine_json(m.a1)},
                           {"b1", affine_json(m.b1)},
                           {"a2", affine_json(m.a2)},
                           {"b2", affine_json(m.b2)}});
  }
  j["margins"] = margins;
  return j;
}

std::vector<std::string> data_columns(std::size_t dim, std::size_t p) {
  std::vector<std::string> h;
  for (std::size_t k = 0; k < dim; ++k) h.push_back("y" + std::to_string(k + 1));
  if (p == 1) h.push_back("x");
  for (std::size_t k = 0; p > 1 && k < p; ++k) h.push_back("x" + std::to_string(k + 1));
  return h;
}

int cmd_gen_data(const GenOpts& o) {
  htpy::detail::require<InputError>(o.n >= 1, "--n must be positive");
  const ScenarioSpec spec{scenario_from_string(o.scenario), o.n, o.common.seed};
  Rng rng(o.common.seed);
  const auto g = generate(spec, rng);
  const auto& d = g.data;
  const std::string path = output_path(o.common, o.output);
  CsvWriter w(path, kVersion, o.common.seed, data_columns(d.dim, d.covariate_dim));
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> row(d.response(i).begin(), d.response(i).end());
    for (double v : d.covariates(i)) row.push_back(v);
    w.row(row);
  }
  json j = header_json("gen-data", o.common.seed);
  j["n"] = o.n;
  j["data_file"] = fs::path(o.output).filename().string();
  j["truth"] = scenario_json(g.params);
  j["log_gamma_default_rate"] = kDefaultLogGammaRate;
  write_json(fs::path(path).replace_extension(".json").string(), j);
  return 0;
}

// ---------------------------------------------------------------------------
// Data files

Dataset read_dataset(const std::string& path) {
  const auto t = read_csv(path);
  std::vector<std::size_t> ycols;
  std::vector<std::size_t> xcols;
  auto indexed = [&](const std::string& stem, std::vector<std::size_t>& cols) {
    const auto plain = t.column(stem);
    if (plain >= 0) {
      cols.push_back(static_cast<std::size_t>(plain));
      htpy::detail::require<InputError>(t.column(stem + "1") < 0, "'" + path + "' mixes '" + stem + "' and '" + stem + "1'");
      return;
    }
    for (std::size_t k = 1;; ++k) {
      const auto c = t.column(stem + std::to_string(k));
      if (c < 0) break;
      cols.push_back(static_cast<std::size_t>(c));
    }
  };
  indexed("y", ycols);
  indexed("x", xcols);
  htpy::detail::require<InputError>(!ycols.empty(), "'" + path + "' has no response column (y or y1, y2, ...)");
  htpy::detail::require<InputError>(ycols.size() + xcols.size() == t.header.size(),
                              "'" + path + "' has columns other than y1.. and x1..");
  htpy::detail::require<InputError>(!t.rows.empty(), "'" + path + "' has no data rows");
  Dataset d;
  d.dim = ycols.size();
  d.covariate_dim = xcols.size();
  std::vector<std::vector<double>> ys;
  std::vector<std::vector<double>> xs;
  for (auto c : ycols) ys.push_back(t.numeric(c));
  for (auto c : xcols) xs.push_back(t.numeric(c));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (const auto& col : ys) d.y.push_back(col[i]);
    for (const auto& col : xs) d.x.push_back(col[i]);
  }
  return d;
}

/// Prepends a unit intercept column to the covariates.
Dataset with_intercept(const Dataset& d) {
  Dataset out = d;
  out.covariate_dim = d.covariate_dim + 1;
  out.x.clear();
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.x.push_back(1.0);
    for (double v : d.covariates(i)) out.x.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
  Common common;
  std::string data;
  std::string model = "auto";
  std::optional<double> precision;
  std::optional<double> discount;
  std::vector<double> discount_prior{0.5, 0.5};
  std::vector<double> lambda_prior{0.1, 0.1};
  std::vector<double> centering_scale{1.0};
  std::optional<double> alpha0;
  std::vector<double> alpha0_prior;
  std::string theta = "auto";
  std::string kernel = "pareto";
  std::vector<double> kernel_params;
  std::vector<double> shape_centering{1.0, 1.0, 0.0};
  double coefficient_variance = 100.0;
  bool intercept = true;
  std::size_t truncation = 0;
  std::size_t max_components = 2000;
  std::size_t burn_in = 5000;
  std::size_t keep = 5000;
  std::size_t thin = 1;
  std::size_t chains = 1;
  std::size_t threads = 0;
  std::size_t grid_points = 100;
  std::optional<double> grid_min;
  std::optional<double> grid_max;
  std::size_t joint_points = 50;
  std::vector<double> x_values{0.25, 0.5, 0.75};
  std::vector<double> quantiles{0.95, 0.99};
  std::size_t quantile_snapshots = 500;
  bool chain_log = false;
  std::string output = "summary.json";
};

void add_model_options(CLI::App* cmd, FitOpts& o) {
  cmd->add_option("--model", o.model, "auto, uni_scale, uni_shape, multi_scale or cond_scale")->capture_default_str();
  cmd->add_option("--precision", o.precision, "Pitman-Yor precision M (default 0; 1 for uni_shape)");
  cmd->add_option("--discount", o.discount, "Fix the discount D instead of sampling it");
  cmd->add_option("--discount-prior", o.discount_prior, "Beta(a, b) prior on D")->expected(2)->capture_default_str();
  cmd->add_option("--lambda-prior", o.lambda_prior, "Gamma(shape, rate) prior on the kernel rate")
      ->expected(2)
      ->capture_default_str();
  cmd->add_option("--centering-scale", o.centering_scale, "Pareto II centering scale, one value or one per margin")
      ->expected(1, 2)
      ->capture_default_str();
  cmd->add_option("--alpha0", o.alpha0, "Fix the centering tail index");
  cmd->add_option("--alpha0-prior", o.alpha0_prior, "Gamma(shape, rate) prior on alpha0 (default 1/alpha0)")
      ->expected(2);
  cmd->add_option("--theta", o.theta, "Gumbel copula parameter, or auto (Kendall tau)")->capture_default_str();
  cmd->add_option("--kernel", o.kernel, "Shape-mixture kernel: burr, f, gpd, pareto, student_t")->capture_default_str();
  cmd->add_option("--kernel-params", o.kernel_params, "Kernel parameters (first second)")->expected(1, 2);
  cmd->add_option("--shape-centering", o.shape_centering, "Gamma(shape, rate) + shift centering of shape atoms")
      ->expected(3)
      ->capture_default_str();
  cmd->add_option("--coefficient-variance", o.coefficient_variance)->capture_default_str();
  cmd->add_flag("--intercept,!--no-intercept", o.intercept, "Prepend a unit covariate (cond_scale)")
      ->capture_default_str();
  cmd->add_option("--truncation", o.truncation, "Fixed number of components (0: slice-adaptive)")
      ->capture_default_str();
  cmd->add_option("--max-components", o.max_components)->capture_default_str();
  cmd->add_option("--burn-in", o.burn_in)->capture_default_str();
  cmd->add_option("--keep", o.keep)->capture_default_str();
  cmd->add_option("--thin", o.thin)->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0: one per task)")->capture_default_str();
  cmd->add_option("--grid-points", o.grid_points)->capture_default_str();
  cmd->add_option("--x-values", o.x_values, "Covariate values for cond_scale summaries")->capture_default_str();
}

ParetoTypeKernel kernel_from_options(const FitOpts& o) {
  const auto fam = pareto_family_from_string(o.kernel);
  double first = 1.0;
  double second = 0.0;
  switch (fam) {
    case ParetoFamily::burr: second = 1.0; break;
    case ParetoFamily::f: first = 2.0, second = 2.0; break;
    case ParetoFamily::gpd: second = 1.0; break;
    default: break;
  }
  if (!o.kernel_params.empty()) first = o.kernel_params[0];
  if (o.kernel_params.size() > 1) second = o.kernel_params[1];
  return ParetoTypeKernel::make(fam, first, second);
}

struct Prepared {
  MixtureModelSpec spec;
  Dataset data;
};

Prepared prepare_model(const FitOpts& o, const Dataset& raw) {
  Prepared p;
  auto& s = p.spec;
  if (o.model == "auto") {
    s.model_class = raw.covariate_dim > 0 ? ModelClass::cond_scale
                    : raw.dim == 1        ? ModelClass::uni_scale
                                          : ModelClass::multi_scale;
  } else {
    s.model_class = model_class_from_string(o.model);
  }
  p.data = s.model_class == ModelClass::cond_scale && o.intercept ? with_intercept(raw) : raw;
  s.dim = p.data.dim;
  s.covariate_dim = s.model_class == ModelClass::cond_scale ? p.data.covariate_dim : 0;
  s.precision = o.precision.value_or(s.model_class == ModelClass::uni_shape ? 1.0 : 0.0);
  s.fixed_discount = o.discount;
  s.discount_prior_a = o.discount_prior.at(0);
  s.discount_prior_b = o.discount_prior.at(1);
  s.lambda_prior_shape = o.lambda_prior.at(0);
  s.lambda_prior_rate = o.lambda_prior.at(1);
  s.centering_scale = o.centering_scale;
  s.fixed_alpha0 = o.alpha0;
  if (!o.alpha0_prior.empty()) s.alpha0_prior = TailIndexPrior::gamma(o.alpha0_prior[0], o.alpha0_prior[1]);
  if (s.dim == 2) {
    if (o.theta == "auto") {
      s.copula_theta = gumbel_theta_from_tau(kendall_tau(raw.margin(0), raw.margin(1)));
    } else {
      try {
        s.copula_theta = std::stod(o.theta);
      } catch (const std::exception&) {
        throw InputError("--theta must be a number or 'auto'");
      }
    }
  }
  s.shape_kernel = kernel_from_options(o);
  s.shape_centering = {o.shape_centering.at(0), o.shape_centering.at(1), o.shape_centering.at(2)};
  s.coefficient_prior_variance = o.coefficient_variance;
  s.truncation = o.truncation;
  s.max_components = o.max_components;
  s.validate();
  p.data.validate_for(s);
  return p;
}

json spec_json(const MixtureModelSpec& s) {
  json j{{"model_class", to_string(s.model_class)},
         {"dim", s.dim},
         {"covariate_dim", s.covariate_dim},
         {"precision", s.precision},
         {"discount", s.fixed_discount ? json(*s.fixed_discount) : json("sampled")}};
  if (s.discount_sampled()) j["discount_prior"] = {s.discount_prior_a, s.discount_prior_b};
  if (is_scale_class(s.model_class)) {
    j["lambda_prior"] = {s.lambda_prior_shape, s.lambda_prior_rate};
    j["centering_scale"] = s.centering_scale;
    j["alpha0"] = s.fixed_alpha0 ? json(*s.fixed_alpha0) : json("sampled");
    if (s.alpha0_sampled()) {
      j["alpha0_prior"] = s.alpha0_prior.jeffreys ? json("jeffreys")
                                                  : json{{"shape", s.alpha0_prior.shape}, {"rate", s.alpha0_prior.rate}};
    }
    j["copula_theta"] = s.copula_theta;
  } else {
    j["kernel"] = {{"family", to_string(s.shape_kernel.family)},
                   {"first", s.shape_kernel.first},
                   {"second", s.shape_kernel.second}};
    j["shape_centering"] = {{"shape", s.shape_centering.shape},
                            {"rate", s.shape_centering.rate},
                            {"shift", s.shape_centering.shift}};
  }
  if (s.model_class == ModelClass::cond_scale) j["coefficient_prior_variance"] = s.coefficient_prior_variance;
  j["truncation"] = s.truncation;
  j["max_components"] = s.max_components;
  return j;
}

std::vector<double> summary_grid(const MixtureModelSpec& spec, const Dataset& d, std::size_t k, const FitOpts& o) {
  auto m = d.margin(k);
  const auto [mn, mx] = std::minmax_element(m.begin(), m.end());
  double lo = o.grid_min.value_or(is_scale_class(spec.model_class) ? 0.5 * *mn : *mn);
  if (!is_scale_class(spec.model_class)) lo = std::max(lo, std::nextafter(spec.shape_kernel.support_lower(), kInf));
  const double hi = o.grid_max.value_or(2.0 * *mx);
  htpy::detail::require<InputError>(lo > 0.0 && hi > lo, "summary grid needs 0 < grid-min < grid-max");
  return log_midpoint_grid(lo, hi, o.grid_points);
}

/// Covariate vectors at which to summarise (one empty vector when unconditional).
std::vector<std::vector<double>> summary_points(const MixtureModelSpec& spec, const FitOpts& o) {
  if (spec.model_class != ModelClass::cond_scale) return {{}};
  const std::size_t raw_p = spec.covariate_dim - (o.intercept ? 1 : 0);
  htpy::detail::require<InputError>(raw_p == 1 || o.x_values.empty(),
                              "--x-values applies to a single covariate; use it with one x column");
  std::vector<std::vector<double>> pts;
  for (double x : o.x_values) {
    std::vector<double> v;
    if (o.intercept) v.push_back(1.0);
    v.push_back(x);
    pts.push_back(v);
  }
  if (pts.empty()) pts.push_back(std::vector<double>(spec.covariate_dim, o.intercept ? 1.0 : 0.0));
  return pts;
}

json moves_json(const std::map<std::string, MoveStats>& moves) {
  json j = json::object();
  for (const auto& [name, m] : moves) {
    j[name] = {{"proposed", m.proposed}, {"accepted", m.accepted}, {"rate", m.rate()}, {"step", std::exp(m.log_step)}};
  }
  return j;
}

int cmd_fit(const FitOpts& o) {
  htpy::detail::require<InputError>(o.chains >= 1, "--chains must be positive");
  htpy::detail::require<InputError>(o.keep >= 1, "--keep must be positive");
  htpy::detail::require<InputError>(o.grid_points >= 2, "--grid-points must be at least 2");
  for (double q : o.quantiles) htpy::detail::require<InputError>(q > 0.0 && q < 1.0, "--quantiles must lie in (0, 1)");
  const auto prep = prepare_model(o, read_dataset(o.data));
  const auto& spec = prep.spec;

  std::vector<ChainRun> runs(o.chains);
  std::vector<std::uint64_t> seeds(o.chains);
  std::vector<std::string> logs(o.chains);
  for (std::size_t c = 0; c < o.chains; ++c) {
    seeds[c] = mix_seed(o.common.seed, c);
    if (o.chain_log) logs[c] = output_path(o.common, "chain_" + std::to_string(c + 1) + ".htpylog");
  }
  parallel_for(o.chains, o.threads, [&](std::size_t c) {
    SamplerConfig cfg;
    cfg.burn_in = o.burn_in;
    cfg.keep = o.keep;
    cfg.thin = o.thin;
    cfg.seed = seeds[c];
    if (o.chain_log) {
      ChainLogWriter writer(logs[c], ChainLogHeader::from_spec(spec));
      runs[c] = run_chain(spec, prep.data, cfg, writer);
      writer.flush();
    } else {
      runs[c] = run_chain(spec, prep.data, cfg);
    }
  });

  std::vector<Snapshot> all;
  for (auto& r : runs) {
    for (auto& s : r.snapshots) all.push_back(std::move(s));
    r.snapshots.clear();
  }

  std::vector<std::vector<double>> grids;
  for (std::size_t k = 0; k < spec.dim; ++k) grids.push_back(summary_grid(spec, prep.data, k, o));
  const auto qsnaps = thin_snapshots(all, o.quantile_snapshots);

  json j = header_json("fit", o.common.seed);
  j["data"] = {{"file", fs::path(o.data).filename().string()}, {"n", prep.data.size()}, {"dim", prep.data.dim}};
  j["model"] = spec_json(spec);
  j["sampler"] = {{"burn_in", o.burn_in}, {"keep", o.keep}, {"thin", o.thin}, {"chains", o.chains}};
  json chains = json::array();
  for (std::size_t c = 0; c < o.chains; ++c) {
    const auto& r = runs[c];
    double mean_h = 0.0;
    for (auto h : r.components) mean_h += static_cast<double>(h);
    mean_h /= static_cast<double>(std::max<std::size_t>(1, r.components.size()));
    json cj{{"chain", c + 1},
            {"seed", seeds[c]},
            {"acceptance", moves_json(r.moves)},
            {"cap_hits", r.cap_hits},
            {"alpha0_guards", r.alpha0_guards},
            {"mean_components", mean_h}};
    if (o.chain_log) cj["log"] = fs::path(logs[c]).filename().string();
    chains.push_back(cj);
  }
  j["chains"] = chains;

  json draws{{"discount", json::array()}, {"lambda", json::array()}, {"alpha0", json::array()}};
  for (const auto& s : all) {
    draws["discount"].push_back(s.discount);
    draws["lambda"].push_back(s.lambda);
    draws["alpha0"].push_back(s.alpha0);
  }
  j["draws"] = draws;

  json summaries = json::array();
  bool tail_done = false;
  for (const auto& x : summary_points(spec, o)) {
    const auto ps = predictive_summaries(spec, all, grids, x, spec.dim == 2 ? o.joint_points : 0);
    json sj;
    if (spec.model_class == ModelClass::cond_scale) sj["x"] = x;
    json margins = json::array();
    for (std::size_t k = 0; k < spec.dim; ++k) {
      json qs = json::array();
      for (double q : o.quantiles) {
        qs.push_back({{"p", q}, {"value", predictive_quantile(spec, qsnaps, q, k, x)}});
      }
      margins.push_back({{"margin", k + 1},
                         {"grid", ps.margins[k].grid},
                         {"density", band_json(ps.margins[k].density)},
                         {"log_survival", band_json(ps.margins[k].log_survival)},
                         {"quantiles", qs}});
    }
    sj["margins"] = margins;
    if (!ps.joint.empty()) {
      const auto& js = ps.joint[0];
      sj["joint"] = {{"grid1", js.grid1}, {"grid2", js.grid2}, {"density_mean", js.density_mean}};
    }
    summaries.push_back(sj);
    if (!tail_done) {
      json tj = json::array();
      for (std::size_t k = 0; k < ps.tail_index_draws.size(); ++k) {
        auto d = ps.tail_index_draws[k];
        json t{{"margin", k + 1}, {"draws", d}};
        if (!d.empty()) {
          std::sort(d.begin(), d.end());
          t["mean"] = mean(d);
          t["q025"] = sorted_quantile(d, 0.025);
          t["q500"] = sorted_quantile(d, 0.5);
          t["q975"] = sorted_quantile(d, 0.975);
        }
        tj.push_back(t);
      }
      j["tail_index"] = tj;
      tail_done = true;
    }
  }
  j["summaries"] = summaries;
  write_json(output_path(o.common, o.output), j);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOpts {
  Common common;
  std::string data;
  std::vector<std::string> chain_logs;
  bool intercept = true;
  std::size_t max_snapshots = 500;
  std::string output = "residuals.csv";
  std::string summary = "residual_summary.json";
};

int cmd_diagnose(const DiagnoseOpts& o) {
  htpy::detail::require<InputError>(!o.chain_logs.empty(), "at least one --chain-log is required");
  std::vector<Snapshot> snaps;
  std::optional<ChainLogHeader> header;
  bool truncated = false;
  for (const auto& path : o.chain_logs) {
    auto log = read_chain_log(path);
    if (header) {
      htpy::detail::require<InputError>(log.header.model_class == header->model_class && log.header.dim == header->dim &&
                                      log.header.covariate_dim == header->covariate_dim,
                                  "chain log '" + path + "' does not match the first log's model");
    } else {
      header = log.header;
    }
    truncated = truncated || log.truncated;
    for (auto& s : log.snapshots) snaps.push_back(std::move(s));
  }
  htpy::detail::require<InputError>(!snaps.empty(), "chain logs hold no snapshots");
  MixtureModelSpec spec;
  spec.model_class = header->model_class;
  spec.dim = header->dim;
  spec.covariate_dim = header->covariate_dim;
  spec.shape_kernel = header->kernel;
  Dataset data = read_dataset(o.data);
  if (spec.model_class == ModelClass::cond_scale && o.intercept && data.covariate_dim + 1 == spec.covariate_dim) {
    data = with_intercept(data);
  }
  const auto res = randomized_quantile_residuals(spec, snaps, data, o.max_snapshots);

  CsvWriter w(output_path(o.common, o.output), kVersion, o.common.seed, {"index", "margin", "residual", "clamped"});
  for (std::size_t i = 0; i < res.residuals.size(); ++i) {
    w.row_strings({std::to_string(i / spec.dim + 1), std::to_string(i % spec.dim + 1),
                   format_double(res.residuals[i]), res.clamped_flags[i] ? "1" : "0"});
  }

  auto sorted = res.residuals;
  std::sort(sorted.begin(), sorted.end());
  const double d = ks_distance(res.residuals, normal_cdf);
  json qs = json::array();
  for (double p : {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99}) {
    qs.push_back({{"p", p}, {"empirical", sorted_quantile(sorted, p)}, {"normal", normal_quantile(p)}});
  }
  json j = header_json("diagnose", o.common.seed);
  j["n"] = data.size();
  j["dim"] = spec.dim;
  j["count"] = res.residuals.size();
  j["snapshots_used"] = std::min(o.max_snapshots == 0 ? snaps.size() : o.max_snapshots, snaps.size());
  j["chain_log_truncated"] = truncated;
  j["clamped"] = res.clamped;
  j["mean"] = mean(res.residuals);
  j["sd"] = std::sqrt(variance(res.residuals));
  j["ks_distance"] = d;
  j["ks_pvalue"] = ks_pvalue(d, res.residuals.size());
  j["quantiles"] = qs;
  write_json(output_path(o.common, o.summary), j);
  return 0;
}

// ---------------------------------------------------------------------------
// replicate-study

struct StudyOpts {
  Common common;
  std::string scenario = "uni_pareto";
  std::size_t replicates = 3;
  std::size_t n = 200;
  std::size_t burn_in = 1000;
  std::size_t keep = 1000;
  std::size_t thin = 1;
  std::size_t threads = 0;
  std::size_t grid_points = 50;
  std::vector<double> x_values{0.25, 0.5, 0.75};
  std::string output = "aggregate.csv";
};

struct ReplicateResult {
  json summary;
  /// One curve per (x, margin) or the flattened joint density.
  std::vector<std::vector<double>> curves;
};

int cmd_replicate_study(const StudyOpts& o) {
  htpy::detail::require<InputError>(o.replicates >= 1, "--replicates must be positive");
  htpy::detail::require<InputError>(o.grid_points >= 2, "--grid-points must be at least 2");
  const auto id = scenario_from_string(o.scenario);
  const auto params = scenario_params(id);
  const bool uni = id == ScenarioId::uni_pareto;
  const std::vector<double> xs = params.conditional ? o.x_values : std::vector<double>{0.0};
  htpy::detail::require<InputError>(!xs.empty(), "--x-values must not be empty");

  // Grids are fixed by the scenario so replicates can be averaged pointwise.
  std::vector<std::vector<double>> grids;
  if (uni) {
    grids.push_back(log_midpoint_grid(1.0, 1000.0, o.grid_points));
  } else {
    for (std::size_t k = 0; k < 2; ++k) {
      double lo = kInf;
      double hi = 0.0;
      for (double x : xs) {
        lo = std::min(lo, true_marginal_quantile(params, k, 0.0025, x));
        hi = std::max(hi, true_marginal_quantile(params, k, 0.9975, x));
      }
      grids.push_back(log_midpoint_grid(lo, hi, o.grid_points));
    }
  }

  std::vector<ReplicateResult> results(o.replicates);
  parallel_for(o.replicates, o.threads, [&](std::size_t r) {
    const std::uint64_t seed = mix_seed(o.common.seed, r);
    Rng rng(seed);
    const auto g = generate({id, o.n, seed}, rng);
    MixtureModelSpec spec;
    Dataset data = g.data;
    if (uni) {
      spec.model_class = ModelClass::uni_scale;
    } else {
      spec.dim = 2;
      spec.fixed_alpha0 = 2.0;
      spec.copula_theta = gumbel_theta_from_tau(kendall_tau(data.margin(0), data.margin(1)));
      if (params.conditional) {
        spec.model_class = ModelClass::cond_scale;
        data = with_intercept(data);
        spec.covariate_dim = data.covariate_dim;
      } else {
        spec.model_class = ModelClass::multi_scale;
      }
    }
    spec.validate();
    SamplerConfig cfg;
    cfg.burn_in = o.burn_in;
    cfg.keep = o.keep;
    cfg.thin = o.thin;
    cfg.seed = mix_seed(seed, 1);
    const auto run = run_chain(spec, data, cfg);
    const auto qsnaps = thin_snapshots(run.snapshots, 500);

    auto& out = results[r];
    json j = header_json("replicate-study", o.common.seed);
    j["scenario"] = o.scenario;
    j["replicate"] = r + 1;
    j["replicate_seed"] = seed;
    j["n"] = o.n;
    j["burn_in"] = o.burn_in;
    j["keep"] = o.keep;
    if (!uni) j["copula_theta"] = spec.copula_theta;
    j["cap_hits"] = run.cap_hits;
    json quantiles = json::array();
    for (double x : xs) {
      std::vector<double> xv;
      if (params.conditional) xv = {1.0, x};
      const auto ps = predictive_summaries(spec, run.snapshots, grids, xv, spec.model_class == ModelClass::multi_scale
                                                                              ? o.grid_points
                                                                              : 0);
      for (std::size_t k = 0; k < spec.dim; ++k) {
        for (double p : {0.95, 0.99}) {
          json q{{"margin", k + 1},
                 {"p", p},
                 {"value", predictive_quantile(spec, qsnaps, p, k, xv)},
                 {"truth", true_marginal_quantile(params, k, p, x)}};
          if (params.conditional) q["x"] = x;
          quantiles.push_back(q);
        }
      }
      if (uni) {
        out.curves.push_back(ps.margins[0].log_survival.mean);
        auto d = ps.tail_index_draws[0];
        j["tail_index_mean"] = d.empty() ? json(nullptr) : json(mean(d));
      } else if (spec.model_class == ModelClass::multi_scale) {
        const auto& js = ps.joint[0];
        out.curves.push_back(js.density_mean);
        j["joint_iae"] = joint_iae(params, js.grid1, js.grid2, js.density_mean);
      } else {
        for (std::size_t k = 0; k < 2; ++k) out.curves.push_back(ps.margins[k].density.mean);
      }
    }
    j["quantiles"] = quantiles;
    out.summary = std::move(j);
  });

  for (std::size_t r = 0; r < o.replicates; ++r) {
    write_json(output_path(o.common, "replicate_" + std::to_string(r + 1) + ".json"), results[r].summary);
  }

  auto mc = [&](std::size_t curve, std::size_t i) {
    std::vector<double> v;
    for (const auto& res : results) v.push_back(res.curves[curve][i]);
    return std::pair{mean(v), v.size() > 1 ? std::sqrt(variance(v)) : 0.0};
  };
  const std::string path = output_path(o.common, o.output);
  if (uni) {
    CsvWriter w(path, kVersion, o.common.seed, {"y", "true_log_survival", "mc_mean_log_survival", "mc_sd"});
    for (std::size_t i = 0; i < grids[0].size(); ++i) {
      const auto [m, sd] = mc(0, i);
      w.row({grids[0][i], -std::log(grids[0][i]), m, sd});
    }
  } else if (!params.conditional) {
    CsvWriter w(path, kVersion, o.common.seed, {"y1", "y2", "true_density", "mc_mean_density", "mc_sd"});
    for (std::size_t a = 0; a < grids[0].size(); ++a) {
      for (std::size_t b = 0; b < grids[1].size(); ++b) {
        const double y[2] = {grids[0][a], grids[1][b]};
        const auto [m, sd] = mc(0, a * grids[1].size() + b);
        w.row({y[0], y[1], true_density(params, y), m, sd});
      }
    }
  } else {
    CsvWriter w(path, kVersion, o.common.seed, {"x", "margin", "y", "true_density", "mc_mean_density", "mc_sd"});
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
      for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < grids[k].size(); ++i) {
          const auto [m, sd] = mc(xi * 2 + k, i);
          w.row({xs[xi], static_cast<double>(k + 1), grids[k][i], params.margins[k].pdf(grids[k][i], xs[xi]), m, sd});
        }
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// Splices config entries in as flags right after the subcommand name.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  std::size_t sub_pos = 0;
  while (sub_pos < args.size() && !args[sub_pos].empty() && args[sub_pos][0] == '-') ++sub_pos;
  if (sub_pos >= args.size()) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[sub_pos]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string config;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  const std::vector<std::string> user(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  const auto given = given_flags(user);
  std::vector<std::string> injected;
  for (const auto& e : read_config(config)) {
    const auto* opt = sub->get_option_no_throw("--" + e.key);
    if (opt == nullptr || e.key == "config" || e.key == "help") {
      throw InputError(config + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' for " +
                       sub->get_name());
    }
    if (given.count(e.key) != 0) continue;
    if (e.tokens.size() == 1) {
      injected.push_back("--" + e.key + "=" + e.tokens[0]);
    } else {
      injected.push_back("--" + e.key);
      injected.insert(injected.end(), e.tokens.begin(), e.tokens.end());
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), user.begin(), user.end());
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Heavy-tailed Pitman-Yor mixtures: measures, envelopes, fitting and diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  MeasureOpts measure;
  auto* c_measure = app.add_subcommand("simulate-measure", "Random tail trajectories of SP or DP measures");
  add_common(c_measure, measure.common);
  add_grid_options(c_measure, measure);
  c_measure->add_option("--paths", measure.paths, "Number of trajectories")->capture_default_str();
  c_measure->add_option("--output", measure.output)->capture_default_str();

  MeasureOpts env;
  auto* c_env = app.add_subcommand("envelopes", "Asymptotic envelope curves in log-survival coordinates");
  add_common(c_env, env.common);
  add_grid_options(c_env, env);

  GenOpts gen;
  auto* c_gen = app.add_subcommand("gen-data", "Simulate a scenario data set with a JSON truth sidecar");
  add_common(c_gen, gen.common);
  c_gen->add_option("--scenario", gen.scenario, "uni_pareto, biv1-3, cond1-3")->capture_default_str();
  c_gen->add_option("--n", gen.n, "Sample size")->capture_default_str();
  c_gen->add_option("--output", gen.output)->capture_default_str();

  FitOpts fit;
  auto* c_fit = app.add_subcommand("fit", "Fit a mixture model by slice sampling");
  add_common(c_fit, fit.common);
  c_fit->add_option("--data", fit.data, "Data CSV (columns y1[, y2][, x])")->required();
  add_model_options(c_fit, fit);
  c_fit->add_option("--chains", fit.chains)->capture_default_str();
  c_fit->add_option("--grid-min", fit.grid_min, "Summary grid lower end (default half the sample minimum)");
  c_fit->add_option("--grid-max", fit.grid_max, "Summary grid upper end (default twice the sample maximum)");
  c_fit->add_option("--joint-points", fit.joint_points, "Joint density grid per axis (bivariate)")
      ->capture_default_str();
  c_fit->add_option("--quantiles", fit.quantiles, "Predictive quantile levels")->capture_default_str();
  c_fit->add_option("--quantile-snapshots", fit.quantile_snapshots, "Snapshots used for quantiles (0: all)")
      ->capture_default_str();
  c_fit->add_flag("--chain-log", fit.chain_log, "Write chain_<c>.htpylog per chain");
  c_fit->add_option("--output", fit.output)->capture_default_str();

  DiagnoseOpts diag;
  auto* c_diag = app.add_subcommand("diagnose", "Quantile residuals of a fitted model");
  add_common(c_diag, diag.common);
  c_diag->add_option("--data", diag.data, "Data CSV used in the fit")->required();
  c_diag->add_option("--chain-log", diag.chain_logs, "Chain log(s) written by fit --chain-log")->required();
  c_diag->add_flag("--intercept,!--no-intercept", diag.intercept, "Prepend a unit covariate (cond_scale)")
      ->capture_default_str();
  c_diag->add_option("--max-snapshots", diag.max_snapshots, "Snapshots used (0: all)")->capture_default_str();
  c_diag->add_option("--output", diag.output)->capture_default_str();
  c_diag->add_option("--summary", diag.summary)->capture_default_str();

  StudyOpts study;
  auto* c_study = app.add_subcommand("replicate-study", "Replicated simulation study for one scenario");
  add_common(c_study, study.common);
  c_study->add_option("--scenario", study.scenario)->capture_default_str();
  c_study->add_option("--replicates", study.replicates)->capture_default_str();
  c_study->add_option("--n", study.n)->capture_default_str();
  c_study->add_option("--burn-in", study.burn_in)->capture_default_str();
  c_study->add_option("--keep", study.keep)->capture_default_str();
  c_study->add_option("--thin", study.thin)->capture_default_str();
  c_study->add_option("--threads", study.threads, "Worker threads (0: one per replicate)")->capture_default_str();
  c_study->add_option("--grid-points", study.grid_points)->capture_default_str();
  c_study->add_option("--x-values", study.x_values)->capture_default_str();
  c_study->add_option("--output", study.output)->capture_default_str();

  try {
    const std::vector<std::string> args = expand_config(app, std::vector<std::string>(argv + 1, argv + argc));
    std::vector<std::string> full{argv[0]};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> ptrs;
    for (auto& a : full) ptrs.push_back(a.data());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (c_measure->parsed()) return cmd_simulate_measure(measure);
  if (c_env->parsed()) return cmd_envelopes(env);
  if (c_gen->parsed()) return cmd_gen_data(gen);
  if (c_fit->parsed()) return cmd_fit(fit);
  if (c_diag->parsed()) return cmd_diagnose(diag);
  if (c_study->parsed()) return cmd_replicate_study(study);
  return 2;
}

}  // namespace
}  // namespace htpy::cli

int main(int argc, char** argv) {
  try {
    return htpy::cli::run(argc, argv);
  } catch (const htpy::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const htpy::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
