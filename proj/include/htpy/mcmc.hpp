#pragma once

// Slice-efficient Gibbs sampler for the mixture classes in models.hpp.
//
// One sweep updates, in order: slice variables, allocations, sticks, label
// swaps, atoms, alpha0, discount, lambda and (conditional class)
// coefficients. Under adaptive truncation the slice step trims components
// beyond the largest allocation and instantiates new ones from the prior
// until the leftover stick mass falls below the smallest slice.
//
// The stick update draws from p(V | z), i.e. with the slices integrated out.
// Slices are redrawn at the start of the next sweep and nothing in between
// conditions on them, so u_i < pi_{z_i} is guaranteed only from the slice
// step through the allocation step.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "data.hpp"
#include "dists.hpp"
#include "error.hpp"
#include "models.hpp"
#include "numeric.hpp"
#include "random.hpp"

namespace htpy {

struct SamplerConfig {
  std::size_t burn_in = 5000;
  std::size_t keep = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  /// Robbins-Monro step-size tuning during burn-in.
  bool adapt = true;
  double target_acceptance = 0.3;
  double initial_log_step = std::log(0.5);

  void validate() const {
    detail::require<InputError>(thin >= 1, "thin must be at least 1");
    detail::require<InputError>(target_acceptance > 0.0 && target_acceptance < 1.0,
                                "target acceptance must lie in (0, 1)");
  }
};

struct ChainState {
  std::vector<std::size_t> allocation;
  std::vector<double> slice;
  /// V_h for the unconditional classes, shared uniforms U_h for cond_scale.
  std::vector<double> sticks;
  /// H x dim row-major.
  std::vector<double> atoms;
  /// H x p row-major (cond_scale only).
  std::vector<double> coefficients;
  std::vector<double> alpha0;
  double discount = 0.5;
  double lambda = 1.0;

  [[nodiscard]] std::size_t components() const noexcept { return sticks.size(); }
};

struct MoveStats {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double log_step = 0.0;

  [[nodiscard]] double rate() const noexcept {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

struct Snapshot {
  std::size_t iteration = 0;
  double discount = 0.0;
  double lambda = 1.0;
  std::vector<double> alpha0;
  FiniteMixture mixture;
};

class SliceSampler {
 public:
  SliceSampler(MixtureModelSpec spec, Dataset data, SamplerConfig config = {})
      : spec_(std::move(spec)), data_(std::move(data)), config_(config), rng_(config.seed) {
    spec_.validate();
    config_.validate();
    data_.validate_for(spec_);
    moves_["atom"].log_step = config_.initial_log_step;
    if (spec_.discount_sampled()) moves_["discount"].log_step = config_.initial_log_step;
    if (spec_.alpha0_sampled() && spec_.has_copula()) moves_["alpha0"].log_step = config_.initial_log_step;
    if (spec_.model_class == ModelClass::cond_scale) {
      moves_["stick"].log_step = config_.initial_log_step;
      moves_["coefficient"].log_step = config_.initial_log_step;
    }
    refresh_log_y();
    initialize();
  }

  [[nodiscard]] const MixtureModelSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const Dataset& data() const noexcept { return data_; }
  [[nodiscard]] const ChainState& state() const noexcept { return state_; }
  [[nodiscard]] Rng& rng() noexcept { return rng_; }
  [[nodiscard]] const std::map<std::string, MoveStats>& moves() const noexcept { return moves_; }
  [[nodiscard]] std::size_t cap_hits() const noexcept { return cap_hits_; }
  [[nodiscard]] std::size_t alpha0_guards() const noexcept { return alpha0_guards_; }
  [[nodiscard]] bool fixed_truncation() const noexcept { return spec_.truncation > 0; }

  /// Scale classes start from moment-matched groups of the data ordered by
  /// sum_k log y_ik, with lambda set so that the group kernels match the
  /// group spread. The shape class starts with every observation in one
  /// component.
  void initialize() {
    const std::size_t n = data_.size();
    state_ = {};
    state_.discount = spec_.fixed_discount.value_or(spec_.discount_prior_a /
                                                    (spec_.discount_prior_a + spec_.discount_prior_b));
    if (spec_.model_class == ModelClass::cond_scale) state_.discount = 0.0;
    state_.lambda = is_scale_class(spec_.model_class) ? spec_.lambda_prior_shape / spec_.lambda_prior_rate : 1.0;
    if (is_scale_class(spec_.model_class)) {
      state_.alpha0.assign(spec_.dim, spec_.fixed_alpha0.value_or(spec_.initial_alpha0));
    }
    std::size_t groups = is_scale_class(spec_.model_class) ? std::min(kInitialGroups, n) : 1;
    if (fixed_truncation()) groups = std::min(groups, spec_.truncation);
    const std::size_t h0 = fixed_truncation() ? spec_.truncation : groups;
    for (std::size_t h = 0; h < h0; ++h) push_component_from_prior();
    state_.allocation.assign(n, 0);
    state_.slice.assign(n, 0.0);
    if (groups > 1) moment_start(groups);
    refresh_weights();
    tally();
  }

  /// Replace the full state (used by the prior simulator).
  void set_state(ChainState s) {
    detail::require<InputError>(s.allocation.size() == data_.size(), "state allocation length mismatch");
    detail::require<InputError>(s.atoms.size() == s.sticks.size() * spec_.dim, "state atoms mismatch");
    state_ = std::move(s);
    refresh_weights();
    tally();
  }

  /// Replace the responses, keeping covariates and state.
  void set_responses(std::vector<double> y) {
    detail::require<InputError>(y.size() == data_.y.size(), "response length mismatch");
    data_.y = std::move(y);
    data_.validate_for(spec_);
    refresh_log_y();
    tally();
  }

  // -------------------------------------------------------------------------
  // Slices

  void update_slices() {
    const std::size_t n = data_.size();
    if (!fixed_truncation()) {
      const std::size_t keep = *std::max_element(state_.allocation.begin(), state_.allocation.end()) + 1;
      truncate_components(keep);
    }
    for (std::size_t i = 0; i < n; ++i) {
      state_.slice[i] = rng_.uniform() * weight(i, state_.allocation[i]);
    }
    if (fixed_truncation()) return;
    if (spec_.model_class != ModelClass::cond_scale) {
      const double u_min = *std::min_element(state_.slice.begin(), state_.slice.end());
      while (residual_ > u_min) {
        if (state_.components() >= spec_.max_components) {
          ++cap_hits_;
          break;
        }
        push_component_from_prior();
        append_weight();
      }
    } else {
      auto unmet = [&] {
        for (std::size_t i = 0; i < n; ++i) {
          if (residual_cond_[i] > state_.slice[i]) return true;
        }
        return false;
      };
      while (unmet()) {
        if (state_.components() >= spec_.max_components) {
          ++cap_hits_;
          break;
        }
        push_component_from_prior();
        append_weight();
      }
    }
  }

  // -------------------------------------------------------------------------
  // Allocations

  void update_allocations() {
    const std::size_t n = data_.size();
    const std::size_t h_count = state_.components();
    prepare_kernels();
    std::vector<std::size_t> order(h_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool cond = spec_.model_class == ModelClass::cond_scale;
    if (!cond) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pi_[a] > pi_[b]; });
    }
    std::vector<std::size_t> eligible;
    std::vector<double> lp;
    for (std::size_t i = 0; i < n; ++i) {
      eligible.clear();
      lp.clear();
      const double u = state_.slice[i];
      for (std::size_t h : order) {
        if (weight(i, h) > u) {
          eligible.push_back(h);
          lp.push_back(kernel_log_pdf(i, h));
        } else if (!cond) {
          break;
        }
      }
      if (eligible.empty()) {
        throw InvariantError("observation " + std::to_string(i) + " has no component above its slice");
      }
      const double m = *std::max_element(lp.begin(), lp.end());
      if (!std::isfinite(m)) {
        state_.allocation[i] = eligible[static_cast<std::size_t>(rng_.uniform() * static_cast<double>(eligible.size()))];
        continue;
      }
      double total = 0.0;
      for (double& v : lp) {
        v = std::exp(v - m);
        total += v;
      }
      state_.allocation[i] = eligible[rng_.categorical(lp, total)];
    }
    tally();
  }

  // -------------------------------------------------------------------------
  // Sticks

  void update_sticks() {
    const std::size_t h_count = state_.components();
    const std::size_t last = fixed_truncation() ? h_count - 1 : h_count;
    if (spec_.model_class != ModelClass::cond_scale) {
      const double d = state_.discount;
      for (std::size_t h = 0; h < last; ++h) {
        const double a = 1.0 - d + static_cast<double>(count_[h]);
        const double b = spec_.precision + static_cast<double>(h + 1) * d + static_cast<double>(beyond_[h]);
        state_.sticks[h] = clamp_stick(rng_.beta(a, b));
      }
      if (fixed_truncation()) state_.sticks[h_count - 1] = 1.0;
    } else {
      for (std::size_t h = 0; h < last; ++h) {
        if (count_[h] + beyond_[h] == 0) {
          state_.sticks[h] = rng_.uniform();
          continue;
        }
        auto& mv = moves_["stick"];
        const auto disc = member_discounts(h, coef_row(h));
        auto target = [&](double logit_u) {
          const double u = logistic(logit_u);
          if (!(u > 0.0 && u < 1.0)) return -kInf;
          return stick_log_lik(h, u, disc) + std::log(u) + std::log1p(-u);
        };
        const double cur = logit(state_.sticks[h]);
        const double prop = cur + std::exp(mv.log_step) * rng_.normal();
        if (metropolis(target(prop) - target(cur), mv)) state_.sticks[h] = logistic(prop);
      }
    }
    refresh_weights();
  }

  // -------------------------------------------------------------------------
  // Label swaps: exchange atoms and allocations of adjacent components with
  // the weights held fixed.

  void update_labels() {
    const std::size_t h_count = state_.components();
    if (h_count < 2) return;
    auto& mv = moves_["label_swap"];
    const std::size_t d = spec_.dim;
    bool changed = false;
    for (std::size_t j = 0; j + 1 < h_count; ++j) {
      if (count_[j] == 0 && count_[j + 1] == 0) continue;
      double log_ratio = 0.0;
      for (std::size_t i : members_[j]) log_ratio += std::log(weight(i, j + 1)) - std::log(weight(i, j));
      for (std::size_t i : members_[j + 1]) log_ratio += std::log(weight(i, j)) - std::log(weight(i, j + 1));
      if (!metropolis(log_ratio, mv)) continue;
      for (std::size_t i : members_[j]) state_.allocation[i] = j + 1;
      for (std::size_t i : members_[j + 1]) state_.allocation[i] = j;
      std::swap(members_[j], members_[j + 1]);
      std::swap(count_[j], count_[j + 1]);
      std::swap_ranges(state_.atoms.begin() + static_cast<std::ptrdiff_t>(j * d),
                       state_.atoms.begin() + static_cast<std::ptrdiff_t>((j + 1) * d),
                       state_.atoms.begin() + static_cast<std::ptrdiff_t>((j + 1) * d));
      changed = true;
    }
    if (changed) tally();
  }

  // -------------------------------------------------------------------------
  // Atoms

  void update_atoms() {
    const std::size_t h_count = state_.components();
    const std::size_t d = spec_.dim;
    if (spec_.model_class == ModelClass::uni_shape) {
      auto& mv = moves_["atom"];
      for (std::size_t h = 0; h < h_count; ++h) {
        if (count_[h] == 0) {
          state_.atoms[h] = spec_.shape_centering.sample(rng_);
          continue;
        }
        auto target = [&](double log_alpha) {
          const double alpha = std::exp(log_alpha);
          double lp = spec_.shape_centering.log_pdf(alpha) + log_alpha;
          if (!std::isfinite(lp)) return -kInf;
          const auto kern = spec_.shape_kernel.with_tail_index(alpha);
          for (std::size_t i : members_[h]) lp += kern.log_pdf(data_.y[i]);
          return lp;
        };
        const double cur = std::log(state_.atoms[h]);
        const double prop = cur + std::exp(mv.log_step) * rng_.normal();
        if (metropolis(target(prop) - target(cur), mv)) state_.atoms[h] = std::exp(prop);
        const double fresh = spec_.shape_centering.sample(rng_);
        const double log_ratio = (target(std::log(fresh)) - spec_.shape_centering.log_pdf(fresh) - std::log(fresh)) -
                                 (target(std::log(state_.atoms[h])) - spec_.shape_centering.log_pdf(state_.atoms[h]) -
                                  std::log(state_.atoms[h]));
        if (metropolis(log_ratio, moves_["atom_independence"])) state_.atoms[h] = fresh;
      }
      return;
    }
    auto& mv = moves_["atom"];
    std::vector<double> atom(d);
    for (std::size_t h = 0; h < h_count; ++h) {
      if (count_[h] == 0) {
        draw_centering(std::span(state_.atoms).subspan(h * d, d));
        continue;
      }
      std::copy_n(state_.atoms.begin() + static_cast<std::ptrdiff_t>(h * d), d, atom.begin());
      for (std::size_t k = 0; k < d; ++k) {
        auto target = [&](double log_sigma) {
          atom[k] = std::exp(log_sigma);
          return erlang_suff_log_lik(h, k, atom[k]) + centering_log_pdf(atom) + log_sigma;
        };
        const double cur = std::log(atom[k]);
        const double prop = cur + std::exp(mv.log_step) * rng_.normal();
        const double lp_prop = target(prop);
        const double lp_cur = target(cur);
        if (metropolis(lp_prop - lp_cur, mv)) {
          atom[k] = std::exp(prop);
        } else {
          atom[k] = std::exp(cur);
        }
      }
      // Independence proposal from the centering; acceptance is the likelihood ratio.
      std::vector<double> fresh(d);
      draw_centering(fresh);
      double log_ratio = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        log_ratio += erlang_suff_log_lik(h, k, fresh[k]) - erlang_suff_log_lik(h, k, atom[k]);
      }
      if (metropolis(log_ratio, moves_["atom_independence"])) atom = fresh;
      std::copy(atom.begin(), atom.end(), state_.atoms.begin() + static_cast<std::ptrdiff_t>(h * d));
    }
  }

  // -------------------------------------------------------------------------
  // alpha0

  void update_alpha0() {
    if (!spec_.alpha0_sampled()) return;
    const std::size_t h_count = state_.components();
    const std::size_t d = spec_.dim;
    for (std::size_t k = 0; k < d; ++k) {
      const double beta = spec_.centering_margin(k, 1.0).scale;
      double t = 0.0;
      for (std::size_t h = 0; h < h_count; ++h) t += std::log1p(state_.atoms[h * d + k] / beta);
      const double shape = (spec_.alpha0_prior.jeffreys ? 0.0 : spec_.alpha0_prior.shape) + static_cast<double>(h_count);
      const double rate = (spec_.alpha0_prior.jeffreys ? 0.0 : spec_.alpha0_prior.rate) + t;
      // Degenerate rate (all atoms at zero): fall back to a Gamma(1, 1) draw.
      if (!(rate > 0.0) || !std::isfinite(rate)) {
        ++alpha0_guards_;
        state_.alpha0[k] = rng_.gamma(1.0);
        continue;
      }
      if (!spec_.has_copula()) {
        const double draw = rng_.gamma(shape) / rate;
        if (draw > 0.0 && std::isfinite(draw)) {
          state_.alpha0[k] = draw;
        } else {
          ++alpha0_guards_;
          state_.alpha0[k] = rng_.gamma(1.0);
        }
        continue;
      }
      // With a copula the Gamma kernel is only part of the conditional:
      // random walk on log alpha0 against the full target.
      auto& mv = moves_["alpha0"];
      const double current = state_.alpha0[k];
      auto target = [&](double log_a) {
        state_.alpha0[k] = std::exp(log_a);
        return shape * log_a - rate * state_.alpha0[k] + copula_log_lik();
      };
      const double cur = std::log(current);
      const double prop = cur + std::exp(mv.log_step) * rng_.normal();
      const double lp_prop = target(prop);
      const double lp_cur = target(cur);
      state_.alpha0[k] = metropolis(lp_prop - lp_cur, mv) ? std::exp(prop) : current;
    }
  }

  // -------------------------------------------------------------------------
  // Discount

  void update_discount() {
    if (!spec_.discount_sampled()) return;
    const std::size_t k_count = fixed_truncation() ? state_.components() - 1 : max_allocation() + 1;
    auto& mv = moves_["discount"];
    auto target = [&](double z) {
      const double dd = logistic(z);
      if (!(dd > 0.0 && dd < 1.0)) return -kInf;
      double lp = (spec_.discount_prior_a - 1.0) * std::log(dd) + (spec_.discount_prior_b - 1.0) * std::log1p(-dd) +
                  std::log(dd) + std::log1p(-dd);
      for (std::size_t h = 0; h < k_count; ++h) {
        const double a = 1.0 - dd;
        const double b = spec_.precision + static_cast<double>(h + 1) * dd;
        if (!(b > 0.0)) return -kInf;
        const double v = state_.sticks[h];
        lp += (a - 1.0) * std::log(v) + (b - 1.0) * std::log1p(-v) - std::lgamma(a) - std::lgamma(b) +
              std::lgamma(a + b);
      }
      return lp;
    };
    const double cur = logit(state_.discount);
    const double prop = cur + std::exp(mv.log_step) * rng_.normal();
    if (metropolis(target(prop) - target(cur), mv)) state_.discount = logistic(prop);
  }

  // -------------------------------------------------------------------------
  // lambda: conjugate Gamma draw given atoms and allocations.

  void update_lambda() {
    if (!is_scale_class(spec_.model_class)) return;
    const std::size_t d = spec_.dim;
    double shape = spec_.lambda_prior_shape;
    double rate = spec_.lambda_prior_rate;
    for (std::size_t h = 0; h < state_.components(); ++h) {
      if (count_[h] == 0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double s = state_.atoms[h * d + k];
        shape += static_cast<double>(count_[h]) * std::ceil(s);
        rate += sum_y_[h * d + k] / s;
      }
    }
    state_.lambda = rng_.gamma(shape) / rate;
  }

  // -------------------------------------------------------------------------
  // Coefficients (cond_scale)

  void update_coefficients() {
    if (spec_.model_class != ModelClass::cond_scale) return;
    const std::size_t p = spec_.covariate_dim;
    const std::size_t h_count = state_.components();
    const std::size_t last = fixed_truncation() ? h_count - 1 : h_count;
    const double sd = std::sqrt(spec_.coefficient_prior_variance);
    auto& mv = moves_["coefficient"];
    std::vector<double> row(p);
    for (std::size_t h = 0; h < h_count; ++h) {
      auto dest = state_.coefficients.begin() + static_cast<std::ptrdiff_t>(h * p);
      if (h >= last || count_[h] + beyond_[h] == 0) {
        for (std::size_t j = 0; j < p; ++j) dest[static_cast<std::ptrdiff_t>(j)] = sd * rng_.normal();
        continue;
      }
      std::copy_n(dest, p, row.begin());
      const double u = state_.sticks[h];
      auto target = [&] {
        double lp = 0.0;
        for (double b : row) lp -= 0.5 * b * b / spec_.coefficient_prior_variance;
        return lp + stick_log_lik(h, u, member_discounts(h, row));
      };
      double lp_cur = target();
      for (std::size_t j = 0; j < p; ++j) {
        const double old = row[j];
        row[j] = old + std::exp(mv.log_step) * rng_.normal();
        const double lp_prop = target();
        if (metropolis(lp_prop - lp_cur, mv)) {
          lp_cur = lp_prop;
        } else {
          row[j] = old;
        }
      }
      std::copy(row.begin(), row.end(), dest);
    }
    refresh_weights();
  }

  // -------------------------------------------------------------------------

  /// One full sweep. `adapting` enables step-size tuning.
  void sweep(bool adapting = false) {
    adapting_ = adapting && config_.adapt;
    update_slices();
    update_allocations();
    update_sticks();
    update_labels();
    update_atoms();
    update_alpha0();
    update_discount();
    update_lambda();
    update_coefficients();
  }

  /// Current state as a finite mixture.
  [[nodiscard]] FiniteMixture mixture() const {
    FiniteMixture fm;
    fm.dim = spec_.dim;
    fm.atoms = state_.atoms;
    fm.lambda = state_.lambda;
    fm.fixed_truncation = fixed_truncation();
    if (spec_.model_class == ModelClass::cond_scale) {
      fm.covariate_dim = spec_.covariate_dim;
      fm.uniforms = state_.sticks;
      fm.coefficients = state_.coefficients;
    } else {
      fm.weights = pi_;
    }
    return fm;
  }

  [[nodiscard]] Snapshot snapshot(std::size_t iteration) const {
    return {iteration, state_.discount, state_.lambda, state_.alpha0, mixture()};
  }

  /// pi_h at observation i.
  [[nodiscard]] double weight(std::size_t i, std::size_t h) const {
    if (spec_.model_class == ModelClass::cond_scale) return pi_cond_[i * state_.components() + h];
    return pi_[h];
  }

  [[nodiscard]] std::size_t max_allocation() const {
    return *std::max_element(state_.allocation.begin(), state_.allocation.end());
  }

 private:
  struct KernelCache {
    double shape;
    double inv_scale;
    double constant;
  };

  static constexpr std::size_t kInitialGroups = 10;

  void moment_start(std::size_t groups) {
    const std::size_t n = data_.size();
    const std::size_t d = spec_.dim;
    std::vector<double> key(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) key[i] += log_y_[i * d + k];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    for (std::size_t r = 0; r < n; ++r) state_.allocation[order[r]] = r * groups / n;
    std::vector<double> m(groups * d, 0.0);
    std::vector<double> m2(groups * d, 0.0);
    std::vector<double> cnt(groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = state_.allocation[i];
      cnt[g] += 1.0;
      for (std::size_t k = 0; k < d; ++k) {
        m[g * d + k] += data_.y[i * d + k];
        m2[g * d + k] += data_.y[i * d + k] * data_.y[i * d + k];
      }
    }
    double log_lambda = 0.0;
    for (std::size_t j = 0; j < groups * d; ++j) {
      const double c = cnt[j / d];
      m[j] /= c;
      const double v = m2[j] / c - m[j] * m[j];
      const double shape = v > 0.0 ? std::clamp(m[j] * m[j] / v, 1.0, 1e4) : 1e4;
      log_lambda += std::log(shape * shape / m[j]);
    }
    state_.lambda = std::exp(log_lambda / static_cast<double>(groups * d));
    // ceil(sigma) sigma = mean * lambda
    for (std::size_t j = 0; j < groups * d; ++j) {
      const double t = m[j] * state_.lambda;
      const double a = std::max(1.0, std::ceil(std::sqrt(t)));
      state_.atoms[j] = std::clamp(t / a, a - 1.0 + 1e-9, a);
    }
  }

  static double clamp_stick(double v) { return std::clamp(v, 1e-300, std::nextafter(1.0, 0.0)); }

  bool metropolis(double log_ratio, MoveStats& mv) {
    ++mv.proposed;
    const bool accept = !std::isnan(log_ratio) && (log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio);
    if (accept) ++mv.accepted;
    if (adapting_) {
      ++adapt_count_[&mv];
      const double gain = 1.0 / std::pow(static_cast<double>(adapt_count_[&mv]), 0.6);
      mv.log_step = std::clamp(mv.log_step + gain * ((accept ? 1.0 : 0.0) - config_.target_acceptance), -12.0, 4.0);
    }
    return accept;
  }

  std::span<const double> coef_row(std::size_t h) const {
    return std::span(state_.coefficients).subspan(h * spec_.covariate_dim, spec_.covariate_dim);
  }

  void refresh_log_y() {
    log_y_.resize(data_.y.size());
    for (std::size_t i = 0; i < data_.y.size(); ++i) log_y_[i] = std::log(data_.y[i]);
  }

  void draw_centering(std::span<double> out) {
    if (spec_.has_copula()) {
      const std::array<ParetoII, 2> margins{spec_.centering_margin(0, state_.alpha0[0]),
                                            spec_.centering_margin(1, state_.alpha0[1])};
      const auto s = copula_centering_sample(GumbelCopula(spec_.copula_theta), margins, rng_);
      out[0] = s[0];
      out[1] = s[1];
      return;
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = spec_.centering_margin(k, state_.alpha0[k]).sample(rng_);
  }

  double centering_log_pdf(std::span<const double> atom) const {
    double lp = 0.0;
    for (std::size_t k = 0; k < atom.size(); ++k) lp += spec_.centering_margin(k, state_.alpha0[k]).log_pdf(atom[k]);
    if (spec_.has_copula()) lp += copula_term(atom);
    return lp;
  }

  double copula_term(std::span<const double> atom) const {
    const double x = -log1m_exp(spec_.centering_margin(0, state_.alpha0[0]).log_survival(atom[0]));
    const double y = -log1m_exp(spec_.centering_margin(1, state_.alpha0[1]).log_survival(atom[1]));
    return GumbelCopula(spec_.copula_theta).log_density_neglog(x, y);
  }

  double copula_log_lik() const {
    double lp = 0.0;
    for (std::size_t h = 0; h < state_.components(); ++h) lp += copula_term(std::span(state_.atoms).subspan(h * 2, 2));
    return lp;
  }

  void push_component_from_prior() {
    const std::size_t h = state_.components();
    if (spec_.model_class == ModelClass::cond_scale) {
      state_.sticks.push_back(rng_.uniform());
      const double sd = std::sqrt(spec_.coefficient_prior_variance);
      for (std::size_t j = 0; j < spec_.covariate_dim; ++j) state_.coefficients.push_back(sd * rng_.normal());
    } else {
      const double d = state_.discount;
      state_.sticks.push_back(clamp_stick(rng_.beta(1.0 - d, spec_.precision + static_cast<double>(h + 1) * d)));
    }
    if (fixed_truncation() && h + 1 == spec_.truncation) state_.sticks.back() = 1.0;
    if (spec_.model_class == ModelClass::uni_shape) {
      state_.atoms.push_back(spec_.shape_centering.sample(rng_));
    } else {
      state_.atoms.resize(state_.atoms.size() + spec_.dim);
      draw_centering(std::span(state_.atoms).subspan(h * spec_.dim, spec_.dim));
    }
  }

  void truncate_components(std::size_t keep) {
    if (keep >= state_.components()) return;
    state_.sticks.resize(keep);
    state_.atoms.resize(keep * spec_.dim);
    if (spec_.model_class == ModelClass::cond_scale) state_.coefficients.resize(keep * spec_.covariate_dim);
    refresh_weights();
  }

  double stick_value(std::size_t h, double discount_h, double u) const {
    if (fixed_truncation() && h + 1 == spec_.truncation) return 1.0;
    return dependent_stick(u, discount_h, h + 1);
  }

  void refresh_weights() {
    const std::size_t h_count = state_.components();
    if (spec_.model_class != ModelClass::cond_scale) {
      pi_.clear();
      residual_ = 1.0;
      for (std::size_t h = 0; h < h_count; ++h) append_weight_at(h);
      return;
    }
    const std::size_t n = data_.size();
    pi_cond_.assign(n * h_count, 0.0);
    residual_cond_.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double rem = 1.0;
      for (std::size_t h = 0; h < h_count; ++h) {
        const double v = stick_value(h, dependent_discount(coef_row(h), data_.covariates(i)), state_.sticks[h]);
        pi_cond_[i * h_count + h] = v * rem;
        rem *= 1.0 - v;
      }
      residual_cond_[i] = rem;
    }
  }

  void append_weight_at(std::size_t h) {
    const double v = state_.sticks[h];
    pi_.push_back(v * residual_);
    residual_ *= 1.0 - v;
  }

  void append_weight() {
    const std::size_t h = state_.components() - 1;
    if (spec_.model_class != ModelClass::cond_scale) {
      append_weight_at(h);
      return;
    }
    // Re-lay the n x H matrix with one more column.
    const std::size_t n = data_.size();
    std::vector<double> next(n * (h + 1));
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(pi_cond_.begin() + static_cast<std::ptrdiff_t>(i * h), h,
                  next.begin() + static_cast<std::ptrdiff_t>(i * (h + 1)));
      const double v = stick_value(h, dependent_discount(coef_row(h), data_.covariates(i)), state_.sticks[h]);
      next[i * (h + 1) + h] = v * residual_cond_[i];
      residual_cond_[i] *= 1.0 - v;
    }
    pi_cond_ = std::move(next);
  }

  /// Component counts, tail counts and sufficient statistics.
  void tally() {
    const std::size_t h_count = state_.components();
    const std::size_t d = spec_.dim;
    count_.assign(h_count, 0);
    beyond_.assign(h_count, 0);
    members_.assign(h_count, {});
    sum_y_.assign(h_count * d, 0.0);
    sum_log_y_.assign(h_count * d, 0.0);
    for (std::size_t i = 0; i < state_.allocation.size(); ++i) {
      const std::size_t h = state_.allocation[i];
      if (h >= h_count) throw InvariantError("allocation beyond instantiated components");
      ++count_[h];
      members_[h].push_back(i);
      for (std::size_t k = 0; k < d; ++k) {
        sum_y_[h * d + k] += data_.y[i * d + k];
        sum_log_y_[h * d + k] += log_y_[i * d + k];
      }
    }
    std::size_t acc = 0;
    for (std::size_t h = h_count; h-- > 0;) {
      beyond_[h] = acc;
      acc += count_[h];
    }
  }

  void prepare_kernels() {
    kernels_.resize(state_.atoms.size());
    if (spec_.model_class == ModelClass::uni_shape) return;
    for (std::size_t j = 0; j < state_.atoms.size(); ++j) {
      const double s = state_.atoms[j];
      const double a = std::ceil(s);
      const double log_scale = std::log(s / state_.lambda);
      kernels_[j] = {a, std::exp(-log_scale), -a * log_scale - std::lgamma(a)};
    }
  }

  double kernel_log_pdf(std::size_t i, std::size_t h) const {
    if (spec_.model_class == ModelClass::uni_shape) {
      return spec_.shape_kernel.with_tail_index(state_.atoms[h]).log_pdf(data_.y[i]);
    }
    const std::size_t d = spec_.dim;
    double lp = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const auto& c = kernels_[h * d + k];
      lp += (c.shape - 1.0) * log_y_[i * d + k] - data_.y[i * d + k] * c.inv_scale + c.constant;
    }
    return lp;
  }

  double erlang_suff_log_lik(std::size_t h, std::size_t k, double sigma) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) return -kInf;
    const std::size_t j = h * spec_.dim + k;
    const double a = std::ceil(sigma);
    const double log_scale = std::log(sigma / state_.lambda);
    const double m = static_cast<double>(count_[h]);
    return (a - 1.0) * sum_log_y_[j] - sum_y_[j] * std::exp(-log_scale) - m * (a * log_scale + std::lgamma(a));
  }

  /// D_h(x_i) for observations allocated at or beyond h, in allocation order.
  std::vector<double> member_discounts(std::size_t h, std::span<const double> row) const {
    std::vector<double> out;
    out.reserve(count_[h] + beyond_[h]);
    for (std::size_t g = h; g < state_.components(); ++g) {
      for (std::size_t i : members_[g]) out.push_back(dependent_discount(row, data_.covariates(i)));
    }
    return out;
  }

  /// sum_{z_i = h} log V_h(x_i) + sum_{z_i > h} log(1 - V_h(x_i)).
  double stick_log_lik(std::size_t h, double u, const std::vector<double>& disc) const {
    double lp = 0.0;
    std::size_t j = 0;
    for (std::size_t g = h; g < state_.components(); ++g) {
      for (std::size_t m = 0; m < members_[g].size(); ++m, ++j) {
        const double v = dependent_stick(u, disc[j], h + 1);
        lp += g == h ? std::log(v) : std::log1p(-v);
      }
    }
    return lp;
  }

  MixtureModelSpec spec_;
  Dataset data_;
  SamplerConfig config_;
  Rng rng_;
  ChainState state_;
  std::map<std::string, MoveStats> moves_;
  std::map<const MoveStats*, std::size_t> adapt_count_;
  bool adapting_ = false;
  std::size_t cap_hits_ = 0;
  std::size_t alpha0_guards_ = 0;

  std::vector<double> log_y_;
  std::vector<double> pi_;
  double residual_ = 1.0;
  std::vector<double> pi_cond_;
  std::vector<double> residual_cond_;
  std::vector<std::size_t> count_;
  std::vector<std::size_t> beyond_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> sum_y_;
  std::vector<double> sum_log_y_;
  std::vector<KernelCache> kernels_;
};

// ---------------------------------------------------------------------------
// Chains

struct ChainRun {
  std::vector<Snapshot> snapshots;
  std::map<std::string, MoveStats> moves;
  std::size_t cap_hits = 0;
  std::size_t alpha0_guards = 0;
  std::vector<std::size_t> components;
};

struct NoObserver {
  void operator()(const Snapshot&) const noexcept {}
};

/// Burn-in followed by `keep` retained draws every `thin` sweeps. Each kept
/// snapshot is passed to `observer` and, when `store`, returned.
template <class Observer = NoObserver>
ChainRun run_chain(const MixtureModelSpec& spec, const Dataset& data, const SamplerConfig& config,
                   Observer&& observer = {}, bool store = true) {
  SliceSampler sampler(spec, data, config);
  for (std::size_t t = 0; t < config.burn_in; ++t) sampler.sweep(true);
  ChainRun run;
  if (store) run.snapshots.reserve(config.keep);
  for (std::size_t t = 0; t < config.keep; ++t) {
    for (std::size_t j = 0; j < config.thin; ++j) sampler.sweep(false);
    auto snap = sampler.snapshot(config.burn_in + (t + 1) * config.thin);
    run.components.push_back(sampler.state().components());
    observer(snap);
    if (store) run.snapshots.push_back(std::move(snap));
  }
  run.moves = sampler.moves();
  run.cap_hits = sampler.cap_hits();
  run.alpha0_guards = sampler.alpha0_guards();
  return run;
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct Band {
  std::vector<double> mean;
  std::vector<double> q025;
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<double> q975;
};

struct MarginSummary {
  std::vector<double> grid;
  Band density;
  Band log_survival;
};

struct JointSummary {
  std::vector<double> grid1;
  std::vector<double> grid2;
  /// Posterior mean density, row-major over (grid1, grid2).
  std::vector<double> density_mean;
};

struct PredictiveSummary {
  std::vector<MarginSummary> margins;
  std::vector<JointSummary> joint;
  /// alpha0_k / D per snapshot, per margin (unconditional scale classes).
  std::vector<std::vector<double>> tail_index_draws;
};

namespace detail {

inline Band band_from_draws(std::vector<std::vector<double>>& by_point) {
  Band b;
  for (auto& draws : by_point) {
    b.mean.push_back(mean(draws));
    std::sort(draws.begin(), draws.end());
    b.q025.push_back(sorted_quantile(draws, 0.025));
    b.q25.push_back(sorted_quantile(draws, 0.25));
    b.q75.push_back(sorted_quantile(draws, 0.75));
    b.q975.push_back(sorted_quantile(draws, 0.975));
  }
  return b;
}

inline double marginal_component_pdf(const MixtureModelSpec& spec, const FiniteMixture& fm, std::size_t h,
                                     std::size_t k, double y) {
  if (spec.model_class == ModelClass::uni_shape) return spec.shape_kernel.with_tail_index(fm.atom(h, 0)).pdf(y);
  if (!(y > 0.0)) return 0.0;
  const double s = fm.atom(h, k);
  return std::exp(erlang_log_pdf_unchecked(y, std::ceil(s), s / fm.lambda));
}

}  // namespace detail

/// Pointwise posterior mean and 50% / 95% bands of the marginal densities and
/// log survival functions on `grids` (one per margin), at covariate `x` for
/// cond_scale. For bivariate models `joint_grid` (points per axis, 0 to skip)
/// adds the posterior mean joint density on grids[0] x grids[1] subsampled to
/// that many points.
[[nodiscard]] inline PredictiveSummary predictive_summaries(const MixtureModelSpec& spec,
                                                            std::span<const Snapshot> snapshots,
                                                            const std::vector<std::vector<double>>& grids,
                                                            std::span<const double> x = {},
                                                            std::size_t joint_points = 0) {
  detail::require<InputError>(!snapshots.empty(), "no posterior snapshots");
  detail::require<InputError>(grids.size() == spec.dim, "one grid per margin is required");
  for (const auto& g : grids) detail::require<InputError>(strictly_increasing(g), "grids must be increasing");
  PredictiveSummary out;
  const std::size_t s_count = snapshots.size();
  std::vector<std::vector<double>> weights(s_count);
  for (std::size_t s = 0; s < s_count; ++s) weights[s] = snapshots[s].mixture.weights_at(x);
  for (std::size_t k = 0; k < spec.dim; ++k) {
    const auto& grid = grids[k];
    std::vector<std::vector<double>> dens(grid.size(), std::vector<double>(s_count));
    std::vector<std::vector<double>> lsurv(grid.size(), std::vector<double>(s_count));
    for (std::size_t s = 0; s < s_count; ++s) {
      const auto& fm = snapshots[s].mixture;
      const auto& w = weights[s];
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double f = 0.0;
        double sv = 0.0;
        for (std::size_t h = 0; h < w.size(); ++h) {
          if (!(w[h] > 0.0)) continue;
          f += w[h] * detail::marginal_component_pdf(spec, fm, h, k, grid[g]);
          sv += w[h] * component_survival(spec, fm, h, k, grid[g]);
        }
        dens[g][s] = f;
        lsurv[g][s] = std::log(sv);
      }
    }
    out.margins.push_back({grid, detail::band_from_draws(dens), detail::band_from_draws(lsurv)});
  }
  if (spec.dim == 2 && joint_points > 0) {
    auto sub = [&](const std::vector<double>& g) {
      std::vector<double> r;
      const std::size_t m = std::min(joint_points, g.size());
      for (std::size_t j = 0; j < m; ++j) {
        r.push_back(g[m == 1 ? 0 : j * (g.size() - 1) / (m - 1)]);
      }
      return r;
    };
    JointSummary js{sub(grids[0]), sub(grids[1]), {}};
    js.density_mean.assign(js.grid1.size() * js.grid2.size(), 0.0);
    std::vector<double> f1;
    std::vector<double> f2;
    for (std::size_t s = 0; s < s_count; ++s) {
      const auto& fm = snapshots[s].mixture;
      const auto& w = weights[s];
      for (std::size_t h = 0; h < w.size(); ++h) {
        if (!(w[h] > 0.0)) continue;
        f1.clear();
        f2.clear();
        for (double a : js.grid1) f1.push_back(detail::marginal_component_pdf(spec, fm, h, 0, a));
        for (double b : js.grid2) f2.push_back(detail::marginal_component_pdf(spec, fm, h, 1, b));
        for (std::size_t a = 0; a < f1.size(); ++a) {
          for (std::size_t b = 0; b < f2.size(); ++b) js.density_mean[a * f2.size() + b] += w[h] * f1[a] * f2[b];
        }
      }
    }
    for (double& v : js.density_mean) v /= static_cast<double>(s_count);
    out.joint.push_back(std::move(js));
  }
  if (is_scale_class(spec.model_class) && spec.model_class != ModelClass::cond_scale) {
    out.tail_index_draws.assign(spec.dim, {});
    for (const auto& snap : snapshots) {
      if (!(snap.discount > 0.0)) continue;
      for (std::size_t k = 0; k < spec.dim; ++k) out.tail_index_draws[k].push_back(snap.alpha0[k] / snap.discount);
    }
  }
  return out;
}

/// At most `max_count` evenly spaced snapshots (all when max_count is 0).
[[nodiscard]] inline std::vector<Snapshot> thin_snapshots(std::span<const Snapshot> snapshots, std::size_t max_count) {
  if (max_count == 0 || snapshots.size() <= max_count) return {snapshots.begin(), snapshots.end()};
  std::vector<Snapshot> out;
  out.reserve(max_count);
  for (std::size_t j = 0; j < max_count; ++j) out.push_back(snapshots[j * snapshots.size() / max_count]);
  return out;
}

/// Posterior mean of the marginal cdf of margin k at y.
[[nodiscard]] inline double predictive_cdf(const MixtureModelSpec& spec, std::span<const Snapshot> snapshots,
                                           std::size_t k, double y, std::span<const double> x = {}) {
  double total = 0.0;
  for (const auto& snap : snapshots) {
    const auto w = snap.mixture.weights_at(x);
    double sv = 0.0;
    for (std::size_t h = 0; h < w.size(); ++h) {
      if (w[h] > 0.0) sv += w[h] * component_survival(spec, snap.mixture, h, k, y);
    }
    total += 1.0 - sv;
  }
  return total / static_cast<double>(snapshots.size());
}

/// p-quantile of the posterior mean marginal cdf, by bisection on log y.
[[nodiscard]] inline double predictive_quantile(const MixtureModelSpec& spec, std::span<const Snapshot> snapshots,
                                                double p, std::size_t k = 0, std::span<const double> x = {}) {
  detail::require<InputError>(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
  detail::require<InputError>(!snapshots.empty(), "no posterior snapshots");
  double lo = 1e-3;
  double hi = 10.0;
  if (spec.model_class == ModelClass::uni_shape) lo = std::max(lo, spec.shape_kernel.support_lower() + 1e-12);
  while (predictive_cdf(spec, snapshots, k, lo, x) > p && lo > 1e-300) lo /= 10.0;
  while (predictive_cdf(spec, snapshots, k, hi, x) < p) {
    hi *= 10.0;
    detail::require<DomainError>(hi < 1e300, "predictive quantile does not exist");
  }
  double a = std::log(lo);
  double b = std::log(hi);
  for (int it = 0; it < 80 && b - a > 1e-10; ++it) {
    const double m = 0.5 * (a + b);
    if (predictive_cdf(spec, snapshots, k, std::exp(m), x) < p) {
      a = m;
    } else {
      b = m;
    }
  }
  return std::exp(0.5 * (a + b));
}

struct QuantileResiduals {
  /// n x dim row-major.
  std::vector<double> residuals;
  /// 1 where F_hat fell outside [1e-10, 1 - 1e-10] and was clamped.
  std::vector<std::uint8_t> clamped_flags;
  std::size_t clamped = 0;
};

/// r_ik = Phi^{-1}(F_hat(y_ik | x_i)) with F_hat the posterior mean marginal
/// cdf. At most `max_snapshots` evenly spaced snapshots are used.
[[nodiscard]] inline QuantileResiduals randomized_quantile_residuals(const MixtureModelSpec& spec,
                                                                     std::span<const Snapshot> snapshots,
                                                                     const Dataset& data,
                                                                     std::size_t max_snapshots = 500) {
  detail::require<InputError>(!snapshots.empty(), "no posterior snapshots");
  data.validate_for(spec);
  const auto used = thin_snapshots(snapshots, max_snapshots);
  QuantileResiduals out;
  constexpr double lo = 1e-10;
  constexpr double hi = 1.0 - 1e-10;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < spec.dim; ++k) {
      double u = predictive_cdf(spec, used, k, data.y[i * spec.dim + k], data.covariates(i));
      const bool clamp = u < lo || u > hi;
      if (clamp) {
        ++out.clamped;
        u = std::clamp(u, lo, hi);
      }
      out.clamped_flags.push_back(clamp ? 1 : 0);
      out.residuals.push_back(-std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prior simulation (joint distribution tests)

/// A draw of all parameters and allocations from the prior, under fixed
/// truncation. Requires proper priors throughout.
[[nodiscard]] inline ChainState draw_prior_state(const MixtureModelSpec& spec, const Dataset& covariates, Rng& rng) {
  detail::require<InputError>(spec.truncation > 0, "prior simulation needs fixed truncation");
  detail::require<InputError>(!spec.alpha0_sampled() || !spec.alpha0_prior.jeffreys,
                              "prior simulation needs a proper alpha0 prior");
  const std::size_t n = covariates.size();
  const std::size_t h_count = spec.truncation;
  ChainState st;
  if (spec.model_class == ModelClass::cond_scale) {
    st.discount = 0.0;
  } else {
    st.discount = spec.fixed_discount ? *spec.fixed_discount : rng.beta(spec.discount_prior_a, spec.discount_prior_b);
  }
  st.lambda = is_scale_class(spec.model_class) ? rng.gamma(spec.lambda_prior_shape) / spec.lambda_prior_rate : 1.0;
  if (is_scale_class(spec.model_class)) {
    for (std::size_t k = 0; k < spec.dim; ++k) {
      st.alpha0.push_back(spec.fixed_alpha0 ? *spec.fixed_alpha0
                                            : rng.gamma(spec.alpha0_prior.shape) / spec.alpha0_prior.rate);
    }
  }
  const double sd = std::sqrt(spec.coefficient_prior_variance);
  for (std::size_t h = 0; h < h_count; ++h) {
    if (spec.model_class == ModelClass::cond_scale) {
      st.sticks.push_back(rng.uniform());
      for (std::size_t j = 0; j < spec.covariate_dim; ++j) st.coefficients.push_back(sd * rng.normal());
    } else {
      const double v = rng.beta(1.0 - st.discount, spec.precision + static_cast<double>(h + 1) * st.discount);
      st.sticks.push_back(std::clamp(v, 1e-300, std::nextafter(1.0, 0.0)));
    }
    if (spec.model_class == ModelClass::uni_shape) {
      st.atoms.push_back(spec.shape_centering.sample(rng));
    } else if (spec.has_copula()) {
      const std::array<ParetoII, 2> margins{spec.centering_margin(0, st.alpha0[0]),
                                            spec.centering_margin(1, st.alpha0[1])};
      const auto s = copula_centering_sample(GumbelCopula(spec.copula_theta), margins, rng);
      st.atoms.insert(st.atoms.end(), s.begin(), s.end());
    } else {
      for (std::size_t k = 0; k < spec.dim; ++k) st.atoms.push_back(spec.centering_margin(k, st.alpha0[k]).sample(rng));
    }
  }
  st.sticks.back() = 1.0;
  FiniteMixture fm;
  fm.dim = spec.dim;
  fm.atoms = st.atoms;
  fm.fixed_truncation = true;
  if (spec.model_class == ModelClass::cond_scale) {
    fm.covariate_dim = spec.covariate_dim;
    fm.uniforms = st.sticks;
    fm.coefficients = st.coefficients;
  } else {
    double rem = 1.0;
    for (double v : st.sticks) {
      fm.weights.push_back(v * rem);
      rem *= 1.0 - v;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = fm.weights_at(covariates.covariates(i));
    st.allocation.push_back(rng.categorical(w, 1.0));
  }
  st.slice.assign(n, 0.0);
  return st;
}

/// Responses drawn from the kernels given a state's atoms and allocations.
[[nodiscard]] inline std::vector<double> simulate_responses(const MixtureModelSpec& spec, const ChainState& st,
                                                            Rng& rng) {
  std::vector<double> y;
  y.reserve(st.allocation.size() * spec.dim);
  for (std::size_t h : st.allocation) {
    if (spec.model_class == ModelClass::uni_shape) {
      y.push_back(spec.shape_kernel.with_tail_index(st.atoms[h]).sample(rng));
      continue;
    }
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double s = st.atoms[h * spec.dim + k];
      y.push_back(std::max(ErlangKernel::from_atom(s, st.lambda).sample(rng), 1e-300));
    }
  }
  return y;
}

/// Standard error of a mean by non-overlapping batch means.
[[nodiscard]] inline double batch_means_se(std::span<const double> xs, std::size_t batches = 50) {
  detail::require<InputError>(xs.size() >= 2 * batches, "series too short for batch means");
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) means.push_back(mean(xs.subspan(b * len, len)));
  return std::sqrt(variance(means) / static_cast<double>(batches));
}

}  // namespace htpy
