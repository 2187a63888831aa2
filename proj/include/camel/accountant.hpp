#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "camel/errors.hpp"

namespace camel {

/// Lemma precondition for amplification by shuffling:
/// eps0 <= (1/2) log(n / log(1/delta)).
inline bool shuffling_precondition(double eps0, double n_msgs, double delta_tilde) {
  if (!(n_msgs >= 1) || !(delta_tilde > 0 && delta_tilde < 1)) return false;
  return eps0 <= 0.5 * std::log(n_msgs / std::log(1.0 / delta_tilde));
}

/// A published closed-form privacy-amplification-by-shuffling bound. The
/// paper states the amplified level only up to constants, so the concrete
/// bound is pluggable and named in all outputs.
class ShuffleBound {
 public:
  virtual ~ShuffleBound() = default;
  virtual std::string name() const = 0;
  virtual bool applicable(double eps0, double n_msgs, double delta_tilde) const = 0;
  virtual double amplified(double eps0, double n_msgs, double delta_tilde) const = 0;
};

/// Feldman-McMillan-Talwar (FOCS'21) "hiding among the clones", Theorem 3.1:
/// for eps0 <= log(n / (16 log(2/delta))),
/// eps <= log(1 + (e^eps0-1)/(e^eps0+1) * (8 sqrt(e^eps0 log(4/delta))/sqrt(n)
///        + 8 e^eps0/n)).
class ClonesBound final : public ShuffleBound {
 public:
  std::string name() const override { return "clones-fmt21"; }
  bool applicable(double eps0, double n, double delta) const override {
    return shuffling_precondition(eps0, n, delta) &&
           eps0 <= std::log(n / (16.0 * std::log(2.0 / delta)));
  }
  double amplified(double eps0, double n, double delta) const override {
    const double e = std::exp(eps0);
    const double term = 8.0 * std::sqrt(e * std::log(4.0 / delta)) / std::sqrt(n) +
                        8.0 * e / n;
    return std::log1p((e - 1.0) / (e + 1.0) * term);
  }
};

/// The order-of-growth expression with unit constant:
/// min{eps0, 1} e^eps0 sqrt(log(1/delta)/n).
class AsymptoticUnitBound final : public ShuffleBound {
 public:
  std::string name() const override { return "asymptotic-unit"; }
  bool applicable(double eps0, double n, double delta) const override {
    return shuffling_precondition(eps0, n, delta);
  }
  double amplified(double eps0, double n, double delta) const override {
    return std::min(eps0, 1.0) * std::exp(eps0) * std::sqrt(std::log(1.0 / delta) / n);
  }
};

inline std::unique_ptr<ShuffleBound> make_bound(const std::string& name) {
  if (name == "clones-fmt21" || name == "clones") return std::make_unique<ClonesBound>();
  if (name == "asymptotic-unit") return std::make_unique<AsymptoticUnitBound>();
  throw UsageError("unknown shuffle-amplification bound: " + name);
}

inline const ShuffleBound& default_bound() {
  static const ClonesBound b;
  return b;
}

/// Amplification by shuffling. Strict: throws ParamError naming the bound
/// when its precondition fails. Always returns at most eps0.
inline double shuffle_amplify(double eps0, double n_msgs, double delta_tilde,
                              const ShuffleBound& bound = default_bound()) {
  if (!(eps0 >= 0)) throw ParamError("shuffle_amplify: eps0 must be non-negative");
  if (!bound.applicable(eps0, n_msgs, delta_tilde))
    throw ParamError("shuffle_amplify: precondition of bound '" + bound.name() +
                     "' violated (needs eps0 <= log-ratio of n and log(1/delta))");
  return std::min(bound.amplified(eps0, n_msgs, delta_tilde), eps0);
}

/// Amplification by subsampling: eps' = log(1 + gamma (e^eps - 1)),
/// delta' = gamma delta.
inline double subsample_amplify_eps(double eps, double gamma) {
  if (!(gamma > 0 && gamma <= 1)) throw ParamError("subsample: gamma must be in (0, 1]");
  return std::log1p(gamma * (std::exp(eps) - 1.0));
}
inline std::pair<double, double> subsample_amplify(double eps, double delta, double gamma) {
  return {subsample_amplify_eps(eps, gamma), gamma * delta};
}

/// Per-iteration RDP of the shuffled-and-subsampled mechanism:
/// eps(lambda) = lambda log^2(1 + gamma (e^eps_tilde - 1)) / 2.
inline double per_iter_rdp(double lambda, double eps_tilde, double gamma) {
  if (!(lambda > 1)) throw ParamError("per_iter_rdp: lambda must exceed 1");
  const double base = subsample_amplify_eps(eps_tilde, gamma);
  return lambda * base * base / 2.0;
}

/// Adaptive composition of RDP: T-fold pointwise sum.
inline std::vector<double> compose_rdp(const std::vector<double>& per_iter, std::uint64_t t) {
  std::vector<double> out(per_iter.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = per_iter[i] * static_cast<double>(t);
  return out;
}

struct LambdaGrid {
  double lo = 2.0;
  double hi = 512.0;
  std::size_t log_points = 200;

  std::vector<double> points() const {
    if (!(lo > 1) || !(hi > lo) || log_points < 2) throw UsageError("bad lambda grid");
    std::vector<double> pts;
    for (double v = std::ceil(lo); v <= hi; v += 1.0) pts.push_back(v);
    const double ll = std::log(lo), lh = std::log(hi);
    for (std::size_t i = 0; i < log_points; ++i)
      pts.push_back(std::exp(ll + (lh - ll) * static_cast<double>(i) /
                                      static_cast<double>(log_points - 1)));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }
};

struct RdpToDpResult {
  double epsilon = 0;
  double lambda = 0;
};

/// The conversion overhead added to eps(lambda) at a given order.
inline double rdp_conversion_overhead(double lambda, double log_inv_delta) {
  return (log_inv_delta + (lambda - 1) * std::log1p(-1.0 / lambda) - std::log(lambda)) /
         (lambda - 1);
}

/// Minimum of the conversion objective over an explicit grid, no widening.
inline RdpToDpResult rdp_to_dp_on_grid(const std::function<double(double)>& eps_of_lambda,
                                       double delta, const std::vector<double>& pts) {
  if (!(delta > 0 && delta < 1)) throw ParamError("rdp_to_dp: delta must be in (0, 1)");
  if (pts.empty()) throw UsageError("rdp_to_dp: empty lambda grid");
  const double log_inv_delta = std::log(1.0 / delta);
  RdpToDpResult best{std::numeric_limits<double>::infinity(), 0};
  for (const double lam : pts) {
    const double val = eps_of_lambda(lam) + rdp_conversion_overhead(lam, log_inv_delta);
    if (val < best.epsilon) best = {val, lam};
  }
  return best;
}

/// RDP -> (eps, delta)-DP conversion:
/// eps = min over lambda of eps(lambda)
///       + (log(1/delta) + (lambda-1) log(1-1/lambda) - log lambda)/(lambda-1).
/// The grid widens automatically while the minimizer sits on a boundary.
inline RdpToDpResult rdp_to_dp(const std::function<double(double)>& eps_of_lambda,
                               double delta, LambdaGrid grid = {}) {
  RdpToDpResult res{};
  for (int widen = 0; widen < 16; ++widen) {
    res = rdp_to_dp_on_grid(eps_of_lambda, delta, grid.points());
    const bool at_low = res.lambda < grid.lo * 1.000001 && grid.lo > 1.0 + 1e-6;
    const bool at_high = res.lambda > grid.hi * 0.999999;
    if (!at_low && !at_high) return res;
    if (at_high) grid.hi *= 4;
    if (at_low) grid.lo = 1.0 + (grid.lo - 1.0) / 4;
  }
  return res;  // widening cap reached (degenerate curves without interior minimum)
}

struct AdvCompResult {
  double epsilon = 0;
  double delta = 0;
};

/// Advanced composition (Dwork-Roth): for T mechanisms at (eps, delta) each,
/// eps_total = eps sqrt(2 T log(1/delta_slack)) + T eps (e^eps - 1),
/// delta_total = T delta + delta_slack.
inline AdvCompResult advanced_composition(double eps_iter, double delta_iter, std::uint64_t t,
                                          double delta_slack) {
  if (!(delta_slack > 0 && delta_slack < 1))
    throw ParamError("advanced_composition: delta_slack must be in (0, 1)");
  const double td = static_cast<double>(t);
  return {eps_iter * std::sqrt(2.0 * td * std::log(1.0 / delta_slack)) +
              td * eps_iter * (std::exp(eps_iter) - 1.0),
          td * delta_iter + delta_slack};
}

/// The accounting inputs of one training run plus the delta budget split.
struct PrivacyLedger {
  double epsilon0 = 1.0;
  double delta = 1e-5;
  double gamma = 0.1;   // B / M
  double data_points = 1e4;  // M = n r
  std::uint64_t iterations = 1;  // T
  std::optional<double> delta_tilde_override;
  std::optional<double> delta_conv_override;
  LambdaGrid grid;

  double n_msgs() const { return gamma * data_points; }
  // default split: delta/(2T) per iteration, delta/2 for the conversion
  double delta_tilde() const {
    return delta_tilde_override ? *delta_tilde_override
                                : delta / (2.0 * static_cast<double>(iterations));
  }
  double delta_conv() const { return delta_conv_override ? *delta_conv_override : delta / 2.0; }

  void validate() const {
    if (!(epsilon0 > 0)) throw ParamError("ledger: epsilon0 must be positive");
    if (!(delta > 0 && delta < 1)) throw ParamError("ledger: delta must be in (0, 1)");
    if (!(gamma > 0 && gamma <= 1)) throw ParamError("ledger: gamma must be in (0, 1]");
    if (iterations < 1) throw ParamError("ledger: at least one iteration");
    if (!shuffling_precondition(epsilon0, n_msgs(), delta_tilde()))
      throw ParamError(
          "ledger: Lemma precondition eps0 <= (1/2) log(gamma M / log(1/delta~)) violated");
  }
};

struct BoundsRow {
  double epsilon0, data_points, gamma;
  std::uint64_t iterations;
  double eps_rdp;            // Theorem-1 route: RDP composition then conversion
  double eps_subsample_adv;  // shuffling + subsampling + advanced composition
  double eps_shuffle_adv;    // shuffling + advanced composition
  double eps_tilde;          // amplified per-message level used by all routes
  double lambda;             // minimizing Renyi order of the RDP route
  bool clamped;              // bound precondition failed, eps_tilde fell back to eps0
};

/// Evaluates the three Fig.-4 routes at one parameter point. Where the
/// closed-form amplification bound is not applicable the amplified level
/// falls back to eps0 (shuffling never hurts), flagged in `clamped`.
inline BoundsRow compute_bounds_row(const PrivacyLedger& lg,
                                    const ShuffleBound& bound = default_bound()) {
  BoundsRow row{};
  row.epsilon0 = lg.epsilon0;
  row.data_points = lg.data_points;
  row.gamma = lg.gamma;
  row.iterations = lg.iterations;
  const double dt = lg.delta_tilde();
  row.clamped = !bound.applicable(lg.epsilon0, lg.n_msgs(), dt);
  row.eps_tilde = row.clamped
                      ? lg.epsilon0
                      : std::min(bound.amplified(lg.epsilon0, lg.n_msgs(), dt), lg.epsilon0);
  const double eps_prime = subsample_amplify_eps(row.eps_tilde, lg.gamma);
  const double t = static_cast<double>(lg.iterations);
  const auto conv = rdp_to_dp(
      [&](double lam) { return t * per_iter_rdp(lam, row.eps_tilde, lg.gamma); },
      lg.delta_conv(), lg.grid);
  row.eps_rdp = conv.epsilon;
  row.lambda = conv.lambda;
  row.eps_subsample_adv =
      advanced_composition(eps_prime, lg.gamma * dt, lg.iterations, lg.delta / 2).epsilon;
  row.eps_shuffle_adv =
      advanced_composition(row.eps_tilde, dt, lg.iterations, lg.delta / 2).epsilon;
  return row;
}

inline std::vector<BoundsRow> compare_bounds(const std::vector<double>& eps0_grid,
                                             const std::vector<double>& m_grid,
                                             const std::vector<double>& gamma_grid,
                                             const std::vector<std::uint64_t>& t_grid,
                                             double delta,
                                             const ShuffleBound& bound = default_bound()) {
  std::vector<BoundsRow> rows;
  for (const double e0 : eps0_grid)
    for (const double m : m_grid)
      for (const double g : gamma_grid)
        for (const std::uint64_t t : t_grid) {
          PrivacyLedger lg;
          lg.epsilon0 = e0;
          lg.delta = delta;
          lg.gamma = g;
          lg.data_points = m;
          lg.iterations = t;
          rows.push_back(compute_bounds_row(lg, bound));
        }
  return rows;
}

/// Direct evaluation of the headline epsilon expression
/// min over lambda of (T eps(lambda) + log(1-1/lambda)
///                     + (log(1/delta) - log lambda)/(lambda-1));
/// algebraically identical to composing per-iteration RDP and converting.
inline RdpToDpResult theorem_epsilon_direct(const PrivacyLedger& lg, double eps_tilde) {
  const double t = static_cast<double>(lg.iterations);
  const double log_inv_delta = std::log(1.0 / lg.delta_conv());
  const auto pts = lg.grid.points();
  RdpToDpResult best{std::numeric_limits<double>::infinity(), 0};
  for (const double lam : pts) {
    const double val = t * per_iter_rdp(lam, eps_tilde, lg.gamma) +
                       std::log1p(-1.0 / lam) +
                       (log_inv_delta - std::log(lam)) / (lam - 1);
    if (val < best.epsilon) best = {val, lam};
  }
  return best;
}

struct ConvergenceBound {
  double g = 0;            // G = L sqrt(1 + 14d/(gamma M) ((e^eps0+1)/(e^eps0-1))^2)
  double bound_value = 0;  // L D log(T)/sqrt(T) sqrt(14 d/(gamma M)) ratio, unit constant
};

inline ConvergenceBound convergence_bound(double l2_bound, double d, double gamma_m,
                                          double eps0, double diameter, std::uint64_t t) {
  if (!(eps0 > 0)) throw ParamError("convergence_bound: eps0 must be positive");
  if (!(gamma_m > 0)) throw ParamError("convergence_bound: gamma*M must be positive");
  const double ratio = (std::exp(eps0) + 1) / (std::exp(eps0) - 1);
  ConvergenceBound out;
  out.g = l2_bound * std::sqrt(1 + 14.0 * d / gamma_m * ratio * ratio);
  const double td = static_cast<double>(t);
  out.bound_value = l2_bound * diameter * std::log(td) / std::sqrt(td) *
                    std::sqrt(14.0 * d / gamma_m) * ratio;
  return out;
}

}  // namespace camel
