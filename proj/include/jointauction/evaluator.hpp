#pragma once

// Test-time measurement: restart-and-ascend regret for the network (batched,
// exact bid gradients) and for black-box mechanisms (finite differences),
// revenue / welfare, the ru ratio, GSP beta-grid misreports, baseline
// layouts and the paired t-test.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jointauction/jregnet.hpp"

namespace jointauction {

struct EvalConfig {
  std::size_t n_restarts = 100;
  std::size_t ascent_steps = 2000;
  double step = 0.01;  // gamma_eval
  std::vector<double> beta_grid = default_beta_grid();
  std::uint64_t seed = 1;
  bool truthful_first_restart = false;  // restart 0 starts at the true value
  bool grid_starts = false;             // restart r starts at r / (n_restarts - 1)
  std::size_t max_columns = 8192;       // network batch width per chunk

  static std::vector<double> default_beta_grid() {
    std::vector<double> g;
    for (int i = 0; i < 20; ++i) g.push_back(0.1 * i);
    return g;
  }

  void validate() const {
    if (n_restarts == 0) throw Error("eval config: n_restarts must be >= 1");
    if (grid_starts && n_restarts < 2) throw Error("eval config: grid starts need n_restarts >= 2");
    if (!(step > 0.0)) throw Error("eval config: step must be positive");
    if (beta_grid.empty()) throw Error("eval config: beta grid is empty");
    for (double b : beta_grid)
      if (!(b >= 0.0)) throw Error("eval config: beta grid must be non-negative");
    if (max_columns == 0) throw Error("eval config: max_columns must be >= 1");
  }
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Initial misreport of restart r for (sample, bidder). A pure function of
/// its arguments, so any restart set is a subset of a larger one.
inline double restart_init(std::uint64_t seed, std::size_t sample, std::size_t bidder,
                           std::size_t restart) {
  std::uint64_t h = detail::splitmix(seed);
  h = detail::splitmix(h ^ sample);
  h = detail::splitmix(h ^ (bidder + 0x1000));
  h = detail::splitmix(h ^ (restart + 0x100000));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double start_point(const EvalConfig& cfg, double value, std::size_t sample,
                          std::size_t bidder, std::size_t restart) {
  if (restart == 0 && cfg.truthful_first_restart) return value;
  if (cfg.grid_starts) return static_cast<double>(restart) / static_cast<double>(cfg.n_restarts - 1);
  return restart_init(cfg.seed, sample, bidder, restart);
}

/// Floored utility gains per bidder and sample plus their aggregates. Rows
/// of bidders outside `participants` stay zero.
struct RegretResult {
  Eigen::MatrixXd gains;             // bidders x L
  Eigen::MatrixXd truthful_utility;  // bidders x L
  std::vector<std::size_t> participants;
  std::vector<double> per_bidder;    // mean gain per bidder
  std::vector<double> per_bidder_max;
  double mean = 0.0;                 // mean over participants of per_bidder
};

inline void finish_regret(RegretResult& r) {
  const Eigen::Index bidders = r.gains.rows();
  const auto n = static_cast<double>(std::max<Eigen::Index>(r.gains.cols(), 1));
  r.per_bidder.assign(static_cast<std::size_t>(bidders), 0.0);
  r.per_bidder_max.assign(static_cast<std::size_t>(bidders), 0.0);
  for (Eigen::Index t = 0; t < bidders; ++t) {
    r.per_bidder[static_cast<std::size_t>(t)] = r.gains.row(t).sum() / n;
    if (r.gains.cols() > 0) r.per_bidder_max[static_cast<std::size_t>(t)] = r.gains.row(t).maxCoeff();
  }
  r.mean = 0.0;
  for (auto t : r.participants) r.mean += r.per_bidder[t];
  if (!r.participants.empty()) r.mean /= static_cast<double>(r.participants.size());
}

/// Network regret: per (sample, bidder) n_restarts projected ascents of
/// ascent_steps steps; the gain is the best utility over every visited
/// iterate minus truthful utility, floored at 0.
inline RegretResult test_regret(const NetworkParams& params,
                                std::span<const AuctionSample> testset,
                                const EvalConfig& cfg) {
  cfg.validate();
  const auto& spec = params.spec;
  const auto participants = spec.participants();
  const auto bidders = static_cast<Eigen::Index>(spec.bidders());
  const auto per = static_cast<Eigen::Index>(participants.size());
  const auto restarts = static_cast<Eigen::Index>(cfg.n_restarts);
  const auto n_samples = static_cast<Eigen::Index>(testset.size());

  RegretResult res;
  res.participants = participants;
  res.gains = Eigen::MatrixXd::Zero(bidders, n_samples);
  res.truthful_utility = Eigen::MatrixXd::Zero(bidders, n_samples);

  const Eigen::Index cols_per_sample = per * restarts;
  const Eigen::Index chunk =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(cfg.max_columns) / cols_per_sample);
  std::vector<std::size_t> bidder_of_column;
  for (Eigen::Index start = 0; start < n_samples; start += chunk) {
    const Eigen::Index count = std::min(chunk, n_samples - start);
    const auto part = testset.subspan(static_cast<std::size_t>(start),
                                      static_cast<std::size_t>(count));
    const auto truthful = make_batch(part, spec, true);
    const Eigen::MatrixXd values = value_matrix(part, spec.bidders());
    const auto truthful_trace = forward(params, truthful);
    const Eigen::MatrixXd u_true = all_utilities(truthful_trace, truthful, values);
    res.truthful_utility.middleCols(start, count) = u_true;

    // Column layout: ((sample * restarts) + restart) * per + position.
    const Eigen::Index n_cols = count * cols_per_sample;
    ProfileBatch probe;
    probe.bids = repeat_columns(truthful.bids, cols_per_sample);
    probe.ctrs = repeat_columns(truthful.ctrs, cols_per_sample);
    probe.relation = repeat_columns(truthful.relation, cols_per_sample);
    const Eigen::MatrixXd probe_values = repeat_columns(values, cols_per_sample);
    bidder_of_column.resize(static_cast<std::size_t>(n_cols));
    Eigen::VectorXd baseline(n_cols);
    for (Eigen::Index l = 0; l < count; ++l)
      for (Eigen::Index r = 0; r < restarts; ++r)
        for (Eigen::Index p = 0; p < per; ++p) {
          const Eigen::Index c = (l * restarts + r) * per + p;
          const auto t = participants[static_cast<std::size_t>(p)];
          const auto ti = static_cast<Eigen::Index>(t);
          bidder_of_column[static_cast<std::size_t>(c)] = t;
          probe.bids(ti, c) = start_point(cfg, values(ti, l), static_cast<std::size_t>(start + l), t,
                                          static_cast<std::size_t>(r));
          baseline(c) = u_true(ti, l);
        }

    Eigen::VectorXd best = Eigen::VectorXd::Constant(n_cols, 0.0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n_cols);
    Eigen::MatrixXd d_bids;
    for (std::size_t step = 0;; ++step) {
      const auto tr = forward(params, probe);
      const Eigen::VectorXd u = designated_utilities(tr, probe, probe_values, bidder_of_column);
      best = best.cwiseMax(u - baseline);
      if (step == cfg.ascent_steps) break;
      backward(params, probe, tr,
               designated_utility_gradient(probe, probe_values, bidder_of_column, ones),
               nullptr, &d_bids);
      for (Eigen::Index c = 0; c < n_cols; ++c) {
        const auto t = static_cast<Eigen::Index>(bidder_of_column[static_cast<std::size_t>(c)]);
        probe.bids(t, c) = std::clamp(probe.bids(t, c) + cfg.step * d_bids(t, c), 0.0, 1.0);
      }
    }
    for (Eigen::Index l = 0; l < count; ++l)
      for (Eigen::Index p = 0; p < per; ++p) {
        const auto t = static_cast<Eigen::Index>(participants[static_cast<std::size_t>(p)]);
        double g = 0.0;
        for (Eigen::Index r = 0; r < restarts; ++r)
          g = std::max(g, best((l * restarts + r) * per + p));
        res.gains(t, start + l) = g;
      }
  }
  finish_regret(res);
  return res;
}

/// Black-box regret with central finite-difference gradients (one-sided at
/// the domain edges). An ascent stops early once its iterate stops moving.
inline RegretResult test_regret(const OutcomeFunction& mechanism,
                                std::span<const AuctionSample> testset,
                                const EvalConfig& cfg, double fd_step = 1e-4) {
  cfg.validate();
  RegretResult res;
  if (testset.empty()) return res;
  const std::size_t bidders = testset.front().bidders();
  for (std::size_t t = 0; t < bidders; ++t) res.participants.push_back(t);
  res.gains = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bidders),
                                    static_cast<Eigen::Index>(testset.size()));
  res.truthful_utility = res.gains;
  for (std::size_t l = 0; l < testset.size(); ++l) {
    const auto& sample = testset[l];
    if (sample.bidders() != bidders) throw Error("test set mixes auction shapes");
    AuctionSample probe = sample;
    probe.bids = sample.truthful();
    const auto truthful_out = mechanism(probe);
    for (std::size_t t = 0; t < bidders; ++t) {
      const double v = sample.truthful()[t];
      const double u_true = bidder_utility(truthful_out, t, v, sample.slots);
      res.truthful_utility(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = u_true;
      auto u_at = [&](double b) {
        probe.bids[t] = b;
        return bidder_utility(mechanism(probe), t, v, sample.slots);
      };
      double best = 0.0;
      for (std::size_t r = 0; r < cfg.n_restarts; ++r) {
        double x = start_point(cfg, v, l, t, r);
        best = std::max(best, u_at(x) - u_true);
        for (std::size_t s = 0; s < cfg.ascent_steps; ++s) {
          const double lo = std::max(0.0, x - fd_step), hi = std::min(1.0, x + fd_step);
          const double grad = (u_at(hi) - u_at(lo)) / (hi - lo);
          const double next = std::clamp(x + cfg.step * grad, 0.0, 1.0);
          if (next == x) break;
          x = next;
          best = std::max(best, u_at(x) - u_true);
        }
      }
      probe.bids[t] = sample.truthful()[t];
      res.gains(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = best;
    }
  }
  finish_regret(res);
  return res;
}

struct RatioResult {
  double ru = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // samples with zero total truthful utility
};

inline constexpr double kZeroUtility = 1e-12;

/// Mean over samples of (sum of regrets) / (sum of truthful utilities).
inline RatioResult ru_metric(const Eigen::MatrixXd& gains,
                             const Eigen::MatrixXd& truthful_utility) {
  if (gains.rows() != truthful_utility.rows() || gains.cols() != truthful_utility.cols())
    throw Error("ru_metric: shape mismatch");
  RatioResult r;
  double total = 0.0;
  for (Eigen::Index l = 0; l < gains.cols(); ++l) {
    const double mu = truthful_utility.col(l).sum();
    if (std::abs(mu) <= kZeroUtility) {
      ++r.skipped;
      continue;
    }
    total += gains.col(l).sum() / mu;
    ++r.used;
  }
  if (r.used == 0) throw Error("ru_metric: every sample has zero truthful utility");
  r.ru = total / static_cast<double>(r.used);
  return r;
}

inline RatioResult ru_metric(const RegretResult& regret) {
  return ru_metric(regret.gains, regret.truthful_utility);
}

/// GSP misreports b = beta * v for every beta in the grid; gains floored at 0.
inline RegretResult gsp_regret_enumeration(std::span<const AuctionSample> testset,
                                           const std::vector<double>& beta_grid) {
  if (beta_grid.empty()) throw Error("gsp_regret_enumeration: empty beta grid");
  RegretResult res;
  if (testset.empty()) return res;
  const std::size_t bidders = testset.front().bidders();
  for (std::size_t t = 0; t < bidders; ++t) res.participants.push_back(t);
  res.gains = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bidders),
                                    static_cast<Eigen::Index>(testset.size()));
  res.truthful_utility = res.gains;
  for (std::size_t l = 0; l < testset.size(); ++l) {
    const auto& sample = testset[l];
    if (sample.bidders() != bidders) throw Error("test set mixes auction shapes");
    AuctionSample probe = sample;
    probe.bids = sample.truthful();
    const auto truthful_out = gsp_joint(probe);
    for (std::size_t t = 0; t < bidders; ++t) {
      const double v = sample.truthful()[t];
      const double u_true = bidder_utility(truthful_out, t, v, sample.slots);
      double best = 0.0;
      for (double beta : beta_grid) {
        probe.bids[t] = beta * v;
        best = std::max(best, bidder_utility(gsp_joint(probe), t, v, sample.slots) - u_true);
      }
      probe.bids[t] = v;
      res.gains(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = best;
      res.truthful_utility(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = u_true;
    }
  }
  finish_regret(res);
  return res;
}

enum class BaselineKind { regretnet_stores_only, iregnet_singletons };

/// Architecture that runs a baseline through the unchanged network, trainer
/// and evaluator.
inline ArchitectureSpec degenerate_baseline(BaselineKind kind, std::size_t stores,
                                            std::size_t brands, std::size_t slots) {
  ArchitectureSpec spec;
  spec.stores = stores;
  spec.brands = brands;
  spec.slots = slots;
  spec.layout = kind == BaselineKind::regretnet_stores_only ? BundleLayout::stores
                                                            : BundleLayout::singletons;
  spec.validate();
  return spec;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
};

/// Two-sided paired t-test on a - b.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired_t_test: series lengths differ");
  if (a.size() < 2) throw Error("paired_t_test: need at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double var = ss / (n - 1.0);
  if (!(var > 1e-300)) throw Error("paired_t_test: differences have zero variance");
  TTestResult r;
  r.dof = a.size() - 1;
  r.t = mean / std::sqrt(var / n);
  boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

/// Revenue, welfare and (optionally) regret of one mechanism on a test set.
struct EvalReport {
  std::string mechanism;
  Metrics metrics;
  bool has_regret = false;
  std::size_t n_samples = 0;
  std::size_t ru_skipped = 0;
  std::uint64_t seed = 0;
};

inline Metrics outcome_metrics(const NetworkParams& params,
                               std::span<const AuctionSample> testset,
                               std::size_t chunk = 4096) {
  std::vector<MechanismOutcome> outs;
  outs.reserve(testset.size());
  for (std::size_t start = 0; start < testset.size(); start += chunk) {
    const auto part = testset.subspan(start, std::min(chunk, testset.size() - start));
    const auto tr = forward(params, make_batch(part, params.spec, true));
    for (std::size_t c = 0; c < part.size(); ++c)
      outs.push_back(to_outcome(tr, params.spec, static_cast<Eigen::Index>(c)));
  }
  return batch_metrics(outs, testset);
}

inline Metrics outcome_metrics(const OutcomeFunction& mechanism,
                               std::span<const AuctionSample> testset) {
  std::vector<MechanismOutcome> outs;
  outs.reserve(testset.size());
  for (const auto& s : testset) {
    AuctionSample truthful = s;
    truthful.bids = s.truthful();
    outs.push_back(mechanism(truthful));
  }
  return batch_metrics(outs, testset);
}

inline void attach_regret(EvalReport& report, const RegretResult& regret) {
  report.has_regret = true;
  report.metrics.rgt = regret.mean;
  report.metrics.per_bidder_regret = regret.per_bidder;
  const auto ratio = ru_metric(regret);
  report.metrics.ru = ratio.ru;
  report.ru_skipped = ratio.skipped;
}

inline EvalReport evaluate_network(const std::string& name, const NetworkParams& params,
                                   std::span<const AuctionSample> testset,
                                   const EvalConfig& cfg) {
  EvalReport r;
  r.mechanism = name;
  r.n_samples = testset.size();
  r.seed = cfg.seed;
  r.metrics = outcome_metrics(params, testset);
  attach_regret(r, test_regret(params, testset, cfg));
  return r;
}

}  // namespace jointauction
