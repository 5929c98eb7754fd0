#pragma once

// Augmented Lagrangian training: epoch-wise minibatches, misreport gradient
// ascent with a persistent per-sample cache, parameter updates on the exact
// Lagrangian gradient (misreports held fixed), periodic multiplier updates.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "jointauction/jregnet.hpp"

namespace jointauction {

enum class Optimizer : std::uint32_t { plain = 0, adam = 1 };

struct TrainConfig {
  std::size_t batch_size = 128;           // B
  std::size_t iterations = 200000;        // T
  std::size_t ascent_steps = 25;          // Gamma
  double misreport_step = 0.1;            // gamma
  double learning_rate = 1e-3;            // eta
  std::size_t multiplier_period = 100;    // H
  double rho_initial = 1.0;
  double rho_increment = 1.0;
  std::size_t rho_period = 10000;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;

  void validate() const {
    if (batch_size == 0 || multiplier_period == 0 || rho_period == 0 || log_every == 0)
      throw Error("train config: counts must be >= 1");
    if (!(misreport_step > 0.0) || !(learning_rate >= 0.0) || !(rho_initial > 0.0))
      throw Error("train config: step sizes and rho must be positive");
  }

  double rho_at(std::uint64_t t) const {
    return rho_initial + rho_increment * static_cast<double>(t / rho_period);
  }
};

struct HistoryRow {
  std::uint64_t iteration = 0;
  double loss = 0.0;
  double rev = 0.0;
  double mean_rgt = 0.0;
  double max_rgt = 0.0;
  double lambda_norm = 0.0;
};

struct AdamState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  std::uint64_t step = 0;
};

struct TrainingState {
  NetworkParams params;
  Eigen::VectorXd lambdas;
  double rho = 1.0;
  std::uint64_t iteration = 0;
  Eigen::MatrixXd misreports;  // bidders x L, NaN until first touched
  std::vector<std::size_t> permutation;
  std::size_t cursor = 0;
  AdamState adam;
  Rng rng;
  std::vector<HistoryRow> history;

  static TrainingState start(const ArchitectureSpec& spec, const TrainConfig& cfg,
                             std::size_t dataset_size) {
    TrainingState s;
    s.rng.seed(cfg.seed);
    s.params = NetworkParams::initialize(spec, s.rng);
    s.lambdas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.bidders()));
    s.rho = cfg.rho_initial;
    s.misreports = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(spec.bidders()),
                                             static_cast<Eigen::Index>(dataset_size),
                                             std::numeric_limits<double>::quiet_NaN());
    return s;
  }
};

/// Next B sample indices of the current epoch; reshuffles when exhausted.
inline std::vector<std::size_t> next_minibatch(TrainingState& state,
                                               std::size_t dataset_size,
                                               std::size_t batch_size) {
  if (dataset_size < batch_size || batch_size == 0)
    throw Error("next_minibatch: dataset smaller than the batch");
  if (state.permutation.size() != dataset_size ||
      state.cursor + batch_size > dataset_size) {
    state.permutation.resize(dataset_size);
    std::iota(state.permutation.begin(), state.permutation.end(), std::size_t{0});
    std::shuffle(state.permutation.begin(), state.permutation.end(), state.rng);
    state.cursor = 0;
  }
  std::vector<std::size_t> out(state.permutation.begin() + static_cast<std::ptrdiff_t>(state.cursor),
                               state.permutation.begin() +
                                   static_cast<std::ptrdiff_t>(state.cursor + batch_size));
  state.cursor += batch_size;
  return out;
}

/// A minibatch in network form: truthful bids, values and the designated
/// bidder of every expanded misreport column.
struct TrainBatch {
  ProfileBatch truthful;
  Eigen::MatrixXd values;
  std::vector<std::size_t> participants;
  std::vector<std::size_t> bidder_of_column;

  Eigen::Index size() const { return truthful.size(); }
};

inline TrainBatch make_train_batch(std::span<const AuctionSample> samples,
                                   const ArchitectureSpec& spec) {
  TrainBatch b;
  b.truthful = make_batch(samples, spec, true);
  b.values = value_matrix(samples, spec.bidders());
  b.participants = spec.participants();
  b.bidder_of_column.reserve(samples.size() * b.participants.size());
  for (std::size_t l = 0; l < samples.size(); ++l)
    for (auto t : b.participants) b.bidder_of_column.push_back(t);
  return b;
}

/// Gamma projected ascent steps on each bidder's utility in its own report,
/// others truthful. `misreports` is bidders x B and stays inside [0, 1].
inline void misreport_ascent(const NetworkParams& params, const TrainBatch& batch,
                             Eigen::MatrixXd& misreports, double step,
                             std::size_t steps) {
  const auto per = static_cast<Eigen::Index>(batch.participants.size());
  const Eigen::MatrixXd values = repeat_columns(batch.values, per);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(batch.size() * per);
  Eigen::MatrixXd d_bids;
  for (std::size_t r = 0; r < steps; ++r) {
    const auto probe = expand_misreports(batch.truthful, misreports, batch.participants);
    const auto tr = forward(params, probe);
    backward(params, probe, tr,
             designated_utility_gradient(probe, values, batch.bidder_of_column, ones),
             nullptr, &d_bids);
    for (Eigen::Index l = 0; l < batch.size(); ++l)
      for (Eigen::Index p = 0; p < per; ++p) {
        const auto t = static_cast<Eigen::Index>(batch.participants[static_cast<std::size_t>(p)]);
        const double g = d_bids(t, l * per + p);
        if (!std::isfinite(g)) throw Error("misreport_ascent: non-finite bid gradient");
        misreports(t, l) = std::clamp(misreports(t, l) + step * g, 0.0, 1.0);
      }
  }
}

/// Utility gains of the cached misreports over truthful reporting.
struct RegretEstimate {
  Eigen::MatrixXd gains;        // bidders x B, raw (not floored)
  Eigen::VectorXd per_bidder;   // mean of floored gains
  Eigen::VectorXd payments;     // per-sample total truthful payment
  ForwardTrace truthful_trace;
  ForwardTrace misreport_trace;
  ProfileBatch probe;
  Eigen::MatrixXd probe_values;
};

inline RegretEstimate estimate_regret(const NetworkParams& params, const TrainBatch& batch,
                                      const Eigen::MatrixXd& misreports) {
  const auto per = static_cast<Eigen::Index>(batch.participants.size());
  const Eigen::Index bidders = batch.values.rows();
  RegretEstimate est;
  est.truthful_trace = forward(params, batch.truthful);
  est.probe = expand_misreports(batch.truthful, misreports, batch.participants);
  est.probe_values = repeat_columns(batch.values, per);
  est.misreport_trace = forward(params, est.probe);
  const Eigen::MatrixXd u_true = all_utilities(est.truthful_trace, batch.truthful, batch.values);
  const Eigen::VectorXd u_mis = designated_utilities(est.misreport_trace, est.probe,
                                                     est.probe_values, batch.bidder_of_column);
  est.gains = Eigen::MatrixXd::Zero(bidders, batch.size());
  est.per_bidder = Eigen::VectorXd::Zero(bidders);
  for (Eigen::Index l = 0; l < batch.size(); ++l)
    for (Eigen::Index p = 0; p < per; ++p) {
      const auto t = static_cast<Eigen::Index>(batch.participants[static_cast<std::size_t>(p)]);
      est.gains(t, l) = u_mis(l * per + p) - u_true(t, l);
      est.per_bidder(t) += std::max(0.0, est.gains(t, l));
    }
  est.per_bidder /= static_cast<double>(batch.size());
  est.payments = est.truthful_trace.payments.colwise().sum().transpose();
  return est;
}

/// Per-bidder empirical regret: mean over the batch of the floored gain.
inline Eigen::VectorXd empirical_regret(const NetworkParams& params, const TrainBatch& batch,
                                        const Eigen::MatrixXd& misreports) {
  return estimate_regret(params, batch, misreports).per_bidder;
}

inline double lagrangian_value(double rev, const Eigen::VectorXd& regret,
                               const Eigen::VectorXd& lambdas, double rho) {
  return -rev + lambdas.dot(regret) + 0.5 * rho * regret.squaredNorm();
}

/// -rev + sum lambda * rgt + rho/2 * sum rgt^2 on a minibatch.
inline double lagrangian(const NetworkParams& params, const TrainBatch& batch,
                         const Eigen::VectorXd& lambdas, double rho,
                         const Eigen::MatrixXd& misreports) {
  const auto est = estimate_regret(params, batch, misreports);
  return lagrangian_value(est.payments.mean(), est.per_bidder, lambdas, rho);
}

struct LagrangianGradient {
  double loss = 0.0;
  double rev = 0.0;
  Eigen::VectorXd regret;
  NetworkParams grads;
};

/// Exact gradient of the minibatch Lagrangian in the parameters with the
/// misreports held fixed.
inline LagrangianGradient lagrangian_gradient(const NetworkParams& params,
                                              const TrainBatch& batch,
                                              const Eigen::VectorXd& lambdas, double rho,
                                              const Eigen::MatrixXd& misreports) {
  const auto est = estimate_regret(params, batch, misreports);
  const auto per = static_cast<Eigen::Index>(batch.participants.size());
  const Eigen::Index bidders = batch.values.rows();
  const Eigen::Index k_slots = batch.truthful.ctrs.rows();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LagrangianGradient out;
  out.rev = est.payments.mean();
  out.regret = est.per_bidder;
  out.loss = lagrangian_value(out.rev, out.regret, lambdas, rho);
  out.grads = NetworkParams::zeros(params.spec);

  const Eigen::VectorXd coef = lambdas + rho * est.per_bidder;
  OutputGradient truthful_up;
  truthful_up.payments = Eigen::MatrixXd::Constant(bidders, batch.size(), -inv_b);
  truthful_up.bidder_alloc = Eigen::MatrixXd::Zero(bidders * k_slots, batch.size());
  Eigen::VectorXd mis_weights = Eigen::VectorXd::Zero(batch.size() * per);
  for (Eigen::Index l = 0; l < batch.size(); ++l)
    for (Eigen::Index p = 0; p < per; ++p) {
      const auto t = static_cast<Eigen::Index>(batch.participants[static_cast<std::size_t>(p)]);
      if (!(est.gains(t, l) > 0.0)) continue;
      const double w = coef(t) * inv_b;
      if (w == 0.0) continue;
      mis_weights(l * per + p) = w;
      truthful_up.payments(t, l) += w;
      for (Eigen::Index k = 0; k < k_slots; ++k)
        truthful_up.bidder_alloc(t * k_slots + k, l) -=
            w * batch.values(t, l) * batch.truthful.ctrs(k, l);
    }
  backward(params, batch.truthful, est.truthful_trace, truthful_up, &out.grads, nullptr);
  if (mis_weights.any()) {
    backward(params, est.probe, est.misreport_trace,
             designated_utility_gradient(est.probe, est.probe_values, batch.bidder_of_column,
                                         mis_weights),
             &out.grads, nullptr);
  }
  return out;
}

inline void apply_update(NetworkParams& params, const NetworkParams& grads,
                         AdamState& adam, const TrainConfig& cfg) {
  auto p_tensors = params.tensors();
  const auto g_tensors = grads.tensors();
  if (cfg.optimizer == Optimizer::plain) {
    for (std::size_t i = 0; i < p_tensors.size(); ++i)
      for (std::size_t j = 0; j < p_tensors[i].size(); ++j)
        p_tensors[i][j] -= cfg.learning_rate * g_tensors[i][j];
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const auto d = static_cast<Eigen::Index>(params.parameter_count());
  if (adam.first.size() != d) {
    adam.first = Eigen::VectorXd::Zero(d);
    adam.second = Eigen::VectorXd::Zero(d);
    adam.step = 0;
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < p_tensors.size(); ++i)
    for (std::size_t j = 0; j < p_tensors[i].size(); ++j, ++at) {
      const double g = g_tensors[i][j];
      adam.first(at) = beta1 * adam.first(at) + (1.0 - beta1) * g;
      adam.second(at) = beta2 * adam.second(at) + (1.0 - beta2) * g * g;
      p_tensors[i][j] -= cfg.learning_rate * (adam.first(at) / c1) /
                         (std::sqrt(adam.second(at) / c2) + eps);
    }
}

/// One optimizer step on the Lagrangian. Returns the pre-step gradient
/// record (loss, revenue, regrets).
inline LagrangianGradient parameter_step(TrainingState& state, const TrainBatch& batch,
                                         const Eigen::MatrixXd& misreports,
                                         const TrainConfig& cfg) {
  auto lg = lagrangian_gradient(state.params, batch, state.lambdas, state.rho, misreports);
  if (!lg.grads.all_finite())
    throw Error("parameter_step: non-finite gradient at iteration " +
                std::to_string(state.iteration));
  apply_update(state.params, lg.grads, state.adam, cfg);
  return lg;
}

/// lambda += rho * rgt on iterations that are multiples of H; regrets are
/// measured with the updated parameters and the cached misreports.
inline bool multiplier_step(TrainingState& state, const TrainBatch& batch,
                            const Eigen::MatrixXd& misreports, const TrainConfig& cfg) {
  if (state.iteration % cfg.multiplier_period != 0) return false;
  state.lambdas += state.rho * empirical_regret(state.params, batch, misreports);
  return true;
}

using TrainObserver = std::function<void(const TrainingState&, const HistoryRow&)>;

/// Runs iterations state.iteration .. cfg.iterations - 1.
inline void train(TrainingState& state, const TrainConfig& cfg,
                  std::span<const AuctionSample> dataset,
                  const TrainObserver& observer = {}) {
  cfg.validate();
  const auto& spec = state.params.spec;
  if (static_cast<std::size_t>(state.misreports.cols()) != dataset.size())
    throw Error("train: misreport cache does not match the dataset size");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<AuctionSample> picked(cfg.batch_size);
  Eigen::MatrixXd cache(static_cast<Eigen::Index>(spec.bidders()),
                        static_cast<Eigen::Index>(cfg.batch_size));
  while (state.iteration < cfg.iterations) {
    state.rho = cfg.rho_at(state.iteration);
    const auto idx = next_minibatch(state, dataset.size(), cfg.batch_size);
    for (std::size_t l = 0; l < idx.size(); ++l) {
      picked[l] = dataset[idx[l]];
      auto col = state.misreports.col(static_cast<Eigen::Index>(idx[l]));
      for (Eigen::Index t = 0; t < col.size(); ++t)
        if (std::isnan(col(t))) col(t) = unit(state.rng);
      cache.col(static_cast<Eigen::Index>(l)) = col;
    }
    const auto batch = make_train_batch(picked, spec);
    misreport_ascent(state.params, batch, cache, cfg.misreport_step, cfg.ascent_steps);
    const auto lg = parameter_step(state, batch, cache, cfg);
    multiplier_step(state, batch, cache, cfg);
    for (std::size_t l = 0; l < idx.size(); ++l)
      state.misreports.col(static_cast<Eigen::Index>(idx[l])) =
          cache.col(static_cast<Eigen::Index>(l));

    if (state.iteration % cfg.log_every == 0 || state.iteration + 1 == cfg.iterations) {
      HistoryRow row;
      row.iteration = state.iteration;
      row.loss = lg.loss;
      row.rev = lg.rev;
      row.mean_rgt = lg.regret.mean();
      row.max_rgt = lg.regret.maxCoeff();
      row.lambda_norm = state.lambdas.norm();
      state.history.push_back(row);
      if (observer) observer(state, row);
    }
    ++state.iteration;
  }
}

/// Convenience: fresh state, full run, returns the final state.
inline TrainingState train(const ArchitectureSpec& spec, const TrainConfig& cfg,
                           std::span<const AuctionSample> dataset,
                           const TrainObserver& observer = {}) {
  auto state = TrainingState::start(spec, cfg, dataset.size());
  train(state, cfg, dataset, observer);
  return state;
}

}  // namespace jointauction
