#pragma once

// Fixtures and oracles shared by the unit tests and the acceptance gate.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "jointauction/jointauction.hpp"

namespace jtest {

using namespace jointauction;

inline AuctionSample make_sample(std::vector<double> ctrs,
                                 std::vector<std::vector<int>> relation,
                                 std::vector<double> store_values,
                                 std::vector<double> brand_values) {
  AuctionSample s;
  s.slots = SlotProfile(std::move(ctrs));
  s.relation = JointRelation(relation.size(), relation.empty() ? 0 : relation[0].size());
  for (std::size_t i = 0; i < relation.size(); ++i)
    for (std::size_t j = 0; j < relation[i].size(); ++j) s.relation.set(i, j, relation[i][j] != 0);
  s.values = Profile{std::move(store_values), std::move(brand_values)};
  s.bids = *s.values;
  return s;
}

inline ArchitectureSpec small_spec(std::size_t m, std::size_t n, std::size_t k,
                                   std::size_t width = 16,
                                   BundleLayout layout = BundleLayout::joint) {
  ArchitectureSpec spec;
  spec.stores = m;
  spec.brands = n;
  spec.slots = k;
  spec.layout = layout;
  spec.alloc_hidden = {width, width};
  spec.pay_hidden = {width, width};
  return spec;
}

/// Random CTRs strictly descending in (0, 1).
inline SlotProfile random_slots(std::size_t k, Rng& rng) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (;;) {
    std::vector<double> a(k);
    for (auto& x : a) x = u(rng);
    std::sort(a.begin(), a.end(), std::greater<>());
    if (std::adjacent_find(a.begin(), a.end()) == a.end()) return SlotProfile(a);
  }
}

/// Params with weights scaled so the logits spread over a few units.
inline NetworkParams random_params(const ArchitectureSpec& spec, Rng& rng, double scale) {
  auto p = NetworkParams::initialize(spec, rng);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (auto t : p.tensors())
    for (double& x : t) x = x * scale + noise(rng) * 0.1;
  return p;
}

/// Which side of every min() the forward pass took; FD probes that straddle
/// a switch measure a kink, not a derivative.
inline std::vector<char> branch_signature(const ForwardTrace& tr, std::size_t slots) {
  const auto k_slots = static_cast<Eigen::Index>(slots);
  const Eigen::Index width = k_slots + 1;
  std::vector<char> sig;
  for (Eigen::Index c = 0; c < tr.mask.cols(); ++c)
    for (Eigen::Index q = 0; q < tr.mask.rows(); ++q)
      for (Eigen::Index k = 0; k < k_slots; ++k)
        sig.push_back(tr.bistochastic.col_soft(q * k_slots + k, c) <=
                      tr.bistochastic.row_soft(q * width + k, c));
  return sig;
}

inline double weighted_objective(const ForwardTrace& tr, const OutputGradient& w) {
  return tr.payments.cwiseProduct(w.payments).sum() +
         tr.bidder_alloc.cwiseProduct(w.bidder_alloc).sum() +
         tr.bundle_alloc().cwiseProduct(w.bundle_alloc).sum();
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct GradientCheckSummary {
  std::size_t checks = 0;
  std::size_t kink_skips = 0;
  double max_param_error = 0.0;
  double max_bid_error = 0.0;
};

/// Central-difference checks (step 1e-5) of parameter directional
/// derivatives and single-bid derivatives against backward() on random
/// 2x2x1 instances with a random linear objective of P, S and A.
inline GradientCheckSummary check_gradients(std::size_t count, std::uint64_t seed,
                                            std::size_t width = 16) {
  constexpr double h = 1e-5;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradientCheckSummary out;
  const auto spec = small_spec(2, 2, 1, width);
  while (out.checks < count) {
    const auto params = random_params(spec, rng, 1.5);
    std::vector<AuctionSample> samples;
    for (int c = 0; c < 2; ++c) {
      auto s = sample_auction(SlotProfile({0.2 + 0.7 * unit(rng)}), 2, 2, 0.7,
                              DistributionSpec::uniform(), rng);
      samples.push_back(s);
    }
    const auto batch = make_batch(samples, spec);
    const auto tr = forward(params, batch);
    OutputGradient w;
    w.payments = Eigen::MatrixXd::NullaryExpr(tr.payments.rows(), tr.payments.cols(),
                                              [&] { return normal(rng); });
    w.bidder_alloc = Eigen::MatrixXd::NullaryExpr(
        tr.bidder_alloc.rows(), tr.bidder_alloc.cols(), [&] { return normal(rng); });
    w.bundle_alloc = Eigen::MatrixXd::NullaryExpr(
        tr.bundle_alloc().rows(), tr.bundle_alloc().cols(), [&] { return normal(rng); });

    auto grads = NetworkParams::zeros(spec);
    Eigen::MatrixXd d_bids;
    backward(params, batch, tr, w, &grads, &d_bids);

    // Parameter direction.
    const Eigen::VectorXd theta = params.flatten();
    const Eigen::VectorXd dir =
        Eigen::VectorXd::NullaryExpr(theta.size(), [&] { return normal(rng); });
    auto plus = params, minus = params;
    plus.assign(theta + h * dir);
    minus.assign(theta - h * dir);
    const auto tp = forward(plus, batch), tm = forward(minus, batch);
    if (branch_signature(tp, 1) != branch_signature(tm, 1)) {
      ++out.kink_skips;
      continue;
    }
    const double numeric = (weighted_objective(tp, w) - weighted_objective(tm, w)) / (2 * h);
    const double analytic = grads.flatten().dot(dir);
    out.max_param_error = std::max(out.max_param_error, relative_error(analytic, numeric));

    // One bid coordinate.
    const auto t = static_cast<Eigen::Index>(rng() % spec.bidders());
    const auto c = static_cast<Eigen::Index>(rng() % 2);
    auto bp = batch, bm = batch;
    bp.bids(t, c) += h;
    bm.bids(t, c) -= h;
    const auto fp = forward(params, bp), fm = forward(params, bm);
    if (branch_signature(fp, 1) != branch_signature(fm, 1)) {
      ++out.kink_skips;
      continue;
    }
    const double bid_numeric = (weighted_objective(fp, w) - weighted_objective(fm, w)) / (2 * h);
    out.max_bid_error = std::max(out.max_bid_error, relative_error(d_bids(t, c), bid_numeric));
    ++out.checks;
  }
  return out;
}

}  // namespace jtest
