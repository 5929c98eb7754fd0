#pragma once

// Training-free mechanisms for joint auctions: welfare-maximizing matching,
// Clarke-pivot VCG, a GSP variant, and the exhaustive oracles used to check
// them and everything else.

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>

#include "jointauction/core.hpp"

namespace jointauction {

struct Assignment {
  std::vector<std::optional<std::size_t>> slot_to_bundle;
  double welfare = 0.0;
};

/// Mechanisms are plain functions from a sample to an outcome.
using OutcomeFunction = std::function<MechanismOutcome(const AuctionSample&)>;

namespace detail {

inline std::vector<std::size_t> rank_by_weight(std::span<const double> weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return weights[a] > weights[b];
  });
  return order;
}

inline std::vector<double> bundle_weights(const BundleIndex& index,
                                          const Profile& bids) {
  std::vector<double> w(index.size());
  for (std::size_t q = 0; q < index.size(); ++q)
    w[q] = bids.stores[index.pairs[q].store] + bids.brands[index.pairs[q].brand];
  return w;
}

inline double best_welfare(std::span<const double> weights,
                           const SlotProfile& slots) {
  std::vector<double> w(weights.begin(), weights.end());
  std::sort(w.begin(), w.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t k = 0; k < slots.size() && k < w.size(); ++k)
    total += slots[k] * w[k];
  return total;
}

inline void enumerate_assignments(std::span<const double> weights,
                                  const SlotProfile& slots, std::size_t slot,
                                  std::vector<bool>& used,
                                  std::vector<std::optional<std::size_t>>& current,
                                  double welfare, Assignment& best) {
  if (slot == slots.size()) {
    if (welfare > best.welfare + 1e-12 ||
        best.slot_to_bundle.size() != slots.size()) {
      best.slot_to_bundle = current;
      best.welfare = welfare;
    }
    return;
  }
  current[slot].reset();
  enumerate_assignments(weights, slots, slot + 1, used, current, welfare, best);
  for (std::size_t q = 0; q < weights.size(); ++q) {
    if (used[q]) continue;
    used[q] = true;
    current[slot] = q;
    enumerate_assignments(weights, slots, slot + 1, used, current,
                          welfare + slots[slot] * weights[q], best);
    used[q] = false;
  }
  current[slot].reset();
}

}  // namespace detail

/// Greedy assignment for product-form weights alpha_k * w_q: bundles sorted
/// by weight (ties by lower index) fill slots in CTR order.
inline Assignment greedy_matching(std::span<const double> weights,
                                  const SlotProfile& slots) {
  Assignment a;
  a.slot_to_bundle.assign(slots.size(), std::nullopt);
  const auto order = detail::rank_by_weight(weights);
  for (std::size_t k = 0; k < slots.size() && k < order.size(); ++k) {
    a.slot_to_bundle[k] = order[k];
    a.welfare += slots[k] * weights[order[k]];
  }
  return a;
}

inline constexpr std::size_t kBruteForceMaxBundles = 8;
inline constexpr std::size_t kBruteForceMaxSlots = 5;

/// Exhaustive search over all injective partial maps slots -> bundles.
inline Assignment brute_force_matching(std::span<const double> weights,
                                       const SlotProfile& slots) {
  if (weights.size() > kBruteForceMaxBundles || slots.size() > kBruteForceMaxSlots)
    throw Error("brute_force_matching: instance exceeds enumeration bound");
  Assignment best;
  std::vector<bool> used(weights.size(), false);
  std::vector<std::optional<std::size_t>> current(slots.size());
  detail::enumerate_assignments(weights, slots, 0, used, current, 0.0, best);
  return best;
}

inline Assignment welfare_max_matching(const AuctionSample& sample) {
  const auto index = enumerate_bundles(sample.relation);
  return greedy_matching(detail::bundle_weights(index, sample.bids), sample.slots);
}

inline Assignment brute_force_matching(const AuctionSample& sample) {
  const auto index = enumerate_bundles(sample.relation);
  return brute_force_matching(detail::bundle_weights(index, sample.bids),
                              sample.slots);
}

/// Deterministic 0/1 outcome from an assignment; payments left at zero.
inline MechanismOutcome assignment_outcome(const Assignment& assignment,
                                           const BundleIndex& index,
                                           const AuctionSample& sample) {
  const std::size_t k_slots = sample.slots.size();
  const std::size_t m = sample.stores();
  MechanismOutcome out;
  out.bundle_alloc = Grid(index.size(), k_slots + 1);
  out.bidder_alloc = Grid(sample.bidders(), k_slots);
  out.payments.assign(sample.bidders(), 0.0);
  for (std::size_t q = 0; q < index.size(); ++q) out.bundle_alloc(q, k_slots) = 1.0;
  for (std::size_t k = 0; k < k_slots; ++k) {
    if (!assignment.slot_to_bundle[k]) continue;
    const std::size_t q = *assignment.slot_to_bundle[k];
    out.bundle_alloc(q, k) = 1.0;
    out.bundle_alloc(q, k_slots) = 0.0;
    out.bidder_alloc(index.pairs[q].store, k) += 1.0;
    out.bidder_alloc(m + index.pairs[q].brand, k) += 1.0;
  }
  return out;
}

/// VCG with Clarke pivot payments. A bidder's payment is the welfare the
/// others could reach without any bundle containing it, minus what the
/// others receive under the chosen assignment. Payments can be negative.
inline MechanismOutcome vcg_joint(const AuctionSample& sample) {
  sample.validate();
  const auto index = enumerate_bundles(sample.relation);
  const auto weights = detail::bundle_weights(index, sample.bids);
  const auto chosen = greedy_matching(weights, sample.slots);
  auto out = assignment_outcome(chosen, index, sample);

  const std::size_t m = sample.stores();
  std::vector<double> others;
  for (std::size_t t = 0; t < sample.bidders(); ++t) {
    const auto contains = [&](std::size_t q) {
      return t < m ? index.pairs[q].store == t : index.pairs[q].brand == t - m;
    };
    others.clear();
    for (std::size_t q = 0; q < index.size(); ++q)
      if (!contains(q)) others.push_back(weights[q]);
    const double counterfactual = detail::best_welfare(others, sample.slots);

    double others_now = 0.0;
    for (std::size_t k = 0; k < sample.slots.size(); ++k) {
      if (!chosen.slot_to_bundle[k]) continue;
      const std::size_t q = *chosen.slot_to_bundle[k];
      const double own = contains(q) ? sample.bids[t] : 0.0;
      others_now += sample.slots[k] * (weights[q] - own);
    }
    out.payments[t] = counterfactual - others_now;
  }
  return out;
}

/// GSP variant: bundles ranked by total bid, each pays the next total bid per
/// click, split between store and brand in proportion to their bids.
inline MechanismOutcome gsp_joint(const AuctionSample& sample) {
  sample.validate();
  const auto index = enumerate_bundles(sample.relation);
  const auto weights = detail::bundle_weights(index, sample.bids);
  const auto chosen = greedy_matching(weights, sample.slots);
  auto out = assignment_outcome(chosen, index, sample);
  const auto order = detail::rank_by_weight(weights);
  const std::size_t m = sample.stores();
  for (std::size_t k = 0; k < sample.slots.size() && k < order.size(); ++k) {
    const std::size_t q = order[k];
    const double price = k + 1 < order.size() ? weights[order[k + 1]] : 0.0;
    const double total = sample.slots[k] * price;
    const double bs = sample.bids.stores[index.pairs[q].store];
    const double bb = sample.bids.brands[index.pairs[q].brand];
    const double store_share = bs + bb > 0.0 ? bs / (bs + bb) : 0.5;
    out.payments[index.pairs[q].store] += total * store_share;
    out.payments[m + index.pairs[q].brand] += total * (1.0 - store_share);
  }
  return out;
}

/// Utility of `bidder` (at its true value) when it reports `report` and
/// everyone else reports truthfully.
inline double misreport_utility(const OutcomeFunction& mechanism,
                                const AuctionSample& sample, std::size_t bidder,
                                double report) {
  AuctionSample probe = sample;
  probe.bids = sample.truthful();
  probe.bids[bidder] = report;
  const auto out = mechanism(probe);
  return bidder_utility(out, bidder, sample.truthful()[bidder], sample.slots);
}

struct MisreportSearch {
  double best_report = 0.0;
  double gain = 0.0;
};

/// Grid search over `grid` equally spaced reports in [0, 1]; the gain is
/// relative to truthful reporting and floored at 0.
inline MisreportSearch brute_force_best_misreport(const OutcomeFunction& mechanism,
                                                  const AuctionSample& sample,
                                                  std::size_t bidder,
                                                  std::size_t grid) {
  if (grid < 2) throw Error("brute_force_best_misreport: grid must be >= 2");
  const double truthful =
      misreport_utility(mechanism, sample, bidder, sample.truthful()[bidder]);
  MisreportSearch best{sample.truthful()[bidder], 0.0};
  double best_u = truthful;
  for (std::size_t g = 0; g < grid; ++g) {
    const double report = static_cast<double>(g) / static_cast<double>(grid - 1);
    const double u = misreport_utility(mechanism, sample, bidder, report);
    if (u > best_u) {
      best_u = u;
      best.best_report = report;
    }
  }
  best.gain = std::max(0.0, best_u - truthful);
  return best;
}

}  // namespace jointauction
