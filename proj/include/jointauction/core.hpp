#pragma once

// Domain types of the joint advertising auction and the arithmetic every
// mechanism shares: bundle enumeration, expected-bid features, partnerless
// padding, quasi-linear utility and batch revenue / welfare.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jointauction {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMatrixTolerance = 1e-6;

/// Click-through rates of the K slots, strictly descending inside (0, 1).
class SlotProfile {
 public:
  SlotProfile() = default;
  explicit SlotProfile(std::vector<double> ctrs) : ctrs_(std::move(ctrs)) {
    if (ctrs_.empty()) throw Error("slot profile needs at least one slot");
    if (!(ctrs_.front() < 1.0) || !(ctrs_.back() > 0.0))
      throw Error("CTRs must lie strictly inside (0, 1)");
    for (std::size_t k = 1; k < ctrs_.size(); ++k)
      if (!(ctrs_[k - 1] > ctrs_[k]))
        throw Error("CTRs must be strictly descending");
  }

  std::size_t size() const { return ctrs_.size(); }
  double operator[](std::size_t k) const { return ctrs_[k]; }
  const std::vector<double>& values() const { return ctrs_; }

  friend bool operator==(const SlotProfile&, const SlotProfile&) = default;

 private:
  std::vector<double> ctrs_;
};

/// Binary m x n store/brand relationship matrix, row-major.
class JointRelation {
 public:
  JointRelation() = default;
  JointRelation(std::size_t stores, std::size_t brands)
      : stores_(stores), brands_(brands), cells_(stores * brands, 0) {}

  std::size_t stores() const { return stores_; }
  std::size_t brands() const { return brands_; }

  bool operator()(std::size_t i, std::size_t j) const {
    return cells_[i * brands_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool linked) {
    cells_[i * brands_ + j] = linked ? 1 : 0;
  }

  std::size_t bundle_count() const {
    std::size_t q = 0;
    for (auto c : cells_) q += c;
    return q;
  }

  friend bool operator==(const JointRelation&, const JointRelation&) = default;

 private:
  std::size_t stores_ = 0;
  std::size_t brands_ = 0;
  std::vector<unsigned char> cells_;
};

/// Per-click values (or bids) of every store followed by every brand.
struct Profile {
  std::vector<double> stores;
  std::vector<double> brands;

  std::size_t bidders() const { return stores.size() + brands.size(); }

  // Bidder t < m is store t, otherwise brand t - m.
  double operator[](std::size_t t) const {
    return t < stores.size() ? stores[t] : brands[t - stores.size()];
  }
  double& operator[](std::size_t t) {
    return t < stores.size() ? stores[t] : brands[t - stores.size()];
  }

  friend bool operator==(const Profile&, const Profile&) = default;
};

struct AuctionSample {
  SlotProfile slots;
  JointRelation relation;
  Profile bids;
  std::optional<Profile> values;  // absent for ingested logs

  std::size_t stores() const { return relation.stores(); }
  std::size_t brands() const { return relation.brands(); }
  std::size_t bidders() const { return stores() + brands(); }

  void validate() const {
    if (bids.stores.size() != stores() || bids.brands.size() != brands())
      throw Error("bid profile does not match relation dimensions");
    if (values && (values->stores.size() != stores() ||
                   values->brands.size() != brands()))
      throw Error("value profile does not match relation dimensions");
  }

  /// Values when present, otherwise bids (logs are treated as truthful).
  const Profile& truthful() const { return values ? *values : bids; }

  friend bool operator==(const AuctionSample&, const AuctionSample&) = default;
};

struct BundlePair {
  std::size_t store;
  std::size_t brand;
  friend bool operator==(const BundlePair&, const BundlePair&) = default;
};

/// Row-major enumeration of the 1-entries of a relation matrix with the
/// per-store and per-brand membership sets. Indices are 0-based.
struct BundleIndex {
  std::vector<BundlePair> pairs;
  std::vector<std::vector<std::size_t>> store_membership;
  std::vector<std::vector<std::size_t>> brand_membership;

  std::size_t size() const { return pairs.size(); }
};

inline BundleIndex enumerate_bundles(const JointRelation& relation) {
  BundleIndex index;
  index.store_membership.resize(relation.stores());
  index.brand_membership.resize(relation.brands());
  for (std::size_t i = 0; i < relation.stores(); ++i) {
    for (std::size_t j = 0; j < relation.brands(); ++j) {
      if (!relation(i, j)) continue;
      const std::size_t q = index.pairs.size();
      index.pairs.push_back({i, j});
      index.store_membership[i].push_back(q);
      index.brand_membership[j].push_back(q);
    }
  }
  return index;
}

/// Expected bids e_tk = alpha_k * b_t, laid out bidder-major (t * K + k).
inline std::vector<double> expected_bids(const SlotProfile& slots,
                                         const Profile& bids) {
  const std::size_t bidders = bids.bidders();
  const std::size_t k_slots = slots.size();
  std::vector<double> e(bidders * k_slots);
  for (std::size_t t = 0; t < bidders; ++t)
    for (std::size_t k = 0; k < k_slots; ++k)
      e[t * k_slots + k] = slots[k] * bids[t];
  return e;
}

/// Zeroes the bid (and value) of every advertiser without a partner.
inline AuctionSample zero_pad_partnerless(AuctionSample sample) {
  sample.validate();
  const auto& rel = sample.relation;
  for (std::size_t i = 0; i < rel.stores(); ++i) {
    bool partnered = false;
    for (std::size_t j = 0; j < rel.brands() && !partnered; ++j)
      partnered = rel(i, j);
    if (!partnered) {
      sample.bids.stores[i] = 0.0;
      if (sample.values) sample.values->stores[i] = 0.0;
    }
  }
  for (std::size_t j = 0; j < rel.brands(); ++j) {
    bool partnered = false;
    for (std::size_t i = 0; i < rel.stores() && !partnered; ++i)
      partnered = rel(i, j);
    if (!partnered) {
      sample.bids.brands[j] = 0.0;
      if (sample.values) sample.values->brands[j] = 0.0;
    }
  }
  return sample;
}

/// Dense row-major matrix used for allocation outcomes.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

/// A (Q x (K+1), last column = unallocated), S ((m+n) x K) and payments.
struct MechanismOutcome {
  Grid bundle_alloc;
  Grid bidder_alloc;
  std::vector<double> payments;

  /// Expected CTR g_t = sum_k s_tk alpha_k.
  double expected_ctr(std::size_t bidder, const SlotProfile& slots) const {
    double g = 0.0;
    for (std::size_t k = 0; k < slots.size(); ++k)
      g += bidder_alloc(bidder, k) * slots[k];
    return g;
  }
};

/// Checks entry bounds and row / slot-column sums of A and S. Returns an
/// empty string when all hold, otherwise a description of the first breach.
inline std::string check_outcome(const MechanismOutcome& out,
                                 double eps = kMatrixTolerance) {
  const Grid& a = out.bundle_alloc;
  for (double x : a.data)
    if (!(x >= -eps && x <= 1.0 + eps)) return "bundle allocation out of [0,1]";
  for (std::size_t q = 0; q < a.rows; ++q) {
    double s = 0.0;
    for (double x : a.row(q)) s += x;
    if (s > 1.0 + eps) return "bundle row sum exceeds 1";
  }
  const std::size_t slot_cols = a.cols == 0 ? 0 : a.cols - 1;
  for (std::size_t k = 0; k < slot_cols; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < a.rows; ++q) s += a(q, k);
    if (s > 1.0 + eps) return "slot column sum exceeds 1";
  }
  for (double x : out.bidder_alloc.data)
    if (!(x >= -eps && x <= 1.0 + eps)) return "bidder allocation out of [0,1]";
  return {};
}

/// Quasi-linear utility v * sum_k alloc_k alpha_k - payment.
inline double utility(double value, std::span<const double> alloc_row,
                      const SlotProfile& slots, double payment) {
  double g = 0.0;
  for (std::size_t k = 0; k < slots.size(); ++k) g += alloc_row[k] * slots[k];
  return value * g - payment;
}

/// Utility of bidder t in an outcome given its true per-click value.
inline double bidder_utility(const MechanismOutcome& out, std::size_t bidder,
                             double value, const SlotProfile& slots) {
  return utility(value, out.bidder_alloc.row(bidder), slots,
                 out.payments[bidder]);
}

struct Metrics {
  double rev = 0.0;
  double sw = 0.0;
  double rgt = 0.0;
  double ru = 0.0;
  std::vector<double> per_bidder_regret;
  std::vector<double> truthful_utilities;  // mean truthful utility per bidder
};

/// Mean revenue and realized welfare of outcomes at the samples' values.
/// Regret fields are left zero; the evaluator fills them.
inline Metrics batch_metrics(std::span<const MechanismOutcome> outcomes,
                             std::span<const AuctionSample> samples) {
  if (outcomes.size() != samples.size())
    throw Error("batch_metrics: outcome and sample counts differ");
  Metrics m;
  if (samples.empty()) return m;
  const std::size_t bidders = samples.front().bidders();
  m.truthful_utilities.assign(bidders, 0.0);
  m.per_bidder_regret.assign(bidders, 0.0);
  for (std::size_t l = 0; l < samples.size(); ++l) {
    const auto& s = samples[l];
    const auto& out = outcomes[l];
    const Profile& v = s.truthful();
    for (std::size_t t = 0; t < s.bidders(); ++t) {
      const double g = out.expected_ctr(t, s.slots);
      m.rev += out.payments[t];
      m.sw += g * v[t];
      m.truthful_utilities[t] += g * v[t] - out.payments[t];
    }
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  m.rev *= inv;
  m.sw *= inv;
  for (double& u : m.truthful_utilities) u *= inv;
  return m;
}

}  // namespace jointauction
