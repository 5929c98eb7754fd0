#pragma once

#include <cmath>
#include <random>
#include <string>

#include "jointauction/core.hpp"

namespace jointauction {

using Rng = std::mt19937_64;

enum class DistributionKind { uniform01, truncated_normal, truncated_lognormal };

/// Per-bidder value marginal on [0, 1]. For the normal kind the parameters
/// are (mean, variance); for the lognormal kind they are the mean and
/// variance of the underlying normal.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::uniform01;
  double location = 0.0;
  double spread = 1.0;

  static DistributionSpec uniform() { return {}; }
  static DistributionSpec normal(double mean, double variance) {
    return {DistributionKind::truncated_normal, mean, variance};
  }
  static DistributionSpec lognormal(double mu, double sigma_sq) {
    return {DistributionKind::truncated_lognormal, mu, sigma_sq};
  }

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

inline std::string to_string(const DistributionSpec& d) {
  switch (d.kind) {
    case DistributionKind::uniform01:
      return "uniform";
    case DistributionKind::truncated_normal:
      return "normal(" + std::to_string(d.location) + "," +
             std::to_string(d.spread) + ")";
    case DistributionKind::truncated_lognormal:
      return "lognormal(" + std::to_string(d.location) + "," +
             std::to_string(d.spread) + ")";
  }
  return "?";
}

/// One draw, rejection-sampled into [0, 1] for the truncated kinds.
inline double draw_value(const DistributionSpec& dist, Rng& rng) {
  switch (dist.kind) {
    case DistributionKind::uniform01: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      return u(rng);
    }
    case DistributionKind::truncated_normal: {
      std::normal_distribution<double> d(dist.location, std::sqrt(dist.spread));
      for (;;) {
        const double x = d(rng);
        if (x >= 0.0 && x <= 1.0) return x;
      }
    }
    case DistributionKind::truncated_lognormal: {
      std::lognormal_distribution<double> d(dist.location, std::sqrt(dist.spread));
      for (;;) {
        const double x = d(rng);
        if (x >= 0.0 && x <= 1.0) return x;
      }
    }
  }
  throw Error("unknown distribution kind");
}

inline JointRelation sample_relationship(std::size_t stores, std::size_t brands,
                                         double density, Rng& rng) {
  if (stores == 0 || brands == 0) throw Error("relation needs m, n >= 1");
  if (!(density >= 0.0 && density <= 1.0))
    throw Error("relation density must lie in [0, 1]");
  JointRelation rel(stores, brands);
  std::bernoulli_distribution coin(density);
  for (std::size_t i = 0; i < stores; ++i)
    for (std::size_t j = 0; j < brands; ++j) rel.set(i, j, coin(rng));
  return rel;
}

inline Profile sample_values(const DistributionSpec& dist, std::size_t stores,
                             std::size_t brands, Rng& rng) {
  Profile p;
  p.stores.resize(stores);
  p.brands.resize(brands);
  for (auto& v : p.stores) v = draw_value(dist, rng);
  for (auto& v : p.brands) v = draw_value(dist, rng);
  return p;
}

/// A synthetic, already padded sample with truthful bids.
inline AuctionSample sample_auction(const SlotProfile& slots, std::size_t stores,
                                    std::size_t brands, double density,
                                    const DistributionSpec& dist, Rng& rng) {
  AuctionSample s;
  s.slots = slots;
  s.relation = sample_relationship(stores, brands, density, rng);
  s.values = sample_values(dist, stores, brands, rng);
  s.bids = *s.values;
  return zero_pad_partnerless(std::move(s));
}

inline std::vector<AuctionSample> sample_dataset(std::size_t count,
                                                 const SlotProfile& slots,
                                                 std::size_t stores,
                                                 std::size_t brands,
                                                 double density,
                                                 const DistributionSpec& dist,
                                                 Rng& rng) {
  std::vector<AuctionSample> out;
  out.reserve(count);
  for (std::size_t l = 0; l < count; ++l)
    out.push_back(sample_auction(slots, stores, brands, density, dist, rng));
  return out;
}

}  // namespace jointauction
