#include <gtest/gtest.h>

#include "support.hpp"

using namespace jointauction;
using jtest::make_sample;

TEST(SlotProfile, RejectsTiesAndOutOfRange) {
  EXPECT_NO_THROW(SlotProfile({0.5, 0.3, 0.15}));
  EXPECT_THROW(SlotProfile({0.5, 0.5}), Error);
  EXPECT_THROW(SlotProfile({1.0, 0.5}), Error);
  EXPECT_THROW(SlotProfile({0.5, 0.0}), Error);
  EXPECT_THROW(SlotProfile({0.3, 0.5}), Error);
  EXPECT_THROW(SlotProfile(std::vector<double>{}), Error);
}

TEST(SampleRelationship, DegenerateDensities) {
  Rng rng(1);
  EXPECT_EQ(sample_relationship(2, 2, 1.0, rng).bundle_count(), 4u);
  EXPECT_EQ(sample_relationship(2, 2, 0.0, rng).bundle_count(), 0u);
  EXPECT_THROW(sample_relationship(2, 2, 1.5, rng), Error);
  EXPECT_THROW(sample_relationship(0, 2, 0.5, rng), Error);
}

TEST(SampleRelationship, MeanBundleCount) {
  Rng rng(11);
  double total = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) total += sample_relationship(3, 5, 0.5, rng).bundle_count();
  EXPECT_NEAR(total / draws, 7.5, 0.1);
}

TEST(SampleRelationship, DeterministicUnderSeed) {
  Rng a(42), b(42);
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(sample_relationship(3, 5, 0.5, a), sample_relationship(3, 5, 0.5, b));
}

TEST(EnumerateBundles, HandExample) {
  JointRelation rel(2, 2);
  rel.set(0, 0, true);
  rel.set(1, 0, true);
  rel.set(1, 1, true);
  const auto idx = enumerate_bundles(rel);
  ASSERT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx.pairs[0], (BundlePair{0, 0}));
  EXPECT_EQ(idx.pairs[1], (BundlePair{1, 0}));
  EXPECT_EQ(idx.pairs[2], (BundlePair{1, 1}));
  EXPECT_EQ(idx.store_membership[0], (std::vector<std::size_t>{0}));
  EXPECT_EQ(idx.store_membership[1], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(idx.brand_membership[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(idx.brand_membership[1], (std::vector<std::size_t>{2}));
}

TEST(EnumerateBundles, DiagonalAndEmpty) {
  JointRelation diag(2, 2);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  const auto idx = enumerate_bundles(diag);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx.pairs[0], (BundlePair{0, 0}));
  EXPECT_EQ(idx.pairs[1], (BundlePair{1, 1}));
  EXPECT_EQ(enumerate_bundles(JointRelation(2, 3)).size(), 0u);
}

TEST(EnumerateBundles, MembershipConsistentOnRandomRelations) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rel = sample_relationship(4, 5, 0.4, rng);
    const auto idx = enumerate_bundles(rel);
    EXPECT_EQ(idx.size(), rel.bundle_count());
    for (std::size_t q = 0; q < idx.size(); ++q) {
      const auto& sm = idx.store_membership[idx.pairs[q].store];
      const auto& bm = idx.brand_membership[idx.pairs[q].brand];
      EXPECT_NE(std::find(sm.begin(), sm.end(), q), sm.end());
      EXPECT_NE(std::find(bm.begin(), bm.end(), q), bm.end());
      if (q > 0) {
        const auto& p = idx.pairs[q - 1];
        const auto& c = idx.pairs[q];
        EXPECT_TRUE(p.store < c.store || (p.store == c.store && p.brand < c.brand));
      }
    }
  }
}

TEST(SampleValues, UniformMean) {
  Rng rng(5);
  double sum = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) sum += draw_value(DistributionSpec::uniform(), rng);
  EXPECT_NEAR(sum / draws, 0.5, 0.002);
}

TEST(SampleValues, TruncatedNormalMeanAndSupport) {
  Rng rng(6);
  const auto d = DistributionSpec::normal(0.5, 0.0256);
  double sum = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const double x = draw_value(d, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
    sum += x;
  }
  EXPECT_NEAR(sum / draws, 0.5, 0.002);
}

TEST(SampleValues, TruncatedLognormalSupport) {
  Rng rng(7);
  const auto d = DistributionSpec::lognormal(0.1, 1.44);
  for (int i = 0; i < 1000000; ++i) {
    const double x = draw_value(d, rng);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
  }
}

TEST(SampleValues, ProfileShape) {
  Rng rng(8);
  const auto p = sample_values(DistributionSpec::uniform(), 3, 5, rng);
  EXPECT_EQ(p.stores.size(), 3u);
  EXPECT_EQ(p.brands.size(), 5u);
}

TEST(ExpectedBids, Examples) {
  const auto e = expected_bids(SlotProfile({0.5, 0.3}), Profile{{0.8}, {0.0}});
  EXPECT_NEAR(e[0], 0.40, 1e-15);
  EXPECT_NEAR(e[1], 0.24, 1e-15);
  EXPECT_EQ(e[2], 0.0);
  EXPECT_EQ(e[3], 0.0);
  const auto unit = expected_bids(SlotProfile({0.7}), Profile{{0.2}, {0.3, 1.0}});
  EXPECT_DOUBLE_EQ(unit[2], 0.7);
}

TEST(ExpectedBids, LinearInBids) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto slots = jtest::random_slots(3, rng);
    const auto b = sample_values(DistributionSpec::uniform(), 3, 4, rng);
    const double c = 3.0 * u(rng);
    Profile scaled = b;
    for (std::size_t t = 0; t < scaled.bidders(); ++t) scaled[t] *= c;
    const auto e = expected_bids(slots, b), es = expected_bids(slots, scaled);
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(es[i], c * e[i], 1e-12);
  }
}

TEST(ZeroPad, PartnerlessStoreZeroed) {
  auto s = make_sample({0.5}, {{1, 0}, {0, 1}, {0, 0}}, {0.5, 0.6, 0.9}, {0.4, 0.3});
  const auto p = zero_pad_partnerless(s);
  EXPECT_EQ(p.bids.stores[2], 0.0);
  EXPECT_EQ(p.values->stores[2], 0.0);
  EXPECT_EQ(p.bids.stores[0], 0.5);
  EXPECT_EQ(p.bids.brands, s.bids.brands);
}

TEST(ZeroPad, IdentityWhenAllPartnered) {
  auto s = make_sample({0.5}, {{1, 0}, {1, 1}}, {0.5, 0.6}, {0.4, 0.3});
  EXPECT_EQ(zero_pad_partnerless(s), s);
}

TEST(ZeroPad, EmptyRelationZeroesEverything) {
  auto s = make_sample({0.5}, {{0, 0}, {0, 0}}, {0.5, 0.6}, {0.4, 0.3});
  const auto p = zero_pad_partnerless(s);
  for (std::size_t t = 0; t < p.bidders(); ++t) EXPECT_EQ(p.bids[t], 0.0);
}

TEST(ZeroPad, Idempotent) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    AuctionSample s;
    s.slots = SlotProfile({0.5, 0.3});
    s.relation = sample_relationship(3, 4, 0.3, rng);
    s.values = sample_values(DistributionSpec::uniform(), 3, 4, rng);
    s.bids = *s.values;
    const auto once = zero_pad_partnerless(s);
    EXPECT_EQ(zero_pad_partnerless(once), once);
  }
}

TEST(Utility, Examples) {
  const SlotProfile a({0.5, 0.3});
  const std::vector<double> first{1.0, 0.0}, none{0.0, 0.0};
  EXPECT_NEAR(utility(1.0, first, a, 0.2), 0.3, 1e-15);
  EXPECT_NEAR(utility(1.0, first, a, 0.5), 0.0, 1e-15);
  EXPECT_EQ(utility(1.0, none, a, 0.0), 0.0);
}

TEST(BatchMetrics, HandExample) {
  auto s = make_sample({0.5}, {{1}}, {0.8}, {0.6});
  MechanismOutcome out;
  out.bundle_alloc = Grid(1, 2);
  out.bundle_alloc(0, 0) = 1.0;
  out.bidder_alloc = Grid(2, 1);
  out.bidder_alloc(0, 0) = out.bidder_alloc(1, 0) = 1.0;
  out.payments = {0.2, 0.1};
  std::vector<MechanismOutcome> outs{out};
  std::vector<AuctionSample> samples{s};
  const auto m = batch_metrics(outs, samples);
  EXPECT_NEAR(m.rev, 0.3, 1e-12);
  EXPECT_NEAR(m.sw, 0.7, 1e-12);

  outs.push_back(out);
  samples.push_back(s);
  const auto twice = batch_metrics(outs, samples);
  EXPECT_NEAR(twice.rev, m.rev, 1e-15);
  EXPECT_NEAR(twice.sw, m.sw, 1e-15);
}

TEST(BatchMetrics, ZeroOutcomeAndMismatch) {
  auto s = make_sample({0.5}, {{1}}, {0.8}, {0.6});
  MechanismOutcome out;
  out.bundle_alloc = Grid(1, 2);
  out.bidder_alloc = Grid(2, 1);
  out.payments = {0.0, 0.0};
  std::vector<MechanismOutcome> outs{out};
  std::vector<AuctionSample> samples{s};
  const auto m = batch_metrics(outs, samples);
  EXPECT_EQ(m.rev, 0.0);
  EXPECT_EQ(m.sw, 0.0);
  samples.push_back(s);
  EXPECT_THROW(batch_metrics(outs, samples), Error);
}

TEST(BatchMetrics, RevenueBelowWelfareForIrMechanism) {
  Rng rng(12);
  std::vector<AuctionSample> samples;
  std::vector<MechanismOutcome> outs;
  for (int i = 0; i < 2000; ++i) {
    samples.push_back(sample_auction(SlotProfile({0.5, 0.3, 0.15}), 3, 5, 0.5,
                                     DistributionSpec::uniform(), rng));
    outs.push_back(vcg_joint(samples.back()));
  }
  const auto m = batch_metrics(outs, samples);
  EXPECT_LE(m.rev, m.sw + 1e-9);
}

TEST(MechanismOutcome, BidderRowsBoundedBySlotColumns) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = sample_auction(SlotProfile({0.5, 0.3, 0.15}), 3, 5, 0.6,
                                  DistributionSpec::uniform(), rng);
    EXPECT_EQ(check_outcome(vcg_joint(s)), "");
    EXPECT_EQ(check_outcome(gsp_joint(s)), "");
  }
}
