#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "support.hpp"

using namespace jointauction;
using jtest::make_sample;
using jtest::small_spec;

namespace {

std::vector<AuctionSample> dataset(std::size_t count, std::size_t m, std::size_t n,
                                   std::vector<double> ctrs, std::uint64_t seed) {
  Rng rng(seed);
  return sample_dataset(count, SlotProfile(std::move(ctrs)), m, n, 0.7,
                        DistributionSpec::uniform(), rng);
}

/// One store, one brand, one slot (alpha 0.7), zero weights: a = 0.5,
/// fractions 0.5, so u = 0.35 v - 0.175 b.
struct HandCase {
  ArchitectureSpec spec = small_spec(1, 1, 1, 4);
  NetworkParams params = NetworkParams::zeros(spec);
  std::vector<AuctionSample> samples{make_sample({0.7}, {{1}}, {0.8}, {0.6})};
  TrainBatch batch = make_train_batch(samples, spec);

  Eigen::MatrixXd misreports(double store_report) const {
    Eigen::MatrixXd m = batch.values;
    m(0, 0) = store_report;
    return m;
  }
};

/// u(b) = alpha S(b) (v - b/2) with S = sigmoid(c alpha b - d) built from a
/// ReLU identity chain; the maximizer solves c alpha (1 - S)(v - b/2) = 1/2.
struct ConcaveToy {
  static constexpr double alpha = 0.9, c = 20.0, d = 6.0, v = 0.9;
  ArchitectureSpec spec;
  NetworkParams params;

  ConcaveToy() {
    spec = small_spec(1, 1, 1, 1);
    spec.activation = Activation::relu;
    params = NetworkParams::zeros(spec);
    params.alloc[0].weight(0, 0) = c;  // feature 0 is alpha * b_store
    params.alloc[1].weight(0, 0) = 1.0;
    params.alloc[2].weight(2, 0) = 1.0;  // R logit of (bundle 0, slot 0)
    params.alloc[2].bias(2) = -d;
  }

  static double maximizer() {
    auto slope = [](double b) {
      const double s = 1.0 / (1.0 + std::exp(-(c * alpha * b - d)));
      return c * alpha * (1.0 - s) * (v - b / 2.0) - 0.5;
    };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) (slope(0.5 * (lo + hi)) > 0 ? lo : hi) = 0.5 * (lo + hi);
    return 0.5 * (lo + hi);
  }
};

}  // namespace

TEST(Minibatch, EpochPartition) {
  const auto spec = small_spec(1, 1, 1);
  TrainConfig cfg;
  auto state = TrainingState::start(spec, cfg, 256);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::set<std::size_t> seen;
    for (int b = 0; b < 2; ++b)
      for (auto i : next_minibatch(state, 256, 128)) EXPECT_TRUE(seen.insert(i).second);
    EXPECT_EQ(seen.size(), 256u);
  }
}

TEST(Minibatch, ReplayAndWholeSet) {
  const auto spec = small_spec(1, 1, 1);
  TrainConfig cfg;
  cfg.seed = 9;
  auto a = TrainingState::start(spec, cfg, 300);
  auto b = TrainingState::start(spec, cfg, 300);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(next_minibatch(a, 300, 128), next_minibatch(b, 300, 128));

  auto whole = TrainingState::start(spec, cfg, 64);
  auto idx = next_minibatch(whole, 64, 64);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(idx[i], i);
  EXPECT_THROW(next_minibatch(whole, 10, 64), Error);
}

TEST(MisreportAscent, ZeroStepsLeaveCache) {
  const auto spec = small_spec(2, 2, 1);
  Rng rng(1);
  const auto params = NetworkParams::initialize(spec, rng);
  const auto data = dataset(8, 2, 2, {0.6}, 2);
  const auto batch = make_train_batch(data, spec);
  Eigen::MatrixXd cache = Eigen::MatrixXd::Constant(4, 8, 0.3);
  const Eigen::MatrixXd before = cache;
  misreport_ascent(params, batch, cache, 0.1, 0);
  EXPECT_EQ(cache, before);
}

TEST(MisreportAscent, StaysInValueDomain) {
  const auto spec = small_spec(2, 3, 2);
  Rng rng(3);
  const auto params = jtest::random_params(spec, rng, 3.0);
  const auto data = dataset(16, 2, 3, {0.6, 0.2}, 4);
  const auto batch = make_train_batch(data, spec);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd cache = Eigen::MatrixXd::NullaryExpr(5, 16, [&] { return u(rng); });
  for (int round = 0; round < 10; ++round) {
    misreport_ascent(params, batch, cache, 5.0, 3);
    ASSERT_GE(cache.minCoeff(), 0.0);
    ASSERT_LE(cache.maxCoeff(), 1.0);
  }
}

/// Payments frozen near zero and a constant allocation: utility does not
/// depend on the report, so ascent cannot find any gain.
TEST(MisreportAscent, NoGainWhenReportIsIrrelevant) {
  const auto spec = small_spec(2, 2, 1);
  auto params = NetworkParams::zeros(spec);
  params.pay.back().bias.setConstant(-40.0);
  const auto data = dataset(32, 2, 2, {0.6}, 5);
  const auto batch = make_train_batch(data, spec);
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd cache = Eigen::MatrixXd::NullaryExpr(4, 32, [&] { return u(rng); });
  misreport_ascent(params, batch, cache, 0.1, 25);
  const auto est = estimate_regret(params, batch, cache);
  EXPECT_LT(est.gains.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MisreportAscent, ConvergesOnConcaveToy) {
  const ConcaveToy toy;
  const double best = ConcaveToy::maximizer();
  ASSERT_GT(best, 0.05);
  ASSERT_LT(best, 0.95);
  const std::vector<AuctionSample> s{make_sample({ConcaveToy::alpha}, {{1}}, {ConcaveToy::v}, {0.4})};
  const auto batch = make_train_batch(s, toy.spec);
  for (double start : {0.05, 0.3, 0.6, 1.0}) {
    Eigen::MatrixXd cache(2, 1);
    cache << start, 0.4;
    misreport_ascent(toy.params, batch, cache, 0.01, 200);
    EXPECT_NEAR(cache(0, 0), best, 1e-2) << "start " << start;
  }
}

TEST(EmpiricalRegret, TruthfulMisreportsGiveZero) {
  const auto spec = small_spec(2, 2, 1);
  Rng rng(7);
  const auto params = jtest::random_params(spec, rng, 2.0);
  const auto data = dataset(16, 2, 2, {0.6}, 8);
  const auto batch = make_train_batch(data, spec);
  EXPECT_EQ(empirical_regret(params, batch, batch.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EmpiricalRegret, HandBuiltGain) {
  const HandCase h;
  const auto r = empirical_regret(h.params, h.batch, h.misreports(0.4));
  EXPECT_NEAR(r(0), 0.07, 1e-12);
  EXPECT_EQ(r(1), 0.0);
  // Overbidding loses utility, which is floored at zero.
  EXPECT_EQ(empirical_regret(h.params, h.batch, h.misreports(1.0))(0), 0.0);
}

TEST(EmpiricalRegret, VcgRandomMisreportsNeverGain) {
  Rng rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    const auto s = sample_auction(SlotProfile({0.5, 0.3}), 2, 3, 0.6, DistributionSpec::uniform(), rng);
    for (std::size_t t = 0; t < s.bidders(); ++t) {
      const double truthful = misreport_utility(vcg_joint, s, t, s.truthful()[t]);
      for (int r = 0; r < 10; ++r)
        worst = std::max(worst, misreport_utility(vcg_joint, s, t, u(rng)) - truthful);
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Lagrangian, PenaltyArithmetic) {
  const HandCase h;
  const double rev = 0.175 * 0.8 + 0.175 * 0.6;
  const auto m = h.misreports(0.8 - 0.1 / 0.175);
  ASSERT_NEAR(empirical_regret(h.params, h.batch, m)(0), 0.1, 1e-12);
  Eigen::VectorXd lambdas(2);
  lambdas << 2.0, 0.0;
  EXPECT_NEAR(lagrangian(h.params, h.batch, lambdas, 4.0, m), -rev + 0.22, 1e-12);
  EXPECT_NEAR(lagrangian(h.params, h.batch, Eigen::VectorXd::Zero(2), 0.0, m), -rev, 1e-12);
  EXPECT_NEAR(lagrangian(h.params, h.batch, lambdas, 4.0, h.batch.values), -rev, 1e-12);
}

TEST(ParameterStep, ZeroLearningRateKeepsParams) {
  const auto spec = small_spec(2, 2, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  const auto data = dataset(16, 2, 2, {0.6}, 11);
  for (auto opt : {Optimizer::plain, Optimizer::adam}) {
    cfg.optimizer = opt;
    auto state = TrainingState::start(spec, cfg, 16);
    const auto before = state.params.flatten();
    const auto batch = make_train_batch(data, spec);
    parameter_step(state, batch, batch.values, cfg);
    EXPECT_EQ(state.params.flatten(), before);
  }
}

TEST(ParameterStep, Deterministic) {
  const auto spec = small_spec(2, 2, 1);
  TrainConfig cfg;
  const auto data = dataset(16, 2, 2, {0.6}, 12);
  const auto batch = make_train_batch(data, spec);
  auto a = TrainingState::start(spec, cfg, 16), b = TrainingState::start(spec, cfg, 16);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 16, 0.2);
  for (int i = 0; i < 3; ++i) {
    parameter_step(a, batch, m, cfg);
    parameter_step(b, batch, m, cfg);
  }
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
}

TEST(ParameterStep, GradientMatchesCentralDifferences) {
  const auto spec = small_spec(2, 2, 1, 8);
  Rng rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto params = jtest::random_params(spec, rng, 1.5);
    const auto data = dataset(6, 2, 2, {0.6}, 100 + static_cast<std::uint64_t>(trial));
    const auto batch = make_train_batch(data, spec);
    const Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(4, 6, [&] { return u(rng); });
    Eigen::VectorXd lambdas = Eigen::VectorXd::NullaryExpr(4, [&] { return 2.0 * u(rng); });
    const double rho = 3.0;
    const auto lg = lagrangian_gradient(params, batch, lambdas, rho, m);
    const Eigen::VectorXd dir = Eigen::VectorXd::NullaryExpr(
        static_cast<Eigen::Index>(params.parameter_count()), [&] { return normal(rng); });
    const double h = 1e-6;
    auto plus = params, minus = params;
    plus.assign(params.flatten() + h * dir);
    minus.assign(params.flatten() - h * dir);
    // Skip probes that cross the zero floor of a gain or a min() switch.
    const auto sign = [&](const NetworkParams& p) {
      const auto est = estimate_regret(p, batch, m);
      std::vector<char> sig = jtest::branch_signature(est.truthful_trace, 1);
      const auto mis = jtest::branch_signature(est.misreport_trace, 1);
      sig.insert(sig.end(), mis.begin(), mis.end());
      for (Eigen::Index i = 0; i < est.gains.size(); ++i) sig.push_back(est.gains(i) > 0.0);
      return sig;
    };
    const auto base = sign(params);
    if (sign(plus) != base || sign(minus) != base) continue;
    const double numeric = (lagrangian(plus, batch, lambdas, rho, m) -
                            lagrangian(minus, batch, lambdas, rho, m)) / (2 * h);
    worst = std::max(worst, jtest::relative_error(lg.grads.flatten().dot(dir), numeric));
    ++checked;
  }
  EXPECT_GE(checked, 40u);
  EXPECT_LT(worst, 1e-4);
}

TEST(ParameterStep, PenaltyFreeDirectionIsRevenueAscent) {
  const auto spec = small_spec(2, 2, 1);
  Rng rng(14);
  const auto params = jtest::random_params(spec, rng, 1.0);
  const auto data = dataset(8, 2, 2, {0.6}, 15);
  const auto batch = make_train_batch(data, spec);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 8, 0.1);
  const auto lg = lagrangian_gradient(params, batch, Eigen::VectorXd::Zero(4), 0.0, m);
  auto rev_grad = NetworkParams::zeros(spec);
  OutputGradient up;
  up.payments = Eigen::MatrixXd::Constant(4, 8, -1.0 / 8.0);
  backward(params, batch.truthful, forward(params, batch.truthful), up, &rev_grad, nullptr);
  EXPECT_LT((lg.grads.flatten() - rev_grad.flatten()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MultiplierStep, Arithmetic) {
  const HandCase h;
  TrainConfig cfg;
  cfg.multiplier_period = 10;
  TrainingState state;
  state.params = h.params;
  state.lambdas = Eigen::VectorXd::Ones(2);
  state.rho = 2.0;
  state.iteration = 20;
  const auto m = h.misreports(0.8 - 0.05 / 0.175);
  EXPECT_TRUE(multiplier_step(state, h.batch, m, cfg));
  EXPECT_NEAR(state.lambdas(0), 1.1, 1e-12);
  EXPECT_EQ(state.lambdas(1), 1.0);

  state.iteration = 21;
  EXPECT_FALSE(multiplier_step(state, h.batch, m, cfg));
  EXPECT_NEAR(state.lambdas(0), 1.1, 1e-12);

  state.iteration = 30;
  multiplier_step(state, h.batch, h.batch.values, cfg);
  EXPECT_NEAR(state.lambdas(0), 1.1, 1e-12);
}

TEST(MultiplierStep, NeverDecreases) {
  const auto spec = small_spec(2, 2, 1);
  Rng rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrainConfig cfg;
  cfg.multiplier_period = 1;
  const auto data = dataset(8, 2, 2, {0.6}, 17);
  const auto batch = make_train_batch(data, spec);
  TrainingState state;
  state.lambdas = Eigen::VectorXd::Zero(4);
  state.rho = 1.5;
  for (int i = 0; i < 50; ++i) {
    state.params = jtest::random_params(spec, rng, 2.0);
    const Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(4, 8, [&] { return u(rng); });
    const Eigen::VectorXd before = state.lambdas;
    multiplier_step(state, batch, m, cfg);
    ASSERT_TRUE(((state.lambdas - before).array() >= 0.0).all());
  }
}

TEST(Train, ZeroIterationsReturnInitialParams) {
  const auto spec = small_spec(2, 2, 1);
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.batch_size = 8;
  const auto data = dataset(16, 2, 2, {0.6}, 18);
  const auto state = train(spec, cfg, data);
  Rng rng(cfg.seed);
  EXPECT_EQ(state.params.flatten(), NetworkParams::initialize(spec, rng).flatten());
  EXPECT_TRUE(state.history.empty());
}

TEST(Train, CacheStaysInDomainAndIsDeterministic) {
  const auto spec = small_spec(2, 2, 1);
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 16;
  cfg.ascent_steps = 5;
  cfg.multiplier_period = 5;
  cfg.log_every = 1;
  const auto data = dataset(64, 2, 2, {0.6}, 19);
  const auto a = train(spec, cfg, data), b = train(spec, cfg, data);
  EXPECT_EQ(serialize(a), serialize(b));
  ASSERT_EQ(a.history.size(), 30u);
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  for (Eigen::Index i = 0; i < a.misreports.size(); ++i) {
    const double x = a.misreports.data()[i];
    ASSERT_TRUE(!std::isfinite(x) ? std::isnan(x) : (x >= 0.0 && x <= 1.0));
  }
}

TEST(Checkpoint, RoundTripAndResume) {
  const auto spec = small_spec(2, 2, 1, 8);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.ascent_steps = 3;
  cfg.multiplier_period = 4;
  cfg.rho_period = 10;
  cfg.log_every = 5;
  const auto data = dataset(48, 2, 2, {0.6}, 20);

  cfg.iterations = 40;
  const auto straight = train(spec, cfg, data);

  cfg.iterations = 17;
  auto half = train(spec, cfg, data);
  const auto dir = std::filesystem::temp_directory_path() / "jointauction_test_ckpt";
  std::filesystem::remove_all(dir);
  save_state(dir / "state.ckpt", half);
  auto resumed = load_state(dir / "state.ckpt");
  EXPECT_EQ(serialize(resumed), serialize(half));
  EXPECT_EQ(load_params(dir / "state.ckpt").checksum(), half.params.checksum());
  cfg.iterations = 40;
  train(resumed, cfg, data);
  // The interrupted run also logged its own last iteration.
  for (const auto& row : straight.history)
    EXPECT_TRUE(std::any_of(resumed.history.begin(), resumed.history.end(),
                            [&](const HistoryRow& r) { return r.iteration == row.iteration && r.loss == row.loss; }));
  auto a = resumed, b = straight;
  a.history.clear();
  b.history.clear();
  EXPECT_EQ(serialize(a), serialize(b));

  save_params(dir / "params.bin", straight.params);
  EXPECT_EQ(load_params(dir / "params.bin").flatten(), straight.params.flatten());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto spec = small_spec(1, 2, 1, 4);
  Rng rng(21);
  const auto bytes = serialize(NetworkParams::initialize(spec, rng));
  EXPECT_THROW(deserialize_params(bytes.substr(0, bytes.size() - 3)), Error);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_params(bad), Error);
  EXPECT_THROW(deserialize_state(bytes), Error);
}

// Pilot with this exact config: final minibatch mean regret 0.0028, rev 0.417.
// Under the default schedule (rho 1, H 100) regret is still 0.039 at T=2000.
TEST(Train, SmokeTwoByTwoOneSlot) {
  const auto spec = small_spec(2, 2, 1, 32);
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.batch_size = 64;
  cfg.rho_initial = 10.0;
  cfg.multiplier_period = 20;
  cfg.log_every = 250;
  const auto data = dataset(1024, 2, 2, {0.6}, 22);
  const auto state = train(spec, cfg, data);
  const auto& last = state.history.back();
  EXPECT_EQ(last.iteration, 1999u);
  EXPECT_LT(last.mean_rgt, 0.01);
  EXPECT_GT(last.rev, 0.0);
}
