#pragma once

// Presets, dataset synthesis, end-to-end runs and their CSV reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointauction/checkpoint.hpp"
#include "jointauction/evaluator.hpp"
#include "jointauction/records.hpp"
#include "jointauction/sampling.hpp"
#include "jointauction/trainer.hpp"

namespace jointauction {

/// Learned mechanisms map to a bundle layout; exact ones are functions.
inline const std::vector<std::string>& known_mechanisms() {
  static const std::vector<std::string> names{"jregnet", "iregnet", "regretnet", "vcg", "gsp"};
  return names;
}

inline bool is_learned(const std::string& mech) {
  return mech == "jregnet" || mech == "iregnet" || mech == "regretnet";
}

inline BundleLayout layout_of(const std::string& mech) {
  if (mech == "jregnet") return BundleLayout::joint;
  if (mech == "iregnet") return BundleLayout::singletons;
  if (mech == "regretnet") return BundleLayout::stores;
  throw Error("not a learned mechanism: " + mech);
}

struct ExperimentConfig {
  std::string setting = "B";
  std::size_t stores = 3;
  std::size_t brands = 5;
  std::vector<double> ctrs{0.5, 0.3, 0.15};
  DistributionSpec distribution;
  double density = 0.5;
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::size_t> hidden{100, 100};
  Activation activation = Activation::tanh;
  std::size_t train_size = 640000;
  std::size_t test_size = 12800;
  std::size_t runs = 3;
  std::vector<std::string> mechanisms{"jregnet", "iregnet", "regretnet", "vcg", "gsp"};
  std::optional<std::filesystem::path> train_data;  // record files; synthesized when absent
  std::optional<std::filesystem::path> test_data;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;

  SlotProfile slots() const { return SlotProfile(ctrs); }

  ArchitectureSpec architecture(const std::string& mech) const {
    ArchitectureSpec a;
    a.stores = stores;
    a.brands = brands;
    a.slots = ctrs.size();
    a.layout = layout_of(mech);
    a.alloc_hidden = hidden;
    a.pay_hidden = hidden;
    a.activation = activation;
    a.validate();
    return a;
  }

  void validate() const {
    if (stores == 0 || brands == 0) throw Error("config: m and n must be >= 1");
    (void)slots();
    if (!(density >= 0.0 && density <= 1.0)) throw Error("config: density must lie in [0, 1]");
    if (runs == 0) throw Error("config: runs must be >= 1");
    for (const auto& m : mechanisms)
      if (std::find(known_mechanisms().begin(), known_mechanisms().end(), m) ==
          known_mechanisms().end())
        throw Error("config: unknown mechanism '" + m + "'");
    train.validate();
    eval.validate();
  }
};

inline const std::vector<std::string>& preset_ids() {
  static const std::vector<std::string> ids{"A",  "B",  "C",  "D",        "B1",          "B2",
                                            "B3", "D1", "D2", "D3", "B-normal", "B-lognormal",
                                            "real-shape"};
  return ids;
}

inline ExperimentConfig preset(const std::string& id) {
  ExperimentConfig c;
  c.setting = id;
  auto dims = [&](std::size_t m, std::size_t n, std::vector<double> a) {
    c.stores = m;
    c.brands = n;
    c.ctrs = std::move(a);
  };
  if (id == "A") dims(3, 4, {0.7});
  else if (id == "B") dims(3, 5, {0.5, 0.3, 0.15});
  else if (id == "C") dims(3, 5, {0.5, 0.3, 0.15, 0.1, 0.03});
  else if (id == "D") dims(4, 5, {0.5, 0.3, 0.15});
  else if (id == "B1") dims(3, 5, {0.4, 0.3, 0.15});
  else if (id == "B2") dims(3, 5, {0.5, 0.4, 0.15});
  else if (id == "B3") dims(3, 5, {0.5, 0.4, 0.25});
  else if (id == "D1") dims(4, 5, {0.5, 0.3});
  else if (id == "D2") dims(4, 5, {0.5, 0.3, 0.15, 0.1});
  else if (id == "D3") dims(4, 5, {0.5, 0.3, 0.15, 0.1, 0.03});
  else if (id == "B-normal") {
    dims(3, 5, {0.5, 0.3, 0.15});
    c.distribution = DistributionSpec::normal(0.5, 0.0256);
  } else if (id == "B-lognormal") {
    dims(3, 5, {0.5, 0.3, 0.15});
    c.distribution = DistributionSpec::lognormal(0.1, 1.44);
  } else if (id == "real-shape") {
    dims(10, 10, {0.5, 0.3, 0.15, 0.1, 0.03});
    c.density = 0.1;
    c.mechanisms = {"jregnet", "vcg", "gsp"};
  } else {
    throw Error("unknown setting '" + id + "'");
  }
  return c;
}

/// Shrinks the training set, the iteration count and the penalty period by
/// `factor` (0.1 turns 640k samples / 200k iterations into 64k / 20k).
inline void apply_scale(ExperimentConfig& c, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw Error("scale must lie in (0, 1]");
  auto shrink = [&](std::size_t x) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(x) * factor)));
  };
  c.train_size = std::max(shrink(c.train_size), c.train.batch_size);
  c.train.iterations = shrink(c.train.iterations);
  c.train.rho_period = shrink(c.train.rho_period);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return detail::splitmix(detail::splitmix(seed) ^ (stream * 0x9e3779b97f4a7c15ull));
}

enum class Split : std::uint64_t { train = 1, test = 2 };

inline std::vector<AuctionSample> synthesize(const ExperimentConfig& c, Split split,
                                             std::size_t count) {
  Rng rng(derive_seed(c.seed, static_cast<std::uint64_t>(split)));
  return sample_dataset(count, c.slots(), c.stores, c.brands, c.density, c.distribution, rng);
}

inline std::vector<AuctionSample> load_dataset(const std::filesystem::path& path,
                                               const ExperimentConfig& c) {
  auto res = ingest_log(path, c.stores, c.brands, c.ctrs.size());
  if (!res.skipped.empty())
    throw Error(path.string() + ":" + std::to_string(res.skipped.front().line) + ": " +
                res.skipped.front().reason);
  return std::move(res.samples);
}

inline std::vector<AuctionSample> dataset_for(const ExperimentConfig& c, Split split) {
  const auto& file = split == Split::train ? c.train_data : c.test_data;
  if (file) return load_dataset(*file, c);
  return synthesize(c, split, split == Split::train ? c.train_size : c.test_size);
}

struct ResultRow {
  std::string mechanism;
  std::string setting;
  std::string run;  // "1".."R" or "mean"
  double rev = 0.0;
  double sw = 0.0;
  std::optional<double> rgt;
  std::optional<double> ru;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

inline const char* kResultsHeader = "mechanism,setting,run,rev,sw,rgt,ru,n_samples,seed";

inline std::string format_row(const ResultRow& r) {
  auto num = [](std::optional<double> x) {
    if (!x) return std::string("—");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *x);
    return std::string(buf);
  };
  return r.mechanism + "," + r.setting + "," + r.run + "," + num(r.rev) + "," + num(r.sw) +
         "," + num(r.rgt) + "," + num(r.ru) + "," + std::to_string(r.n_samples) + "," +
         std::to_string(r.seed);
}

inline void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::string text = std::string(kResultsHeader) + "\n";
  for (const auto& r : rows) text += format_row(r) + "\n";
  detail::atomic_write(path, text);
}

inline std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kResultsHeader) throw Error(path.string() + ": not a results file");
  std::vector<ResultRow> rows;
  auto opt = [](std::string_view s) -> std::optional<double> {
    if (s == "—") return std::nullopt;
    return detail::parse_number(s);
  };
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 9) throw Error(path.string() + ":" + std::to_string(no) + ": expected 9 fields");
    ResultRow r;
    r.mechanism = f[0];
    r.setting = f[1];
    r.run = f[2];
    r.rev = detail::parse_number(f[3]);
    r.sw = detail::parse_number(f[4]);
    r.rgt = opt(f[5]);
    r.ru = opt(f[6]);
    r.n_samples = static_cast<std::size_t>(detail::parse_number(f[7]));
    r.seed = static_cast<std::uint64_t>(std::stoull(std::string(f[8])));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_history(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
  std::string text = "iteration,loss,rev,mean_rgt,max_rgt,lambda_norm\n";
  char buf[256];
  for (const auto& h : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(h.iteration), h.loss, h.rev, h.mean_rgt,
                  h.max_rgt, h.lambda_norm);
    text += buf;
  }
  detail::atomic_write(path, text);
}

/// Per-sample revenue, used for the paired t-test.
inline std::vector<double> per_sample_revenue(const OutcomeFunction& mech,
                                              std::span<const AuctionSample> samples) {
  std::vector<double> out;
  for (const auto& s : samples) {
    AuctionSample t = s;
    t.bids = s.truthful();
    double r = 0.0;
    for (double p : mech(t).payments) r += p;
    out.push_back(r);
  }
  return out;
}

inline std::vector<double> per_sample_revenue(const NetworkParams& params,
                                              std::span<const AuctionSample> samples) {
  const auto tr = forward(params, make_batch(samples, params.spec, true));
  const Eigen::VectorXd r = tr.payments.colwise().sum().transpose();
  return {r.data(), r.data() + r.size()};
}

struct SignificanceRow {
  std::string a, b;
  double mean_a = 0.0, mean_b = 0.0;
  TTestResult test;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;
  std::vector<SignificanceRow> significance;
  std::map<std::string, std::vector<NetworkParams>> models;  // per learned mechanism, per run
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains one learned mechanism with run seed `seed`.
inline TrainingState train_mechanism(const ExperimentConfig& c, const std::string& mech,
                                     std::span<const AuctionSample> train_set, std::uint64_t seed,
                                     const TrainObserver& observer = {}) {
  auto tc = c.train;
  tc.seed = seed;
  return train(c.architecture(mech), tc, train_set, observer);
}

inline ResultRow row_from(const EvalReport& r, const std::string& setting, const std::string& run) {
  ResultRow row;
  row.mechanism = r.mechanism;
  row.setting = setting;
  row.run = run;
  row.rev = r.metrics.rev;
  row.sw = r.metrics.sw;
  if (r.has_regret) {
    row.rgt = r.metrics.rgt;
    row.ru = r.metrics.ru;
  }
  row.n_samples = r.n_samples;
  row.seed = r.seed;
  return row;
}

/// Synthesizes or loads data, trains every requested learned mechanism
/// `runs` times, evaluates everything on one test set and writes results,
/// histories, checkpoints and a significance table under output_dir.
inline ExperimentReport run_experiment(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  c.validate();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  const auto test_set = dataset_for(c, Split::test);
  std::vector<AuctionSample> train_set;
  const bool any_learned = std::any_of(c.mechanisms.begin(), c.mechanisms.end(), is_learned);
  if (any_learned) train_set = dataset_for(c, Split::train);
  std::filesystem::create_directories(c.output_dir);

  ExperimentReport report;
  std::map<std::string, std::vector<double>> revenue_series;
  for (const auto& mech : c.mechanisms) {
    if (!is_learned(mech)) {
      say("evaluating " + mech);
      EvalReport r;
      r.mechanism = mech;
      r.n_samples = test_set.size();
      r.seed = c.seed;
      const OutcomeFunction fn = mech == "vcg" ? OutcomeFunction(vcg_joint) : OutcomeFunction(gsp_joint);
      r.metrics = outcome_metrics(fn, test_set);
      if (mech == "gsp") attach_regret(r, gsp_regret_enumeration(test_set, c.eval.beta_grid));
      report.rows.push_back(row_from(r, c.setting, "1"));
      revenue_series[mech] = per_sample_revenue(fn, test_set);
      continue;
    }
    std::vector<ResultRow> runs;
    std::vector<double> mean_series(test_set.size(), 0.0);
    for (std::size_t run = 1; run <= c.runs; ++run) {
      const std::uint64_t seed = c.seed + run - 1;
      say("training " + mech + " run " + std::to_string(run));
      const auto tag = mech + "_run" + std::to_string(run);
      auto state = train_mechanism(c, mech, train_set, seed, [&](const TrainingState&, const HistoryRow& h) {
        if (h.iteration % (c.train.log_every * 10) == 0)
          say(tag + " it=" + std::to_string(h.iteration) + " rev=" + std::to_string(h.rev) +
              " rgt=" + std::to_string(h.mean_rgt));
      });
      save_state(c.output_dir / (tag + ".ckpt"), state);
      write_history(c.output_dir / ("history_" + tag + ".csv"), state.history);
      say("evaluating " + tag);
      auto ec = c.eval;
      ec.seed = seed;
      const auto r = evaluate_network(mech, state.params, test_set, ec);
      runs.push_back(row_from(r, c.setting, std::to_string(run)));
      const auto series = per_sample_revenue(state.params, test_set);
      for (std::size_t l = 0; l < series.size(); ++l)
        mean_series[l] += series[l] / static_cast<double>(c.runs);
      report.models[mech].push_back(std::move(state.params));
    }
    ResultRow mean = runs.front();
    mean.run = "mean";
    mean.rev = mean.sw = 0.0;
    mean.rgt = mean.ru = 0.0;
    for (const auto& r : runs) {
      mean.rev += r.rev / static_cast<double>(runs.size());
      mean.sw += r.sw / static_cast<double>(runs.size());
      *mean.rgt += *r.rgt / static_cast<double>(runs.size());
      *mean.ru += *r.ru / static_cast<double>(runs.size());
    }
    mean.seed = c.seed;
    for (auto& r : runs) report.rows.push_back(std::move(r));
    report.rows.push_back(mean);
    revenue_series[mech] = std::move(mean_series);
  }

  if (revenue_series.count("jregnet") && test_set.size() >= 2) {
    const auto& a = revenue_series["jregnet"];
    for (const auto& [name, b] : revenue_series) {
      if (name == "jregnet") continue;
      SignificanceRow s{"jregnet", name, 0.0, 0.0, {}};
      for (std::size_t l = 0; l < a.size(); ++l) {
        s.mean_a += a[l] / static_cast<double>(a.size());
        s.mean_b += b[l] / static_cast<double>(b.size());
      }
      try {
        s.test = paired_t_test(a, b);
      } catch (const Error&) {
        s.test = {0.0, 1.0, a.size() - 1};
      }
      report.significance.push_back(s);
    }
  }

  write_results(c.output_dir / "results.csv", report.rows);
  std::string sig = "mechanism_a,mechanism_b,mean_rev_a,mean_rev_b,t,p,dof\n";
  char buf[256];
  for (const auto& s : report.significance) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6g,%zu\n", s.a.c_str(), s.b.c_str(),
                  s.mean_a, s.mean_b, s.test.t, s.test.p, s.test.dof);
    sig += buf;
  }
  detail::atomic_write(c.output_dir / "significance.csv", sig);
  return report;
}

}  // namespace jointauction
