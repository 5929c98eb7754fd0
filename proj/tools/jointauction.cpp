// Command line front end: gen-data, train, evaluate, run, ingest, plot.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "jointauction/jointauction.hpp"

namespace ja = jointauction;

namespace {

/// Flags shared by every verb; unset optionals leave the preset untouched.
struct Overrides {
  std::string setting = "B";
  double scale = 1.0;
  std::string out = "out";
  std::optional<std::size_t> stores, brands, train_size, test_size, runs;
  std::vector<double> ctrs;
  std::optional<std::string> distribution;
  std::optional<double> dist_a, dist_b, density;
  std::optional<std::size_t> iterations, batch, ascent_steps, multiplier_period, rho_period, log_every;
  std::optional<double> misreport_step, lr, rho, rho_increment;
  std::optional<std::string> optimizer, activation;
  std::vector<std::size_t> hidden;
  std::optional<std::size_t> restarts, eval_steps;
  std::optional<double> eval_step;
  std::vector<double> beta_grid;
  std::vector<std::string> mechanisms;
  std::optional<std::string> train_data, test_data;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App& app, Overrides& o, std::string& config) {
  app.add_option("--config", config, "key = value file; keys are long flag names, command line wins");
  app.add_option("--setting", o.setting, "preset id (A, B, C, D, B1-B3, D1-D3, B-normal, B-lognormal, real-shape)")
      ->capture_default_str();
  app.add_option("--scale", o.scale, "shrink train size, iterations and rho period")->capture_default_str();
  app.add_option("--out", o.out, "output directory, relative to $JOINTAUCTION_OUTPUT_ROOT if set")
      ->capture_default_str();
  app.add_option("--stores", o.stores);
  app.add_option("--brands", o.brands);
  app.add_option("--ctrs", o.ctrs)->delimiter(',');
  app.add_option("--distribution", o.distribution, "uniform | normal | lognormal");
  app.add_option("--dist-a", o.dist_a, "normal mean or lognormal mu");
  app.add_option("--dist-b", o.dist_b, "normal or lognormal variance");
  app.add_option("--density", o.density, "Bernoulli probability of each store-brand relation");
  app.add_option("--train-size", o.train_size);
  app.add_option("--test-size", o.test_size);
  app.add_option("--runs", o.runs);
  app.add_option("--iterations", o.iterations);
  app.add_option("--batch", o.batch);
  app.add_option("--ascent-steps", o.ascent_steps);
  app.add_option("--misreport-step", o.misreport_step);
  app.add_option("--lr", o.lr);
  app.add_option("--multiplier-period", o.multiplier_period);
  app.add_option("--rho", o.rho);
  app.add_option("--rho-increment", o.rho_increment);
  app.add_option("--rho-period", o.rho_period);
  app.add_option("--optimizer", o.optimizer, "adam | plain");
  app.add_option("--log-every", o.log_every);
  app.add_option("--hidden", o.hidden, "hidden widths, e.g. 100,100")->delimiter(',');
  app.add_option("--activation", o.activation, "tanh | relu");
  app.add_option("--restarts", o.restarts);
  app.add_option("--eval-steps", o.eval_steps);
  app.add_option("--eval-step", o.eval_step);
  app.add_option("--beta-grid", o.beta_grid)->delimiter(',');
  app.add_option("--mechanisms", o.mechanisms, "jregnet,iregnet,regretnet,vcg,gsp")->delimiter(',');
  app.add_option("--train-data", o.train_data, "record file used instead of synthesized training data");
  app.add_option("--test-data", o.test_data, "record file used instead of synthesized test data");
  app.add_option("--seed", o.seed);
}

std::filesystem::path output_dir(const std::string& out) {
  std::filesystem::path p(out);
  if (const char* root = std::getenv("JOINTAUCTION_OUTPUT_ROOT"); root && *root && p.is_relative())
    p = std::filesystem::path(root) / p;
  return p;
}

ja::ExperimentConfig build_config(const Overrides& o) {
  auto c = ja::preset(o.setting);
  c.output_dir = output_dir(o.out);
  if (o.scale != 1.0) ja::apply_scale(c, o.scale);
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(c.stores, o.stores);
  set(c.brands, o.brands);
  if (!o.ctrs.empty()) c.ctrs = o.ctrs;
  if (o.distribution) {
    if (*o.distribution == "uniform") c.distribution = ja::DistributionSpec::uniform();
    else if (*o.distribution == "normal") c.distribution = ja::DistributionSpec::normal(o.dist_a.value_or(0.5), o.dist_b.value_or(0.0256));
    else if (*o.distribution == "lognormal") c.distribution = ja::DistributionSpec::lognormal(o.dist_a.value_or(0.1), o.dist_b.value_or(1.44));
    else throw ja::Error("unknown distribution '" + *o.distribution + "'");
  }
  set(c.density, o.density);
  set(c.train_size, o.train_size);
  set(c.test_size, o.test_size);
  set(c.runs, o.runs);
  set(c.train.iterations, o.iterations);
  set(c.train.batch_size, o.batch);
  set(c.train.ascent_steps, o.ascent_steps);
  set(c.train.misreport_step, o.misreport_step);
  set(c.train.learning_rate, o.lr);
  set(c.train.multiplier_period, o.multiplier_period);
  set(c.train.rho_initial, o.rho);
  set(c.train.rho_increment, o.rho_increment);
  set(c.train.rho_period, o.rho_period);
  set(c.train.log_every, o.log_every);
  if (o.optimizer) {
    if (*o.optimizer == "adam") c.train.optimizer = ja::Optimizer::adam;
    else if (*o.optimizer == "plain") c.train.optimizer = ja::Optimizer::plain;
    else throw ja::Error("unknown optimizer '" + *o.optimizer + "'");
  }
  if (!o.hidden.empty()) c.hidden = o.hidden;
  if (o.activation) {
    if (*o.activation == "tanh") c.activation = ja::Activation::tanh;
    else if (*o.activation == "relu") c.activation = ja::Activation::relu;
    else throw ja::Error("unknown activation '" + *o.activation + "'");
  }
  set(c.eval.n_restarts, o.restarts);
  set(c.eval.ascent_steps, o.eval_steps);
  set(c.eval.step, o.eval_step);
  if (!o.beta_grid.empty()) c.eval.beta_grid = o.beta_grid;
  if (!o.mechanisms.empty()) c.mechanisms = o.mechanisms;
  if (o.train_data) c.train_data = *o.train_data;
  if (o.test_data) c.test_data = *o.test_data;
  if (o.seed) {
    c.seed = *o.seed;
    c.train.seed = *o.seed;
    c.eval.seed = *o.seed;
  }
  c.validate();
  return c;
}

/// Arguments for every key of `path` whose option the command line left
/// unset. Keys may sit at top level or in a [verb] section.
std::vector<std::string> config_arguments(const std::string& path, CLI::App& sub) {
  std::vector<std::string> out;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && item.parents.front() != sub.get_name()) continue;
    auto* opt = sub.get_option_no_throw("--" + item.name);
    if (!opt || item.name == "config") throw ja::Error(path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    out.push_back("--" + item.name);
    out.push_back(value);
  }
  return out;
}

void say(const std::string& s) { std::cerr << s << std::endl; }

int gen_data(const Overrides& o, const std::string& split, std::optional<std::size_t> count,
             std::optional<std::string> file) {
  const auto c = build_config(o);
  if (split != "train" && split != "test") throw ja::Error("--split must be train or test");
  const auto which = split == "train" ? ja::Split::train : ja::Split::test;
  const auto n = count.value_or(which == ja::Split::train ? c.train_size : c.test_size);
  const auto path = file ? std::filesystem::path(*file) : c.output_dir / (split + ".txt");
  ja::write_dataset(path, ja::synthesize(c, which, n));
  std::cout << "wrote " << n << " samples to " << path.string() << "\n";
  return 0;
}

int train_verb(const Overrides& o, const std::string& mech, std::optional<std::string> resume,
               std::size_t checkpoint_every) {
  const auto c = build_config(o);
  if (!ja::is_learned(mech)) throw ja::Error("train: '" + mech + "' is not a learned mechanism");
  const auto data = ja::dataset_for(c, ja::Split::train);
  const auto ckpt = c.output_dir / (mech + ".ckpt");
  auto state = resume ? ja::load_state(*resume) : ja::TrainingState::start(c.architecture(mech), c.train, data.size());
  if (state.params.spec != c.architecture(mech)) throw ja::Error("train: checkpoint architecture does not match the config");
  ja::train(state, c.train, data, [&](const ja::TrainingState& s, const ja::HistoryRow& h) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "it=%llu loss=%.5f rev=%.5f rgt=%.6f max_rgt=%.6f lambda=%.4f",
                  static_cast<unsigned long long>(h.iteration), h.loss, h.rev, h.mean_rgt, h.max_rgt, h.lambda_norm);
    say(buf);
    if (checkpoint_every && (h.iteration + 1) % checkpoint_every == 0) {
      auto snapshot = s;
      ++snapshot.iteration;  // the observer runs before the counter advances
      ja::save_state(ckpt, snapshot);
    }
  });
  ja::save_state(ckpt, state);
  ja::write_history(c.output_dir / ("history_" + mech + ".csv"), state.history);
  std::cout << "checkpoint " << ckpt.string() << "\n";
  return 0;
}

int evaluate_verb(const Overrides& o, const std::string& mech, std::optional<std::string> checkpoint) {
  const auto c = build_config(o);
  const auto test = ja::dataset_for(c, ja::Split::test);
  ja::EvalReport r;
  if (ja::is_learned(mech)) {
    const auto path = checkpoint ? std::filesystem::path(*checkpoint) : c.output_dir / (mech + ".ckpt");
    const auto params = ja::load_params(path);
    say("evaluating " + path.string() + " on " + std::to_string(test.size()) + " samples");
    r = ja::evaluate_network(mech, params, test, c.eval);
  } else {
    if (mech != "vcg" && mech != "gsp") throw ja::Error("unknown mechanism '" + mech + "'");
    const ja::OutcomeFunction fn = mech == "vcg" ? ja::OutcomeFunction(ja::vcg_joint) : ja::OutcomeFunction(ja::gsp_joint);
    r.mechanism = mech;
    r.n_samples = test.size();
    r.seed = c.seed;
    r.metrics = ja::outcome_metrics(fn, test);
    if (mech == "gsp") ja::attach_regret(r, ja::gsp_regret_enumeration(test, c.eval.beta_grid));
  }
  const auto row = ja::row_from(r, c.setting, "1");
  const auto path = c.output_dir / ("eval_" + mech + ".csv");
  ja::write_results(path, {row});
  std::cout << ja::kResultsHeader << "\n" << ja::format_row(row) << "\n";
  if (r.ru_skipped) say("ru skipped " + std::to_string(r.ru_skipped) + " samples with zero truthful utility");
  return 0;
}

int run_verb(const Overrides& o) {
  const auto c = build_config(o);
  const auto report = ja::run_experiment(c, say);
  ja::write_svg(c.output_dir / "revenue.svg", ja::revenue_chart(report.rows, {c.setting}, "Revenue, setting " + c.setting));
  std::cout << ja::kResultsHeader << "\n";
  for (const auto& r : report.rows) std::cout << ja::format_row(r) << "\n";
  return 0;
}

int ingest_verb(const Overrides& o, const std::string& input, std::optional<std::string> file) {
  const auto c = build_config(o);
  const auto res = ja::ingest_log(input, c.stores, c.brands, c.ctrs.size());
  for (const auto& s : res.skipped) say(input + ":" + std::to_string(s.line) + ": " + s.reason);
  const auto path = file ? std::filesystem::path(*file) : c.output_dir / "ingested.txt";
  ja::write_dataset(path, res.samples);
  std::cout << "ingested " << res.samples.size() << " records, skipped " << res.skipped.size()
            << ", wrote " << path.string() << "\n";
  return 0;
}

int plot_verb(const std::vector<std::string>& results, const std::vector<std::string>& settings,
              const std::string& title, const std::string& file) {
  std::vector<ja::ResultRow> rows;
  for (const auto& r : results) {
    auto part = ja::read_results(r);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto chart = ja::revenue_chart(rows, settings, title);
  const auto path = file.empty() ? output_dir("revenue.svg") : std::filesystem::path(file);
  ja::write_svg(path, chart);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint advertising auction lab"};
  app.require_subcommand(1);

  Overrides o;
  std::string config;
  auto* gen = app.add_subcommand("gen-data", "synthesize a dataset as record lines");
  add_common(*gen, o, config);
  std::string split = "test";
  std::optional<std::size_t> count;
  std::optional<std::string> data_file;
  gen->add_option("--split", split, "train | test")->capture_default_str();
  gen->add_option("--count", count, "number of samples (default: configured size)");
  gen->add_option("--file", data_file, "output file (default <out>/<split>.txt)");

  auto* tr = app.add_subcommand("train", "train one learned mechanism");
  add_common(*tr, o, config);
  std::string mech = "jregnet";
  std::optional<std::string> resume;
  std::size_t checkpoint_every = 0;
  tr->add_option("--mechanism", mech, "jregnet | iregnet | regretnet")->capture_default_str();
  tr->add_option("--resume", resume, "continue from a trainer checkpoint");
  tr->add_option("--checkpoint-every", checkpoint_every, "also checkpoint every N iterations (0 = end only)");

  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint or an exact mechanism");
  add_common(*ev, o, config);
  std::optional<std::string> checkpoint;
  ev->add_option("--mechanism", mech, "jregnet | iregnet | regretnet | vcg | gsp")->capture_default_str();
  ev->add_option("--checkpoint", checkpoint, "parameter or trainer checkpoint (default <out>/<mechanism>.ckpt)");

  auto* run = app.add_subcommand("run", "train, evaluate and report every configured mechanism");
  add_common(*run, o, config);

  auto* ing = app.add_subcommand("ingest", "normalize a record log to the configured m x n shape");
  add_common(*ing, o, config);
  std::string input;
  ing->add_option("--input", input, "log file")->required();
  ing->add_option("--file", data_file, "output file (default <out>/ingested.txt)");

  auto* pl = app.add_subcommand("plot", "revenue chart from one or more results CSVs");
  std::vector<std::string> results, settings;
  std::string title = "Revenue", svg;
  pl->add_option("--results", results, "results.csv files")->required()->delimiter(',');
  pl->add_option("--settings", settings, "x axis order, e.g. D1,D,D2,D3 (default: order of appearance)")->delimiter(',');
  pl->add_option("--title", title)->capture_default_str();
  pl->add_option("--file", svg, "output SVG (default revenue.svg under $JOINTAUCTION_OUTPUT_ROOT)");

  try {
    app.parse(argc, argv);
    if (!config.empty()) {
      auto extra = config_arguments(config, *app.get_subcommands().front());
      if (!extra.empty()) {
        std::vector<std::string> args(argv + 1, argv + argc);
        args.insert(args.end(), extra.begin(), extra.end());
        std::reverse(args.begin(), args.end());
        app.clear();
        app.parse(args);
      }
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }

  try {
    if (*gen) return gen_data(o, split, count, data_file);
    if (*tr) return train_verb(o, mech, resume, checkpoint_every);
    if (*ev) return evaluate_verb(o, mech, checkpoint);
    if (*run) return run_verb(o);
    if (*ing) return ingest_verb(o, input, data_file);
    if (*pl) return plot_verb(results, settings, title, svg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
