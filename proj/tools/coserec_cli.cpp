#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "coserec/checkpoint.hpp"
#include "coserec/config.hpp"
#include "coserec/corpus.hpp"
#include "coserec/error.hpp"
#include "coserec/evaluator.hpp"
#include "coserec/experiments.hpp"
#include "coserec/synthetic.hpp"
#include "coserec/trainer.hpp"

namespace fs = std::filesystem;
using namespace coserec;

namespace {

constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<std::string> plan;
  std::vector<double> fractions;
  std::vector<double> noise;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration file");
  cmd->add_option("--seed", o.seed, "Training seed (overrides train.seed)");
  cmd->add_option("--data", o.data, "Data file (overrides data.path)");
  cmd->add_option("--out", o.out, "Output directory (overrides data.output)");
  cmd->add_option("--set", o.sets, "Extra section.key=value override")->take_all();
}

config::RunConfig resolve(const Overrides& o) {
  config::RunConfig cfg = o.config.empty() ? config::RunConfig{} : config::load_config(o.config);
  for (const auto& entry : o.sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + entry + "'");
    config::set_value(cfg, entry.substr(0, eq), entry.substr(eq + 1));
  }
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.data) cfg.data = *o.data;
  if (o.out) cfg.output = *o.out;
  if (o.plan) cfg.plan = *o.plan;
  if (!o.fractions.empty()) cfg.grid.fractions = o.fractions;
  if (!o.noise.empty()) cfg.grid.noise_ratios = o.noise;
  cfg.validate();
  return cfg;
}

corpus::SequenceCorpus load_run_corpus(const config::RunConfig& cfg) {
  if (cfg.data_format == "synthetic") return synthetic::generate_corpus(cfg.synthetic);
  if (cfg.data_format == "prepared" || (cfg.data_format == "auto" && corpus::is_prepared_corpus(cfg.data))) {
    return corpus::load_corpus(cfg.data);
  }
  const auto format = corpus::parse_input_format(cfg.data_format == "auto" ? "tsv" : cfg.data_format);
  return corpus::build_corpus(corpus::apply_k_core(corpus::load_interactions(cfg.data, format), cfg.k_core));
}

void print_stats(const corpus::CorpusStats& s, std::ostream& out) {
  out << std::left << std::setw(10) << "#users" << std::setw(10) << "#items" << std::setw(12)
      << "#actions" << std::setw(12) << "avg.length" << "sparsity\n";
  out << std::setw(10) << s.users << std::setw(10) << s.items << std::setw(12) << s.actions
      << std::setw(12) << std::fixed << std::setprecision(1) << s.average_length
      << std::setprecision(2) << s.sparsity * 100.0 << "%\n";
  out.unsetf(std::ios::floatfield);
}

fs::path prepare_output(const config::RunConfig& cfg) {
  fs::create_directories(cfg.output);
  std::ofstream echo(cfg.output / "config.echo");
  config::write_config(cfg, echo);
  return cfg.output;
}

void write_reports(const fs::path& dir, const std::vector<evaluator::MetricReport>& reports) {
  std::ofstream csv(dir / "metrics.csv");
  evaluator::write_metrics_csv(csv, reports);
  evaluator::print_metrics_table(std::cout, reports);
}

void print_epoch(const trainer::EpochRecord& r) {
  std::cerr << "epoch " << r.epoch << " [" << r.stage << "] rec=" << r.rec_loss << " ssl=" << r.ssl_loss;
  if (r.validation) std::cerr << " val ndcg@10=" << r.validation->ndcg_at(10);
  std::cerr << '\n';
}

int cmd_prepare(const std::string& input, const std::string& output, const std::string& format, int k) {
  if (!fs::exists(input)) throw ConfigError("data file " + input + " does not exist");
  const auto log = corpus::load_interactions(input, corpus::parse_input_format(format));
  const auto corpus = corpus::build_corpus(corpus::apply_k_core(log, k));
  if (const auto parent = fs::path(output).parent_path(); !parent.empty()) fs::create_directories(parent);
  corpus::save_corpus(corpus, fs::path(output));
  print_stats(corpus.stats(), std::cout);
  return 0;
}

int cmd_synth(const Overrides& o, const std::string& output) {
  const auto cfg = resolve(o);
  std::ofstream out(output);
  if (!out) throw Error("cannot write " + output);
  synthetic::write_tsv(synthetic::generate(cfg.synthetic), out);
  return 0;
}

int cmd_train(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto data = load_run_corpus(cfg);
  const auto dir = prepare_output(cfg);
  trainer::TrainHooks hooks;
  hooks.on_epoch = print_epoch;
  hooks.checkpoint_dir = dir / "checkpoints";
  const auto setup = cfg.setup();
  const auto result = trainer::run_training(data, setup.encoder, setup.augment, setup.train, hooks);
  {
    std::ofstream log(dir / "train_log.csv");
    result.log.write_csv(log);
    std::ofstream timing(dir / "timing.csv");
    result.log.write_timing_csv(timing);
  }
  std::cout << "run: " << result.log.label << ", best epoch " << result.log.best_epoch << ", stopped at "
            << result.log.stopped_epoch << '\n';
  std::vector<evaluator::MetricReport> reports;
  const evaluator::EvalOptions options{cfg.train.filter_history};
  for (auto split : {evaluator::Split::Validation, evaluator::Split::Test}) {
    auto report = evaluator::evaluate(result.model, data, split, options);
    report.condition = {{"model", result.log.label}, {"split", evaluator::to_string(split)},
                        {"seed", std::to_string(cfg.train.seed)}};
    reports.push_back(std::move(report));
  }
  write_reports(dir, reports);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const Overrides& o, const std::string& split_name,
                 bool filter_history) {
  auto cfg = config::RunConfig{};
  if (!o.config.empty()) cfg = config::load_config(o.config);
  if (o.data) cfg.data = *o.data;
  if (o.out) cfg.output = *o.out;
  cfg.validate();
  const auto split = evaluator::parse_split(split_name);
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint " + checkpoint + " does not exist");
  const auto data = load_run_corpus(cfg);
  const auto ck = load_checkpoint(checkpoint);
  if (ck.encoder.item_count != data.item_count()) {
    throw InvalidCorpusError("checkpoint vocabulary (" + std::to_string(ck.encoder.item_count) +
                             " items) does not match the corpus (" + std::to_string(data.item_count()) + ")");
  }
  const encoder::Encoder<float> model(ck.encoder, ck.parameters);
  auto report = evaluator::evaluate(model, data, split, {filter_history || cfg.train.filter_history});
  report.condition = {{"checkpoint", fs::path(checkpoint).filename().string()},
                      {"split", evaluator::to_string(split)}};
  std::vector<evaluator::MetricReport> reports{report};
  if (o.out) {
    fs::create_directories(cfg.output);
    std::ofstream csv(cfg.output / "metrics.csv");
    evaluator::write_metrics_csv(csv, reports);
  }
  evaluator::print_metrics_table(std::cout, reports);
  return 0;
}

experiments::RunCallback announce() {
  return [](const std::string& name, const trainer::TrainLog& log) {
    std::cerr << "finished " << name << " (" << log.label << "), best epoch " << log.best_epoch << '\n';
  };
}

int cmd_robustness(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto data = load_run_corpus(cfg);
  const auto dir = prepare_output(cfg);
  write_reports(dir, experiments::robustness_suite(data, cfg.setup(), cfg.grid, announce()));
  return 0;
}

int cmd_ablate(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto plan = experiments::parse_ablation_plan(cfg.plan);
  const auto data = load_run_corpus(cfg);
  const auto dir = prepare_output(cfg);
  write_reports(dir, experiments::ablation_suite(data, cfg.setup(), plan, announce()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive self-supervised sequential recommendation"};
  app.require_subcommand(1);

  std::string raw, prepared, format = "tsv";
  int k_core = 5;
  auto* prepare = app.add_subcommand("prepare", "Filter raw interactions and write a prepared corpus");
  prepare->add_option("--data", raw, "Raw interaction file")->required();
  prepare->add_option("--out", prepared, "Prepared corpus file")->required();
  prepare->add_option("--format", format, "tsv or sequences");
  prepare->add_option("--k-core", k_core, "Minimum interactions per user and item");

  Overrides synth_o, train_o, eval_o, robust_o, ablate_o;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a planted-cluster synthetic interaction file");
  add_common(synth, synth_o);
  synth->add_option("--file", synth_out, "Output TSV file")->required();

  auto* train = app.add_subcommand("train", "Train a model and write logs, checkpoints and metrics");
  add_common(train, train_o);

  std::string checkpoint, split = "test";
  bool filter_history = false;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint with full ranking");
  add_common(evaluate, eval_o);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--split", split, "validation or test");
  evaluate->add_flag("--filter-history", filter_history, "Exclude already seen items from ranking");

  auto* robustness = app.add_subcommand("robustness", "Training-fraction and test-noise experiments");
  add_common(robustness, robust_o);
  robustness->add_option("--fraction", robust_o.fractions, "Training fractions")->delimiter(',');
  robustness->add_option("--noise", robust_o.noise, "Test noise ratios")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate", "Augmentation operator ablations");
  add_common(ablate, ablate_o);
  ablate->add_option("--plan", ablate_o.plan, "leave-one-out, pairwise or short-set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*prepare) return cmd_prepare(raw, prepared, format, k_core);
    if (*synth) return cmd_synth(synth_o, synth_out);
    if (*train) return cmd_train(train_o);
    if (*evaluate) return cmd_evaluate(checkpoint, eval_o, split, filter_history);
    if (*robustness) return cmd_robustness(robust_o);
    if (*ablate) return cmd_ablate(ablate_o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationExit;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationExit;
  } catch (const EmptyInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationExit;
  } catch (const InvalidCorpusError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}
