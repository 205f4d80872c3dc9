#include "coserec/experiments.hpp"

#include <algorithm>
#include <sstream>

#include "coserec/error.hpp"

namespace coserec::experiments {

namespace {

std::string format_number(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

evaluator::MetricReport tagged(evaluator::MetricReport report, const std::string& label,
                               std::vector<std::pair<std::string, std::string>> condition,
                               std::uint64_t seed) {
  report.condition.emplace_back("model", label);
  for (auto& entry : condition) report.condition.push_back(std::move(entry));
  report.condition.emplace_back("seed", std::to_string(seed));
  return report;
}

trainer::TrainResult run(const corpus::SequenceCorpus& corpus, const RunSetup& setup,
                         const augment::AugmentParams& augment, const std::string& name,
                         const RunCallback& on_run) {
  auto result = trainer::run_training(corpus, setup.encoder, augment, setup.train);
  if (on_run) on_run(name, result.log);
  return result;
}

augment::OperatorSet without(const augment::OperatorSet& ops, augment::Operator removed) {
  augment::OperatorSet out;
  std::copy_if(ops.begin(), ops.end(), std::back_inserter(out),
               [removed](augment::Operator op) { return op != removed; });
  return out;
}

}  // namespace

std::vector<evaluator::MetricReport> robustness_suite(const corpus::SequenceCorpus& corpus,
                                                      const RunSetup& setup,
                                                      const RobustnessGrid& grid,
                                                      const RunCallback& on_run) {
  for (double f : grid.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("training fraction must be in (0, 1]");
  }
  for (double r : grid.noise_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("noise ratio must be in [0, 1]");
  }
  setup.train.validate();

  std::vector<double> fractions = grid.fractions;
  if (std::find(fractions.begin(), fractions.end(), 1.0) == fractions.end()) fractions.push_back(1.0);

  const std::uint64_t seed = setup.train.seed;
  const evaluator::EvalOptions options{setup.train.filter_history};
  std::vector<evaluator::MetricReport> reports;
  std::optional<encoder::Encoder<float>> full_model;
  std::string label;
  for (double f : fractions) {
    const auto data = f == 1.0 ? corpus : corpus::subsample_training(corpus, f, seed);
    const std::string name = "fraction=" + format_number(f);
    auto result = run(data, setup, setup.augment, name, on_run);
    label = result.log.label;
    reports.push_back(tagged(evaluator::evaluate(result.model, corpus, evaluator::Split::Test, options),
                             label, {{"fraction", format_number(f)}, {"noise", "0"}}, seed));
    if (f == 1.0) full_model = std::move(result.model);
  }
  for (double r : grid.noise_ratios) {
    if (r == 0.0) continue;
    const auto noisy = corpus::inject_test_noise(corpus, r, seed);
    reports.push_back(
        tagged(evaluator::evaluate(*full_model, noisy.corpus, evaluator::Split::Test, options), label,
               {{"fraction", "1"}, {"noise", format_number(r)}}, seed));
  }
  return reports;
}

std::string to_string(AblationPlan plan) {
  switch (plan) {
    case AblationPlan::LeaveOneOut:
      return "leave-one-out";
    case AblationPlan::PairWise:
      return "pairwise";
    case AblationPlan::ShortSet:
      return "short-set";
  }
  return "unknown";
}

AblationPlan parse_ablation_plan(std::string_view text) {
  if (text == "leave-one-out" || text == "loo") return AblationPlan::LeaveOneOut;
  if (text == "pairwise" || text == "pair-wise") return AblationPlan::PairWise;
  if (text == "short-set" || text == "shortset") return AblationPlan::ShortSet;
  throw ConfigError("unknown ablation plan '" + std::string(text) +
                    "' (leave-one-out, pairwise or short-set)");
}

std::vector<AblationVariant> ablation_variants(AblationPlan plan, const augment::AugmentParams& base) {
  using augment::Operator;
  std::vector<AblationVariant> variants;
  switch (plan) {
    case AblationPlan::LeaveOneOut: {
      variants.push_back({"full", base});
      for (Operator op : augment::kAllOperators) {
        AblationVariant v{std::string("without-") + augment::to_char(op), base};
        v.augment.short_ops = without(base.short_ops, op);
        v.augment.long_ops = without(base.long_ops, op);
        if (v.augment.short_ops.empty()) v.augment.short_ops = v.augment.long_ops;
        variants.push_back(std::move(v));
      }
      break;
    }
    case AblationPlan::PairWise: {
      const auto& ops = augment::kAllOperators;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        for (std::size_t j = i; j < ops.size(); ++j) {
          AblationVariant v{std::string("pair-") + augment::to_char(ops[i]) + augment::to_char(ops[j]), base};
          v.augment.fixed_pair = std::make_pair(ops[i], ops[j]);
          variants.push_back(std::move(v));
        }
      }
      break;
    }
    case AblationPlan::ShortSet: {
      for (std::string_view letters : {"SI", "SM", "IM", "SIM", "SIMRC"}) {
        AblationVariant v{"short-" + std::string(letters), base};
        v.augment.short_ops = augment::parse_operator_set(letters);
        variants.push_back(std::move(v));
      }
      break;
    }
  }
  return variants;
}

std::vector<evaluator::MetricReport> ablation_suite(const corpus::SequenceCorpus& corpus,
                                                    const RunSetup& setup, AblationPlan plan,
                                                    const RunCallback& on_run) {
  setup.train.validate();
  const auto variants = ablation_variants(plan, setup.augment);
  for (const auto& v : variants) v.augment.validate();

  const evaluator::EvalOptions options{setup.train.filter_history};
  std::vector<evaluator::MetricReport> reports;
  for (const auto& v : variants) {
    auto result = run(corpus, setup, v.augment, v.name, on_run);
    const std::string ops = v.augment.fixed_pair
                                ? std::string{augment::to_char(v.augment.fixed_pair->first),
                                              augment::to_char(v.augment.fixed_pair->second)}
                                : augment::to_string(v.augment.short_ops) + "/" +
                                      augment::to_string(v.augment.long_ops);
    reports.push_back(tagged(evaluator::evaluate(result.model, corpus, evaluator::Split::Test, options),
                             result.log.label,
                             {{"plan", to_string(plan)}, {"variant", v.name}, {"ops", ops}},
                             setup.train.seed));
  }
  return reports;
}

}  // namespace coserec::experiments
