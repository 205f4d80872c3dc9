#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "coserec/augment.hpp"
#include "coserec/corpus.hpp"
#include "coserec/encoder.hpp"
#include "coserec/evaluator.hpp"
#include "coserec/trainer.hpp"

namespace coserec::experiments {

/// Everything a single training run needs besides the data.
struct RunSetup {
  encoder::EncoderConfig encoder;
  augment::AugmentParams augment;
  trainer::TrainConfig train;
};

/// Called after every finished training run with its label and log.
using RunCallback = std::function<void(const std::string& label, const trainer::TrainLog& log)>;

struct RobustnessGrid {
  std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0};
  std::vector<double> noise_ratios = {0.1, 0.2, 0.3, 0.4, 0.5};
};

/// Trains one model per training fraction and evaluates it on the test split.
/// Noise ratios are evaluated on the full-data model with perturbed test
/// inputs. Every report carries fraction / noise / seed in its condition.
/// The (fraction 1, noise 0) report is always included.
std::vector<evaluator::MetricReport> robustness_suite(const corpus::SequenceCorpus& corpus,
                                                      const RunSetup& setup,
                                                      const RobustnessGrid& grid,
                                                      const RunCallback& on_run = {});

enum class AblationPlan { LeaveOneOut, PairWise, ShortSet };

std::string to_string(AblationPlan plan);
AblationPlan parse_ablation_plan(std::string_view text);

struct AblationVariant {
  std::string name;
  augment::AugmentParams augment;
};

/// leave-one-out: full set plus one run per removed operator (6 variants).
/// pair-wise: the 15 unordered operator pairs, same-operator pairs included.
/// short-set: alternative operator sets for short sequences.
std::vector<AblationVariant> ablation_variants(AblationPlan plan, const augment::AugmentParams& base);

/// One trained model and test report per variant.
std::vector<evaluator::MetricReport> ablation_suite(const corpus::SequenceCorpus& corpus,
                                                    const RunSetup& setup, AblationPlan plan,
                                                    const RunCallback& on_run = {});

}  // namespace coserec::experiments
