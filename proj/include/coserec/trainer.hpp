#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coserec/augment.hpp"
#include "coserec/checkpoint.hpp"
#include "coserec/corpus.hpp"
#include "coserec/correlation.hpp"
#include "coserec/encoder.hpp"
#include "coserec/evaluator.hpp"
#include "coserec/optimizer.hpp"

namespace coserec::trainer {

enum class Mode { MultiTask, TwoStage };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Which correlation feeds the informative operators.
enum class CorrelationPolicy {
  Memory,  // ItemCF-IUF throughout
  Model,   // embedding dot product throughout
  Hybrid,  // memory until switch_epoch, then hybrid
};

std::string to_string(CorrelationPolicy policy);
CorrelationPolicy parse_correlation_policy(std::string_view text);

struct TrainConfig {
  double lambda = 0.1;
  /// Epoch E after which the hybrid correlation replaces the memory one.
  int switch_epoch = 160;
  CorrelationPolicy correlation = CorrelationPolicy::Hybrid;
  int max_epochs = 300;
  std::size_t batch_size = 256;
  optimizer::AdamConfig adam;
  int patience = 40;
  std::uint64_t seed = 42;
  Mode mode = Mode::MultiTask;
  /// Contrastive-only epochs before fine-tuning in two-stage mode.
  int pretrain_epochs = 100;
  /// Validation metric driving early stopping and best-checkpoint selection.
  std::string stop_metric = "ndcg@20";
  std::size_t threads = 1;
  bool filter_history = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::string stage;  // "joint", "pretrain" or "finetune"
  std::string correlation;
  double rec_loss = 0.0;
  double ssl_loss = 0.0;
  double joint_loss = 0.0;
  std::optional<evaluator::MetricReport> validation;
  double seconds = 0.0;
};

struct TrainLog {
  std::string label;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = -1.0;
  int stopped_epoch = 0;
  std::int64_t total_steps = 0;
  /// Number of NT-Xent evaluations; stays 0 when the contrastive term is off.
  std::size_t contrastive_calls = 0;
  augment::AugmentStats augment_stats;

  /// Deterministic per-epoch CSV (no wall-clock).
  void write_csv(std::ostream& out) const;
  void write_timing_csv(std::ostream& out) const;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// When set, best.ckpt / last.ckpt (and diagnostic.ckpt on failure) land here.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct TrainResult {
  encoder::Encoder<float> model;  // best-validation parameters
  TrainLog log;
  Checkpoint best;
};

/// Joint next-item + contrastive training with early stopping on validation.
/// `encoder_config.item_count` and `augment.max_length` are taken from the
/// corpus / encoder respectively.
TrainResult train(const corpus::SequenceCorpus& corpus, encoder::EncoderConfig encoder_config,
                  augment::AugmentParams augment, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Contrastive pre-training for `pretrain_epochs`, then next-item fine-tuning
/// with a fresh optimizer and early stopping.
TrainResult train_two_stage(const corpus::SequenceCorpus& corpus,
                            encoder::EncoderConfig encoder_config, augment::AugmentParams augment,
                            const TrainConfig& config, const TrainHooks& hooks = {});

/// Dispatches on config.mode.
TrainResult run_training(const corpus::SequenceCorpus& corpus, encoder::EncoderConfig encoder_config,
                         augment::AugmentParams augment, const TrainConfig& config,
                         const TrainHooks& hooks = {});

}  // namespace coserec::trainer
