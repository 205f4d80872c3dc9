#include "coserec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "coserec/error.hpp"
#include "coserec/objectives.hpp"

namespace coserec::trainer {

using encoder::Matrix;
using encoder::Parameters;
using Model = encoder::Encoder<float>;

std::string to_string(Mode mode) { return mode == Mode::MultiTask ? "multi-task" : "two-stage"; }

Mode parse_mode(std::string_view text) {
  if (text == "multi-task" || text == "multitask" || text == "joint") return Mode::MultiTask;
  if (text == "two-stage" || text == "twostage") return Mode::TwoStage;
  throw ConfigError("unknown training mode '" + std::string(text) + "'");
}

std::string to_string(CorrelationPolicy policy) {
  switch (policy) {
    case CorrelationPolicy::Memory:
      return "memory";
    case CorrelationPolicy::Model:
      return "model";
    case CorrelationPolicy::Hybrid:
      return "hybrid";
  }
  return "unknown";
}

CorrelationPolicy parse_correlation_policy(std::string_view text) {
  if (text == "memory") return CorrelationPolicy::Memory;
  if (text == "model") return CorrelationPolicy::Model;
  if (text == "hybrid") return CorrelationPolicy::Hybrid;
  throw ConfigError("unknown correlation '" + std::string(text) + "' (memory, model or hybrid)");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (switch_epoch < 0) throw ConfigError("switch_epoch (E) must be >= 0");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  adam.validate();
  evaluator::MetricReport probe;
  probe.metric(stop_metric);
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,stage,correlation,L_rec,L_ssl,L_joint";
  for (int k : evaluator::kCutoffs) out << ",val_hr@" << k;
  for (int k : evaluator::kCutoffs) out << ",val_ndcg@" << k;
  out << '\n';
  std::ostringstream row;
  row << std::setprecision(10);
  for (const auto& e : epochs) {
    row.str("");
    row << e.epoch << ',' << e.stage << ',' << e.correlation << ',' << e.rec_loss << ','
        << e.ssl_loss << ',' << e.joint_loss;
    for (std::size_t i = 0; i < evaluator::kCutoffs.size(); ++i) {
      row << ',';
      if (e.validation) row << e.validation->hr[i];
    }
    for (std::size_t i = 0; i < evaluator::kCutoffs.size(); ++i) {
      row << ',';
      if (e.validation) row << e.validation->ndcg[i];
    }
    out << row.str() << '\n';
  }
}

void TrainLog::write_timing_csv(std::ostream& out) const {
  out << "epoch,stage,seconds\n";
  for (const auto& e : epochs) out << e.epoch << ',' << e.stage << ',' << e.seconds << '\n';
}

namespace {

enum Stream : std::uint64_t { kShuffle = 1, kNegative = 2, kAugment = 3, kDropout = 4 };

// Stage tags keep random streams of the two-stage pre-training apart from
// ordinary training, so that fine-tuning replays plain next-item training.
enum StageTag : std::uint64_t { kMainStage = 0, kPretrainStage = 1 };

struct Objective {
  bool rec = true;
  bool ssl = false;
  double ssl_weight = 0.0;
};

template <typename Fn>
void for_each_shard(std::size_t n, std::size_t threads, Fn&& fn) {
  const std::size_t shards = std::max<std::size_t>(1, std::min(threads, n));
  if (shards == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(shards);
  std::vector<std::exception_ptr> errors(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = n * s / shards;
    const std::size_t end = n * (s + 1) / shards;
    workers.emplace_back([&, s, begin, end] {
      try {
        fn(s, begin, end);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool needs_correlation(const augment::AugmentParams& p) {
  const auto informative = [](augment::Operator op) {
    return op == augment::Operator::Substitute || op == augment::Operator::Insert;
  };
  if (p.fixed_pair) return informative(p.fixed_pair->first) || informative(p.fixed_pair->second);
  return std::any_of(p.short_ops.begin(), p.short_ops.end(), informative) ||
         std::any_of(p.long_ops.begin(), p.long_ops.end(), informative);
}

class Session {
 public:
  Session(const corpus::SequenceCorpus& corpus, const encoder::EncoderConfig& encoder_config,
          const augment::AugmentParams& augment, const TrainConfig& config, const TrainHooks& hooks,
          Model model, std::uint64_t stage_tag)
      : corpus_(corpus),
        augment_(augment),
        config_(config),
        hooks_(hooks),
        model_(std::move(model)),
        adam_(encoder_config, config.adam),
        stage_tag_(stage_tag),
        shuffle_rng_(derive_seed(config.seed, {stage_tag, kShuffle})) {
    for (std::size_t u : corpus_.training_users()) {
      const auto seq = corpus_.train_sequence(u);
      own_items_.emplace(u, std::unordered_set<ItemId>(seq.begin(), seq.end()));
    }
  }

  Model& model() { return model_; }
  TrainLog& log() { return log_; }

  Checkpoint checkpoint(int epoch) const {
    Checkpoint ck;
    ck.encoder = model_.config();
    ck.parameters = model_.parameters();
    ck.adam = adam_.config();
    ck.adam_step = adam_.step_count();
    ck.first_moment = adam_.first_moment();
    ck.second_moment = adam_.second_moment();
    ck.epoch = epoch;
    ck.rng_state = shuffle_rng_.serialize();
    return ck;
  }

  EpochRecord run_epoch(int epoch, const Objective& objective, const std::string& stage) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.stage = stage;

    std::optional<correlation::CorrelationTable> table;
    if (objective.ssl && needs_correlation(augment_)) {
      table = select_correlation(epoch);
      record.correlation = correlation::to_string(table->kind());
    } else {
      record.correlation = "none";
    }

    std::vector<std::size_t> users = corpus_.training_users();
    shuffle_rng_.shuffle(users.begin(), users.end());

    double rec_sum = 0.0, ssl_sum = 0.0, joint_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < users.size(); start += config_.batch_size) {
      const std::size_t end = std::min(users.size(), start + config_.batch_size);
      const std::span<const std::size_t> batch(users.data() + start, end - start);
      if (batch.empty()) continue;
      const auto [rec, ssl] = run_batch(epoch, batch, objective, table ? &*table : nullptr);
      const double joint = rec + objective.ssl_weight * ssl;
      if (!std::isfinite(joint)) fail(epoch, "non-finite loss at epoch " + std::to_string(epoch));
      rec_sum += rec;
      ssl_sum += ssl;
      joint_sum += joint;
      ++batches;
    }
    if (batches > 0) {
      record.rec_loss = rec_sum / static_cast<double>(batches);
      record.ssl_loss = ssl_sum / static_cast<double>(batches);
      record.joint_loss = joint_sum / static_cast<double>(batches);
    }
    log_.total_steps += static_cast<std::int64_t>(batches);
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
  }

  [[noreturn]] void fail(int epoch, const std::string& message) {
    if (hooks_.checkpoint_dir) {
      std::filesystem::create_directories(*hooks_.checkpoint_dir);
      save_checkpoint(checkpoint(epoch), *hooks_.checkpoint_dir / "diagnostic.ckpt");
    }
    throw NumericError(message);
  }

 private:
  correlation::CorrelationTable select_correlation(int epoch) {
    const auto embeddings = [this] { return model_.parameters().item_embedding.cast<double>().eval(); };
    switch (config_.correlation) {
      case CorrelationPolicy::Memory:
        return correlation::with_epoch(memory_table(), epoch);
      case CorrelationPolicy::Model:
        return correlation::with_epoch(
            correlation::model_correlation(embeddings(), corpus_.item_count()), epoch);
      case CorrelationPolicy::Hybrid:
        return correlation::correlation_for_epoch(epoch, config_.switch_epoch, memory_table(), embeddings);
    }
    throw ConfigError("unknown correlation policy");
  }

  const correlation::CorrelationTable& memory_table() {
    if (!memory_) memory_ = correlation::memory_correlation(corpus_);
    return *memory_;
  }

  ItemId sample_negative(std::size_t user, Rng& rng) const {
    const auto& own = own_items_.at(user);
    const std::size_t vocab = corpus_.item_count();
    if (own.size() >= vocab) return static_cast<ItemId>(rng.uniform_index(vocab) + 1);
    ItemId item;
    do {
      item = static_cast<ItemId>(rng.uniform_index(vocab) + 1);
    } while (own.contains(item));
    return item;
  }

  std::pair<double, double> run_batch(int epoch, std::span<const std::size_t> batch,
                                      const Objective& objective,
                                      const correlation::CorrelationTable* table) {
    const auto& cfg = model_.config();
    const std::size_t n = batch.size();
    const std::size_t T = cfg.max_length;
    const auto e = static_cast<std::uint64_t>(epoch);

    std::size_t rec_users = 0;
    if (objective.rec) {
      for (std::size_t u : batch) rec_users += corpus_.train_sequence(u).size() >= 2;
    }
    const float rec_scale = rec_users ? 1.0f / static_cast<float>(rec_users) : 0.0f;

    const std::size_t shards = std::max<std::size_t>(1, std::min(config_.threads, n));
    if (shard_grads_.size() != shards) {
      shard_grads_.assign(shards, Parameters<float>::zeros(cfg));
      shard_stats_.assign(shards, {});
    }
    for (auto& g : shard_grads_) g.set_zero();

    std::vector<double> rec_losses(n, 0.0);
    std::vector<encoder::ForwardTrace<float>> view_traces(objective.ssl ? 2 * n : 0);
    const Eigen::Index repr_dim = static_cast<Eigen::Index>(T * cfg.dim);
    Matrix<float> views(objective.ssl ? static_cast<Eigen::Index>(2 * n) : 0, repr_dim);

    for_each_shard(n, config_.threads, [&](std::size_t shard, std::size_t begin, std::size_t end) {
      auto& grads = shard_grads_[shard];
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t u = batch[i];
        const auto seq = corpus_.train_sequence(u);
        if (objective.rec && seq.size() >= 2) {
          const auto input = model_.pad(seq.first(seq.size() - 1));
          const auto targets = model_.pad(seq.subspan(1));
          Rng neg_rng(derive_seed(config_.seed, {stage_tag_, kNegative, e, u}));
          std::vector<ItemId> negatives(T, kPaddingId);
          for (std::size_t t = 0; t < T; ++t) {
            if (targets[t] != kPaddingId) negatives[t] = sample_negative(u, neg_rng);
          }
          Rng drop_rng(derive_seed(config_.seed, {stage_tag_, kDropout, e, u, 0}));
          const auto trace = model_.forward(input, true, &drop_rng);
          Matrix<float> d_hidden = Matrix<float>::Zero(trace.hidden.rows(), trace.hidden.cols());
          rec_losses[i] = objectives::rec_loss<float>(trace.hidden, targets, negatives,
                                                      model_.parameters().item_embedding, &d_hidden,
                                                      &grads.item_embedding, rec_scale);
          model_.backward(trace, d_hidden, grads);
        }
        if (objective.ssl) {
          Rng aug_rng(derive_seed(config_.seed, {stage_tag_, kAugment, e, u}));
          const auto pair = augment::augment_pair(seq, augment_, table, cfg.mask_id(), aug_rng,
                                                  &shard_stats_[shard]);
          for (std::size_t v = 0; v < 2; ++v) {
            Rng drop_rng(derive_seed(config_.seed, {stage_tag_, kDropout, e, u, v + 1}));
            auto& trace = view_traces[2 * i + v];
            trace = model_.forward(model_.pad(v == 0 ? pair.view1 : pair.view2), true, &drop_rng);
            views.row(static_cast<Eigen::Index>(2 * i + v)) = encoder::sequence_representation<float>(
                trace.hidden, trace.valid, cfg.zero_padding_in_representation);
          }
        }
      }
    });

    double ssl = 0.0;
    if (objective.ssl) {
      ++log_.contrastive_calls;
      Matrix<float> d_views;
      ssl = objectives::ntxent<float>(views, &d_views, static_cast<float>(objective.ssl_weight));
      for_each_shard(n, config_.threads, [&](std::size_t shard, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          for (std::size_t v = 0; v < 2; ++v) {
            const auto& trace = view_traces[2 * i + v];
            const encoder::RowVector<float> d_repr = d_views.row(static_cast<Eigen::Index>(2 * i + v));
            model_.backward(trace,
                            encoder::representation_gradient<float>(d_repr, trace.valid, cfg.dim,
                                                                     cfg.zero_padding_in_representation),
                            shard_grads_[shard]);
          }
        }
      });
    }

    for (std::size_t s = 1; s < shard_grads_.size(); ++s) shard_grads_[0] += shard_grads_[s];
    for (auto& st : shard_stats_) {
      log_.augment_stats.substitute_fallbacks += st.substitute_fallbacks;
      log_.augment_stats.insert_skips += st.insert_skips;
      st = {};
    }
    if (!shard_grads_[0].all_finite()) fail(epoch, "non-finite gradient at epoch " + std::to_string(epoch));
    adam_.step(model_.parameters(), shard_grads_[0]);

    double rec = 0.0;
    for (double l : rec_losses) rec += l;
    if (rec_users) rec /= static_cast<double>(rec_users);
    return {rec, ssl};
  }

  const corpus::SequenceCorpus& corpus_;
  const augment::AugmentParams& augment_;
  const TrainConfig& config_;
  const TrainHooks& hooks_;
  Model model_;
  optimizer::Adam<float> adam_;
  std::uint64_t stage_tag_;
  Rng shuffle_rng_;
  std::optional<correlation::CorrelationTable> memory_;
  std::unordered_map<std::size_t, std::unordered_set<ItemId>> own_items_;
  std::vector<Parameters<float>> shard_grads_;
  std::vector<augment::AugmentStats> shard_stats_;
  TrainLog log_;
};

void prepare(const corpus::SequenceCorpus& corpus, encoder::EncoderConfig& encoder_config,
             augment::AugmentParams& augment, const TrainConfig& config) {
  config.validate();
  encoder_config.item_count = corpus.item_count();
  encoder_config.validate();
  augment.max_length = encoder_config.max_length;
  augment.validate();
  if (corpus.training_users().empty()) throw InvalidCorpusError("no users in the training view");
}

std::string run_label(const TrainConfig& config) {
  if (config.mode == Mode::TwoStage) return "two-stage";
  return config.lambda == 0.0 ? "sasrec-equivalent" : "coserec";
}

// Early-stopped next-item (optionally joint) training loop shared by both modes.
TrainResult fit(Session& session, const corpus::SequenceCorpus& corpus, const TrainConfig& config,
                const TrainHooks& hooks, const Objective& objective, const std::string& stage,
                TrainLog prefix) {
  TrainLog& log = session.log();
  prefix.epochs.insert(prefix.epochs.end(), log.epochs.begin(), log.epochs.end());
  const evaluator::EvalOptions eval_options{config.filter_history};

  std::optional<Checkpoint> best;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord record = session.run_epoch(epoch, objective, stage);
    record.validation = evaluator::evaluate(session.model(), corpus, evaluator::Split::Validation, eval_options);
    const double metric = record.validation->metric(config.stop_metric);
    log.stopped_epoch = epoch;
    if (!best || metric > log.best_metric) {
      log.best_metric = metric;
      log.best_epoch = epoch;
      best = session.checkpoint(epoch);
      since_best = 0;
      if (hooks.checkpoint_dir) save_checkpoint(*best, *hooks.checkpoint_dir / "best.ckpt");
    } else {
      ++since_best;
    }
    log.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (since_best >= config.patience) break;
  }
  if (!best) best = session.checkpoint(0);
  if (hooks.checkpoint_dir) save_checkpoint(session.checkpoint(log.stopped_epoch), *hooks.checkpoint_dir / "last.ckpt");

  TrainResult result;
  result.model = Model(best->encoder, best->parameters);
  result.best = std::move(*best);
  result.log = std::move(log);
  result.log.epochs.insert(result.log.epochs.begin(), prefix.epochs.begin(), prefix.epochs.end());
  result.log.contrastive_calls += prefix.contrastive_calls;
  result.log.total_steps += prefix.total_steps;
  result.log.augment_stats.substitute_fallbacks += prefix.augment_stats.substitute_fallbacks;
  result.log.augment_stats.insert_skips += prefix.augment_stats.insert_skips;
  return result;
}

}  // namespace

TrainResult train(const corpus::SequenceCorpus& corpus, encoder::EncoderConfig encoder_config,
                  augment::AugmentParams augment, const TrainConfig& config, const TrainHooks& hooks) {
  prepare(corpus, encoder_config, augment, config);
  if (hooks.checkpoint_dir) std::filesystem::create_directories(*hooks.checkpoint_dir);
  Session session(corpus, encoder_config, augment, config, hooks,
                  Model::initialized(encoder_config, derive_seed(config.seed, {0x1417ULL})), kMainStage);
  Objective objective;
  objective.rec = true;
  objective.ssl = config.lambda > 0.0;
  objective.ssl_weight = config.lambda;
  auto result = fit(session, corpus, config, hooks, objective, "joint", {});
  result.log.label = run_label(config);
  return result;
}

TrainResult train_two_stage(const corpus::SequenceCorpus& corpus,
                            encoder::EncoderConfig encoder_config, augment::AugmentParams augment,
                            const TrainConfig& config, const TrainHooks& hooks) {
  prepare(corpus, encoder_config, augment, config);
  if (hooks.checkpoint_dir) std::filesystem::create_directories(*hooks.checkpoint_dir);
  const auto initial = Model::initialized(encoder_config, derive_seed(config.seed, {0x1417ULL}));

  // Stage 1: contrastive objective alone for a fixed budget.
  Session pretrain(corpus, encoder_config, augment, config, hooks, initial, kPretrainStage);
  const Objective ssl_only{false, true, 1.0};
  for (int epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    EpochRecord record = pretrain.run_epoch(epoch, ssl_only, "pretrain");
    pretrain.log().epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
  }

  // Hand the pre-trained weights over through the checkpoint format.
  std::stringstream buffer;
  write_checkpoint(pretrain.checkpoint(config.pretrain_epochs), buffer);
  if (hooks.checkpoint_dir) {
    save_checkpoint(pretrain.checkpoint(config.pretrain_epochs), *hooks.checkpoint_dir / "pretrain.ckpt");
  }
  const Checkpoint handed_over = read_checkpoint(buffer);

  // Stage 2: next-item fine-tuning with a fresh optimizer.
  Session finetune(corpus, encoder_config, augment, config, hooks,
                   Model(handed_over.encoder, handed_over.parameters), kMainStage);
  const Objective rec_only{true, false, 0.0};
  auto result = fit(finetune, corpus, config, hooks, rec_only, "finetune", std::move(pretrain.log()));
  result.log.label = run_label(config);
  return result;
}

TrainResult run_training(const corpus::SequenceCorpus& corpus, encoder::EncoderConfig encoder_config,
                         augment::AugmentParams augment, const TrainConfig& config,
                         const TrainHooks& hooks) {
  if (config.mode == Mode::TwoStage) return train_two_stage(corpus, encoder_config, augment, config, hooks);
  return train(corpus, encoder_config, augment, config, hooks);
}

}  // namespace coserec::trainer
