#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "coserec/error.hpp"
#include "coserec/synthetic.hpp"
#include "coserec/trainer.hpp"

using namespace coserec;
using namespace coserec::trainer;

namespace {

corpus::SequenceCorpus small_corpus() {
  synthetic::MarkovConfig m;
  m.users = 60;
  m.items = 32;
  m.min_length = 5;
  m.max_length = 10;
  return synthetic::generate_corpus(m);
}

encoder::EncoderConfig small_encoder() {
  encoder::EncoderConfig c;
  c.dim = 8;
  c.blocks = 1;
  c.heads = 2;
  c.max_length = 8;
  return c;
}

TrainConfig small_train() {
  TrainConfig t;
  t.max_epochs = 3;
  t.batch_size = 16;
  t.switch_epoch = 1;
  t.patience = 10;
  t.seed = 5;
  return t;
}

std::string csv(const TrainLog& log) {
  std::ostringstream out;
  log.write_csv(out);
  return out.str();
}

}  // namespace

TEST(TrainConfig, ValidationAndParsing) {
  auto t = small_train();
  EXPECT_NO_THROW(t.validate());
  t.stop_metric = "mrr@3";
  EXPECT_THROW(t.validate(), ConfigError);
  t = small_train();
  t.lambda = -1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_EQ(parse_mode("two-stage"), Mode::TwoStage);
  EXPECT_EQ(parse_mode("multi-task"), Mode::MultiTask);
  EXPECT_THROW(parse_mode("three-stage"), ConfigError);
  EXPECT_EQ(parse_correlation_policy("hybrid"), CorrelationPolicy::Hybrid);
  EXPECT_EQ(to_string(CorrelationPolicy::Memory), "memory");
}

TEST(Train, DeterministicUnderSeed) {
  const auto corpus = small_corpus();
  const auto a = train(corpus, small_encoder(), {}, small_train());
  const auto b = train(corpus, small_encoder(), {}, small_train());
  EXPECT_EQ(csv(a.log), csv(b.log));
  const auto pa = a.model.parameters().tensors(), pb = b.model.parameters().tensors();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  auto other = small_train();
  other.seed = 6;
  EXPECT_NE(csv(train(corpus, small_encoder(), {}, other).log), csv(a.log));
}

TEST(Train, ThreadCountOnlyChangesSummationOrder) {
  // Shards reduce in a fixed order, so runs repeat exactly for a given
  // thread count; different counts group float sums differently.
  const auto corpus = small_corpus();
  auto t = small_train();
  t.max_epochs = 2;
  t.threads = 3;
  const auto a = train(corpus, small_encoder(), {}, t);
  const auto b = train(corpus, small_encoder(), {}, t);
  EXPECT_EQ(csv(a.log), csv(b.log));
  t.threads = 1;
  const auto one = train(corpus, small_encoder(), {}, t);
  for (std::size_t e = 0; e < one.log.epochs.size(); ++e) {
    EXPECT_NEAR(one.log.epochs[e].rec_loss, a.log.epochs[e].rec_loss, 1e-5);
    EXPECT_NEAR(one.log.epochs[e].ssl_loss, a.log.epochs[e].ssl_loss, 1e-4);
  }
}

TEST(Train, LogShapeAndStepCount) {
  const auto corpus = small_corpus();
  const auto result = train(corpus, small_encoder(), {}, small_train());
  ASSERT_EQ(result.log.epochs.size(), 3u);
  const auto batches = (corpus.user_count() + 15) / 16;
  EXPECT_EQ(result.log.total_steps, static_cast<std::int64_t>(3 * batches));
  EXPECT_EQ(result.log.label, "coserec");
  EXPECT_GT(result.log.contrastive_calls, 0u);
  EXPECT_EQ(result.log.epochs[0].correlation, "memory");
  EXPECT_EQ(result.log.epochs[1].correlation, "hybrid");
  for (const auto& e : result.log.epochs) {
    EXPECT_EQ(e.stage, "joint");
    EXPECT_NEAR(e.joint_loss, e.rec_loss + 0.1 * e.ssl_loss, 1e-9);
    ASSERT_TRUE(e.validation.has_value());
  }
  const auto text = csv(result.log);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "epoch,stage,correlation,L_rec,L_ssl,L_joint,val_hr@5,val_hr@10,val_hr@20,"
            "val_ndcg@5,val_ndcg@10,val_ndcg@20");
}

TEST(Train, ZeroLambdaSkipsContrastiveTerm) {
  const auto corpus = small_corpus();
  auto t = small_train();
  t.lambda = 0.0;
  const auto result = train(corpus, small_encoder(), {}, t);
  EXPECT_EQ(result.log.contrastive_calls, 0u);
  EXPECT_EQ(result.log.label, "sasrec-equivalent");
  for (const auto& e : result.log.epochs) {
    EXPECT_EQ(e.ssl_loss, 0.0);
    EXPECT_EQ(e.correlation, "none");
  }
}

TEST(Train, TwoStageWithoutPretrainingEqualsRecOnly) {
  const auto corpus = small_corpus();
  auto t = small_train();
  t.lambda = 0.0;
  const auto plain = train(corpus, small_encoder(), {}, t);
  t.mode = Mode::TwoStage;
  t.pretrain_epochs = 0;
  const auto staged = run_training(corpus, small_encoder(), {}, t);
  EXPECT_EQ(staged.log.label, "two-stage");
  ASSERT_EQ(staged.log.epochs.size(), plain.log.epochs.size());
  for (std::size_t i = 0; i < plain.log.epochs.size(); ++i) {
    EXPECT_EQ(staged.log.epochs[i].rec_loss, plain.log.epochs[i].rec_loss);
    EXPECT_EQ(staged.log.epochs[i].stage, "finetune");
  }
}

TEST(Train, TwoStageLogsPretrainThenFinetune) {
  const auto corpus = small_corpus();
  auto t = small_train();
  t.mode = Mode::TwoStage;
  t.pretrain_epochs = 2;
  t.max_epochs = 2;
  const auto result = run_training(corpus, small_encoder(), {}, t);
  ASSERT_EQ(result.log.epochs.size(), 4u);
  EXPECT_EQ(result.log.epochs[0].stage, "pretrain");
  EXPECT_EQ(result.log.epochs[0].rec_loss, 0.0);
  EXPECT_GT(result.log.epochs[0].ssl_loss, 0.0);
  EXPECT_EQ(result.log.epochs[2].stage, "finetune");
  EXPECT_EQ(result.log.epochs[2].ssl_loss, 0.0);
}

TEST(Train, ReturnsBestCheckpointAndWritesFiles) {
  const auto corpus = small_corpus();
  auto t = small_train();
  t.max_epochs = 4;
  const auto dir = std::filesystem::temp_directory_path() / "coserec_trainer_test";
  std::filesystem::remove_all(dir);
  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  int calls = 0;
  hooks.on_epoch = [&](const EpochRecord&) { ++calls; };
  const auto result = train(corpus, small_encoder(), {}, t, hooks);
  EXPECT_EQ(calls, 4);
  EXPECT_TRUE(std::filesystem::exists(dir / "best.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "last.ckpt"));
  EXPECT_EQ(result.best.epoch, result.log.best_epoch);
  double best = -1.0;
  for (const auto& e : result.log.epochs) best = std::max(best, e.validation->ndcg_at(20));
  EXPECT_DOUBLE_EQ(result.log.best_metric, best);
  const auto reloaded = load_checkpoint(dir / "best.ckpt");
  const auto a = reloaded.parameters.tensors(), b = result.model.parameters().tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  std::filesystem::remove_all(dir);
}

TEST(Train, EarlyStoppingHonoursPatience) {
  const auto corpus = small_corpus();
  auto t = small_train();
  t.max_epochs = 30;
  t.patience = 1;
  t.adam.learning_rate = 0.5;  // noisy enough to stall quickly
  const auto result = train(corpus, small_encoder(), {}, t);
  EXPECT_LE(result.log.stopped_epoch, 30);
  EXPECT_LE(result.log.stopped_epoch - result.log.best_epoch, 1);
}
