#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coserec/corpus.hpp"

namespace coserec::correlation {

enum class Kind { Memory, Model, Hybrid };

std::string to_string(Kind kind);

struct Correlated {
  ItemId item = 0;
  double score = 0.0;
};

/// Item embedding table indexed by internal id; rows 0 (padding) and
/// item_count + 1 (mask) are present but never considered as partners.
using EmbeddingTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MemoryOptions {
  /// Base of the inverse-user-frequency logarithm; 0 selects natural log.
  double log_base = 0.0;
};

/// Most-correlated-item lookup plus dense score access for inspection.
/// Immutable after construction.
class CorrelationTable {
 public:
  Kind kind() const noexcept { return kind_; }
  int epoch_built() const noexcept { return epoch_built_; }
  std::size_t item_count() const noexcept { return top1_.size() - 1; }

  /// Highest-scoring partner j != item, ties to the lowest id. Empty when the
  /// item has no partner (memory tables: no co-occurring item).
  std::optional<Correlated> top1(ItemId item) const;

  /// Score of an item pair under this table's definition. Pairs never
  /// co-occurring score 0 in memory tables.
  double score(ItemId i, ItemId j) const;

  /// Minimum and maximum over every off-diagonal pair (i != j) of items.
  double min_score() const noexcept { return min_score_; }
  double max_score() const noexcept { return max_score_; }

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Writes `item<TAB>correlated_item<TAB>score` rows using external ids.
  void dump_top1(std::ostream& out, const corpus::Vocabulary& vocabulary) const;

 private:
  friend CorrelationTable memory_correlation(std::span<const std::vector<ItemId>>, std::size_t,
                                             MemoryOptions);
  friend CorrelationTable model_correlation(const EmbeddingTable&, std::size_t);
  friend CorrelationTable hybrid_correlation(const CorrelationTable&, const CorrelationTable&);
  friend CorrelationTable with_epoch(CorrelationTable, int);

  Kind kind_ = Kind::Memory;
  int epoch_built_ = 0;
  std::vector<std::optional<Correlated>> top1_;
  std::function<double(ItemId, ItemId)> scorer_;
  double min_score_ = 0.0;
  double max_score_ = 0.0;
  std::vector<std::string> warnings_;
  // Row-wise sources kept for hybrid construction (one of them is set for
  // memory and model tables respectively).
  using SparseRows = std::vector<std::vector<std::pair<ItemId, double>>>;
  std::shared_ptr<const SparseRows> sparse_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
};

/// ItemCF-IUF: score(i, j) = sum over common users u of 1 / log(1 + |N(u)|),
/// divided by sqrt(|N(i)| |N(j)|). N(.) counts distinct users / items.
/// Stored sparsely; only co-occurring pairs are materialized.
CorrelationTable memory_correlation(std::span<const std::vector<ItemId>> user_items,
                                    std::size_t item_count, MemoryOptions options = {});

/// Memory correlation over the training view (training users only).
CorrelationTable memory_correlation(const corpus::SequenceCorpus& corpus,
                                    MemoryOptions options = {});

/// Dot-product correlation of embedding rows 1..item_count.
/// Throws NumericError on a non-finite embedding value.
CorrelationTable model_correlation(const EmbeddingTable& embeddings, std::size_t item_count);

/// Elementwise max of globally min-max normalized memory and model scores.
/// A degenerate source (max == min) normalizes to zeros and records a warning.
CorrelationTable hybrid_correlation(const CorrelationTable& memory, const CorrelationTable& model);

/// Copy of `table` stamped with the epoch it serves.
CorrelationTable with_epoch(CorrelationTable table, int epoch);

/// Memory table while epoch <= switch_epoch, afterwards the hybrid of the
/// memory table and a model table built from `embeddings()`.
CorrelationTable correlation_for_epoch(int epoch, int switch_epoch, const CorrelationTable& memory,
                                       const std::function<EmbeddingTable()>& embeddings);

}  // namespace coserec::correlation
