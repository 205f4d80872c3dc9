#include "coserec/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "coserec/error.hpp"

namespace coserec::correlation {

namespace {

constexpr std::size_t kRowBlock = 256;

// Scans one dense score row (index = item id, entry 0 unused) for the best
// partner of `self`, ties to the lowest id.
std::optional<Correlated> best_partner(const Eigen::VectorXd& row, ItemId self) {
  std::optional<Correlated> best;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (static_cast<ItemId>(j) == self) continue;
    if (!best || row[j] > best->score) best = Correlated{static_cast<ItemId>(j), row[j]};
  }
  return best;
}

void update_range(const Eigen::VectorXd& row, ItemId self, double& lo, double& hi) {
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (static_cast<ItemId>(j) == self) continue;
    lo = std::min(lo, row[j]);
    hi = std::max(hi, row[j]);
  }
}

// Computes rows [first, first + count) of the model score matrix into `out`,
// laid out as count x (item_count + 1) with column 0 unused.
void model_rows(const EmbeddingTable& emb, std::size_t item_count, std::size_t first,
                std::size_t count, Eigen::MatrixXd& out) {
  const auto items = emb.middleRows(1, static_cast<Eigen::Index>(item_count));
  out.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(item_count + 1));
  out.col(0).setZero();
  out.rightCols(static_cast<Eigen::Index>(item_count)).noalias() =
      emb.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) *
      items.transpose();
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::Memory:
      return "memory";
    case Kind::Model:
      return "model";
    case Kind::Hybrid:
      return "hybrid";
  }
  return "unknown";
}

std::optional<Correlated> CorrelationTable::top1(ItemId item) const {
  if (item == kPaddingId || item >= top1_.size()) return std::nullopt;
  return top1_[item];
}

double CorrelationTable::score(ItemId i, ItemId j) const { return scorer_(i, j); }

void CorrelationTable::dump_top1(std::ostream& out, const corpus::Vocabulary& vocabulary) const {
  out.precision(17);
  for (ItemId i = 1; i < top1_.size(); ++i) {
    if (!top1_[i]) continue;
    out << vocabulary.external(i) << '\t' << vocabulary.external(top1_[i]->item) << '\t'
        << top1_[i]->score << '\n';
  }
}

CorrelationTable memory_correlation(std::span<const std::vector<ItemId>> user_items,
                                    std::size_t item_count, MemoryOptions options) {
  const double log_scale = options.log_base > 0.0 ? std::log(options.log_base) : 1.0;

  std::vector<std::size_t> item_users(item_count + 1, 0);
  std::vector<std::unordered_map<ItemId, double>> acc(item_count + 1);
  std::vector<ItemId> distinct;
  for (const auto& items : user_items) {
    distinct.assign(items.begin(), items.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.empty()) continue;
    for (ItemId i : distinct) {
      if (i == kPaddingId || i > item_count) {
        throw InvalidCorpusError("item id " + std::to_string(i) + " outside vocabulary");
      }
      ++item_users[i];
    }
    const double weight = 1.0 / std::log(1.0 + static_cast<double>(distinct.size()));
    for (ItemId i : distinct) {
      for (ItemId j : distinct) {
        if (i != j) acc[i][j] += weight;
      }
    }
  }

  auto rows = std::make_shared<CorrelationTable::SparseRows>(item_count + 1);
  std::size_t stored_pairs = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  CorrelationTable table;
  table.kind_ = Kind::Memory;
  table.top1_.assign(item_count + 1, std::nullopt);
  for (ItemId i = 1; i <= item_count; ++i) {
    auto& row = (*rows)[i];
    row.reserve(acc[i].size());
    for (const auto& [j, sum] : acc[i]) {
      const double norm = std::sqrt(static_cast<double>(item_users[i]) *
                                    static_cast<double>(item_users[j]));
      row.emplace_back(j, sum / norm);
    }
    // Partners are ranked on natural-log scores so the choice cannot depend
    // on the logarithm base; stored scores carry the base factor.
    std::sort(row.begin(), row.end());
    double best = 0.0;
    for (auto& [j, s] : row) {
      if (!table.top1_[i] || s > best) {
        best = s;
        table.top1_[i] = Correlated{j, 0.0};
      }
      s *= log_scale;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (table.top1_[i]) table.top1_[i]->score = best * log_scale;
    stored_pairs += row.size();
  }
  const std::size_t all_pairs = item_count * (item_count > 0 ? item_count - 1 : 0);
  if (stored_pairs < all_pairs) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  if (all_pairs == 0) lo = hi = 0.0;
  table.min_score_ = lo;
  table.max_score_ = hi;
  table.sparse_ = rows;
  table.scorer_ = [rows](ItemId i, ItemId j) {
    if (i >= rows->size()) return 0.0;
    const auto& row = (*rows)[i];
    auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(j, -std::numeric_limits<double>::infinity()));
    return (it != row.end() && it->first == j) ? it->second : 0.0;
  };
  return table;
}

CorrelationTable memory_correlation(const corpus::SequenceCorpus& corpus, MemoryOptions options) {
  std::vector<std::vector<ItemId>> user_items;
  for (std::size_t u : corpus.training_users()) {
    const auto seq = corpus.train_sequence(u);
    user_items.emplace_back(seq.begin(), seq.end());
  }
  if (user_items.empty()) throw InvalidCorpusError("training view is empty");
  return memory_correlation(user_items, corpus.item_count(), options);
}

CorrelationTable model_correlation(const EmbeddingTable& embeddings, std::size_t item_count) {
  if (static_cast<std::size_t>(embeddings.rows()) < item_count + 1) {
    throw InvalidCorpusError("embedding table has fewer rows than items");
  }
  if (!embeddings.allFinite()) throw NumericError("non-finite value in item embeddings");

  auto emb = std::make_shared<EmbeddingTable>(embeddings);
  CorrelationTable table;
  table.kind_ = Kind::Model;
  table.top1_.assign(item_count + 1, std::nullopt);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd block;
  for (std::size_t first = 1; first <= item_count; first += kRowBlock) {
    const std::size_t count = std::min(kRowBlock, item_count + 1 - first);
    model_rows(*emb, item_count, first, count, block);
    for (std::size_t r = 0; r < count; ++r) {
      const auto self = static_cast<ItemId>(first + r);
      const Eigen::VectorXd row = block.row(static_cast<Eigen::Index>(r)).transpose();
      table.top1_[self] = best_partner(row, self);
      update_range(row, self, lo, hi);
    }
  }
  if (item_count < 2) lo = hi = 0.0;
  table.min_score_ = lo;
  table.max_score_ = hi;
  table.embeddings_ = emb;
  table.scorer_ = [emb](ItemId i, ItemId j) { return emb->row(i).dot(emb->row(j)); };
  return table;
}

CorrelationTable hybrid_correlation(const CorrelationTable& memory, const CorrelationTable& model) {
  if (memory.item_count() != model.item_count()) {
    throw InvalidCorpusError("hybrid correlation needs tables over the same vocabulary");
  }
  const std::size_t item_count = memory.item_count();
  CorrelationTable table;
  table.kind_ = Kind::Hybrid;
  table.top1_.assign(item_count + 1, std::nullopt);

  struct Scaling {
    double min = 0.0;
    double range = 0.0;  // 0 marks a degenerate source
    double operator()(double x) const { return range == 0.0 ? 0.0 : std::clamp((x - min) / range, 0.0, 1.0); }
  };
  const auto scaling_for = [&](const CorrelationTable& src, const char* name) {
    Scaling s{src.min_score(), 0.0};
    if (src.max_score() > src.min_score()) {
      s.range = src.max_score() - src.min_score();
    } else {
      table.warnings_.push_back(std::string(name) +
                                " correlation is constant; it normalizes to zero");
    }
    return s;
  };
  const Scaling mem_scale = scaling_for(memory, "memory");
  const Scaling model_scale = scaling_for(model, "model");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd block;
  Eigen::VectorXd row(static_cast<Eigen::Index>(item_count + 1));
  for (std::size_t first = 1; first <= item_count; first += kRowBlock) {
    const std::size_t count = std::min(kRowBlock, item_count + 1 - first);
    if (model.embeddings_) model_rows(*model.embeddings_, item_count, first, count, block);
    for (std::size_t r = 0; r < count; ++r) {
      const auto self = static_cast<ItemId>(first + r);
      // Memory row: zeros except co-occurring pairs.
      if (memory.sparse_) {
        row.setConstant(mem_scale(0.0));
        for (const auto& [j, s] : (*memory.sparse_)[self]) row[j] = mem_scale(s);
      } else {
        for (std::size_t j = 1; j <= item_count; ++j) {
          row[static_cast<Eigen::Index>(j)] = mem_scale(memory.score(self, static_cast<ItemId>(j)));
        }
      }
      for (std::size_t j = 1; j <= item_count; ++j) {
        const double m = model.embeddings_ ? block(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j))
                                           : model.score(self, static_cast<ItemId>(j));
        auto& cell = row[static_cast<Eigen::Index>(j)];
        cell = std::max(cell, model_scale(m));
      }
      row[0] = 0.0;
      table.top1_[self] = best_partner(row, self);
      update_range(row, self, lo, hi);
    }
  }
  if (item_count < 2) lo = hi = 0.0;
  table.min_score_ = lo;
  table.max_score_ = hi;
  table.scorer_ = [mem = memory.scorer_, mod = model.scorer_, mem_scale, model_scale](ItemId i, ItemId j) {
    return std::max(mem_scale(mem(i, j)), model_scale(mod(i, j)));
  };
  return table;
}

CorrelationTable with_epoch(CorrelationTable table, int epoch) {
  table.epoch_built_ = epoch;
  return table;
}

CorrelationTable correlation_for_epoch(int epoch, int switch_epoch, const CorrelationTable& memory,
                                       const std::function<EmbeddingTable()>& embeddings) {
  if (switch_epoch < 0) throw ConfigError("correlation switch epoch must be >= 0");
  if (epoch <= switch_epoch) return with_epoch(memory, epoch);
  const CorrelationTable model = model_correlation(embeddings(), memory.item_count());
  return with_epoch(hybrid_correlation(memory, model), epoch);
}

}  // namespace coserec::correlation
