#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coserec/corpus.hpp"
#include "coserec/encoder.hpp"

namespace coserec::evaluator {

enum class Split { Validation, Test };

std::string to_string(Split split);
Split parse_split(std::string_view text);

inline constexpr std::array<int, 3> kCutoffs = {5, 10, 20};

struct MetricReport {
  Split split = Split::Test;
  std::array<double, 3> hr{};    // indexed like kCutoffs
  std::array<double, 3> ndcg{};
  std::size_t users = 0;
  /// Experiment condition, e.g. {"fraction", "0.5"}, {"ops", "SIM"}.
  std::vector<std::pair<std::string, std::string>> condition;

  double hr_at(int k) const;
  double ndcg_at(int k) const;
  /// Metric by name: "hr@10", "ndcg@20", ...
  double metric(std::string_view name) const;
  std::string condition_label() const;
};

/// 1 + number of items scoring strictly higher than the target, plus the
/// number of other items tying with it (ties count against the target).
/// `scores[v - 1]` is the score of item v.
template <typename T>
std::size_t rank_target(std::span<const T> scores, ItemId target) {
  const T mine = scores[target - 1];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i + 1 == target) continue;
    if (scores[i] >= mine) ++rank;
  }
  return rank;
}

struct EvalOptions {
  /// Exclude items from the input sequence (other than the target) from the
  /// candidate set.
  bool filter_history = false;
};

/// Scores every item at the final position of the padded input.
std::size_t rank_target(const encoder::Encoder<float>& model, std::span<const ItemId> input,
                        ItemId target, const EvalOptions& options = {});

inline double hr_at_k(std::size_t rank, int k) { return rank <= static_cast<std::size_t>(k) ? 1.0 : 0.0; }
inline double ndcg_at_k(std::size_t rank, int k) {
  return rank <= static_cast<std::size_t>(k) ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

/// Averages HR@k / NDCG@k over the given per-user ranks.
MetricReport report_from_ranks(std::span<const std::size_t> ranks, Split split);

/// Full-ranking evaluation over every user of the corpus.
MetricReport evaluate(const encoder::Encoder<float>& model, const corpus::SequenceCorpus& corpus,
                      Split split, const EvalOptions& options = {});

/// Rows of `condition,metric,k,value`, with a header line.
void write_metrics_csv(std::ostream& out, std::span<const MetricReport> reports);
void print_metrics_table(std::ostream& out, std::span<const MetricReport> reports);

}  // namespace coserec::evaluator
