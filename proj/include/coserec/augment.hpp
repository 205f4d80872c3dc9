#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coserec/corpus.hpp"
#include "coserec/correlation.hpp"
#include "coserec/rng.hpp"

namespace coserec::augment {

enum class Operator : char {
  Crop = 'C',
  Mask = 'M',
  Reorder = 'R',
  Substitute = 'S',
  Insert = 'I',
};

inline constexpr std::array<Operator, 5> kAllOperators = {
    Operator::Mask, Operator::Crop, Operator::Reorder, Operator::Substitute, Operator::Insert};

char to_char(Operator op);
Operator operator_from_char(char c);

/// Ordered set of distinct operators, e.g. "SIM".
using OperatorSet = std::vector<Operator>;

OperatorSet parse_operator_set(std::string_view letters);
std::string to_string(const OperatorSet& ops);

struct AugmentParams {
  double eta = 0.5;    // crop ratio
  double mu = 0.5;     // mask ratio
  double omega = 0.5;  // reorder ratio
  double alpha = 0.1;  // substitute ratio
  double beta = 0.4;   // insert ratio
  /// Sequences of length <= short_threshold draw from short_ops.
  std::size_t short_threshold = 12;
  OperatorSet short_ops = {Operator::Substitute, Operator::Insert, Operator::Mask};
  OperatorSet long_ops = {Operator::Substitute, Operator::Insert, Operator::Mask, Operator::Crop,
                          Operator::Reorder};
  /// When set, every sequence uses exactly this pair (pair-wise ablation).
  std::optional<std::pair<Operator, Operator>> fixed_pair;
  /// Views are truncated to the most recent max_length items.
  std::size_t max_length = 50;

  /// Throws ConfigError on out-of-range ratios or empty operator sets.
  void validate() const;
};

/// Fallbacks taken by the informative operators.
struct AugmentStats {
  std::size_t substitute_fallbacks = 0;
  std::size_t insert_skips = 0;
};

using Sequence = std::vector<ItemId>;

Sequence crop(std::span<const ItemId> seq, double eta, Rng& rng);
Sequence mask(std::span<const ItemId> seq, double mu, ItemId mask_id, Rng& rng);
Sequence reorder(std::span<const ItemId> seq, double omega, Rng& rng);
/// Replaces ceil(alpha * n) distinct positions by their top-1 correlated item;
/// positions whose item has no partner receive the mask token.
Sequence substitute(std::span<const ItemId> seq, double alpha,
                    const correlation::CorrelationTable& corr, ItemId mask_id, Rng& rng,
                    AugmentStats* stats = nullptr);
/// Inserts the top-1 correlated item immediately before each of ceil(beta * n)
/// distinct positions. Positions whose item has no partner are skipped.
Sequence insert(std::span<const ItemId> seq, double beta,
                const correlation::CorrelationTable& corr, Rng& rng,
                AugmentStats* stats = nullptr);

/// Draws two operators (independently, possibly equal) from the set matching
/// the sequence length.
std::pair<Operator, Operator> sample_operator_pair(std::size_t seq_len, const AugmentParams& params,
                                                   Rng& rng);

/// Runs `op` with the ratios from `params`. `corr` is required for S and I.
Sequence apply_operator(Operator op, std::span<const ItemId> seq, const AugmentParams& params,
                        const correlation::CorrelationTable* corr, ItemId mask_id, Rng& rng,
                        AugmentStats* stats = nullptr);

struct AugmentedPair {
  Sequence view1;
  Sequence view2;
  Operator op1 = Operator::Mask;
  Operator op2 = Operator::Mask;
};

AugmentedPair augment_pair(std::span<const ItemId> seq, const AugmentParams& params,
                           const correlation::CorrelationTable* corr, ItemId mask_id, Rng& rng,
                           AugmentStats* stats = nullptr);

}  // namespace coserec::augment
