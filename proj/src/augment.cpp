#include "coserec/augment.hpp"

#include <algorithm>
#include <numeric>

#include "coserec/error.hpp"
#include "coserec/ratio.hpp"

namespace coserec::augment {

namespace {

// k distinct indices of [0, n), in increasing order (partial Fisher-Yates).
std::vector<std::size_t> distinct_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void check_ratio(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(r));
  }
}

}  // namespace

char to_char(Operator op) { return static_cast<char>(op); }

Operator operator_from_char(char c) {
  switch (c) {
    case 'C':
    case 'M':
    case 'R':
    case 'S':
    case 'I':
      return static_cast<Operator>(c);
    default:
      throw ConfigError(std::string("unknown augmentation operator '") + c + "'");
  }
}

OperatorSet parse_operator_set(std::string_view letters) {
  OperatorSet ops;
  for (char c : letters) {
    if (c == ',' || c == ' ' || c == '{' || c == '}') continue;
    const Operator op = operator_from_char(c);
    if (std::find(ops.begin(), ops.end(), op) != ops.end()) {
      throw ConfigError(std::string("operator '") + c + "' listed twice");
    }
    ops.push_back(op);
  }
  return ops;
}

std::string to_string(const OperatorSet& ops) {
  std::string s;
  for (Operator op : ops) s += to_char(op);
  return s;
}

void AugmentParams::validate() const {
  check_ratio(eta, "eta");
  if (eta == 0.0) throw ConfigError("eta must be positive (crop would be empty)");
  check_ratio(mu, "mu");
  check_ratio(omega, "omega");
  check_ratio(alpha, "alpha");
  check_ratio(beta, "beta");
  if (short_threshold < 1) throw ConfigError("short-sequence threshold K must be positive");
  if (short_ops.empty() || long_ops.empty()) throw ConfigError("operator sets must be nonempty");
  if (max_length < 1) throw ConfigError("max_length must be positive");
}

Sequence crop(std::span<const ItemId> seq, double eta, Rng& rng) {
  const std::size_t n = seq.size();
  const std::size_t c = std::min(n, ratio_count(eta, n));
  const std::size_t start = rng.uniform_index(n - c + 1);
  return Sequence(seq.begin() + static_cast<std::ptrdiff_t>(start),
                  seq.begin() + static_cast<std::ptrdiff_t>(start + c));
}

Sequence mask(std::span<const ItemId> seq, double mu, ItemId mask_id, Rng& rng) {
  Sequence out(seq.begin(), seq.end());
  for (std::size_t i : distinct_indices(seq.size(), ratio_count(mu, seq.size()), rng)) {
    out[i] = mask_id;
  }
  return out;
}

Sequence reorder(std::span<const ItemId> seq, double omega, Rng& rng) {
  Sequence out(seq.begin(), seq.end());
  const std::size_t n = seq.size();
  const std::size_t r = std::min(n, ratio_count(omega, n));
  const std::size_t start = rng.uniform_index(n - r + 1);
  rng.shuffle(out.begin() + static_cast<std::ptrdiff_t>(start),
              out.begin() + static_cast<std::ptrdiff_t>(start + r));
  return out;
}

Sequence substitute(std::span<const ItemId> seq, double alpha,
                    const correlation::CorrelationTable& corr, ItemId mask_id, Rng& rng,
                    AugmentStats* stats) {
  Sequence out(seq.begin(), seq.end());
  for (std::size_t i : distinct_indices(seq.size(), ratio_count(alpha, seq.size()), rng)) {
    if (auto partner = corr.top1(seq[i])) {
      out[i] = partner->item;
    } else {
      out[i] = mask_id;
      if (stats) ++stats->substitute_fallbacks;
    }
  }
  return out;
}

Sequence insert(std::span<const ItemId> seq, double beta,
                const correlation::CorrelationTable& corr, Rng& rng, AugmentStats* stats) {
  const auto chosen = distinct_indices(seq.size(), ratio_count(beta, seq.size()), rng);
  Sequence out;
  out.reserve(seq.size() + chosen.size());
  auto next = chosen.begin();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (next != chosen.end() && *next == i) {
      ++next;
      if (auto partner = corr.top1(seq[i])) {
        out.push_back(partner->item);
      } else if (stats) {
        ++stats->insert_skips;
      }
    }
    out.push_back(seq[i]);
  }
  return out;
}

std::pair<Operator, Operator> sample_operator_pair(std::size_t seq_len, const AugmentParams& params,
                                                   Rng& rng) {
  if (params.fixed_pair) return *params.fixed_pair;
  const OperatorSet& ops = seq_len <= params.short_threshold ? params.short_ops : params.long_ops;
  const Operator first = ops[rng.uniform_index(ops.size())];
  const Operator second = ops[rng.uniform_index(ops.size())];
  return {first, second};
}

Sequence apply_operator(Operator op, std::span<const ItemId> seq, const AugmentParams& params,
                        const correlation::CorrelationTable* corr, ItemId mask_id, Rng& rng,
                        AugmentStats* stats) {
  const auto need_corr = [&]() -> const correlation::CorrelationTable& {
    if (!corr) throw ConfigError("substitute/insert need a correlation table");
    return *corr;
  };
  switch (op) {
    case Operator::Crop:
      return crop(seq, params.eta, rng);
    case Operator::Mask:
      return mask(seq, params.mu, mask_id, rng);
    case Operator::Reorder:
      return reorder(seq, params.omega, rng);
    case Operator::Substitute:
      return substitute(seq, params.alpha, need_corr(), mask_id, rng, stats);
    case Operator::Insert:
      return insert(seq, params.beta, need_corr(), rng, stats);
  }
  throw ConfigError("unknown operator");
}

AugmentedPair augment_pair(std::span<const ItemId> seq, const AugmentParams& params,
                           const correlation::CorrelationTable* corr, ItemId mask_id, Rng& rng,
                           AugmentStats* stats) {
  if (seq.empty()) throw InvalidCorpusError("cannot augment an empty sequence");
  AugmentedPair pair;
  std::tie(pair.op1, pair.op2) = sample_operator_pair(seq.size(), params, rng);
  pair.view1 = apply_operator(pair.op1, seq, params, corr, mask_id, rng, stats);
  pair.view2 = apply_operator(pair.op2, seq, params, corr, mask_id, rng, stats);
  for (Sequence* view : {&pair.view1, &pair.view2}) {
    if (view->size() > params.max_length) {
      view->erase(view->begin(), view->end() - static_cast<std::ptrdiff_t>(params.max_length));
    }
  }
  return pair;
}

}  // namespace coserec::augment
