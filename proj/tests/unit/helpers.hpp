#pragma once

#include <string>
#include <vector>

#include "coserec/corpus.hpp"
#include "coserec/rng.hpp"

namespace coserec::testing {

inline corpus::InteractionLog log_from_sequences(const std::vector<std::vector<std::string>>& users) {
  corpus::InteractionLog log;
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (std::size_t t = 0; t < users[u].size(); ++t) {
      log.push_back({"u" + std::to_string(u), users[u][t], static_cast<std::int64_t>(t + 1)});
    }
  }
  return log;
}

/// Random corpus with item ids named "i<k>" and sequence lengths in [min_len, max_len].
inline corpus::SequenceCorpus random_corpus(std::size_t users, std::size_t items, std::size_t min_len,
                                            std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> seqs(users);
  for (auto& s : seqs) {
    const std::size_t n = min_len + rng.uniform_index(max_len - min_len + 1);
    for (std::size_t t = 0; t < n; ++t) s.push_back("i" + std::to_string(rng.uniform_index(items)));
  }
  return corpus::build_corpus(log_from_sequences(seqs));
}

inline std::vector<ItemId> random_sequence(std::size_t n, std::size_t items, Rng& rng) {
  std::vector<ItemId> s(n);
  for (auto& v : s) v = static_cast<ItemId>(1 + rng.uniform_index(items));
  return s;
}

}  // namespace coserec::testing
