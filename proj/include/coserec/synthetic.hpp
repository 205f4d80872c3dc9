#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include "coserec/corpus.hpp"

namespace coserec::synthetic {

/// Users walk a Markov chain over items split into equal clusters. Each item
/// has a few planted successors inside its cluster; the walk follows one of
/// them with probability `successor_prob`, otherwise moves uniformly inside
/// the cluster, and with probability `jump_prob` leaves for another cluster.
struct MarkovConfig {
  std::size_t users = 1000;
  std::size_t items = 200;
  std::size_t clusters = 4;
  std::size_t min_length = 8;
  std::size_t max_length = 20;
  std::size_t successors = 2;
  double successor_prob = 0.7;
  double jump_prob = 0.05;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Users "u<k>", items "i<k>", timestamps 1..n per user.
corpus::InteractionLog generate(const MarkovConfig& config);

/// generate() followed by build_corpus(), without k-core filtering.
corpus::SequenceCorpus generate_corpus(const MarkovConfig& config);

/// `user<TAB>item<TAB>timestamp` lines, readable with InputFormat::Tsv.
void write_tsv(const corpus::InteractionLog& log, std::ostream& out);

}  // namespace coserec::synthetic
