#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coserec {

/// Internal item identifier. 0 is padding, 1..|V| are items, |V|+1 is mask.
using ItemId = std::uint32_t;

inline constexpr ItemId kPaddingId = 0;

}  // namespace coserec

namespace coserec::corpus {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

using InteractionLog = std::vector<Interaction>;

enum class InputFormat {
  /// `user<TAB>item<TAB>timestamp` per line.
  Tsv,
  /// `user item1 item2 ...` per line, already ordered; timestamps become 1..n.
  Sequences,
};

InputFormat parse_input_format(std::string_view tag);

/// Reads and deduplicates exact (user, item, timestamp) triples, keeping the
/// first occurrence. Blank lines are ignored.
InteractionLog load_interactions(const std::filesystem::path& path, InputFormat format);
InteractionLog read_interactions(std::istream& in, InputFormat format);

/// Iteratively drops users and items with fewer than k interactions until
/// the log is stable. Throws EmptyInputError when nothing survives.
InteractionLog apply_k_core(const InteractionLog& log, int k);

class Vocabulary {
 public:
  /// Returns the internal id for `external`, assigning the next free id on
  /// first sight.
  ItemId intern(const std::string& external);

  std::size_t item_count() const noexcept { return externals_.size(); }
  ItemId mask_id() const noexcept { return static_cast<ItemId>(externals_.size() + 1); }
  /// Embedding rows needed: padding + items + mask.
  std::size_t table_rows() const noexcept { return externals_.size() + 2; }

  bool contains(std::string_view external) const;
  ItemId internal(std::string_view external) const;
  const std::string& external(ItemId id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.externals_ == b.externals_;
  }

 private:
  std::vector<std::string> externals_;
  std::unordered_map<std::string, ItemId> internals_;
};

struct UserSequence {
  std::string user;
  std::vector<ItemId> items;

  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

struct NoiseInjection;

struct CorpusStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t actions = 0;
  double average_length = 0.0;
  double sparsity = 0.0;
};

/// Per-user chronological sequences with leave-one-out views:
///   training sequence  items[0 .. n-2)
///   validation         input = training sequence, target = items[n-2]
///   test               input = items[0 .. n-1),   target = items[n-1]
/// Immutable once built; perturbations return modified copies.
class SequenceCorpus {
 public:
  SequenceCorpus() = default;
  SequenceCorpus(Vocabulary vocabulary, std::vector<UserSequence> users);

  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  std::size_t item_count() const noexcept { return vocabulary_.item_count(); }
  std::size_t user_count() const noexcept { return users_.size(); }
  const UserSequence& user(std::size_t u) const { return users_.at(u); }

  std::span<const ItemId> train_sequence(std::size_t u) const;
  std::span<const ItemId> validation_input(std::size_t u) const { return train_sequence(u); }
  ItemId validation_target(std::size_t u) const;
  std::span<const ItemId> test_input(std::size_t u) const;
  ItemId test_target(std::size_t u) const;

  /// Whether the user's training sequence participates in training.
  bool in_training(std::size_t u) const { return train_selected_.at(u) != 0; }
  std::vector<std::size_t> training_users() const;
  bool has_test_noise() const noexcept { return !noisy_test_inputs_.empty(); }

  CorpusStats stats() const;

  friend bool operator==(const SequenceCorpus&, const SequenceCorpus&) = default;

  friend SequenceCorpus subsample_training(const SequenceCorpus&, double, std::uint64_t);
  friend NoiseInjection inject_test_noise(const SequenceCorpus&, double, std::uint64_t);
  friend void save_corpus(const SequenceCorpus&, std::ostream&);
  friend SequenceCorpus read_corpus(std::istream&);

 private:
  Vocabulary vocabulary_;
  std::vector<UserSequence> users_;
  std::vector<char> train_selected_;
  std::vector<std::vector<ItemId>> noisy_test_inputs_;
};

/// One sequence per user in first-appearance order, stably sorted by
/// timestamp. Item ids are assigned in first-appearance order of the log.
/// Throws InvalidCorpusError when a user has fewer than 3 interactions.
SequenceCorpus build_corpus(const InteractionLog& log);

/// Keeps the training view of ceil(fraction * users) uniformly chosen users.
/// Validation and test views are untouched.
SequenceCorpus subsample_training(const SequenceCorpus& corpus, double fraction,
                                  std::uint64_t seed);

struct NoiseInjection {
  SequenceCorpus corpus;
  /// Users whose history covers the whole vocabulary, left unperturbed.
  std::size_t skipped_users = 0;
};

/// Inserts ceil(ratio * n) never-interacted items at uniform positions of each
/// test input of length n. Noise items may repeat within one sequence.
NoiseInjection inject_test_noise(const SequenceCorpus& corpus, double ratio, std::uint64_t seed);

inline constexpr std::string_view kCorpusMagic = "COSEREC-CORPUS-v1";

void save_corpus(const SequenceCorpus& corpus, std::ostream& out);
void save_corpus(const SequenceCorpus& corpus, const std::filesystem::path& path);
SequenceCorpus read_corpus(std::istream& in);
SequenceCorpus load_corpus(const std::filesystem::path& path);
/// True when the file starts with the prepared-corpus magic line.
bool is_prepared_corpus(const std::filesystem::path& path);

}  // namespace coserec::corpus
