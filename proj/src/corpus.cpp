#include "coserec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "coserec/error.hpp"
#include "coserec/ratio.hpp"
#include "coserec/rng.hpp"

namespace coserec::corpus {

namespace {

struct InteractionHash {
  std::size_t operator()(const Interaction& x) const noexcept {
    std::size_t h = std::hash<std::string>{}(x.user);
    h ^= std::hash<std::string>{}(x.item) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>{}(x.timestamp) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

template <typename Int>
bool parse_int(std::string_view text, Int& value) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

InputFormat parse_input_format(std::string_view tag) {
  if (tag == "tsv") return InputFormat::Tsv;
  if (tag == "sequences" || tag == "seq") return InputFormat::Sequences;
  throw ConfigError("unknown input format '" + std::string(tag) + "' (expected tsv or sequences)");
}

InteractionLog read_interactions(std::istream& in, InputFormat format) {
  InteractionLog log;
  std::unordered_set<Interaction, InteractionHash> seen;
  std::string raw;
  std::size_t line_no = 0;
  const auto keep = [&](Interaction x) {
    if (seen.insert(x).second) log.push_back(std::move(x));
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim_cr(raw);
    if (is_blank(line)) continue;
    if (format == InputFormat::Tsv) {
      const auto fields = split(line, '\t');
      if (fields.size() != 3) {
        throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                      std::to_string(fields.size()));
      }
      if (fields[0].empty() || fields[1].empty()) {
        throw ParseError(line_no, "empty user or item id");
      }
      std::int64_t ts = 0;
      if (!parse_int(fields[2], ts)) {
        throw ParseError(line_no, "timestamp '" + std::string(fields[2]) + "' is not an integer");
      }
      keep({std::string(fields[0]), std::string(fields[1]), ts});
    } else {
      const auto fields = split_whitespace(line);
      if (fields.size() < 2) throw ParseError(line_no, "expected a user followed by items");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        keep({std::string(fields[0]), std::string(fields[i]), static_cast<std::int64_t>(i)});
      }
    }
  }
  if (log.empty()) throw EmptyInputError("no interactions in input");
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_interactions(in, format);
}

InteractionLog apply_k_core(const InteractionLog& log, int k) {
  if (k < 1) throw ConfigError("k-core requires k >= 1");
  InteractionLog current = log;
  while (true) {
    std::unordered_map<std::string_view, std::size_t> user_degree, item_degree;
    for (const auto& x : current) {
      ++user_degree[x.user];
      ++item_degree[x.item];
    }
    const auto kk = static_cast<std::size_t>(k);
    InteractionLog next;
    next.reserve(current.size());
    for (const auto& x : current) {
      if (user_degree[x.user] >= kk && item_degree[x.item] >= kk) next.push_back(x);
    }
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  if (current.empty()) throw EmptyInputError("k-core filtering removed every interaction");
  return current;
}

// --- Vocabulary ------------------------------------------------------------

ItemId Vocabulary::intern(const std::string& external) {
  auto [it, inserted] = internals_.try_emplace(external, static_cast<ItemId>(externals_.size() + 1));
  if (inserted) externals_.push_back(external);
  return it->second;
}

bool Vocabulary::contains(std::string_view external) const {
  return internals_.contains(std::string(external));
}

ItemId Vocabulary::internal(std::string_view external) const {
  auto it = internals_.find(std::string(external));
  if (it == internals_.end()) throw Error("unknown item '" + std::string(external) + "'");
  return it->second;
}

const std::string& Vocabulary::external(ItemId id) const {
  if (id == kPaddingId || id > externals_.size()) {
    throw Error("item id " + std::to_string(id) + " has no external name");
  }
  return externals_[id - 1];
}

// --- SequenceCorpus --------------------------------------------------------

SequenceCorpus::SequenceCorpus(Vocabulary vocabulary, std::vector<UserSequence> users)
    : vocabulary_(std::move(vocabulary)),
      users_(std::move(users)),
      train_selected_(users_.size(), 1) {
  const auto limit = static_cast<ItemId>(vocabulary_.item_count());
  for (const auto& u : users_) {
    if (u.items.size() < 3) {
      throw InvalidCorpusError("user '" + u.user + "' has " + std::to_string(u.items.size()) +
                               " interactions; at least 3 are needed for a train/val/test split");
    }
    for (ItemId id : u.items) {
      if (id == kPaddingId || id > limit) {
        throw InvalidCorpusError("user '" + u.user + "' references item id " + std::to_string(id) +
                                 " outside 1.." + std::to_string(limit));
      }
    }
  }
}

std::span<const ItemId> SequenceCorpus::train_sequence(std::size_t u) const {
  const auto& items = users_.at(u).items;
  return std::span<const ItemId>(items).first(items.size() - 2);
}

ItemId SequenceCorpus::validation_target(std::size_t u) const {
  const auto& items = users_.at(u).items;
  return items[items.size() - 2];
}

std::span<const ItemId> SequenceCorpus::test_input(std::size_t u) const {
  if (!noisy_test_inputs_.empty()) return noisy_test_inputs_.at(u);
  const auto& items = users_.at(u).items;
  return std::span<const ItemId>(items).first(items.size() - 1);
}

ItemId SequenceCorpus::test_target(std::size_t u) const { return users_.at(u).items.back(); }

std::vector<std::size_t> SequenceCorpus::training_users() const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < users_.size(); ++u) {
    if (train_selected_[u]) out.push_back(u);
  }
  return out;
}

CorpusStats SequenceCorpus::stats() const {
  CorpusStats s;
  s.users = users_.size();
  s.items = vocabulary_.item_count();
  for (const auto& u : users_) s.actions += u.items.size();
  if (s.users > 0) s.average_length = static_cast<double>(s.actions) / static_cast<double>(s.users);
  if (s.users > 0 && s.items > 0) {
    s.sparsity = 1.0 - static_cast<double>(s.actions) /
                           (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

SequenceCorpus build_corpus(const InteractionLog& log) {
  Vocabulary vocabulary;
  for (const auto& x : log) vocabulary.intern(x.item);

  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<const Interaction*>> by_user;
  for (const auto& x : log) {
    auto [it, inserted] = by_user.try_emplace(x.user);
    if (inserted) user_order.push_back(x.user);
    it->second.push_back(&x);
  }

  std::vector<UserSequence> users;
  users.reserve(user_order.size());
  for (const auto& name : user_order) {
    auto& events = by_user[name];
    std::stable_sort(events.begin(), events.end(), [](const Interaction* a, const Interaction* b) {
      return a->timestamp < b->timestamp;
    });
    UserSequence seq{name, {}};
    seq.items.reserve(events.size());
    for (const Interaction* x : events) seq.items.push_back(vocabulary.internal(x->item));
    users.push_back(std::move(seq));
  }
  return SequenceCorpus(std::move(vocabulary), std::move(users));
}

SequenceCorpus subsample_training(const SequenceCorpus& corpus, double fraction,
                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("training fraction must lie in (0, 1]");
  }
  SequenceCorpus out = corpus;
  const std::size_t n = corpus.user_count();
  const std::size_t keep = ratio_count(fraction, n);
  if (keep >= n) {
    std::fill(out.train_selected_.begin(), out.train_selected_.end(), 1);
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5ab5ULL}));
  rng.shuffle(order.begin(), order.end());
  std::fill(out.train_selected_.begin(), out.train_selected_.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) out.train_selected_[order[i]] = 1;
  return out;
}

NoiseInjection inject_test_noise(const SequenceCorpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("noise ratio must lie in [0, 1]");
  NoiseInjection result{corpus, 0};
  if (ratio == 0.0) return result;

  SequenceCorpus& out = result.corpus;
  const std::size_t vocab = corpus.item_count();
  out.noisy_test_inputs_.resize(corpus.user_count());
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    const auto input = corpus.test_input(u);
    std::vector<ItemId> noisy(input.begin(), input.end());
    const auto& items = corpus.user(u).items;
    const std::unordered_set<ItemId> own(items.begin(), items.end());
    const std::size_t count = ratio_count(ratio, input.size());
    if (own.size() >= vocab) {
      ++result.skipped_users;
    } else {
      Rng rng(derive_seed(seed, {0x70153ULL, u}));
      for (std::size_t i = 0; i < count; ++i) {
        ItemId item;
        do {
          item = static_cast<ItemId>(rng.uniform_index(vocab) + 1);
        } while (own.contains(item));
        const std::size_t pos = rng.uniform_index(noisy.size() + 1);
        noisy.insert(noisy.begin() + static_cast<std::ptrdiff_t>(pos), item);
      }
    }
    out.noisy_test_inputs_[u] = std::move(noisy);
  }
  return result;
}

// --- serialization ---------------------------------------------------------
//
// COSEREC-CORPUS-v1
// items <count>
// <external item id>             one line per internal id 1..count
// users <count>
// <user>\t<in_training>\t<id id ...>[\t<noisy test input ids>]

namespace {

void write_ids(std::ostream& out, std::span<const ItemId> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ' ';
    out << ids[i];
  }
}

std::vector<ItemId> read_ids(std::string_view text, std::size_t line_no) {
  std::vector<ItemId> ids;
  for (auto tok : split_whitespace(text)) {
    ItemId id = 0;
    if (!parse_int(tok, id)) throw ParseError(line_no, "bad item id '" + std::string(tok) + "'");
    ids.push_back(id);
  }
  return ids;
}

}  // namespace

void save_corpus(const SequenceCorpus& corpus, std::ostream& out) {
  out << kCorpusMagic << '\n';
  out << "items " << corpus.item_count() << '\n';
  for (ItemId id = 1; id <= corpus.item_count(); ++id) out << corpus.vocabulary_.external(id) << '\n';
  out << "users " << corpus.user_count() << '\n';
  for (std::size_t u = 0; u < corpus.user_count(); ++u) {
    const auto& seq = corpus.users_[u];
    out << seq.user << '\t' << (corpus.train_selected_[u] ? 1 : 0) << '\t';
    write_ids(out, seq.items);
    if (!corpus.noisy_test_inputs_.empty()) {
      out << '\t';
      write_ids(out, corpus.noisy_test_inputs_[u]);
    }
    out << '\n';
  }
}

void save_corpus(const SequenceCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  save_corpus(corpus, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

SequenceCorpus read_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> std::string_view {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of corpus file");
    ++line_no;
    return trim_cr(line);
  };
  if (next_line() != kCorpusMagic) throw ParseError(1, "missing COSEREC-CORPUS-v1 header");

  const auto read_count = [&](std::string_view key) {
    const auto fields = split_whitespace(next_line());
    std::size_t n = 0;
    if (fields.size() != 2 || fields[0] != key || !parse_int(fields[1], n)) {
      throw ParseError(line_no, "expected '" + std::string(key) + " <count>'");
    }
    return n;
  };

  Vocabulary vocabulary;
  const std::size_t item_count = read_count("items");
  for (std::size_t i = 0; i < item_count; ++i) {
    const std::string name(next_line());
    if (vocabulary.intern(name) != i + 1) throw ParseError(line_no, "duplicate item '" + name + "'");
  }

  const std::size_t user_count = read_count("users");
  std::vector<UserSequence> users;
  std::vector<char> selected;
  std::vector<std::vector<ItemId>> noisy;
  for (std::size_t u = 0; u < user_count; ++u) {
    const auto fields = split(next_line(), '\t');
    if (fields.size() != 3 && fields.size() != 4) throw ParseError(line_no, "malformed user record");
    if (fields[1] != "0" && fields[1] != "1") throw ParseError(line_no, "bad training flag");
    users.push_back({std::string(fields[0]), read_ids(fields[2], line_no)});
    selected.push_back(fields[1] == "1" ? 1 : 0);
    if (fields.size() == 4) {
      if (u != noisy.size()) throw ParseError(line_no, "inconsistent noisy test inputs");
      noisy.push_back(read_ids(fields[3], line_no));
    }
  }
  if (!noisy.empty() && noisy.size() != user_count) {
    throw ParseError(line_no, "inconsistent noisy test inputs");
  }
  SequenceCorpus corpus(std::move(vocabulary), std::move(users));
  corpus.train_selected_ = std::move(selected);
  corpus.noisy_test_inputs_ = std::move(noisy);
  return corpus;
}

SequenceCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_corpus(in);
}

bool is_prepared_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string first;
  if (!in || !std::getline(in, first)) return false;
  return trim_cr(first) == kCorpusMagic;
}

}  // namespace coserec::corpus
