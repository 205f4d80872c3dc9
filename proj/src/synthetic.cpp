#include "coserec/synthetic.hpp"

#include <ostream>
#include <string>
#include <vector>

#include "coserec/error.hpp"
#include "coserec/rng.hpp"

namespace coserec::synthetic {

void MarkovConfig::validate() const {
  if (users == 0 || items == 0) throw ConfigError("synthetic corpus needs users and items");
  if (clusters == 0 || items % clusters != 0) throw ConfigError("items must split evenly into clusters");
  if (min_length < 3 || max_length < min_length) throw ConfigError("need 3 <= min_length <= max_length");
  if (successors == 0 || successors > items / clusters) throw ConfigError("bad successor count");
  if (!(successor_prob >= 0.0 && jump_prob >= 0.0 && successor_prob + jump_prob <= 1.0)) {
    throw ConfigError("successor_prob + jump_prob must lie in [0, 1]");
  }
}

corpus::InteractionLog generate(const MarkovConfig& config) {
  config.validate();
  const std::size_t per_cluster = config.items / config.clusters;
  Rng structure(derive_seed(config.seed, {1}));

  std::vector<std::vector<std::size_t>> successors(config.items);
  for (std::size_t item = 0; item < config.items; ++item) {
    const std::size_t base = item / per_cluster * per_cluster;
    std::vector<std::size_t> members(per_cluster);
    for (std::size_t k = 0; k < per_cluster; ++k) members[k] = base + k;
    structure.shuffle(members.begin(), members.end());
    successors[item].assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(config.successors));
  }

  corpus::InteractionLog log;
  for (std::size_t u = 0; u < config.users; ++u) {
    Rng rng(derive_seed(config.seed, {2, u}));
    const std::size_t length =
        config.min_length + rng.uniform_index(config.max_length - config.min_length + 1);
    std::size_t cluster = rng.uniform_index(config.clusters);
    std::size_t item = cluster * per_cluster + rng.uniform_index(per_cluster);
    for (std::size_t t = 0; t < length; ++t) {
      log.push_back({"u" + std::to_string(u), "i" + std::to_string(item), static_cast<std::int64_t>(t + 1)});
      const double draw = rng.uniform01();
      if (draw < config.successor_prob) {
        item = successors[item][rng.uniform_index(config.successors)];
      } else if (draw < config.successor_prob + config.jump_prob && config.clusters > 1) {
        cluster = (cluster + 1 + rng.uniform_index(config.clusters - 1)) % config.clusters;
        item = cluster * per_cluster + rng.uniform_index(per_cluster);
      } else {
        item = cluster * per_cluster + rng.uniform_index(per_cluster);
      }
    }
  }
  return log;
}

corpus::SequenceCorpus generate_corpus(const MarkovConfig& config) {
  return corpus::build_corpus(generate(config));
}

void write_tsv(const corpus::InteractionLog& log, std::ostream& out) {
  for (const auto& r : log) out << r.user << '\t' << r.item << '\t' << r.timestamp << '\n';
}

}  // namespace coserec::synthetic
