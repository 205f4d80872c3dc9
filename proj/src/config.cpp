#include "coserec/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "coserec/corpus.hpp"
#include "coserec/error.hpp"

namespace coserec::config {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + std::string(key) + "' expects a number, got '" + text + "'");
}

template <typename Int>
Int to_integer(std::string_view key, const std::string& text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + text + "'");
  }
  return value;
}

int to_int(std::string_view key, const std::string& text) {
  if (!text.empty() && text[0] == '-') return -to_integer<int>(key, text.substr(1));
  return to_integer<int>(key, text);
}

bool to_bool(std::string_view key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + text + "'");
}

std::vector<double> to_list(std::string_view key, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(to_double(key, part));
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string show(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string show(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + show(values[i]);
  return out;
}

std::string show(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define COSEREC_FIELD(section, key, member, parse, format)                                 \
  Field {                                                                                  \
    section, key, [](RunConfig& c, const std::string& v) { c.member = parse(key, v); },    \
        [](const RunConfig& c) { return format(c.member); }                                \
  }

std::string as_is(const std::string& s) { return s; }
std::string keep(std::string_view, const std::string& s) { return s; }
std::size_t to_size(std::string_view key, const std::string& s) { return to_integer<std::size_t>(key, s); }
std::uint64_t to_u64(std::string_view key, const std::string& s) { return to_integer<std::uint64_t>(key, s); }
std::string show_size(std::size_t v) { return std::to_string(v); }
std::string show_int(int v) { return std::to_string(v); }
std::string show_path(const std::filesystem::path& p) { return p.string(); }
std::filesystem::path to_path(std::string_view, const std::string& s) { return s; }
augment::OperatorSet to_ops(std::string_view, const std::string& s) { return augment::parse_operator_set(s); }
std::string show_ops(const augment::OperatorSet& ops) { return augment::to_string(ops); }
trainer::CorrelationPolicy to_policy(std::string_view, const std::string& s) {
  return trainer::parse_correlation_policy(s);
}
std::string show_policy(trainer::CorrelationPolicy p) { return trainer::to_string(p); }
trainer::Mode to_mode(std::string_view, const std::string& s) { return trainer::parse_mode(s); }
std::string show_mode(trainer::Mode m) { return trainer::to_string(m); }
std::string show_u64(std::uint64_t v) { return std::to_string(v); }
std::string show_double(double v) { return show(v); }
std::string show_list(const std::vector<double>& v) { return show(v); }
std::string show_flag(bool v) { return show(v); }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      COSEREC_FIELD("data", "path", data, to_path, show_path),
      COSEREC_FIELD("data", "format", data_format, keep, as_is),
      COSEREC_FIELD("data", "k_core", k_core, to_int, show_int),
      COSEREC_FIELD("data", "output", output, to_path, show_path),

      COSEREC_FIELD("synthetic", "users", synthetic.users, to_size, show_size),
      COSEREC_FIELD("synthetic", "items", synthetic.items, to_size, show_size),
      COSEREC_FIELD("synthetic", "clusters", synthetic.clusters, to_size, show_size),
      COSEREC_FIELD("synthetic", "min_length", synthetic.min_length, to_size, show_size),
      COSEREC_FIELD("synthetic", "max_length", synthetic.max_length, to_size, show_size),
      COSEREC_FIELD("synthetic", "successors", synthetic.successors, to_size, show_size),
      COSEREC_FIELD("synthetic", "successor_prob", synthetic.successor_prob, to_double, show_double),
      COSEREC_FIELD("synthetic", "jump_prob", synthetic.jump_prob, to_double, show_double),
      COSEREC_FIELD("synthetic", "seed", synthetic.seed, to_u64, show_u64),

      COSEREC_FIELD("encoder", "dim", encoder.dim, to_size, show_size),
      COSEREC_FIELD("encoder", "blocks", encoder.blocks, to_size, show_size),
      COSEREC_FIELD("encoder", "heads", encoder.heads, to_size, show_size),
      COSEREC_FIELD("encoder", "max_length", encoder.max_length, to_size, show_size),
      COSEREC_FIELD("encoder", "ffn_multiplier", encoder.ffn_multiplier, to_size, show_size),
      COSEREC_FIELD("encoder", "dropout", encoder.dropout, to_double, show_double),
      COSEREC_FIELD("encoder", "init_scale", encoder.init_scale, to_double, show_double),
      COSEREC_FIELD("encoder", "layer_norm_eps", encoder.layer_norm_eps, to_double, show_double),
      COSEREC_FIELD("encoder", "zero_padding_in_representation", encoder.zero_padding_in_representation,
                    to_bool, show_flag),

      COSEREC_FIELD("augment", "eta", augment.eta, to_double, show_double),
      COSEREC_FIELD("augment", "mu", augment.mu, to_double, show_double),
      COSEREC_FIELD("augment", "omega", augment.omega, to_double, show_double),
      COSEREC_FIELD("augment", "alpha", augment.alpha, to_double, show_double),
      COSEREC_FIELD("augment", "beta", augment.beta, to_double, show_double),
      COSEREC_FIELD("augment", "short_threshold", augment.short_threshold, to_size, show_size),
      COSEREC_FIELD("augment", "short_ops", augment.short_ops, to_ops, show_ops),
      COSEREC_FIELD("augment", "long_ops", augment.long_ops, to_ops, show_ops),

      COSEREC_FIELD("train", "lambda", train.lambda, to_double, show_double),
      COSEREC_FIELD("train", "switch_epoch", train.switch_epoch, to_int, show_int),
      COSEREC_FIELD("train", "correlation", train.correlation, to_policy, show_policy),
      COSEREC_FIELD("train", "max_epochs", train.max_epochs, to_int, show_int),
      COSEREC_FIELD("train", "batch_size", train.batch_size, to_size, show_size),
      COSEREC_FIELD("train", "learning_rate", train.adam.learning_rate, to_double, show_double),
      COSEREC_FIELD("train", "beta1", train.adam.beta1, to_double, show_double),
      COSEREC_FIELD("train", "beta2", train.adam.beta2, to_double, show_double),
      COSEREC_FIELD("train", "epsilon", train.adam.epsilon, to_double, show_double),
      COSEREC_FIELD("train", "patience", train.patience, to_int, show_int),
      COSEREC_FIELD("train", "seed", train.seed, to_u64, show_u64),
      COSEREC_FIELD("train", "mode", train.mode, to_mode, show_mode),
      COSEREC_FIELD("train", "pretrain_epochs", train.pretrain_epochs, to_int, show_int),
      COSEREC_FIELD("train", "stop_metric", train.stop_metric, keep, as_is),
      COSEREC_FIELD("train", "threads", train.threads, to_size, show_size),
      COSEREC_FIELD("train", "filter_history", train.filter_history, to_bool, show_flag),

      COSEREC_FIELD("experiment", "plan", plan, keep, as_is),
      COSEREC_FIELD("experiment", "fractions", grid.fractions, to_list, show_list),
      COSEREC_FIELD("experiment", "noise_ratios", grid.noise_ratios, to_list, show_list),
  };
  return table;
}

#undef COSEREC_FIELD

const Field& find_field(std::string_view section, std::string_view key) {
  bool known_section = false;
  for (const auto& f : fields()) {
    if (section != f.section) continue;
    known_section = true;
    if (key == f.key) return f;
  }
  if (!known_section) throw ConfigError("unknown config section [" + std::string(section) + "]");
  throw ConfigError("unknown config key '" + std::string(key) + "' in [" + std::string(section) + "]");
}

}  // namespace

void set_value(RunConfig& config, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos) throw ConfigError("expected section.key, got '" + std::string(dotted_key) + "'");
  find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1)).set(config, trim(value));
}

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  std::string section;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    try {
      if (text.front() == '[') {
        if (text.back() != ']') throw ConfigError("malformed section header");
        section = trim(std::string_view(text).substr(1, text.size() - 2));
        const auto& all = fields();
        if (std::none_of(all.begin(), all.end(), [&](const Field& f) { return section == f.section; })) {
          throw ConfigError("unknown config section [" + section + "]");
        }
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      if (section.empty()) throw ConfigError("key outside of any [section]");
      find_field(section, trim(std::string_view(text).substr(0, eq)))
          .set(config, trim(std::string_view(text).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

void write_config(const RunConfig& config, std::ostream& out) {
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

void RunConfig::validate() const {
  static const std::vector<std::string> formats = {"auto", "tsv", "sequences", "prepared", "synthetic"};
  if (std::find(formats.begin(), formats.end(), data_format) == formats.end()) {
    throw ConfigError("data.format must be one of auto, tsv, sequences, prepared, synthetic");
  }
  if (k_core < 1) throw ConfigError("data.k_core must be >= 1");
  if (data_format == "synthetic") {
    synthetic.validate();
  } else {
    if (data.empty()) throw ConfigError("data.path is required (or set data.format = synthetic)");
    if (!std::filesystem::exists(data)) throw ConfigError("data file not found: " + data.string());
  }
  encoder::EncoderConfig probe = encoder;
  if (probe.item_count == 0) probe.item_count = 1;
  probe.validate();
  augment::AugmentParams aug = augment;
  aug.max_length = encoder.max_length;
  aug.validate();
  train.validate();
  experiments::parse_ablation_plan(plan);
  for (double f : grid.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("experiment.fractions must lie in (0, 1]");
  }
  for (double r : grid.noise_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("experiment.noise_ratios must lie in [0, 1]");
  }
}

experiments::RunSetup RunConfig::setup() const {
  experiments::RunSetup s{encoder, augment, train};
  s.augment.max_length = encoder.max_length;
  return s;
}

}  // namespace coserec::config
