#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "coserec/augment.hpp"
#include "coserec/encoder.hpp"
#include "coserec/experiments.hpp"
#include "coserec/synthetic.hpp"
#include "coserec/trainer.hpp"

namespace coserec::config {

/// Resolved settings of one CLI invocation.
///
/// File format: UTF-8 lines of `key = value` grouped under `[section]`
/// headers; `#` starts a comment. Unknown sections or keys are errors.
/// Lists are comma separated.
struct RunConfig {
  /// Raw interactions, a prepared corpus, or empty when format = synthetic.
  std::filesystem::path data;
  /// tsv | sequences | prepared | synthetic. "auto" picks prepared when the
  /// file starts with the corpus header, tsv otherwise.
  std::string data_format = "auto";
  int k_core = 5;
  std::filesystem::path output = "run";

  synthetic::MarkovConfig synthetic;
  encoder::EncoderConfig encoder;
  augment::AugmentParams augment;
  trainer::TrainConfig train;

  std::string plan = "leave-one-out";
  experiments::RobustnessGrid grid;

  /// Range checks on every numeric field; data must exist unless synthetic.
  void validate() const;
  experiments::RunSetup setup() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Sets one `section.key` entry; same validation as the file parser.
void set_value(RunConfig& config, std::string_view dotted_key, std::string_view value);

/// Writes every field; the output parses back to an equal configuration.
void write_config(const RunConfig& config, std::ostream& out);

}  // namespace coserec::config
