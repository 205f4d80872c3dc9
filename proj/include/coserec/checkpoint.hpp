#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "coserec/encoder.hpp"
#include "coserec/optimizer.hpp"

namespace coserec {

inline constexpr std::string_view kCheckpointMagic = "COSEREC-CKPT-v1";

/// Everything needed to resume or evaluate a run. Tensors are stored as
/// 32-bit floats in native byte order.
struct Checkpoint {
  encoder::EncoderConfig encoder;
  encoder::Parameters<float> parameters;
  optimizer::AdamConfig adam;
  std::int64_t adam_step = 0;
  encoder::Parameters<float> first_moment;
  encoder::Parameters<float> second_moment;
  std::int64_t epoch = 0;
  std::string rng_state;
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace coserec
