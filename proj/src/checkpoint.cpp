#include "coserec/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

#include "coserec/error.hpp"

namespace coserec {

namespace {

template <typename T>
void put(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated checkpoint");
  return value;
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 30)) throw Error("corrupt checkpoint string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("truncated checkpoint");
  return s;
}

void put_tensors(std::ostream& out, const encoder::EncoderConfig& config,
                 const encoder::Parameters<float>& params) {
  const auto names = encoder::Parameters<float>::tensor_names(config);
  const auto tensors = params.tensors();
  put<std::uint64_t>(out, tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    put_string(out, names[i]);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(tensors[i]->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(tensors[i]->cols()));
    out.write(reinterpret_cast<const char*>(tensors[i]->data()),
              static_cast<std::streamsize>(tensors[i]->size() * sizeof(float)));
  }
}

encoder::Parameters<float> get_tensors(std::istream& in, const encoder::EncoderConfig& config) {
  auto params = encoder::Parameters<float>::zeros(config);
  const auto names = encoder::Parameters<float>::tensor_names(config);
  auto tensors = params.tensors();
  if (get<std::uint64_t>(in) != tensors.size()) throw Error("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (get_string(in) != names[i]) throw Error("checkpoint tensor '" + names[i] + "' missing");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(tensors[i]->rows()) ||
        cols != static_cast<std::uint64_t>(tensors[i]->cols())) {
      throw Error("checkpoint tensor '" + names[i] + "' has the wrong shape");
    }
    in.read(reinterpret_cast<char*>(tensors[i]->data()),
            static_cast<std::streamsize>(tensors[i]->size() * sizeof(float)));
    if (!in) throw Error("truncated checkpoint");
  }
  return params;
}

}  // namespace

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  const auto& c = ck.encoder;
  for (std::uint64_t v : {c.item_count, c.dim, c.blocks, c.heads, c.max_length, c.ffn_multiplier}) {
    put<std::uint64_t>(out, v);
  }
  for (double v : {c.dropout, c.init_scale, c.layer_norm_eps}) put<double>(out, v);
  put<std::uint8_t>(out, c.zero_padding_in_representation ? 1 : 0);
  for (double v : {ck.adam.learning_rate, ck.adam.beta1, ck.adam.beta2, ck.adam.epsilon}) {
    put<double>(out, v);
  }
  put<std::int64_t>(out, ck.adam_step);
  put<std::int64_t>(out, ck.epoch);
  put_string(out, ck.rng_state);
  put_tensors(out, c, ck.parameters);
  put_tensors(out, c, ck.first_moment);
  put_tensors(out, c, ck.second_moment);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) throw Error("not a COSEREC-CKPT-v1 checkpoint");
  Checkpoint ck;
  auto& c = ck.encoder;
  for (std::size_t* v : {&c.item_count, &c.dim, &c.blocks, &c.heads, &c.max_length, &c.ffn_multiplier}) {
    *v = static_cast<std::size_t>(get<std::uint64_t>(in));
  }
  for (double* v : {&c.dropout, &c.init_scale, &c.layer_norm_eps}) *v = get<double>(in);
  c.zero_padding_in_representation = get<std::uint8_t>(in) != 0;
  c.validate();
  for (double* v : {&ck.adam.learning_rate, &ck.adam.beta1, &ck.adam.beta2, &ck.adam.epsilon}) {
    *v = get<double>(in);
  }
  ck.adam_step = get<std::int64_t>(in);
  ck.epoch = get<std::int64_t>(in);
  ck.rng_state = get_string(in);
  ck.parameters = get_tensors(in, c);
  ck.first_moment = get_tensors(in, c);
  ck.second_moment = get_tensors(in, c);
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_checkpoint(checkpoint, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace coserec
