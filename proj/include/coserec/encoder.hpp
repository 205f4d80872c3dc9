#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coserec/corpus.hpp"
#include "coserec/rng.hpp"

namespace coserec::encoder {

struct EncoderConfig {
  std::size_t item_count = 0;  // |V|; the embedding table has |V| + 2 rows
  std::size_t dim = 64;
  std::size_t blocks = 2;
  std::size_t heads = 2;
  std::size_t max_length = 50;
  /// Feed-forward hidden width as a multiple of dim.
  std::size_t ffn_multiplier = 4;
  double dropout = 0.2;
  double init_scale = 0.02;
  double layer_norm_eps = 1e-8;
  /// Zero padded positions in the concatenated sequence representation.
  bool zero_padding_in_representation = false;

  std::size_t vocab_rows() const noexcept { return item_count + 2; }
  std::size_t ffn_dim() const noexcept { return dim * ffn_multiplier; }
  ItemId mask_id() const noexcept { return static_cast<ItemId>(item_count + 1); }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Biases and layer-norm parameters are 1 x n matrices so that every tensor
// shares one type for the optimizer and serialization.
template <typename Scalar>
struct BlockParameters {
  Matrix<Scalar> query, key, value, output;  // dim x dim
  Matrix<Scalar> query_bias, key_bias, value_bias, output_bias;
  Matrix<Scalar> norm1_gain, norm1_bias;
  Matrix<Scalar> ffn_in, ffn_in_bias;    // dim x ffn_dim
  Matrix<Scalar> ffn_out, ffn_out_bias;  // ffn_dim x dim
  Matrix<Scalar> norm2_gain, norm2_bias;
};

template <typename Scalar>
struct Parameters {
  Matrix<Scalar> item_embedding;      // vocab_rows x dim, row 0 = padding
  Matrix<Scalar> position_embedding;  // max_length x dim
  std::vector<BlockParameters<Scalar>> blocks;

  static Parameters zeros(const EncoderConfig& config);
  /// Weights and embeddings ~ N(0, init_scale^2); biases 0; norm gains 1.
  static Parameters random(const EncoderConfig& config, Rng& rng);

  /// Every tensor in a fixed order matching tensor_names().
  std::vector<Matrix<Scalar>*> tensors();
  std::vector<const Matrix<Scalar>*> tensors() const;
  static std::vector<std::string> tensor_names(const EncoderConfig& config);

  void set_zero();
  Parameters& operator+=(const Parameters& other);
  Parameters& operator*=(Scalar factor);
  bool all_finite() const;
  std::size_t size() const;

  template <typename Other>
  Parameters<Other> cast() const {
    Parameters<Other> out;
    out.item_embedding = item_embedding.template cast<Other>();
    out.position_embedding = position_embedding.template cast<Other>();
    out.blocks.resize(blocks.size());
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t i = 2; i < src.size(); ++i) *dst[i] = src[i]->template cast<Other>();
    return out;
  }
};

template <typename Scalar>
struct BlockTrace {
  Matrix<Scalar> input;
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // one T x T matrix per head
  Matrix<Scalar> context;             // concatenated head outputs
  Matrix<Scalar> attn_dropout;        // empty when inactive
  Matrix<Scalar> norm1_hat;
  RowVector<Scalar> norm1_inv_std;
  Matrix<Scalar> norm1_out;
  Matrix<Scalar> ffn_pre;
  Matrix<Scalar> ffn_act;
  Matrix<Scalar> ffn_dropout;
  Matrix<Scalar> norm2_hat;
  RowVector<Scalar> norm2_inv_std;
};

/// Position-wise encoder output for one left-padded sequence.
template <typename Scalar>
struct HiddenStates {
  Matrix<Scalar> hidden;    // T x dim
  std::vector<char> valid;  // non-padding positions
};

/// Intermediates recorded by a forward pass, consumed by backward().
template <typename Scalar>
struct ForwardTrace {
  std::vector<ItemId> ids;
  std::vector<char> valid;
  Matrix<Scalar> embed_dropout;
  std::vector<BlockTrace<Scalar>> blocks;
  Matrix<Scalar> hidden;
};

/// Left-to-right self-attention encoder with tied item embeddings and
/// post-norm blocks: attention -> add & norm -> GELU FFN -> add & norm.
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderConfig config, Parameters<Scalar> parameters);
  static Encoder initialized(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const noexcept { return config_; }
  Parameters<Scalar>& parameters() noexcept { return params_; }
  const Parameters<Scalar>& parameters() const noexcept { return params_; }

  /// Keeps the most recent max_length items and left-pads with 0.
  std::vector<ItemId> pad(std::span<const ItemId> seq) const;

  /// `ids` must have length max_length. Dropout is applied only when
  /// `train` is set and `dropout_rng` is given.
  ForwardTrace<Scalar> forward(std::span<const ItemId> ids, bool train = false,
                               Rng* dropout_rng = nullptr) const;

  HiddenStates<Scalar> encode(std::span<const ItemId> ids, bool train = false,
                              Rng* dropout_rng = nullptr) const;

  /// Accumulates d(loss)/d(parameters) into `grads` given d(loss)/d(hidden).
  void backward(const ForwardTrace<Scalar>& trace, const Matrix<Scalar>& d_hidden,
                Parameters<Scalar>& grads) const;

  /// h . e_v for v = 1..|V|; entry v-1 belongs to item v.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> score_items(const RowVector<Scalar>& h) const;

 private:
  EncoderConfig config_;
  Parameters<Scalar> params_;
};

/// Row-major concatenation of all T position vectors (T * dim values).
template <typename Scalar>
RowVector<Scalar> sequence_representation(const Matrix<Scalar>& hidden, std::span<const char> valid,
                                          bool zero_padding);

/// Inverse of sequence_representation for gradients: reshapes a T*dim row
/// into T x dim, zeroing padded rows when `zero_padding` is set.
template <typename Scalar>
Matrix<Scalar> representation_gradient(const RowVector<Scalar>& d_repr, std::span<const char> valid,
                                       std::size_t dim, bool zero_padding);

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace coserec::encoder
