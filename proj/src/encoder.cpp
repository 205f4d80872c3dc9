#include "coserec/encoder.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "coserec/error.hpp"

namespace coserec::encoder {

void EncoderConfig::validate() const {
  if (item_count < 1) throw ConfigError("encoder needs at least one item");
  if (dim < 1 || heads < 1 || blocks < 1) throw ConfigError("dim, heads and blocks must be positive");
  if (dim % heads != 0) throw ConfigError("dim must be divisible by heads");
  if (max_length < 1) throw ConfigError("max_length must be positive");
  if (ffn_multiplier < 1) throw ConfigError("ffn_multiplier must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
}

// --- Parameters ------------------------------------------------------------

namespace {

template <typename Scalar>
Matrix<Scalar> normal_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix<Scalar> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(scale * rng.normal());
  return m;
}

template <typename Scalar>
Matrix<Scalar> zero_matrix(std::size_t rows, std::size_t cols) {
  return Matrix<Scalar>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename Scalar>
Matrix<Scalar> ones_matrix(std::size_t rows, std::size_t cols) {
  return Matrix<Scalar>::Ones(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::zeros(const EncoderConfig& c) {
  Parameters p;
  p.item_embedding = zero_matrix<Scalar>(c.vocab_rows(), c.dim);
  p.position_embedding = zero_matrix<Scalar>(c.max_length, c.dim);
  p.blocks.resize(c.blocks);
  for (auto& b : p.blocks) {
    for (auto* w : {&b.query, &b.key, &b.value, &b.output}) *w = zero_matrix<Scalar>(c.dim, c.dim);
    for (auto* v : {&b.query_bias, &b.key_bias, &b.value_bias, &b.output_bias, &b.norm1_gain,
                    &b.norm1_bias, &b.ffn_out_bias, &b.norm2_gain, &b.norm2_bias}) {
      *v = zero_matrix<Scalar>(1, c.dim);
    }
    b.ffn_in = zero_matrix<Scalar>(c.dim, c.ffn_dim());
    b.ffn_in_bias = zero_matrix<Scalar>(1, c.ffn_dim());
    b.ffn_out = zero_matrix<Scalar>(c.ffn_dim(), c.dim);
  }
  return p;
}

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::random(const EncoderConfig& c, Rng& rng) {
  Parameters p = zeros(c);
  const double s = c.init_scale;
  p.item_embedding = normal_matrix<Scalar>(c.vocab_rows(), c.dim, s, rng);
  p.position_embedding = normal_matrix<Scalar>(c.max_length, c.dim, s, rng);
  for (auto& b : p.blocks) {
    for (auto* w : {&b.query, &b.key, &b.value, &b.output}) *w = normal_matrix<Scalar>(c.dim, c.dim, s, rng);
    b.ffn_in = normal_matrix<Scalar>(c.dim, c.ffn_dim(), s, rng);
    b.ffn_out = normal_matrix<Scalar>(c.ffn_dim(), c.dim, s, rng);
    b.norm1_gain = ones_matrix<Scalar>(1, c.dim);
    b.norm2_gain = ones_matrix<Scalar>(1, c.dim);
  }
  return p;
}

template <typename Scalar>
std::vector<Matrix<Scalar>*> Parameters<Scalar>::tensors() {
  std::vector<Matrix<Scalar>*> out{&item_embedding, &position_embedding};
  for (auto& b : blocks) {
    out.insert(out.end(), {&b.query, &b.query_bias, &b.key, &b.key_bias, &b.value, &b.value_bias,
                           &b.output, &b.output_bias, &b.norm1_gain, &b.norm1_bias, &b.ffn_in,
                           &b.ffn_in_bias, &b.ffn_out, &b.ffn_out_bias, &b.norm2_gain,
                           &b.norm2_bias});
  }
  return out;
}

template <typename Scalar>
std::vector<const Matrix<Scalar>*> Parameters<Scalar>::tensors() const {
  auto mutable_tensors = const_cast<Parameters*>(this)->tensors();
  return {mutable_tensors.begin(), mutable_tensors.end()};
}

template <typename Scalar>
std::vector<std::string> Parameters<Scalar>::tensor_names(const EncoderConfig& c) {
  std::vector<std::string> names{"item_embedding", "position_embedding"};
  for (std::size_t i = 0; i < c.blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    for (const char* n : {"query", "query_bias", "key", "key_bias", "value", "value_bias", "output",
                          "output_bias", "norm1_gain", "norm1_bias", "ffn_in", "ffn_in_bias",
                          "ffn_out", "ffn_out_bias", "norm2_gain", "norm2_bias"}) {
      names.push_back(p + n);
    }
  }
  return names;
}

template <typename Scalar>
void Parameters<Scalar>::set_zero() {
  for (auto* t : tensors()) t->setZero();
}

template <typename Scalar>
Parameters<Scalar>& Parameters<Scalar>::operator+=(const Parameters& other) {
  auto dst = tensors();
  auto src = other.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
  return *this;
}

template <typename Scalar>
Parameters<Scalar>& Parameters<Scalar>::operator*=(Scalar factor) {
  for (auto* t : tensors()) *t *= factor;
  return *this;
}

template <typename Scalar>
bool Parameters<Scalar>::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

template <typename Scalar>
std::size_t Parameters<Scalar>::size() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

// --- layers ----------------------------------------------------------------

namespace {

template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform01() < rate ? Scalar(0) : keep;
  }
  return m;
}

template <typename Scalar>
Matrix<Scalar> affine(const Matrix<Scalar>& x, const Matrix<Scalar>& w, const Matrix<Scalar>& b) {
  Matrix<Scalar> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

template <typename Scalar>
void layer_norm(const Matrix<Scalar>& x, const Matrix<Scalar>& gain, const Matrix<Scalar>& bias,
                double eps, Matrix<Scalar>& hat, RowVector<Scalar>& inv_std, Matrix<Scalar>& out) {
  const Eigen::Index rows = x.rows();
  hat.resize(rows, x.cols());
  inv_std.resize(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const Scalar mean = x.row(t).mean();
    const auto centered = (x.row(t).array() - mean).matrix().eval();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(x.cols());
    const Scalar inv = Scalar(1) / std::sqrt(var + static_cast<Scalar>(eps));
    inv_std[t] = inv;
    hat.row(t) = centered * inv;
  }
  out = (hat.array().rowwise() * gain.row(0).array()).matrix();
  out.rowwise() += bias.row(0);
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& d_out, const Matrix<Scalar>& hat,
                                   const RowVector<Scalar>& inv_std, const Matrix<Scalar>& gain,
                                   Matrix<Scalar>& d_gain, Matrix<Scalar>& d_bias) {
  d_gain.row(0) += (d_out.array() * hat.array()).colwise().sum().matrix();
  d_bias.row(0) += d_out.colwise().sum();
  const Matrix<Scalar> d_hat = (d_out.array().rowwise() * gain.row(0).array()).matrix();
  Matrix<Scalar> d_x(d_out.rows(), d_out.cols());
  for (Eigen::Index t = 0; t < d_out.rows(); ++t) {
    const Scalar mean_d = d_hat.row(t).mean();
    const Scalar mean_dh = d_hat.row(t).dot(hat.row(t)) / static_cast<Scalar>(d_out.cols());
    d_x.row(t) = inv_std[t] * (d_hat.row(t).array() - mean_d - hat.row(t).array() * mean_dh).matrix();
  }
  return d_x;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Scalar> /
                     std::numbers::sqrt2_v<Scalar>;
  return cdf + x * pdf;
}

template <typename Scalar>
void check_finite(const Matrix<Scalar>& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("non-finite activation in " + layer);
}

}  // namespace

// --- Encoder ---------------------------------------------------------------

template <typename Scalar>
Encoder<Scalar>::Encoder(EncoderConfig config, Parameters<Scalar> parameters)
    : config_(config), params_(std::move(parameters)) {
  config_.validate();
  if (static_cast<std::size_t>(params_.item_embedding.rows()) != config_.vocab_rows() ||
      static_cast<std::size_t>(params_.item_embedding.cols()) != config_.dim ||
      static_cast<std::size_t>(params_.position_embedding.rows()) != config_.max_length ||
      params_.blocks.size() != config_.blocks) {
    throw ConfigError("parameter shapes do not match the encoder configuration");
  }
}

template <typename Scalar>
Encoder<Scalar> Encoder<Scalar>::initialized(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  return Encoder(config, Parameters<Scalar>::random(config, rng));
}

template <typename Scalar>
std::vector<ItemId> Encoder<Scalar>::pad(std::span<const ItemId> seq) const {
  const std::size_t t = config_.max_length;
  std::vector<ItemId> out(t, kPaddingId);
  const std::size_t n = std::min(seq.size(), t);
  std::copy(seq.end() - static_cast<std::ptrdiff_t>(n), seq.end(),
            out.end() - static_cast<std::ptrdiff_t>(n));
  return out;
}

template <typename Scalar>
ForwardTrace<Scalar> Encoder<Scalar>::forward(std::span<const ItemId> ids, bool train,
                                              Rng* dropout_rng) const {
  const auto T = static_cast<Eigen::Index>(config_.max_length);
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto heads = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index dh = d / heads;
  if (ids.size() != config_.max_length) throw ConfigError("encoder input must have length max_length");
  const bool use_dropout = train && dropout_rng != nullptr && config_.dropout > 0.0;
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));

  ForwardTrace<Scalar> tr;
  tr.ids.assign(ids.begin(), ids.end());
  tr.valid.resize(ids.size());
  Matrix<Scalar> x = Matrix<Scalar>::Zero(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const ItemId id = ids[static_cast<std::size_t>(t)];
    if (id > config_.item_count + 1) throw ConfigError("item id outside the embedding table");
    tr.valid[static_cast<std::size_t>(t)] = id != kPaddingId;
    if (id != kPaddingId) x.row(t) = params_.item_embedding.row(id) + params_.position_embedding.row(t);
  }
  if (use_dropout) {
    tr.embed_dropout = dropout_mask<Scalar>(T, d, config_.dropout, *dropout_rng);
    x = x.cwiseProduct(tr.embed_dropout);
  }

  tr.blocks.resize(config_.blocks);
  for (std::size_t bi = 0; bi < config_.blocks; ++bi) {
    const auto& p = params_.blocks[bi];
    auto& bt = tr.blocks[bi];
    bt.input = x;
    bt.q = affine(x, p.query, p.query_bias);
    bt.k = affine(x, p.key, p.key_bias);
    bt.v = affine(x, p.value, p.value_bias);
    bt.context = Matrix<Scalar>::Zero(T, d);
    bt.probs.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix<Scalar> scores = bt.q.middleCols(h * dh, dh) * bt.k.middleCols(h * dh, dh).transpose();
      Matrix<Scalar>& probs = bt.probs[static_cast<std::size_t>(h)];
      probs = Matrix<Scalar>::Zero(T, T);
      for (Eigen::Index t = 0; t < T; ++t) {
        Scalar max_score = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index s = 0; s <= t; ++s) {
          if (tr.valid[static_cast<std::size_t>(s)]) max_score = std::max(max_score, scores(t, s) * scale);
        }
        if (max_score == -std::numeric_limits<Scalar>::infinity()) continue;
        Scalar total = 0;
        for (Eigen::Index s = 0; s <= t; ++s) {
          if (!tr.valid[static_cast<std::size_t>(s)]) continue;
          const Scalar e = std::exp(scores(t, s) * scale - max_score);
          probs(t, s) = e;
          total += e;
        }
        probs.row(t) /= total;
      }
      bt.context.middleCols(h * dh, dh).noalias() = probs * bt.v.middleCols(h * dh, dh);
    }
    Matrix<Scalar> attn = affine(bt.context, p.output, p.output_bias);
    if (use_dropout) {
      bt.attn_dropout = dropout_mask<Scalar>(T, d, config_.dropout, *dropout_rng);
      attn = attn.cwiseProduct(bt.attn_dropout);
    }
    const Matrix<Scalar> residual1 = x + attn;
    layer_norm(residual1, p.norm1_gain, p.norm1_bias, config_.layer_norm_eps, bt.norm1_hat,
               bt.norm1_inv_std, bt.norm1_out);

    bt.ffn_pre = affine(bt.norm1_out, p.ffn_in, p.ffn_in_bias);
    bt.ffn_act = bt.ffn_pre.unaryExpr([](Scalar v) { return gelu(v); });
    Matrix<Scalar> ffn = affine(bt.ffn_act, p.ffn_out, p.ffn_out_bias);
    if (use_dropout) {
      bt.ffn_dropout = dropout_mask<Scalar>(T, d, config_.dropout, *dropout_rng);
      ffn = ffn.cwiseProduct(bt.ffn_dropout);
    }
    const Matrix<Scalar> residual2 = bt.norm1_out + ffn;
    Matrix<Scalar> out;
    layer_norm(residual2, p.norm2_gain, p.norm2_bias, config_.layer_norm_eps, bt.norm2_hat,
               bt.norm2_inv_std, out);
    check_finite(out, "block " + std::to_string(bi));
    // Padded rows carry no content; zeroing them keeps them out of every
    // downstream computation and gradient.
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!tr.valid[static_cast<std::size_t>(t)]) out.row(t).setZero();
    }
    x = std::move(out);
  }
  tr.hidden = std::move(x);
  return tr;
}

template <typename Scalar>
HiddenStates<Scalar> Encoder<Scalar>::encode(std::span<const ItemId> ids, bool train,
                                             Rng* dropout_rng) const {
  auto tr = forward(ids, train, dropout_rng);
  return {std::move(tr.hidden), std::move(tr.valid)};
}

template <typename Scalar>
void Encoder<Scalar>::backward(const ForwardTrace<Scalar>& tr, const Matrix<Scalar>& d_hidden,
                               Parameters<Scalar>& grads) const {
  const auto T = static_cast<Eigen::Index>(config_.max_length);
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto heads = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index dh = d / heads;
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));

  Matrix<Scalar> dx = d_hidden;
  for (std::size_t bi = config_.blocks; bi-- > 0;) {
    const auto& p = params_.blocks[bi];
    auto& g = grads.blocks[bi];
    const auto& bt = tr.blocks[bi];
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!tr.valid[static_cast<std::size_t>(t)]) dx.row(t).setZero();
    }

    // add & norm 2
    const Matrix<Scalar> d_res2 =
        layer_norm_backward(dx, bt.norm2_hat, bt.norm2_inv_std, p.norm2_gain, g.norm2_gain, g.norm2_bias);
    Matrix<Scalar> d_ffn = bt.ffn_dropout.size() ? d_res2.cwiseProduct(bt.ffn_dropout) : d_res2;
    g.ffn_out_bias.row(0) += d_ffn.colwise().sum();
    g.ffn_out.noalias() += bt.ffn_act.transpose() * d_ffn;
    Matrix<Scalar> d_pre = d_ffn * p.ffn_out.transpose();
    d_pre = d_pre.cwiseProduct(bt.ffn_pre.unaryExpr([](Scalar v) { return gelu_grad(v); }));
    g.ffn_in_bias.row(0) += d_pre.colwise().sum();
    g.ffn_in.noalias() += bt.norm1_out.transpose() * d_pre;
    Matrix<Scalar> d_norm1 = d_res2;
    d_norm1.noalias() += d_pre * p.ffn_in.transpose();

    // add & norm 1
    const Matrix<Scalar> d_res1 = layer_norm_backward(d_norm1, bt.norm1_hat, bt.norm1_inv_std,
                                                      p.norm1_gain, g.norm1_gain, g.norm1_bias);
    Matrix<Scalar> d_input = d_res1;
    const Matrix<Scalar> d_attn = bt.attn_dropout.size() ? d_res1.cwiseProduct(bt.attn_dropout) : d_res1;
    g.output_bias.row(0) += d_attn.colwise().sum();
    g.output.noalias() += bt.context.transpose() * d_attn;
    const Matrix<Scalar> d_context = d_attn * p.output.transpose();

    Matrix<Scalar> dq(T, d), dk(T, d), dv(T, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix<Scalar>& probs = bt.probs[static_cast<std::size_t>(h)];
      const auto d_ctx_h = d_context.middleCols(h * dh, dh);
      const Matrix<Scalar> d_probs = d_ctx_h * bt.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = probs.transpose() * d_ctx_h;
      Matrix<Scalar> d_scores = probs.cwiseProduct(d_probs);
      const auto row_dot = d_scores.rowwise().sum().eval();
      d_scores -= (probs.array().colwise() * row_dot.array()).matrix();
      d_scores *= scale;
      dq.middleCols(h * dh, dh).noalias() = d_scores * bt.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = d_scores.transpose() * bt.q.middleCols(h * dh, dh);
    }
    g.query_bias.row(0) += dq.colwise().sum();
    g.key_bias.row(0) += dk.colwise().sum();
    g.value_bias.row(0) += dv.colwise().sum();
    g.query.noalias() += bt.input.transpose() * dq;
    g.key.noalias() += bt.input.transpose() * dk;
    g.value.noalias() += bt.input.transpose() * dv;
    d_input.noalias() += dq * p.query.transpose();
    d_input.noalias() += dk * p.key.transpose();
    d_input.noalias() += dv * p.value.transpose();
    dx = std::move(d_input);
  }

  if (tr.embed_dropout.size()) dx = dx.cwiseProduct(tr.embed_dropout);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!tr.valid[static_cast<std::size_t>(t)]) continue;
    grads.item_embedding.row(tr.ids[static_cast<std::size_t>(t)]) += dx.row(t);
    grads.position_embedding.row(t) += dx.row(t);
  }
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> Encoder<Scalar>::score_items(const RowVector<Scalar>& h) const {
  const auto items = params_.item_embedding.middleRows(1, static_cast<Eigen::Index>(config_.item_count));
  return items * h.transpose();
}

template <typename Scalar>
RowVector<Scalar> sequence_representation(const Matrix<Scalar>& hidden, std::span<const char> valid,
                                          bool zero_padding) {
  RowVector<Scalar> out(hidden.size());
  const Eigen::Index d = hidden.cols();
  for (Eigen::Index t = 0; t < hidden.rows(); ++t) {
    if (zero_padding && !valid[static_cast<std::size_t>(t)]) {
      out.segment(t * d, d).setZero();
    } else {
      out.segment(t * d, d) = hidden.row(t);
    }
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> representation_gradient(const RowVector<Scalar>& d_repr, std::span<const char> valid,
                                       std::size_t dim, bool zero_padding) {
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::Index T = d_repr.size() / d;
  Matrix<Scalar> out(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (zero_padding && !valid[static_cast<std::size_t>(t)]) {
      out.row(t).setZero();
    } else {
      out.row(t) = d_repr.segment(t * d, d);
    }
  }
  return out;
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Encoder<float>;
template class Encoder<double>;
template RowVector<float> sequence_representation(const Matrix<float>&, std::span<const char>, bool);
template RowVector<double> sequence_representation(const Matrix<double>&, std::span<const char>, bool);
template Matrix<float> representation_gradient(const RowVector<float>&, std::span<const char>, std::size_t, bool);
template Matrix<double> representation_gradient(const RowVector<double>&, std::span<const char>, std::size_t, bool);

}  // namespace coserec::encoder
