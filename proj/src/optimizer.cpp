#include "coserec/optimizer.hpp"

#include <cmath>

#include "coserec/error.hpp"

namespace coserec::optimizer {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

template <typename Scalar>
void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, std::span<Scalar> m,
                 std::span<Scalar> v, std::int64_t step, const AdamConfig& config) {
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto step_size = static_cast<Scalar>(config.learning_rate / c1);
  const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
  const auto eps = static_cast<Scalar>(config.epsilon);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Scalar g = grad[i];
    m[i] = b1 * m[i] + (Scalar(1) - b1) * g;
    v[i] = b2 * v[i] + (Scalar(1) - b2) * g * g;
    param[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
  }
}

template <typename Scalar>
Adam<Scalar>::Adam(const encoder::EncoderConfig& encoder_config, AdamConfig config)
    : config_(config),
      m_(encoder::Parameters<Scalar>::zeros(encoder_config)),
      v_(encoder::Parameters<Scalar>::zeros(encoder_config)) {
  config_.validate();
}

template <typename Scalar>
void Adam<Scalar>::step(encoder::Parameters<Scalar>& params, const encoder::Parameters<Scalar>& grads) {
  if (!grads.all_finite()) throw NumericError("non-finite gradient");
  ++step_;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto n = static_cast<std::size_t>(p[i]->size());
    adam_update<Scalar>({p[i]->data(), n}, {g[i]->data(), n}, {m[i]->data(), n},
                        {v[i]->data(), n}, step_, config_);
  }
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, std::int64_t, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, std::int64_t, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace coserec::optimizer
