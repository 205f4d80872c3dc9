#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coserec/encoder.hpp"

namespace coserec::optimizer {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// One bias-corrected Adam update of a flat tensor. `step` is 1-based.
template <typename Scalar>
void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, std::span<Scalar> m,
                 std::span<Scalar> v, std::int64_t step, const AdamConfig& config);

/// Adam moments for every encoder tensor.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(const encoder::EncoderConfig& encoder_config, AdamConfig config);

  /// Throws NumericError on non-finite gradients.
  void step(encoder::Parameters<Scalar>& params, const encoder::Parameters<Scalar>& grads);

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t step_count() const noexcept { return step_; }
  encoder::Parameters<Scalar>& first_moment() noexcept { return m_; }
  encoder::Parameters<Scalar>& second_moment() noexcept { return v_; }
  const encoder::Parameters<Scalar>& first_moment() const noexcept { return m_; }
  const encoder::Parameters<Scalar>& second_moment() const noexcept { return v_; }
  void set_step_count(std::int64_t step) noexcept { step_ = step; }

 private:
  AdamConfig config_;
  encoder::Parameters<Scalar> m_;
  encoder::Parameters<Scalar> v_;
  std::int64_t step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace coserec::optimizer
