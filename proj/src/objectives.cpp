#include "coserec/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coserec/error.hpp"

namespace coserec::objectives {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

template <typename Scalar>
Scalar rec_loss(const Matrix<Scalar>& hidden, std::span<const ItemId> targets,
                std::span<const ItemId> negatives, const Matrix<Scalar>& item_embedding,
                Matrix<Scalar>* d_hidden, Matrix<Scalar>* d_items, Scalar grad_scale) {
  const auto T = static_cast<std::size_t>(hidden.rows());
  if (targets.size() != T || negatives.size() != T) {
    throw ConfigError("rec_loss: targets and negatives must cover every position");
  }
  std::size_t valid = 0;
  for (ItemId t : targets) valid += t != kPaddingId;
  if (valid == 0) return Scalar(0);

  constexpr double lo = kProbabilityClamp;
  constexpr double hi = 1.0 - kProbabilityClamp;
  const double inv_valid = 1.0 / static_cast<double>(valid);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (targets[t] == kPaddingId) continue;
    const auto row = static_cast<Eigen::Index>(t);
    const double pos_logit = static_cast<double>(hidden.row(row).dot(item_embedding.row(targets[t])));
    const double neg_logit = static_cast<double>(hidden.row(row).dot(item_embedding.row(negatives[t])));
    const double p_pos = sigmoid(pos_logit);
    const double p_neg = sigmoid(neg_logit);
    total += -std::log(std::clamp(p_pos, lo, hi)) - std::log(1.0 - std::clamp(p_neg, lo, hi));

    if (d_hidden == nullptr && d_items == nullptr) continue;
    // Derivatives of the clamped terms: zero where the clamp is active.
    const double g_pos = (p_pos > lo && p_pos < hi) ? p_pos - 1.0 : 0.0;
    const double g_neg = (p_neg > lo && p_neg < hi) ? p_neg : 0.0;
    const auto s_pos = static_cast<Scalar>(g_pos * inv_valid) * grad_scale;
    const auto s_neg = static_cast<Scalar>(g_neg * inv_valid) * grad_scale;
    if (d_hidden) {
      d_hidden->row(row) += s_pos * item_embedding.row(targets[t]);
      d_hidden->row(row) += s_neg * item_embedding.row(negatives[t]);
    }
    if (d_items) {
      d_items->row(targets[t]) += s_pos * hidden.row(row);
      d_items->row(negatives[t]) += s_neg * hidden.row(row);
    }
  }
  return static_cast<Scalar>(total * inv_valid);
}

template <typename Scalar>
Scalar ntxent(const Matrix<Scalar>& views, Matrix<Scalar>* d_views, Scalar grad_scale) {
  const Eigen::Index count = views.rows();
  if (count < 2 || count % 2 != 0) throw ConfigError("ntxent needs an even number (>= 2) of views");

  using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  const Dense sims = (views * views.transpose()).template cast<double>();
  Dense coef = Dense::Zero(count, count);  // d loss / d sim(a, m), per anchor row
  double total = 0.0;
  for (Eigen::Index a = 0; a < count; ++a) {
    const Eigen::Index pos = a ^ 1;
    double max_sim = -std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < count; ++m) {
      if (m != a) max_sim = std::max(max_sim, sims(a, m));
    }
    double denom = 0.0;
    for (Eigen::Index m = 0; m < count; ++m) {
      if (m != a) denom += std::exp(sims(a, m) - max_sim);
    }
    const double log_denom = max_sim + std::log(denom);
    total += log_denom - sims(a, pos);
    for (Eigen::Index m = 0; m < count; ++m) {
      if (m != a) coef(a, m) = std::exp(sims(a, m) - log_denom);
    }
    coef(a, pos) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(count);
  if (d_views) {
    // sim(a, m) = v_a . v_m, so each coefficient feeds both rows.
    const Matrix<Scalar> sym = ((coef + coef.transpose()) * inv).template cast<Scalar>();
    *d_views = grad_scale * (sym * views);
  }
  return static_cast<Scalar>(total * inv);
}

double joint_loss(double rec, double ssl, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  return rec + lambda * ssl;
}

template float rec_loss(const Matrix<float>&, std::span<const ItemId>, std::span<const ItemId>,
                        const Matrix<float>&, Matrix<float>*, Matrix<float>*, float);
template double rec_loss(const Matrix<double>&, std::span<const ItemId>, std::span<const ItemId>,
                         const Matrix<double>&, Matrix<double>*, Matrix<double>*, double);
template float ntxent(const Matrix<float>&, Matrix<float>*, float);
template double ntxent(const Matrix<double>&, Matrix<double>*, double);

}  // namespace coserec::objectives
