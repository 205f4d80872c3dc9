#pragma once

#include <cstddef>
#include <span>

#include "coserec/corpus.hpp"
#include "coserec/encoder.hpp"

namespace coserec::objectives {

using encoder::Matrix;

inline constexpr double kProbabilityClamp = 1e-12;

/// Next-item log-likelihood loss for one sequence with one sampled negative
/// per position:
///   mean over valid t of  -log s(h_t . e_pos) - log(1 - s(h_t . e_neg))
/// Positions with target 0 are ignored. Sigmoid outputs are clamped to
/// [1e-12, 1 - 1e-12] before the log. Returns 0 when no position is valid.
///
/// When `d_hidden` / `d_items` are given, adds `grad_scale` times the loss
/// gradient w.r.t. the hidden states and item embedding rows.
template <typename Scalar>
Scalar rec_loss(const Matrix<Scalar>& hidden, std::span<const ItemId> targets,
                std::span<const ItemId> negatives, const Matrix<Scalar>& item_embedding,
                Matrix<Scalar>* d_hidden = nullptr, Matrix<Scalar>* d_items = nullptr,
                Scalar grad_scale = Scalar(1));

/// NT-Xent over 2N views stored as rows, rows (2u, 2u+1) forming a positive
/// pair. Dot-product similarity, no temperature, log-sum-exp stabilized:
///   (1 / 2N) * sum over anchors a of
///       -sim(a, pos(a)) + log sum_{m != a} exp(sim(a, m))
/// When `d_views` is given, writes `grad_scale` times the gradient into it.
template <typename Scalar>
Scalar ntxent(const Matrix<Scalar>& views, Matrix<Scalar>* d_views = nullptr,
              Scalar grad_scale = Scalar(1));

/// rec + lambda * ssl. lambda must be non-negative.
double joint_loss(double rec, double ssl, double lambda);

extern template float rec_loss(const Matrix<float>&, std::span<const ItemId>, std::span<const ItemId>,
                               const Matrix<float>&, Matrix<float>*, Matrix<float>*, float);
extern template double rec_loss(const Matrix<double>&, std::span<const ItemId>,
                                std::span<const ItemId>, const Matrix<double>&, Matrix<double>*,
                                Matrix<double>*, double);
extern template float ntxent(const Matrix<float>&, Matrix<float>*, float);
extern template double ntxent(const Matrix<double>&, Matrix<double>*, double);

}  // namespace coserec::objectives
