#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "coserec/encoder.hpp"
#include "coserec/objectives.hpp"
#include "coserec/rng.hpp"

namespace coserec::oracle {

using Dense = std::vector<std::vector<double>>;

/// ItemCF-IUF by a double loop over item pairs and users.
inline Dense item_cf_iuf(const std::vector<std::vector<ItemId>>& users, std::size_t items,
                         double log_base = 0.0) {
  Dense s(items + 1, std::vector<double>(items + 1, 0.0));
  std::vector<std::set<ItemId>> sets;
  for (const auto& u : users) sets.emplace_back(u.begin(), u.end());
  for (ItemId i = 1; i <= items; ++i) {
    for (ItemId j = 1; j <= items; ++j) {
      if (i == j) continue;
      double sum = 0.0, ni = 0.0, nj = 0.0;
      for (const auto& u : sets) {
        const bool hi = u.contains(i), hj = u.contains(j);
        ni += hi;
        nj += hj;
        if (hi && hj) {
          double l = std::log(1.0 + static_cast<double>(u.size()));
          if (log_base > 0.0) l /= std::log(log_base);
          sum += 1.0 / l;
        }
      }
      if (sum > 0.0) s[i][j] = sum / std::sqrt(ni * nj);
    }
  }
  return s;
}

/// Lowest id among the maxima of row i; with `require_positive`, 0 when no
/// entry is positive.
inline ItemId dense_top1(const Dense& s, ItemId i, bool require_positive) {
  ItemId best = 0;
  double best_score = 0.0;
  for (ItemId j = 1; j < s.size(); ++j) {
    if (j == i) continue;
    if (best == 0 ? (!require_positive || s[i][j] > 0) : s[i][j] > best_score) {
      best = j;
      best_score = s[i][j];
    }
  }
  return best;
}

/// Global min-max over off-diagonal entries; constant sources map to 0.
inline Dense min_max(const Dense& s) {
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 1; i < s.size(); ++i) {
    for (std::size_t j = 1; j < s.size(); ++j) {
      if (i != j) lo = std::min(lo, s[i][j]), hi = std::max(hi, s[i][j]);
    }
  }
  Dense out = s;
  for (std::size_t i = 1; i < s.size(); ++i) {
    for (std::size_t j = 1; j < s.size(); ++j) out[i][j] = (i == j || hi <= lo) ? 0.0 : (s[i][j] - lo) / (hi - lo);
  }
  return out;
}

/// NT-Xent written term by term: for every anchor a, -log of the positive's
/// softmax share among all other views, averaged over 2N anchors.
inline double ntxent_enumerated(const std::vector<std::vector<double>>& views) {
  const std::size_t n = views.size();
  const auto sim = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < views[a].size(); ++k) s += views[a][k] * views[b][k];
    return s;
  };
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t p = (a % 2 == 0) ? a + 1 : a - 1;
    long double denom = 0.0L;
    for (std::size_t m = 0; m < n; ++m) {
      if (m != a) denom += std::exp(static_cast<long double>(sim(a, m)));
    }
    total += static_cast<double>(-std::log(std::exp(static_cast<long double>(sim(a, p))) / denom));
  }
  return total / static_cast<double>(n);
}

/// 1-based rank by sorting item indices by descending score, placing the
/// target after every item it ties with.
inline std::size_t sorted_rank(const std::vector<double>& scores, ItemId target) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t t = target - 1;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if ((a == t) != (b == t)) return b == t;
    return a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), t) - order.begin()) + 1;
}

/// Adam written for a single scalar.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double x, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

/// Small joint-loss problem over a double encoder: next-item loss on a few
/// sequences plus lambda times NT-Xent over view pairs.
struct JointProblem {
  encoder::EncoderConfig config;
  std::vector<std::vector<ItemId>> rec_inputs, rec_targets, rec_negatives;
  std::vector<std::vector<ItemId>> views;  // padded, pairs at (2u, 2u+1)
  double lambda = 0.5;

  static JointProblem tiny(std::uint64_t seed) {
    JointProblem p;
    p.config.item_count = 6;
    p.config.dim = 4;
    p.config.blocks = 1;
    p.config.heads = 1;
    p.config.max_length = 4;
    p.config.dropout = 0.0;
    p.config.init_scale = 0.5;
    Rng rng(seed);
    const auto id = [&] { return static_cast<ItemId>(1 + rng.uniform_index(6)); };
    // Left-padded next-item examples (one with padding, one full).
    p.rec_inputs = {{0, id(), id(), id()}, {id(), id(), id(), id()}};
    p.rec_targets = {{0, id(), id(), id()}, {id(), id(), id(), id()}};
    p.rec_negatives = {{0, id(), id(), id()}, {id(), id(), id(), id()}};
    // Two pairs of views, one containing the mask token 7.
    p.views = {{0, 0, id(), id()}, {0, id(), 7, id()}, {id(), id(), id(), id()}, {0, 0, 0, id()}};
    return p;
  }

  double loss(const encoder::Encoder<double>& model, encoder::Parameters<double>* grads) const {
    using M = encoder::Matrix<double>;
    const double inv_n = 1.0 / static_cast<double>(rec_inputs.size());
    double rec = 0.0;
    for (std::size_t u = 0; u < rec_inputs.size(); ++u) {
      const auto trace = model.forward(rec_inputs[u]);
      M d_hidden = M::Zero(trace.hidden.rows(), trace.hidden.cols());
      rec += inv_n * objectives::rec_loss<double>(trace.hidden, rec_targets[u], rec_negatives[u],
                                                  model.parameters().item_embedding,
                                                  grads ? &d_hidden : nullptr,
                                                  grads ? &grads->item_embedding : nullptr, inv_n);
      if (grads) model.backward(trace, d_hidden, *grads);
    }
    const auto dim = static_cast<Eigen::Index>(config.dim * config.max_length);
    M reps(static_cast<Eigen::Index>(views.size()), dim);
    std::vector<encoder::ForwardTrace<double>> traces;
    for (std::size_t v = 0; v < views.size(); ++v) {
      traces.push_back(model.forward(views[v]));
      reps.row(static_cast<Eigen::Index>(v)) =
          encoder::sequence_representation<double>(traces.back().hidden, traces.back().valid, false);
    }
    M d_reps;
    const double ssl = objectives::ntxent<double>(reps, grads ? &d_reps : nullptr, lambda);
    if (grads) {
      for (std::size_t v = 0; v < views.size(); ++v) {
        const encoder::RowVector<double> row = d_reps.row(static_cast<Eigen::Index>(v));
        model.backward(traces[v],
                       encoder::representation_gradient<double>(row, traces[v].valid, config.dim, false),
                       *grads);
      }
    }
    return objectives::joint_loss(rec, ssl, lambda);
  }
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

/// Central differences over every parameter entry. The relative error uses
/// max(|analytic|, |numeric|, floor) as denominator.
inline GradCheckResult gradient_check(const JointProblem& problem, encoder::Encoder<double> model,
                                      double h = 1e-5, double floor = 1e-6) {
  auto grads = encoder::Parameters<double>::zeros(problem.config);
  problem.loss(model, &grads);
  GradCheckResult result;
  const auto names = encoder::Parameters<double>::tensor_names(problem.config);
  auto params = model.parameters().tensors();
  const auto analytic = grads.tensors();
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& tensor = *params[t];
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double saved = tensor.data()[i];
      tensor.data()[i] = saved + h;
      const double up = problem.loss(model, nullptr);
      tensor.data()[i] = saved - h;
      const double down = problem.loss(model, nullptr);
      tensor.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[t]->data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = names[t] + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace coserec::oracle
