#include <gtest/gtest.h>

#include <cmath>

#include "coserec/error.hpp"
#include "coserec/objectives.hpp"
#include "coserec/rng.hpp"
#include "../support/oracles.hpp"

using namespace coserec;
using namespace coserec::objectives;
using M = encoder::Matrix<double>;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

M random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  M m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

std::vector<std::vector<double>> rows_of(const M& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
  }
  return out;
}

}  // namespace

TEST(RecLoss, ZeroHiddenGivesTwoLogTwo) {
  const M hidden = M::Zero(3, 4);
  Rng rng(1);
  const M items = random_matrix(6, 4, 1.0, rng);
  const std::vector<ItemId> pos = {1, 2, 3}, neg = {4, 5, 1};
  EXPECT_NEAR(rec_loss<double>(hidden, pos, neg, items), 2 * std::log(2.0), 1e-12);
}

TEST(RecLoss, SaturationIsClampedAndFinite) {
  M hidden = M::Zero(1, 1);
  hidden(0, 0) = 1.0;
  M items = M::Zero(3, 1);
  items(1, 0) = -1e4;  // positive scored hugely negative
  items(2, 0) = 1e4;   // negative scored hugely positive
  const std::vector<ItemId> pos = {1}, neg = {2};
  const double loss = rec_loss<double>(hidden, pos, neg, items);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -2 * std::log(1e-12), 1e-4);
}

TEST(RecLoss, ToyThreePositionCase) {
  // Position 0 padded; the other two contribute.
  M hidden(3, 2);
  hidden << 9, 9, 1, 0, 0, 2;
  M items(4, 2);
  items << 0, 0, 1, 1, -1, 0.5, 0.25, -2;
  const std::vector<ItemId> pos = {0, 1, 2}, neg = {3, 3, 1};
  const double t1 = -std::log(sigmoid(1.0)) - std::log(1 - sigmoid(0.25));
  const double t2 = -std::log(sigmoid(1.0)) - std::log(1 - sigmoid(2.0));
  EXPECT_NEAR(rec_loss<double>(hidden, pos, neg, items), (t1 + t2) / 2, 1e-12);
}

TEST(RecLoss, NoValidPositionGivesZero) {
  const M hidden = M::Ones(2, 2);
  const M items = M::Ones(3, 2);
  const std::vector<ItemId> pos = {0, 0}, neg = {1, 1};
  EXPECT_EQ(rec_loss<double>(hidden, pos, neg, items), 0.0);
}

TEST(RecLoss, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  M hidden = random_matrix(4, 3, 0.7, rng);
  M items = random_matrix(6, 3, 0.7, rng);
  const std::vector<ItemId> pos = {0, 2, 5, 1}, neg = {0, 3, 3, 4};
  M dh = M::Zero(4, 3), de = M::Zero(6, 3);
  rec_loss<double>(hidden, pos, neg, items, &dh, &de, 1.0);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < hidden.size(); ++i) {
    const double s = hidden.data()[i];
    hidden.data()[i] = s + h;
    const double up = rec_loss<double>(hidden, pos, neg, items);
    hidden.data()[i] = s - h;
    const double down = rec_loss<double>(hidden, pos, neg, items);
    hidden.data()[i] = s;
    EXPECT_NEAR(dh.data()[i], (up - down) / (2 * h), 1e-7);
  }
  for (Eigen::Index i = 0; i < items.size(); ++i) {
    const double s = items.data()[i];
    items.data()[i] = s + h;
    const double up = rec_loss<double>(hidden, pos, neg, items);
    items.data()[i] = s - h;
    const double down = rec_loss<double>(hidden, pos, neg, items);
    items.data()[i] = s;
    EXPECT_NEAR(de.data()[i], (up - down) / (2 * h), 1e-7);
  }
}

TEST(NtXent, SinglePairIsZero) {
  Rng rng(3);
  const M views = random_matrix(2, 5, 1.0, rng);
  EXPECT_NEAR(ntxent<double>(views), 0.0, 1e-12);
}

TEST(NtXent, TwoPairsOfEqualViewsGiveLogThree) {
  const M views = M::Zero(4, 3);
  EXPECT_NEAR(ntxent<double>(views), std::log(3.0), 1e-12);
}

TEST(NtXent, MatchesEnumeration) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 * (1 + rng.uniform_index(6)));
    const M views = random_matrix(n, 1 + static_cast<Eigen::Index>(rng.uniform_index(8)), 1.5, rng);
    EXPECT_NEAR(ntxent<double>(views), oracle::ntxent_enumerated(rows_of(views)), 1e-9);
  }
}

TEST(NtXent, StableForLargeSimilarities) {
  Rng rng(5);
  const M views = random_matrix(6, 4, 40.0, rng);
  const double loss = ntxent<double>(views);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GE(loss, 0.0);
}

TEST(NtXent, InvariantToPairOrderAndSwap) {
  Rng rng(6);
  const M views = random_matrix(6, 3, 1.0, rng);
  M swapped = views;
  swapped.row(0) = views.row(1);
  swapped.row(1) = views.row(0);
  M shifted(6, 3);
  for (int r = 0; r < 6; ++r) shifted.row((r + 2) % 6) = views.row(r);
  const double base = ntxent<double>(views);
  EXPECT_NEAR(ntxent<double>(swapped), base, 1e-12);
  EXPECT_NEAR(ntxent<double>(shifted), base, 1e-12);
}

TEST(NtXent, InvariantToSharedRotation) {
  Rng rng(7);
  const M views = random_matrix(4, 3, 1.0, rng);
  const Eigen::HouseholderQR<M> qr(random_matrix(3, 3, 1.0, rng));
  const M q = qr.householderQ();
  EXPECT_NEAR(ntxent<double>(M(views * q)), ntxent<double>(views), 1e-10);
}

TEST(NtXent, GradientMatchesFiniteDifferencesAndScales) {
  Rng rng(8);
  M views = random_matrix(6, 4, 0.8, rng);
  M grad, scaled;
  ntxent<double>(views, &grad, 1.0);
  ntxent<double>(views, &scaled, 0.25);
  EXPECT_LT((scaled - 0.25 * grad).cwiseAbs().maxCoeff(), 1e-14);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < views.size(); ++i) {
    const double s = views.data()[i];
    views.data()[i] = s + h;
    const double up = ntxent<double>(views);
    views.data()[i] = s - h;
    const double down = ntxent<double>(views);
    views.data()[i] = s;
    EXPECT_NEAR(grad.data()[i], (up - down) / (2 * h), 1e-7);
  }
}

TEST(NtXent, FloatAgreesWithDouble) {
  Rng rng(9);
  const M views = random_matrix(8, 5, 1.0, rng);
  const encoder::Matrix<float> f = views.cast<float>();
  EXPECT_NEAR(ntxent<float>(f), ntxent<double>(views), 1e-4);
}

TEST(JointLoss, Arithmetic) {
  EXPECT_DOUBLE_EQ(joint_loss(1.5, 2.0, 0.1), 1.7);
  EXPECT_DOUBLE_EQ(joint_loss(1.5, 2.0, 0.0), 1.5);
  EXPECT_THROW(joint_loss(1.0, 1.0, -0.1), ConfigError);
}
