#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "hg/objective/losses.hpp"

using namespace hg;
using namespace hg::objective;
using hg::test::random_tensor;

namespace {

double ce_oracle(const std::vector<double>& logits, int label) {
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  return -std::log(std::exp(logits[static_cast<std::size_t>(label)]) / z);
}

double bce_oracle(double x, bool y) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return y ? -std::log(s) : -std::log(1.0 - s);
}

}  // namespace

TEST(PartsCe, UniformLogits) {
  const std::vector<int> labels{0, 1, 1};
  EXPECT_NEAR(parts_ce_loss(Tensor<double>({3, 6, 2}, 0.7), labels).value, 6.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(parts_ce_loss(Tensor<double>({3, 4, 5}), labels).value, 4.0 * std::log(5.0), 1e-12);
}

TEST(PartsCe, ConfidentCorrectLogits) {
  Tensor<double> logits({2, 3, 2});
  const std::vector<int> labels{0, 1};
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 3; ++i) logits.at(b, i, labels[b]) = 20.0;
  EXPECT_LT(parts_ce_loss(logits, labels).value / 3.0, 1e-8);
}

TEST(PartsCe, SinglePartMatchesOracle) {
  Rng rng(1);
  const auto logits = random_tensor({7, 1, 4}, rng, -3.0, 3.0);
  const std::vector<int> labels{0, 3, 2, 2, 1, 0, 3};
  double s = 0.0;
  for (int b = 0; b < 7; ++b)
    s += ce_oracle({logits.at(b, 0, 0), logits.at(b, 0, 1), logits.at(b, 0, 2), logits.at(b, 0, 3)}, labels[b]);
  EXPECT_NEAR(parts_ce_loss(logits, labels).value, s / 7.0, 1e-9);
}

TEST(PartsCe, PermutationEquivariant) {
  Rng rng(2);
  const auto logits = random_tensor({5, 2, 3}, rng, -2.0, 2.0);
  const std::vector<int> labels{0, 1, 2, 1, 0};
  const std::vector<int> perm{3, 0, 4, 2, 1};
  Tensor<double> shuffled(logits.shape());
  std::vector<int> sl;
  for (int b = 0; b < 5; ++b) {
    sl.push_back(labels[perm[b]]);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 3; ++k) shuffled.at(b, i, k) = logits.at(perm[b], i, k);
  }
  EXPECT_NEAR(parts_ce_loss(logits, labels).value, parts_ce_loss(shuffled, sl).value, 1e-12);
}

TEST(PartsCe, LabelOutOfRange) {
  EXPECT_THROW(parts_ce_loss(Tensor<double>({2, 1, 3}), {0, 3}), InvalidArgument);
  EXPECT_THROW(parts_ce_loss(Tensor<double>({2, 1, 3}), {0, -1}), InvalidArgument);
  EXPECT_THROW(parts_ce_loss(Tensor<double>({2, 1, 3}), {0}), InvalidArgument);
}

TEST(PartsCe, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  auto logits = random_tensor({4, 3, 5}, rng, -2.0, 2.0);
  const std::vector<int> labels{4, 0, 2, 2};
  const auto r = parts_ce_loss(logits, labels);
  for (std::size_t k = 0; k < logits.size(); ++k)
    EXPECT_LT(test::rel_err(r.grad[k], test::central_diff(logits[k], [&] { return parts_ce_loss(logits, labels).value; })),
              test::kFdTol);
}

TEST(ReconLoss, Examples) {
  Rng rng(4);
  const auto x = random_tensor({2, 3, 4, 2}, rng, 0.0, 1.0);
  EXPECT_EQ(recon_loss(x, x).value, 0.0);
  EXPECT_DOUBLE_EQ(recon_loss(Tensor<double>({2, 3, 4, 2}), Tensor<double>({2, 3, 4, 2}, 0.5)).value, 0.5);
  const auto y = random_tensor(x.shape(), rng, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  EXPECT_NEAR(recon_loss(x, y).value, s / static_cast<double>(x.size()), 1e-12);
  EXPECT_THROW(recon_loss(x, Tensor<double>({2, 3, 4, 3})), InvalidArgument);
}

TEST(ReconLoss, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const auto x = random_tensor({2, 3, 2, 2}, rng, 0.0, 1.0);
  auto y = random_tensor(x.shape(), rng, 0.0, 1.0);
  const auto r = recon_loss(x, y);
  for (std::size_t k = 0; k < y.size(); ++k)
    EXPECT_LT(test::rel_err(r.grad[k], test::central_diff(y[k], [&] { return recon_loss(x, y).value; })), test::kFdTol);
}

TEST(JointLoss, Examples) {
  LossWeights w;
  EXPECT_EQ(joint_loss(1.0, 2.0, w), 1.02);
  w.lambda_recon = 0.0;
  EXPECT_EQ(joint_loss(1.5, 2.0, w), 1.5);
  w.lambda_recon = 0.3;
  EXPECT_EQ(joint_loss(1.5, 0.0, w), 1.5);
}

TEST(OcclusionBce, Examples) {
  EXPECT_NEAR(occlusion_bce(Tensor<double>({2}), {true, false}).value, std::log(2.0), 1e-12);
  EXPECT_LT(occlusion_bce(Tensor<double>({1}, 20.0), {true}).value, 1e-8);
  EXPECT_LT(occlusion_bce(Tensor<double>({1}, -20.0), {false}).value, 1e-8);
  EXPECT_THROW(occlusion_bce(Tensor<double>({2}), {true}), InvalidArgument);
}

TEST(OcclusionBce, MatchesOracleAndGradient) {
  Rng rng(6);
  auto logits = random_tensor({9}, rng, -4.0, 4.0);
  std::vector<bool> flags;
  double s = 0.0;
  for (int b = 0; b < 9; ++b) {
    flags.push_back(b % 3 == 0);
    s += bce_oracle(logits[b], flags.back());
  }
  const auto r = occlusion_bce(logits, flags);
  EXPECT_NEAR(r.value, s / 9.0, 1e-9);
  for (std::size_t k = 0; k < logits.size(); ++k)
    EXPECT_LT(test::rel_err(r.grad[k], test::central_diff(logits[k], [&] { return occlusion_bce(logits, flags).value; })),
              test::kFdTol);
}

TEST(TotalLoss, Examples) {
  LossWeights w;
  w.occ_cls_weight = 0.0;
  EXPECT_EQ(total_loss(1.5, 0.5, 4.0, 9.0, w), 3.0);
  w.alpha = 1.0;
  EXPECT_EQ(total_loss(1.5, 0.5, 4.0, 9.0, w), 2.0);
  w.alpha = 0.0;
  EXPECT_EQ(total_loss(1.5, 0.5, 4.0, 9.0, w), 4.0);
}

TEST(TotalLoss, AffineInEachComponent) {
  const LossWeights w;
  const double base = total_loss(1.0, 2.0, 3.0, 4.0, w);
  EXPECT_NEAR(total_loss(2.0, 2.0, 3.0, 4.0, w) - base, w.alpha, 1e-12);
  EXPECT_NEAR(total_loss(1.0, 3.0, 3.0, 4.0, w) - base, w.alpha, 1e-12);
  EXPECT_NEAR(total_loss(1.0, 2.0, 4.0, 4.0, w) - base, 1.0 - w.alpha, 1e-12);
  EXPECT_NEAR(total_loss(1.0, 2.0, 3.0, 5.0, w) - base, w.occ_cls_weight, 1e-12);
}

TEST(LossWeights, Validation) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.alpha = 1.5;
  EXPECT_THROW(w.validate(), InvalidArgument);
  w = {};
  w.lambda2 = -1.0;
  EXPECT_THROW(w.validate(), InvalidArgument);
  w = {};
  w.lambda_recon = NAN;
  EXPECT_THROW(w.validate(), InvalidArgument);
}

TEST(LossBreakdown, FieldsInOrder) {
  LossBreakdown b;
  std::vector<std::string> names;
  b.for_each_field([&](const char* n, double&) { names.emplace_back(n); });
  EXPECT_EQ(names.size(), 12u);
  EXPECT_EQ(names.front(), "ce_teacher");
  EXPECT_EQ(names.back(), "total");
}
