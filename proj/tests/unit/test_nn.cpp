#include "oracles.hpp"
#include "sarfsl/nn/loss.hpp"
#include "sarfsl/nn/optim.hpp"
#include "sarfsl/nn/sequential.hpp"
#include "test_util.hpp"

namespace sarfsl::nn {
namespace {

using MatD = Matrix<double>;

MatD random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// L = sum(w .* net(x)); compares analytic input and parameter gradients with
// central differences.
void gradcheck(Sequential<double>& net, const MatD& x, Rng& rng, double tol = 1e-6) {
  net.set_input_grad_required(true);
  const MatD y = net.forward(x);
  const MatD w = random_matrix(rng, y.rows(), y.cols());
  net.zero_grad();
  const MatD gx = net.backward(w);
  auto loss_at = [&](const MatD& in) { return (net.forward(in).array() * w.array()).sum(); };
  const MatD fd_x = oracle::numeric_gradient(loss_at, x, 1e-6);
  EXPECT_LE((gx - fd_x).norm(), tol * std::max(1.0, fd_x.norm())) << net.describe();

  for (Param<double>* p : net.parameters()) {
    if (!p->trainable) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + 1e-6;
      const double up = loss_at(x);
      p->value.data()[i] = saved - 1e-6;
      const double down = loss_at(x);
      p->value.data()[i] = saved;
      EXPECT_NEAR(p->grad.data()[i], (up - down) / 2e-6, tol * std::max(1.0, std::abs(p->grad.data()[i])))
          << p->name << "[" << i << "] in " << net.describe();
    }
  }
}

TEST(NnGrad, LinearReluLinear) {
  Rng rng(1);
  Sequential<double> net(Shape{5, 1, 1});
  net.add<Linear>(7, rng);
  net.add<ReLU>();
  net.add<Linear>(3, rng);
  gradcheck(net, random_matrix(rng, 5, 4), rng);
}

TEST(NnGrad, ConvPoolFlatten) {
  Rng rng(2);
  Sequential<double> net(Shape{2, 6, 6});
  net.add<Conv2d>(3, 3, 1, 1, rng);
  net.add<MaxPool2d>(2);
  net.add<Flatten>();
  net.add<Linear>(2, rng);
  gradcheck(net, random_matrix(rng, 2, 6 * 6 * 3), rng);
}

TEST(NnGrad, StridedConvAndGlobalPool) {
  Rng rng(3);
  Sequential<double> net(Shape{1, 7, 7});
  net.add<Conv2d>(4, 3, 2, 1, rng);
  net.add<GlobalAvgPool>();
  gradcheck(net, random_matrix(rng, 1, 7 * 7 * 2), rng);
}

TEST(NnGrad, BatchNorm) {
  Rng rng(4);
  Sequential<double> net(Shape{4, 1, 1});
  net.add<Linear>(5, rng);
  net.add<BatchNorm1d>();
  net.add<ReLU>();
  net.add<Linear>(2, rng);
  gradcheck(net, random_matrix(rng, 4, 6), rng, 1e-5);
}

TEST(NnGrad, ResidualWithProjectionShortcut) {
  Rng rng(5);
  const Shape in{2, 4, 4};
  Sequential<double> branch(in);
  branch.add<Conv2d>(3, 3, 2, 1, rng);
  branch.add<ReLU>();
  branch.add<Conv2d>(3, 3, 1, 1, rng);
  Sequential<double> shortcut(in);
  shortcut.add<Conv2d>(3, 1, 2, 0, rng);
  Sequential<double> net(in);
  net.add<Residual>(branch, shortcut);
  net.add<ReLU>();
  gradcheck(net, random_matrix(rng, 2, 16 * 2), rng);
}

TEST(NnGrad, IdentityResidual) {
  Rng rng(6);
  const Shape in{3, 1, 1};
  Sequential<double> branch(in);
  branch.add<Linear>(3, rng);
  Sequential<double> net(in);
  net.add<Residual>(branch, Sequential<double>(in));
  gradcheck(net, random_matrix(rng, 3, 5), rng);
}

TEST(NnLoss, SoftCrossEntropyGradient) {
  Rng rng(7);
  const MatD logits = random_matrix(rng, 4, 6);
  const MatD targets = smoothed_targets<double>({0, 1, 2, 3, 0, 1}, 4, 0.1);
  const auto lg = soft_cross_entropy(logits, targets);
  const MatD fd = oracle::numeric_gradient(
      [&](const MatD& z) { return soft_cross_entropy(z, targets).loss; }, logits, 1e-6);
  EXPECT_LE((lg.grad - fd).norm(), 1e-7);
}

TEST(NnLoss, TargetsAreDistributions) {
  const MatD t = smoothed_targets<double>({2, 0}, 4, 0.2);
  EXPECT_DOUBLE_EQ(t(2, 0), 1.0 - 0.2 + 0.05);
  EXPECT_DOUBLE_EQ(t(1, 0), 0.05);
  EXPECT_NEAR(t.col(1).sum(), 1.0, 1e-15);
  const MatD u = uniform_targets<double>(5, 3);
  EXPECT_DOUBLE_EQ(u(4, 2), 0.2);
}

TEST(NnLoss, UniformLogitsGiveLogM) {
  const MatD logits = MatD::Zero(5, 3);
  EXPECT_NEAR(soft_cross_entropy(logits, uniform_targets<double>(5, 3)).loss, std::log(5.0), 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Param<double> p;
  p.value = MatD::Constant(2, 1, 1.0);
  p.grad = MatD(2, 1);
  p.grad << 0.5, -3.0;
  Adam<double> opt;
  opt.step({&p}, 0.1);
  EXPECT_NEAR(p.value(0), 0.9, 1e-6);
  EXPECT_NEAR(p.value(1), 1.1, 1e-6);
}

TEST(Adam, CosineSchedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 0, 10), 1.0);
  EXPECT_NEAR(cosine_lr(1.0, 5, 10), 0.5, 1e-12);
}

TEST(Sequential, CopyIsDeepAndParametersRoundTrip) {
  Rng rng(8);
  Sequential<float> net(Shape{3, 1, 1});
  net.add<Linear>(4, rng);
  Sequential<float> copy = net;
  auto flat = flatten_parameters(net);
  flat[0] += 1.0f;
  assign_parameters(copy, flat);
  EXPECT_NE(flatten_parameters(copy), flatten_parameters(net));
  EXPECT_NE(parameter_checksum(copy), parameter_checksum(net));
  EXPECT_EQ(copy.describe(), net.describe());
}

TEST(Sequential, InferMatchesForwardWithoutBatchNorm) {
  Rng rng(9);
  Sequential<float> net(Shape{1, 8, 8});
  net.add<Conv2d>(4, 3, 1, 1, rng);
  net.add<ReLU>();
  net.add<MaxPool2d>(2);
  net.add<Flatten>();
  net.add<Linear>(3, rng);
  Matrix<float> x = Matrix<float>::Random(1, 64 * 3);
  EXPECT_TRUE(net.forward(x).isApprox(net.infer(x)));
}

}  // namespace
}  // namespace sarfsl::nn
