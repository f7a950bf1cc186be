#include "allocbench/error.hpp"
#include "allocbench/neuro/adam.hpp"
#include "allocbench/neuro/gaussian.hpp"
#include "allocbench/neuro/mlp.hpp"
#include "allocbench/neuro/replay_buffer.hpp"
#include "allocbench/neuro/tape.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

using namespace allocbench;
using namespace allocbench::neuro;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  return sd * standard_normal(r, c, rng);
}

// Checks d f / d x for a scalar tape function of one matrix input.
void check_op(const std::function<Var(Tape&, Var)>& f, const Matrix& x0, const char* name) {
  Tape tape;
  const Var x = tape.variable(x0);
  tape.backward(f(tape, x));
  const Matrix g = tape.grad(x);
  ASSERT_EQ(g.rows(), x0.rows()) << name;
  ASSERT_EQ(g.cols(), x0.cols()) << name;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
      Matrix up = x0;
      Matrix down = x0;
      up(i, j) += h;
      down(i, j) -= h;
      Tape t1;
      Tape t2;
      const double numeric = (f(t1, t1.constant(up)).scalar() - f(t2, t2.constant(down)).scalar()) / (2 * h);
      EXPECT_TRUE(oracle::gradient_close(g(i, j), numeric, 1e-5, 1e-8))
          << name << " (" << i << "," << j << ") analytic " << g(i, j) << " numeric " << numeric;
    }
  }
}

}  // namespace

TEST(Tape, OperatorGradients) {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(5, 4, rng);
  const Matrix bias = random_matrix(5, 1, rng);
  const Matrix pos = a.array().abs() + 0.5;

  check_op([&](Tape& t, Var x) { return sum(mul(add(x, t.constant(b)), sub(x, t.constant(b)))); }, a, "add/sub/mul");
  check_op([&](Tape&, Var x) { return sum(scale(add_scalar(neg(x), 2.0), 3.0)); }, a, "scale/add_scalar/neg");
  check_op([&](Tape& t, Var x) { return sum(square(matmul(x, t.constant(w.transpose())))); }, a, "matmul lhs");
  check_op([&](Tape& t, Var x) { return sum(square(matmul(t.constant(a), x))); }, w.transpose(), "matmul rhs");
  check_op([&](Tape& t, Var x) { return sum(square(linear(x, t.constant(w), t.constant(bias)))); }, a, "linear x");
  check_op([&](Tape& t, Var x) { return sum(square(linear(t.constant(a), x, t.constant(bias)))); }, w, "linear w");
  check_op([&](Tape& t, Var x) { return sum(square(linear(t.constant(a), t.constant(w), x))); }, bias, "linear b");
  check_op([&](Tape& t, Var x) { return sum(mul(tile_rows(x, 3), t.constant(b))); }, b.row(0), "tile_rows");
  check_op([&](Tape& t, Var x) { return sum(mul(tile_cols(x, 4), t.constant(b))); }, b.col(0), "tile_cols");
  check_op([](Tape&, Var x) { return sum(tanh(x)); }, a, "tanh");
  check_op([](Tape&, Var x) { return sum(square(relu(x))); }, a, "relu");
  check_op([](Tape&, Var x) { return sum(exp(x)); }, a, "exp");
  check_op([](Tape&, Var x) { return sum(log(x)); }, pos, "log");
  check_op([](Tape&, Var x) { return sum(softplus(scale(x, 10.0))); }, a, "softplus");
  check_op([](Tape&, Var x) { return sum(square(clamp(x, -0.7, 0.7))); }, a, "clamp");
  check_op([&](Tape& t, Var x) { return sum(square(minimum(x, t.constant(b)))); }, a, "minimum lhs");
  check_op([&](Tape& t, Var x) { return sum(square(minimum(t.constant(a), x))); }, b, "minimum rhs");
  check_op([&](Tape& t, Var x) { return sum(mul(softmax_rows(x), t.constant(b))); }, a, "softmax_rows");
  check_op([&](Tape& t, Var x) { return sum(square(concat_cols(x, t.constant(b)))); }, a, "concat lhs");
  check_op([&](Tape& t, Var x) { return sum(square(concat_cols(t.constant(b), x))); }, a, "concat rhs");
  check_op([](Tape&, Var x) { return mean(square(x)); }, a, "mean");
  check_op([](Tape&, Var x) { return sum(square(row_sum(x))); }, a, "row_sum");
}

TEST(Tape, SoftplusIsStable) {
  Tape t;
  const Var x = t.variable(Matrix::Constant(1, 2, 0.0));
  Matrix big(1, 2);
  big << 800.0, -800.0;
  const Var y = softplus(t.constant(big));
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 800.0);
  EXPECT_GE(y.value()(0, 1), 0.0);
  EXPECT_TRUE(y.value().allFinite());
  t.backward(sum(x));
  EXPECT_EQ(t.grad(x), Matrix::Ones(1, 2));
}

TEST(Tape, BackwardRules) {
  Tape t;
  const Var x = t.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(t.backward(x), Error);
  const Var c = t.constant(Matrix::Constant(1, 1, 3.0));
  t.backward(c);
  EXPECT_EQ(t.grad(x), Matrix::Zero(2, 2));
  const Var q = sum(square(x));
  t.backward(q);
  EXPECT_EQ(t.grad(x), Matrix::Constant(2, 2, 2.0));
  EXPECT_THROW(add(x, t.constant(Matrix::Ones(3, 2))), Error);
}

TEST(MlpForward, ZeroAndIdentity) {
  const Mlp zero({4, 8, 3});
  EXPECT_EQ(zero.parameter_count(), (4u + 1) * 8 + (8 + 1) * 3);
  EXPECT_EQ(zero.forward(Eigen::Vector4d(1, 2, 3, 4)), Eigen::VectorXd::Zero(3));

  Mlp id({3, 3});
  Eigen::Map<Matrix>(id.params().data(), 3, 3) = Matrix::Identity(3, 3);
  EXPECT_EQ(id.forward(Eigen::Vector3d(0.5, -2.0, 7.0)), Eigen::Vector3d(0.5, -2.0, 7.0));
  EXPECT_THROW(id.forward(Eigen::Vector2d(1, 2)), Error);
}

TEST(MlpForward, MatchesLoopOracle) {
  std::mt19937_64 rng(2);
  for (auto act : {Activation::Tanh, Activation::Relu}) {
    for (int k = 0; k < 20; ++k) {
      const Mlp net = Mlp::glorot({5, 7, 6, 2}, rng, act);
      const Matrix x = random_matrix(4, 5, rng);
      const Matrix batch = net.forward_batch(x);
      for (Eigen::Index r = 0; r < 4; ++r) {
        const Eigen::VectorXd xr = x.row(r).transpose();
        EXPECT_LT((net.forward(xr) - oracle::naive_forward(net, xr)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((batch.row(r).transpose() - oracle::naive_forward(net, xr)).cwiseAbs().maxCoeff(), 1e-12);
      }
      Tape t;
      const Var out = net.forward(t, t.constant(x));
      EXPECT_LT((out.value() - batch).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(MlpInit, GlorotBoundsAndDeterminism) {
  std::mt19937_64 a(7);
  std::mt19937_64 b(7);
  const Mlp x = Mlp::glorot({10, 64, 64, 4}, a);
  const Mlp y = Mlp::glorot({10, 64, 64, 4}, b);
  EXPECT_EQ(x.params(), y.params());
  EXPECT_TRUE(x.params().allFinite());
  const double bound = std::sqrt(6.0 / (10 + 64));
  EXPECT_LE(x.weight(0).cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(x.weight(0).cwiseAbs().maxCoeff(), 0.9 * bound);
  EXPECT_EQ(x.bias(1), Eigen::VectorXd::Zero(64));
}

TEST(MlpGradient, QuadraticAndConstant) {
  // Sum of squared parameters: gradient is twice the parameters.
  std::mt19937_64 rng(3);
  const Mlp net = Mlp::glorot({3, 4, 2}, rng);
  Tape t;
  Mlp::Binding bind;
  net.forward(t, t.constant(Matrix::Zero(1, 3)), &bind);
  Var total = sum(square(bind.weights[0]));
  total = add(total, sum(square(bind.weights[1])));
  total = add(total, sum(square(bind.biases[0])));
  total = add(total, sum(square(bind.biases[1])));
  t.backward(total);
  EXPECT_LT((net.gradient(t, bind) - 2.0 * net.params()).cwiseAbs().maxCoeff(), 1e-15);

  Tape c;
  Mlp::Binding cb;
  const Var out = net.forward(c, c.constant(Matrix::Ones(2, 3)), &cb);
  c.backward(add_scalar(scale(sum(out), 0.0), 5.0));
  EXPECT_EQ(net.gradient(c, cb), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count())));
}

TEST(MlpGradient, FiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    for (auto act : {Activation::Tanh, Activation::Relu}) {
      const Mlp net = Mlp::glorot({6, 16, 16, 3}, rng, act);
      const auto report = oracle::check_mlp_gradient(net, random_matrix(3, 6, rng), random_matrix(3, 3, rng));
      EXPECT_EQ(report.failures, 0u) << "worst abs " << report.worst_abs << " rel " << report.worst_rel;
    }
  }
}

TEST(Polyak, Rules) {
  std::mt19937_64 rng(5);
  const Mlp online = Mlp::glorot({3, 5, 2}, rng);
  Mlp target = Mlp::glorot({3, 5, 2}, rng);
  Mlp copy = target;
  polyak_update(copy, online, 1.0);
  EXPECT_EQ(copy.params(), online.params());

  Mlp same = online;
  polyak_update(same, online, 0.005);
  EXPECT_LT((same.params() - online.params()).cwiseAbs().maxCoeff(), 1e-16);

  const double tau = 0.1;
  double gap = (target.params() - online.params()).norm();
  for (int k = 0; k < 20; ++k) {
    polyak_update(target, online, tau);
    const double next = (target.params() - online.params()).norm();
    EXPECT_NEAR(next, (1.0 - tau) * gap, 1e-12 * gap);
    gap = next;
  }
  EXPECT_EQ(target.parameter_count(), online.parameter_count());
  EXPECT_TRUE(target.params().allFinite());
  Mlp other({3, 4, 2});
  EXPECT_THROW(polyak_update(other, online, 0.5), Error);
  EXPECT_THROW(polyak_update(target, online, 0.0), Error);
}

TEST(Checkpoint, MlpBlockLayout) {
  std::mt19937_64 rng(6);
  const Mlp net = Mlp::glorot({2, 3, 1}, rng);
  std::ostringstream out(std::ios::binary);
  save_mlp(out, net);
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 4u + 3 * 4 + net.parameter_count() * 8);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 16, 8);
  EXPECT_EQ(first, net.params()(0));

  Mlp back({2, 3, 1});
  std::istringstream in(bytes, std::ios::binary);
  load_mlp(in, back);
  EXPECT_EQ(back.params(), net.params());

  Mlp wrong({2, 4, 1});
  std::istringstream again(bytes, std::ios::binary);
  EXPECT_THROW(load_mlp(again, wrong), Error);
  std::istringstream truncated(bytes.substr(0, 30), std::ios::binary);
  EXPECT_THROW(load_mlp(truncated, back), Error);
}

TEST(Gaussian, DensityEntropyAndCollapse) {
  const Eigen::VectorXd mu = Eigen::Vector3d(0.3, -1.0, 2.0);
  EXPECT_NEAR(gaussian_log_density(mu, mu, Eigen::VectorXd::Zero(3)), -1.5 * std::log(2 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(gaussian_entropy(Eigen::VectorXd::Zero(2)), std::log(2 * std::numbers::pi * std::numbers::e), 1e-14);

  GaussianPolicy p{Mlp({2, 3}), Eigen::VectorXd::Constant(3, -30.0)};
  std::mt19937_64 rng(1);
  const auto s = gaussian_sample(p, Eigen::Vector2d(1.0, 2.0), rng);
  EXPECT_LT(s.action.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(p.clamped_log_std(), Eigen::VectorXd::Constant(3, kLogStdMin));
  p.log_std.setConstant(5.0);
  EXPECT_EQ(p.stdev(), Eigen::VectorXd::Constant(3, std::exp(kLogStdMax)));
}

TEST(Gaussian, SampleLogProbAndDeterminism) {
  std::mt19937_64 init(2);
  GaussianPolicy p{Mlp::glorot({4, 8, 3}, init), Eigen::Vector3d(-0.5, 0.1, 0.3)};
  const Eigen::Vector4d obs(0.1, 0.2, -0.3, 0.4);
  std::mt19937_64 a(9);
  std::mt19937_64 b(9);
  const auto s1 = gaussian_sample(p, obs, a);
  const auto s2 = gaussian_sample(p, obs, b);
  EXPECT_EQ(s1.action, s2.action);
  EXPECT_NEAR(s1.log_prob, gaussian_log_density(s1.action, p.mean.forward(obs), p.log_std), 1e-14);

  Tape t;
  const Var mean = t.constant(p.mean.forward(obs).transpose());
  const Var ls = t.constant(p.log_std.transpose());
  EXPECT_NEAR(gaussian_log_prob(mean, ls, s1.action.transpose()).scalar(), s1.log_prob, 1e-13);
  EXPECT_NEAR(gaussian_entropy(ls).scalar(), gaussian_entropy(p.log_std), 1e-14);
}

TEST(Gaussian, MonteCarloEntropy) {
  const Eigen::Vector2d log_std(-0.3, 0.4);
  const Eigen::Vector2d mu(1.0, -2.0);
  std::mt19937_64 rng(3);
  double acc = 0.0;
  const int n = 1000000;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = mu + log_std.array().exp().matrix().cwiseProduct(standard_normal(2, rng));
    acc -= gaussian_log_density(x, mu, log_std);
  }
  EXPECT_NEAR(acc / n, gaussian_entropy(log_std), 1e-2);
}

TEST(Gaussian, LogProbGradients) {
  std::mt19937_64 rng(4);
  const Matrix actions = random_matrix(5, 3, rng);
  const Matrix ls = random_matrix(1, 3, rng, 0.3);
  const Matrix mean = random_matrix(5, 3, rng);
  check_op([&](Tape& t, Var m) { return sum(gaussian_log_prob(m, t.constant(ls), actions)); }, mean, "mean");
  check_op([&](Tape& t, Var s) { return sum(gaussian_log_prob(t.constant(mean), s, actions)); }, ls, "log_std");
  check_op([](Tape&, Var s) { return gaussian_entropy(s); }, ls, "entropy");
}

TEST(Replay, FifoAndSingleton) {
  ReplayBuffer<int> buf(3);
  for (int k = 1; k <= 5; ++k) buf.push(k);
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.contents(), (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(buf.cursor(), 2u);

  ReplayBuffer<int> one(10);
  one.push(42);
  std::mt19937_64 rng(1);
  EXPECT_EQ(one.sample(1, rng), (std::vector<int>{42}));
  try {
    one.sample(4, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
  EXPECT_THROW(ReplayBuffer<int>(0), Error);
}

TEST(Replay, UniformSampling) {
  ReplayBuffer<int> buf(10);
  for (int k = 0; k < 10; ++k) buf.push(k);
  std::mt19937_64 rng(12345);
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  for (int k = 0; k < draws / 10; ++k) {
    for (int v : buf.sample(10, rng)) ++counts[static_cast<std::size_t>(v)];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  // Critical value of chi-square with 9 degrees of freedom at p = 0.001.
  EXPECT_LT(chi2, 27.877);

  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  EXPECT_EQ(buf.sample(8, a), buf.sample(8, b));
}

TEST(AdamOptimizer, FirstStepAndConvergence) {
  Adam opt(2, AdamConfig{0.1});
  Eigen::VectorXd x = Eigen::Vector2d(1.0, -1.0);
  opt.step(x, Eigen::Vector2d(3.0, -0.5));
  // Bias-corrected first step moves each coordinate by lr * sign(g).
  EXPECT_NEAR(x(0), 0.9, 1e-8);
  EXPECT_NEAR(x(1), -0.9, 1e-8);
  EXPECT_EQ(opt.steps(), 1);
  for (int k = 0; k < 2000; ++k) opt.step(x, 2.0 * x);
  EXPECT_LT(x.norm(), 1e-2);
}
