#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "volformer/error.hpp"
#include "volformer/grad_check.hpp"
#include "volformer/ops.hpp"
#include "volformer/rng.hpp"
#include "volformer/tape.hpp"

using namespace volformer;

namespace {

Tensor random_leaf(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor::from(std::move(shape), std::move(v), DType::f64, true);
}

// Projects an op result to a scalar with fixed random weights so every output
// element contributes a distinct gradient.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed, 99);
  std::vector<double> w(y.numel());
  for (auto& x : w) x = rng.uniform() * 2.0 - 1.0;
  return ops::reduce_sum(ops::mul(y, Tensor::from(y.shape(), std::move(w), DType::f64)));
}

struct OpCase {
  std::string name;
  std::vector<Shape> inputs;
  std::function<Tensor(std::vector<Tensor>&)> apply;
};

std::vector<OpCase> op_cases() {
  static const std::vector<std::size_t> picks{2, 0, 2, 1};
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](auto& in) { return ops::matmul(in[0], in[1]); }},
      {"add", {{2, 3}, {2, 3}}, [](auto& in) { return ops::add(in[0], in[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](auto& in) { return ops::mul(in[0], in[1]); }},
      {"scale", {{2, 3}}, [](auto& in) { return ops::scale(in[0], -1.75); }},
      {"add_row", {{3, 4}, {4}}, [](auto& in) { return ops::add_row(in[0], in[1]); }},
      {"reshape", {{2, 6}}, [](auto& in) { return ops::reshape(in[0], {3, 4}); }},
      {"transpose", {{2, 5}}, [](auto& in) { return ops::transpose(in[0]); }},
      {"reduce_mean", {{3, 3}}, [](auto& in) { return ops::reduce_mean(in[0]); }},
      {"reduce_sum", {{4}}, [](auto& in) { return ops::reduce_sum(in[0]); }},
      {"mean_rows", {{4, 3}}, [](auto& in) { return ops::mean_rows(in[0]); }},
      {"gather_rows", {{3, 2}}, [](auto& in) { return ops::gather_rows(in[0], picks); }},
      {"concat_rows", {{1, 3}, {2, 3}}, [](auto& in) { return ops::concat_rows(in); }},
      {"concat_cols", {{2, 1}, {2, 3}}, [](auto& in) { return ops::concat_cols(in); }},
      {"slice_cols", {{3, 5}}, [](auto& in) { return ops::slice_cols(in[0], 1, 3); }},
      {"softmax_axis0", {{4, 3}}, [](auto& in) { return ops::softmax(in[0], 0); }},
      {"softmax_axis1", {{3, 4}}, [](auto& in) { return ops::softmax(in[0], 1); }},
      {"layer_norm", {{3, 5}, {5}, {5}},
       [](auto& in) { return ops::layer_norm(in[0], in[1], in[2], 1e-6); }},
      {"relu", {{4, 4}}, [](auto& in) { return ops::relu(in[0]); }},
      {"softmax_cross_entropy", {{3, 4}}, [](auto& in) {
         static const std::vector<int> labels{0, 3, 1};
         return ops::softmax_cross_entropy(in[0], labels);
       }},
  };
}

}  // namespace

TEST(BackwardTest, SumGivesOnes) {
  Rng rng(1);
  Tensor x = random_leaf(rng, {2, 3});
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::reduce_sum(x);
  }
  backward(loss, tape);
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(BackwardTest, MeanOfSquares) {
  Tensor x = Tensor::from({2}, {1, 2}, DType::f64, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::reduce_mean(ops::mul(x, x));
  }
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0);
}

TEST(BackwardTest, UnusedLeafStaysZero) {
  Tensor x = Tensor::from({2}, {1, 2}, DType::f64, true);
  Tensor unused = Tensor::from({3}, {4, 5, 6}, DType::f64, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::reduce_sum(x);
  }
  tape.backward(loss);
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(BackwardTest, RejectsNonScalarLoss) {
  Tensor x = Tensor::from({2}, {1, 2}, DType::f64, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = ops::scale(x, 2.0);
  }
  EXPECT_THROW(tape.backward(y), UsageError);
}

TEST(BackwardTest, NothingRecordedWithoutTape) {
  Tensor x = Tensor::from({2}, {1, 2}, DType::f64, true);
  const Tensor y = ops::scale(x, 2.0);
  EXPECT_FALSE(y.requires_grad());
  Tape tape;
  {
    TapeScope scope(tape);
    ops::scale(Tensor::from({2}, {1, 2}), 2.0);
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(BackwardTest, RepeatedBackwardIsBitIdentical) {
  Rng rng(4);
  Tensor a = random_leaf(rng, {3, 4});
  Tensor b = random_leaf(rng, {4, 2});
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = weighted_sum(ops::softmax(ops::matmul(a, b), 1), 3);
  }
  tape.backward(loss);
  const std::vector<double> first_a(a.grad().begin(), a.grad().end());
  const std::vector<double> first_b(b.grad().begin(), b.grad().end());
  tape.backward(loss);
  for (std::size_t i = 0; i < first_a.size(); ++i) EXPECT_EQ(a.grad()[i], first_a[i]);
  for (std::size_t i = 0; i < first_b.size(); ++i) EXPECT_EQ(b.grad()[i], first_b[i]);
}

TEST(BackwardTest, ReluGradientMask) {
  Tensor x = Tensor::from({3}, {-1, 0, 2}, DType::f64, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::reduce_sum(ops::relu(x));
  }
  tape.backward(loss);
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(FiniteDifferenceTest, LinearMapIsExact) {
  Rng rng(2);
  const Tensor point = random_leaf(rng, {3, 3});
  // No truncation error for a linear map, so a wide step only shrinks roundoff.
  const double err = finite_difference_check([](const Tensor& x) { return ops::reduce_sum(x); },
                                             point, 1e-2);
  EXPECT_LT(err, 1e-12);
}

TEST(FiniteDifferenceTest, SoftmaxDotComposite) {
  Rng rng(8);
  const Tensor w = Tensor::from({4, 3}, [&] {
    std::vector<double> v(12);
    for (auto& x : v) x = rng.normal();
    return v;
  }(), DType::f64);
  const Tensor point = random_leaf(rng, {2, 4});
  const double err = finite_difference_check(
      [&](const Tensor& x) { return weighted_sum(ops::softmax(ops::matmul(x, w), 1), 5); }, point,
      1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(FiniteDifferenceTest, DetectsCorruptedVjp) {
  // Square with a vjp that is off by a factor of 1.5.
  auto bad_square = [](const Tensor& x) {
    std::vector<double> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = e * e;
    return make_op_result("bad_square", x.shape(), std::move(v), DType::f64, {x},
                          [](const Tensor& out, std::vector<Tensor>& in) {
                            const auto X = in[0].data();
                            auto d = in[0].mutable_grad();
                            for (std::size_t i = 0; i < d.size(); ++i) {
                              d[i] += out.grad()[i] * 3.0 * X[i];
                            }
                          });
  };
  Rng rng(9);
  const Tensor point = random_leaf(rng, {5}, 0.5, 1.5);
  const double err = finite_difference_check(
      [&](const Tensor& x) { return ops::reduce_sum(bad_square(x)); }, point, 1e-5);
  EXPECT_GT(err, 1e-2);

  // A step sweep cannot hide it either.
  Tensor x = point.to(DType::f64);
  x.set_requires_grad(true);
  std::vector<Tensor> leaves{x};
  const double steps[] = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  const auto report =
      check_gradients([&] { return ops::reduce_sum(bad_square(x)); }, leaves, steps);
  EXPECT_GT(report.max_relative_error(), 1e-2);
}

TEST(FiniteDifferenceTest, EveryOpAtTenRandomPoints) {
  for (const auto& op : op_cases()) {
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      Rng rng(1000 + trial, op.name.size());
      std::vector<Tensor> leaves;
      for (const auto& shape : op.inputs) leaves.push_back(random_leaf(rng, shape, -2.0, 2.0));
      const auto report = check_gradients(
          [&] { return weighted_sum(op.apply(leaves), trial); }, leaves, 1e-5);
      EXPECT_LT(report.max_relative_error(), 1e-6) << op.name << " trial " << trial;
    }
  }
}

TEST(FiniteDifferenceTest, RequiresDoublePrecisionLeaves) {
  std::vector<Tensor> leaves{Tensor::from({2}, {1, 2}, DType::f32, true)};
  EXPECT_THROW(check_gradients([&] { return ops::reduce_sum(leaves[0]); }, leaves, 1e-5),
               UsageError);
}
