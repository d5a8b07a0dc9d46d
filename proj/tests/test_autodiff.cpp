#include <gtest/gtest.h>

#include <cmath>

#include "lrdet/errors.hpp"
#include "lrdet/model.hpp"
#include "support/grad_cases.hpp"

using namespace lrdet;
namespace o = lrdet::oracle;

namespace {

Tensor t(Shape s, std::vector<float> v) { return Tensor(std::move(s), std::move(v)); }

}  // namespace

TEST(Tensor, RejectsZeroExtentAndSizeMismatch) {
  EXPECT_THROW(Tensor(Shape{2, 0}), PreconditionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), PreconditionError);
  EXPECT_EQ(Tensor(Shape{2, 3}).size(), 6u);
}

TEST(Tensor, RowsAndReshape) {
  Tensor x = t({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(x.rows(1, 3), t({2, 2}, {3, 4, 5, 6}));
  EXPECT_EQ(x.reshaped({6}).shape(), Shape{6});
  EXPECT_THROW(x.reshaped({4}), PreconditionError);
  EXPECT_THROW(x.rows(2, 4), PreconditionError);
}

TEST(Tensor, SignConvention) {
  EXPECT_EQ(sign(t({3}, {-2.5f, 0.0f, 0.1f})), t({3}, {-1, 0, 1}));
  EXPECT_EQ(sign(Tensor(Shape{4})), Tensor(Shape{4}));
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Tensor r = o::random_tensor({7}, rng);
    EXPECT_EQ(sign(sign(r)), sign(r));
  }
}

TEST(Ops, ForwardExamples) {
  EXPECT_EQ(ops::matmul(Var(t({2, 2}, {1, 2, 3, 4})), Var(t({2, 1}, {1, 1}))).value(), t({2, 1}, {3, 7}));
  EXPECT_EQ(ops::relu(Var(t({3}, {-1, 0, 2}))).value(), t({3}, {0, 0, 2}));
  const Tensor s = ops::softmax(Var(Tensor(Shape{1, 4}))).value();
  for (float v : s.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  try {
    ops::add(Var(Tensor(Shape{2, 3})), Var(Tensor(Shape{3, 2})));
    FAIL() << "expected a precondition error";
  } catch (const PreconditionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
  EXPECT_THROW(ops::matmul(Var(Tensor(Shape{2, 3})), Var(Tensor(Shape{2, 3}))), PreconditionError);
  EXPECT_THROW(ops::conv2d(Var(Tensor(Shape{1, 1, 2, 2})), Var(Tensor(Shape{1, 1, 3, 3})), Var(Tensor(Shape{1})),
                           ops::Padding::valid),
               PreconditionError);
}

TEST(Ops, ScalarBroadcastOnly) {
  EXPECT_EQ(ops::mul(Var(t({3}, {1, 2, 3})), Var(Tensor::scalar(2))).value(), t({3}, {2, 4, 6}));
  EXPECT_THROW(ops::add(Var(Tensor(Shape{2, 3})), Var(Tensor(Shape{3}))), PreconditionError);
}

TEST(Ops, SoftmaxRowsAreDistributions) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Tensor p = ops::softmax(Var(o::random_tensor({4, 10}, rng, -30, 30))).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 10; ++k) {
        const float v = p[r * 10 + k];
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(Backward, HandExamples) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3));
  EXPECT_FLOAT_EQ(tape.backward(ops::mul(x, x)).of(x).item(), 6.0f);

  Tape tape2;
  Var y = tape2.leaf(t({2}, {-1, 2}));
  EXPECT_EQ(tape2.backward(ops::sum(ops::relu(y))).of(y), t({2}, {0, 1}));

  Tape tape3;
  Var z = tape3.leaf(t({2}, {0, 0}));
  EXPECT_EQ(tape3.backward(ops::sum(ops::relu(z))).of(z), t({2}, {0, 0}));  // relu'(0) = 0
}

TEST(Backward, NonScalarRootRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{3}, 1.0f));
  EXPECT_THROW(tape.backward(ops::relu(x)), PreconditionError);
}

TEST(Backward, UnreachableLeafGetsZero) {
  Tape tape;
  Var a = tape.leaf(t({2}, {1, 2}));
  Var b = tape.leaf(t({3}, {1, 2, 3}));
  const Gradients g = tape.backward(ops::sum(ops::square(a)));
  EXPECT_EQ(g.of(b), Tensor(Shape{3}));
  EXPECT_EQ(g.of(a), t({2}, {2, 4}));
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tape tape;
  Var x = tape.leaf(t({2}, {1, -2}));
  Var y = ops::add(x, x);
  Var z = ops::mul(y, x);  // 2x^2
  EXPECT_EQ(tape.backward(ops::sum(z)).of(x), t({2}, {4, -8}));
}

TEST(Backward, Linearity) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Tensor xv = o::away_from_zero({3, 4}, rng);
    const Tensor w = o::random_tensor({4, 5}, rng);
    const float a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    auto f = [&](const Var& x) { return ops::sum(ops::relu(ops::matmul(x, Var(w)))); };
    auto g = [&](const Var& x) { return ops::sum(ops::square(x)); };
    Tape t1;
    Var x1 = t1.leaf(xv);
    const Tensor combined = t1.backward(ops::add(ops::scale(f(x1), a), ops::scale(g(x1), b))).of(x1);
    Tape t2;
    Var x2 = t2.leaf(xv);
    const Tensor gf = t2.backward(f(x2)).of(x2);
    Tape t3;
    Var x3 = t3.leaf(xv);
    const Tensor gg = t3.backward(g(x3)).of(x3);
    for (std::size_t k = 0; k < xv.size(); ++k) EXPECT_NEAR(combined[k], a * gf[k] + b * gg[k], 1e-5);
  }
}

TEST(Backward, Deterministic) {
  Rng rng(9);
  const Tensor xv = o::random_tensor({2, 1, 6, 6}, rng);
  const Tensor wv = o::random_tensor({3, 1, 3, 3}, rng);
  auto run = [&] {
    Tape tape;
    Var x = tape.leaf(xv);
    Var y = ops::max_pool2x2(ops::relu(ops::conv2d(x, Var(wv), Var(Tensor(Shape{3})), ops::Padding::same)));
    return tape.backward(ops::sum(ops::square(y))).of(x);
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, UntrackedOperandsStayConstant) {
  const Var c(Tensor(Shape{2}, 1.0f));
  const Var r = ops::add(c, c);
  EXPECT_FALSE(r.tracked());
}

// ---- finite-difference checks, 100 random instances per op ------------------

class GradCheck : public ::testing::Test {
 protected:
  Rng rng{20240601};
  void check_group(const std::string& group) {
    std::size_t ran = 0;
    for (const auto& c : o::grad_cases()) {
      if (c.group != group) continue;
      const o::OpCheck r = o::run_gradcheck(c, rng);
      EXPECT_LE(r.grad_error, o::kGradTol) << r.name;
      EXPECT_LE(r.forward_error, o::kForwardTol) << r.name;
      ++ran;
    }
    EXPECT_GT(ran, 0u) << group;
  }
};

TEST_F(GradCheck, Elementwise) { check_group("elementwise"); }
TEST_F(GradCheck, LinearAlgebra) { check_group("linear_algebra"); }
TEST_F(GradCheck, Conv2d) { check_group("conv2d"); }
TEST_F(GradCheck, MaxPool) { check_group("max_pool"); }
TEST_F(GradCheck, RowOps) { check_group("row_ops"); }
TEST_F(GradCheck, Reductions) { check_group("reductions"); }
TEST_F(GradCheck, ShapeOps) { check_group("shape_ops"); }
TEST_F(GradCheck, ThreeLayerMlpLoss) { check_group("composite"); }
