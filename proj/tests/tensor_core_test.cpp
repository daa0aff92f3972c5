#include <gtest/gtest.h>

#include <cmath>

#include "csl/autograd.hpp"
#include "csl/checks/gradcheck.hpp"
#include "csl/ops.hpp"
#include "csl/optim.hpp"
#include "csl/params.hpp"

using namespace csl;

namespace {

Tensor<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor<double>({r, c}, std::move(v));
}

}  // namespace

TEST(Matmul, IdentityTimesIdentity) {
  auto eye = mat(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(ops::matmul(eye, eye), eye);
}

TEST(Matmul, OneByOne) {
  EXPECT_EQ(ops::matmul(mat(1, 1, {2}), mat(1, 1, {3})), mat(1, 1, {6}));
}

TEST(Matmul, HandExpansion) {
  EXPECT_EQ(ops::matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 2, {0, 1, 1, 0})), mat(2, 2, {2, 1, 4, 3}));
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    ops::matmul(mat(2, 3, {1, 2, 3, 4, 5, 6}), mat(2, 2, {1, 0, 0, 1}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2x2]"), std::string::npos);
  }
}

TEST(Matmul, RecordedOnTape) {
  Tape<double> tape;
  auto a = tape.leaf(mat(1, 2, {1, 2}));
  auto b = tape.leaf(mat(2, 1, {3, 4}));
  auto c = matmul(a, b);
  EXPECT_EQ(tape.size(), 3u);
  EXPECT_STREQ(tape.op(c.id()), "matmul");
  EXPECT_DOUBLE_EQ(c.value().item(), 11.0);
}

TEST(Softmax, UniformOnZeros) {
  auto y = ops::softmax(Tensor<double>({3}, {0, 0, 0}), 0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LogThreeGivesQuarterThreeQuarters) {
  auto y = ops::softmax(Tensor<double>({2}, {0.0, std::log(3.0)}), 0);
  EXPECT_NEAR(y[0], 0.25, 1e-12);
  EXPECT_NEAR(y[1], 0.75, 1e-12);
}

TEST(Softmax, ShiftInvariantAndNormalised) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor<double> x({3, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-50, 50);
    Tensor<double> shifted = x;
    const double c = rng.uniform(-100, 100);
    for (std::size_t i = 0; i < x.numel(); ++i) shifted[i] += c;
    for (std::size_t axis : {0u, 1u}) {
      auto y = ops::softmax(x, axis);
      auto ys = ops::softmax(shifted, axis);
      for (std::size_t i = 0; i < y.numel(); ++i) {
        EXPECT_NEAR(y[i], ys[i], 1e-9);
        EXPECT_GE(y[i], 0.0);
      }
    }
    auto y = ops::softmax(x, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t c2 = 0; c2 < 5; ++c2) s += y.at({r, c2});
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, FloatRowsSumToOneForExtremeInputs) {
  Tensor<float> x({2, 4}, {1e30f, -1e30f, 0.f, 3.f, 88.f, 89.f, -88.f, 0.f});
  auto y = ops::softmax(x, 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += y.at({r, c});
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Softmax, AxisOutOfRangeIsShapeError) {
  EXPECT_THROW(ops::softmax(Tensor<double>({3}), 1), ShapeError);
}

TEST(Backward, SquareAtThree) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(3.0));
  auto y = mul(x, x);
  auto g = backward(tape, y);
  EXPECT_DOUBLE_EQ(g.of(x).item(), 6.0);
}

TEST(Backward, UnreachableLeafGetsZero) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(3.0));
  auto z = tape.leaf(Tensor<double>({2}, {1.0, 2.0}));
  auto y = sum(mul(z, z));
  auto g = backward(tape, y);
  EXPECT_FALSE(g.reached(x.id()));
  EXPECT_EQ(g.of(x), Tensor<double>::scalar(0.0));
}

TEST(Backward, NonScalarOutputIsContractError) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {1.0, 2.0}));
  EXPECT_THROW(backward(tape, exp(x)), ContractError);
}

TEST(Backward, RandomMatmulSumMatchesFiniteDifferences) {
  Rng rng(11);
  Tensor<double> a({3, 3}), b({3, 3});
  for (std::size_t i = 0; i < 9; ++i) {
    a[i] = rng.uniform(-1, 1);
    b[i] = rng.uniform(-1, 1);
  }
  checks::ScalarFn f = [](Tape<double>&, const std::vector<Var<double>>& v) {
    return sum(matmul(v[0], v[1]));
  };
  EXPECT_LE(checks::check_gradients(f, {a, b}).max_rel_error, 1e-6);
}

TEST(Backward, ParentsPrecedeChildren) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  auto y = softmax(matmul(x, transpose(x)), 1);
  auto z = sum(layer_norm(y, tape.leaf(Tensor<double>::full({2}, 1.0)), tape.leaf(Tensor<double>({2}))));
  for (NodeId id = 0; id <= z.id(); ++id) {
    for (NodeId p : tape.parents(id)) EXPECT_LT(p, id);
  }
}

TEST(Backward, ReplayIsBitIdentical) {
  auto run = [] {
    Tape<float> tape;
    Rng rng(5);
    Tensor<float> x({4, 6});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.normal());
    auto v = tape.leaf(x);
    auto y = gelu(layer_norm(v, tape.leaf(Tensor<float>::full({6}, 1.f)), tape.leaf(Tensor<float>({6}))));
    auto loss = mean(softmax(matmul(y, transpose(y)), 1));
    auto g = backward(tape, loss);
    return std::make_pair(loss.value(), g.of(v));
  };
  EXPECT_EQ(run(), run());
}

TEST(OpGradients, EveryOpMatchesCentralDifferences) {
  for (const auto& r : checks::op_gradient_suite(2024, 100, 1e-6)) {
    EXPECT_TRUE(r.passed) << r.name << " worst relative error " << r.worst;
  }
}

TEST(Ops, ShapeErrorsOnMismatch) {
  Tape<double> tape;
  auto a = tape.leaf(Tensor<double>({2, 3}));
  auto b = tape.leaf(Tensor<double>({3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(slice(a, 1, 2, 2), ShapeError);
  EXPECT_THROW(concat(std::vector{a, b}, 0), ShapeError);
  EXPECT_THROW(gather_rows(a, {5}), ShapeError);
  EXPECT_THROW(reshape(a, {4}), ShapeError);
}

TEST(Ops, L2NormalizeGivesUnitRows) {
  Tape<float> tape;
  auto x = tape.leaf(Tensor<float>({2, 3}, {3, 4, 0, -1, 2, 2}));
  auto y = l2_normalize(x).value();
  EXPECT_NEAR(y[0], 0.6f, 1e-7);
  EXPECT_NEAR(y[1], 0.8f, 1e-7);
  double n = 0;
  for (std::size_t j = 0; j < 3; ++j) n += y[3 + j] * y[3 + j];
  EXPECT_NEAR(n, 1.0, 1e-6);
}

// ---- optimizer -----------------------------------------------------------------

TEST(AdamW, ZeroGradientZeroDecayIsFixedPoint) {
  ParamSet<double> p;
  p.add("w", Tensor<double>({3}, {0.5, -1.25, 3.0}));
  const auto before = p;
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 5; ++i) opt.step(p, {Tensor<double>({3})}, 1e-2);
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(AdamW, ZeroLearningRateStillUpdatesMoments) {
  ParamSet<double> p;
  p.add("w", Tensor<double>({2}, {1.0, 2.0}));
  const auto before = p;
  AdamW<double> opt;
  opt.step(p, {Tensor<double>({2}, {1.0, -2.0})}, 0.0);
  EXPECT_EQ(p, before);
  EXPECT_NEAR(opt.first_moments()[0][0], 0.1, 1e-15);
  EXPECT_NEAR(opt.second_moments()[0][1], 0.004, 1e-15);
}

TEST(AdamW, FirstStepIsMinusLearningRate) {
  ParamSet<double> p;
  p.add("w", Tensor<double>::scalar(0.0));
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  opt.step(p, {Tensor<double>::scalar(1.0)}, 1e-3);
  EXPECT_NEAR(p.get("w").item(), -1e-3, 1e-10);
}

TEST(AdamW, DecayScalesParameterDirectly) {
  ParamSet<double> p;
  p.add("w", Tensor<double>::scalar(2.0));
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.1});
  opt.step(p, {Tensor<double>::scalar(0.0)}, 0.5);
  // Decoupled: p * (1 - lr * wd), gradient path untouched.
  EXPECT_DOUBLE_EQ(p.get("w").item(), 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(AdamW, NonFiniteGradientNamesParameter) {
  ParamSet<float> p;
  p.add("enc.head.w", Tensor<float>({2}));
  const auto before = p;
  AdamW<float> opt;
  try {
    opt.step(p, {Tensor<float>({2}, {1.f, std::nanf("")})}, 1e-3);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.parameter(), "enc.head.w");
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.steps(), 0u);
}

TEST(AdamW, ShapeMismatch) {
  ParamSet<float> p;
  p.add("w", Tensor<float>({2}));
  AdamW<float> opt;
  EXPECT_THROW(opt.step(p, {Tensor<float>({3})}, 1e-3), ShapeError);
  EXPECT_THROW(opt.step(p, {}, 1e-3), ShapeError);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 5e-4), 5e-4);
  EXPECT_DOUBLE_EQ(cosine_lr(100, 100, 5e-4), 0.0);
  EXPECT_NEAR(cosine_lr(50, 100, 5e-4), 2.5e-4, 1e-18);
  EXPECT_THROW(cosine_lr(101, 100, 5e-4), ContractError);
  EXPECT_THROW(cosine_lr(0, 0, 5e-4), ContractError);
}

TEST(CosineLr, BatchScalingRule) {
  EXPECT_DOUBLE_EQ(scaled_lr(5e-4, 256), 5e-4);
  EXPECT_DOUBLE_EQ(scaled_lr(5e-4, 64), 1.25e-4);
}

// ---- checkpoint ------------------------------------------------------------------

TEST(Checkpoint, RoundtripIsBitExact) {
  Rng rng(9);
  ParamSet<float> p;
  p.add("a", trunc_normal<float>({3, 4}, 0.02, rng));
  p.add("b.bias", Tensor<float>({7}));
  p.add("scalar", Tensor<float>::scalar(-0.0f));
  p.add("nan", Tensor<float>({1}, {std::nanf("1")}));
  const auto bytes = encode_checkpoint(p);
  const auto q = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(q), bytes);
  ASSERT_EQ(q.size(), 4u);
  EXPECT_EQ(q.name(1), "b.bias");
  EXPECT_EQ(q.get("a"), p.get("a"));
}

TEST(Checkpoint, HeaderLayout) {
  ParamSet<float> p;
  p.add("w", Tensor<float>({2}, {1.f, 2.f}));
  const auto bytes = encode_checkpoint(p);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 1 + 1 + 4 + 8);
  EXPECT_EQ(std::string(bytes.data(), 4), "CSLW");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 1);   // name length
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 1);   // rank
  EXPECT_EQ(bytes[16], 2);   // dim
}

TEST(Checkpoint, CorruptionIsRejected) {
  ParamSet<float> p;
  p.add("w", Tensor<float>({2, 2}, {1.f, 2.f, 3.f, 4.f}));
  const auto good = encode_checkpoint(p);
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    std::vector<char> truncated(good.begin(), good.begin() + static_cast<long>(cut));
    EXPECT_THROW(decode_checkpoint(truncated), FormatError) << "cut at " << cut;
  }
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
}

TEST(Rng, SplitStreamsAreIndependentOfParentDraws) {
  Rng a(42);
  Rng child1 = a.split(3);
  a.next_u64();
  Rng child2 = a.split(3);
  EXPECT_EQ(child1.next_u64(), child2.next_u64());
  EXPECT_NE(Rng(42).split(3).next_u64(), Rng(42).split(4).next_u64());
}

TEST(Rng, TruncatedNormalWithinTwoSigma) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LE(std::abs(rng.truncated_normal(0.02)), 0.04);
}
