#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "openbias/numeric/checkpoint.hpp"
#include "openbias/numeric/gradcheck.hpp"
#include "openbias/numeric/ops.hpp"
#include "support.hpp"

using namespace openbias;
using namespace openbias::nn;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(shape);
  for (double& x : t.data()) x = rng.normal();
  return t;
}

}  // namespace

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape t;
  const auto p = softmax(t.constant(Tensor::vector({0, 0, 0}))).value();
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, LayerNormOfConstantIsZero) {
  Tape t;
  auto x = t.constant(Tensor::matrix(1, 4, {5, 5, 5, 5}));
  auto out = layer_norm(x, t.constant(Tensor({4}, 1.0)), t.constant(Tensor({4}, 0.0))).value();
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, IdentityMatmul) {
  Rng rng(1);
  const auto a = random_tensor(rng, {3, 5});
  Tape t;
  EXPECT_EQ(matmul(t.constant(Tensor::identity(3)), t.constant(a)).value(), a);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  Tape t;
  try {
    matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({4, 2})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    const std::string m = e.what();
    EXPECT_NE(m.find("[2,3]"), std::string::npos);
    EXPECT_NE(m.find("[4,2]"), std::string::npos);
  }
}

TEST(Ops, NonFiniteOutputIsNumericalFault) {
  Tape t;
  auto big = t.constant(Tensor::vector({1e300}));
  try {
    mul(big, big);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericalFault);
  }
}

TEST(Ops, ReluAndGeluValues) {
  Tape t;
  auto x = t.constant(Tensor::vector({-1.0, 0.0, 2.0}));
  EXPECT_EQ(relu(x).value(), Tensor::vector({0.0, 0.0, 2.0}));
  const auto g = gelu(x).value();
  EXPECT_NEAR(g[0], -0.15865525393145707, 1e-15);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NEAR(g[2], 1.9544997361036416, 1e-15);
}

TEST(Ops, EmbeddingLookupGathersRows) {
  Tape t;
  auto table = t.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(embedding_lookup(table, std::vector<std::size_t>{2, 0, 2}).value(), Tensor::matrix(3, 2, {5, 6, 1, 2, 5, 6}));
}

TEST(GradCheck, SumOfSquares) {
  Rng rng(2);
  ParamStore p;
  p.add("a", random_tensor(rng, {3, 4}));
  p.add("b", random_tensor(rng, {5}));
  const ScalarFn f = [](Tape& t, const ParamStore& s) {
    auto a = t.param(s, "a");
    auto b = t.param(s, "b");
    return add(sum(mul(a, a)), sum(mul(b, b)));
  };
  const auto r = grad_check(f, p, 1e-5, 1e-8);
  EXPECT_TRUE(r.passed()) << r.worst_name << " " << r.max_rel_error;
  EXPECT_EQ(r.checked, 17u);
  for (const auto& [name, e] : p.entries())
    for (std::size_t i = 0; i < e.value.size(); ++i) EXPECT_DOUBLE_EQ(e.grad[i], 2.0 * e.value[i]);
}

TEST(GradCheck, ConstantFunctionHasZeroGradients) {
  ParamStore p;
  p.add("w", Tensor::vector({1, 2, 3}));
  const ScalarFn f = [](Tape& t, const ParamStore&) { return t.constant(Tensor::scalar(4.0)); };
  const auto r = grad_check(f, p);
  EXPECT_TRUE(r.passed());
  for (double g : p.at("w").grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, SkipsFrozenParameters) {
  ParamStore p;
  p.add("frozen", Tensor::vector({1, 2}), false);
  p.add("live", Tensor::vector({3, 4}));
  const ScalarFn f = [](Tape& t, const ParamStore& s) { return sum(mul(t.param(s, "frozen"), t.param(s, "live"))); };
  const auto r = grad_check(f, p);
  EXPECT_EQ(r.checked, 2u);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(p.at("frozen").grad, Tensor({2}));
}

TEST(GradCheck, EveryOpMatchesFiniteDifferences) {
  Rng rng(3);
  ParamStore p;
  p.add("x", random_tensor(rng, {4, 6}));
  p.add("w", random_tensor(rng, {6, 6}));
  p.add("g", random_tensor(rng, {6}));
  p.add("b", random_tensor(rng, {6}));
  p.add("table", random_tensor(rng, {5, 6}));
  const ScalarFn f = [](Tape& t, const ParamStore& s) {
    auto x = add(t.param(s, "x"), embedding_lookup(t.param(s, "table"), std::vector<std::size_t>{1, 4, 1, 0}));
    auto h = layer_norm(x, t.param(s, "g"), t.param(s, "b"));
    h = add_row(matmul(h, t.param(s, "w")), t.param(s, "b"));
    auto a = gelu(h);
    auto r = relu(scale(h, 0.5));
    auto sm = softmax(concat_cols({slice_cols(a, 0, 3), slice_cols(r, 3, 3)}));
    auto pooled = mean_rows(mul(sm, transpose(transpose(a))));
    auto ls = log_softmax(pooled);
    auto d = row_dot(a, h);
    auto m = mul_col(a, d);
    return add(add(sum(ls), mean(m)), sum(gather(stack({sum(d), sum(slice_rows(x, 2))}), {1, 0})));
  };
  const auto r = grad_check(f, p, 1e-6, 1e-6);
  EXPECT_TRUE(r.passed()) << r.worst_name << " " << r.max_rel_error;
}

TEST(Properties, SoftmaxCrossEntropyBackward) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    const std::size_t target = rng.below(k);
    ParamStore p;
    p.add("z", Tensor::vector(openbias::testing::random_logits(rng, k)));
    Tape t;
    auto loss = scale(select(log_softmax(t.param(p, "z")), target), -1.0);
    t.backward(loss, p);
    const auto& z = p.at("z").value;
    double mx = z[0];
    for (double v : z.data()) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : z.data()) denom += std::exp(v - mx);
    for (std::size_t i = 0; i < k; ++i) {
      const double expected = std::exp(z[i] - mx) / denom - (i == target ? 1.0 : 0.0);
      EXPECT_NEAR(p.at("z").grad[i], expected, 1e-10);
    }
  }
}

TEST(Properties, BackwardTwiceDoublesGradients) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ParamStore p;
    p.add("w", random_tensor(rng, {3, 3}));
    p.add("x", random_tensor(rng, {2, 3}));
    auto run = [&] {
      Tape t;
      auto loss = sum(gelu(matmul(t.param(p, "x"), t.param(p, "w"))));
      t.backward(loss, p);
    };
    run();
    const auto once_w = p.at("w").grad;
    const auto once_x = p.at("x").grad;
    run();
    for (std::size_t i = 0; i < once_w.size(); ++i) EXPECT_EQ(p.at("w").grad[i], 2.0 * once_w[i]);
    for (std::size_t i = 0; i < once_x.size(); ++i) EXPECT_EQ(p.at("x").grad[i], 2.0 * once_x[i]);
  }
}

TEST(Properties, ForwardIsBitwiseDeterministic) {
  Rng rng(6);
  const auto x = random_tensor(rng, {5, 7});
  const auto w = random_tensor(rng, {7, 7});
  auto run = [&] {
    Tape t;
    auto h = layer_norm(t.constant(x), t.constant(Tensor({7}, 1.0)), t.constant(Tensor({7})));
    return softmax(gelu(matmul(h, t.constant(w)))).value();
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)), 0);
}

TEST(ParamStore, LexicographicOrderAndChecksum) {
  ParamStore p;
  p.add("b", Tensor::vector({1}));
  p.add("a", Tensor::vector({2}));
  p.add("c.x", Tensor::vector({3}));
  std::vector<std::string> names;
  for (const auto& [n, _] : p.entries()) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"a", "b", "c.x"}));
  const auto before = p.checksum("c.");
  p.at("a").value[0] = 9;
  EXPECT_EQ(p.checksum("c."), before);
  p.at("c.x").value[0] = 9;
  EXPECT_NE(p.checksum("c."), before);
}

TEST(Checkpoint, ByteExactRoundTrip) {
  Rng rng(7);
  ParamStore p;
  p.add("layer.w", random_tensor(rng, {4, 3}));
  p.add("layer.b", random_tensor(rng, {3}), false);
  p.add("tiny", Tensor::vector({5e-324, -0.0, 1.0 / 3.0}));
  openbias::testing::TempDir dir;
  save_params(dir.path(), p);
  const auto q = load_params(dir.path());
  ASSERT_EQ(q.size(), p.size());
  for (const auto& [name, e] : p.entries()) {
    const auto& f = q.at(name);
    EXPECT_EQ(f.trainable, e.trainable);
    EXPECT_EQ(f.value.shape(), e.value.shape());
    EXPECT_EQ(std::memcmp(f.value.data().data(), e.value.data().data(), e.value.size() * 8), 0);
  }
  save_params(dir / "again", q);
  EXPECT_EQ(read_file(dir / "again" / "params.bin"), read_file(dir / "params.bin"));
  EXPECT_EQ(read_file(dir / "again" / "manifest.json"), read_file(dir / "manifest.json"));
  const auto blob = read_file(dir / "params.bin");
  EXPECT_EQ(blob.size(), (12 + 3 + 3) * 8u);
}

TEST(Checkpoint, LittleEndianLayout) {
  ParamStore p;
  p.add("one", Tensor::vector({1.0}));
  const auto s = serialize(p);
  const unsigned char expected[8] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  ASSERT_EQ(s.blob.size(), 8u);
  EXPECT_EQ(std::memcmp(s.blob.data(), expected, 8), 0);
  EXPECT_EQ(s.manifest["one"]["offset"], 0);
}
