#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "iadn/numerics/numerics.hpp"
#include "support.hpp"

using namespace iadn;
using iadn::test::central_difference;
using iadn::test::max_relative_error;
using iadn::test::random_tensor;

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor<double>({2, 0}), DimensionError);
}

TEST(ApplyLayer, IdentityPointwiseConvLeavesTensorUnchanged) {
  std::mt19937_64 rng(1);
  const std::size_t c = 3;
  const auto x = random_tensor({c, 5, 4}, rng);
  Tensor<double> w({c, c, 1, 1});
  for (std::size_t i = 0; i < c; ++i) w[i * c + i] = 1.0;
  const Tensor<double> b({c});
  const auto y = apply_layer<double>(LayerSpec::conv2d(1, c), {x}, {w, b});
  EXPECT_EQ(y, x);
}

TEST(ApplyLayer, MaxPoolTakesWindowMaximum) {
  const Tensor<double> x({2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto y = apply_layer<double>(LayerSpec::maxpool2d(2, 2), {x});
  EXPECT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_EQ(y[0], 4.0);
}

TEST(ApplyLayer, BilinearResizeIsCornerAligned) {
  const Tensor<double> x({2, 2}, std::vector<double>{0, 1, 2, 3});
  const auto y = apply_layer<double>(LayerSpec::bilinear_resize(3, 3), {x});
  const std::vector<double> want{0, 0.5, 1, 1, 1.5, 2, 2, 2.5, 3};
  ASSERT_EQ(y.shape(), (Shape{3, 3}));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_DOUBLE_EQ(y[i], want[i]);
}

TEST(ApplyLayer, SoftmaxOfEqualLogitsIsUniform) {
  const auto y = apply_layer<double>(LayerSpec::softmax(), {Tensor<double>({2})});
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(ApplyLayer, ConvShapeMismatchIsDimensionError) {
  const Tensor<double> x({3, 4, 4});
  const Tensor<double> w({2, 2, 3, 3});  // expects 2 input channels
  const Tensor<double> b({2});
  EXPECT_THROW(apply_layer<double>(LayerSpec::conv2d(3, 2, 1, 1), {x}, {w, b}), DimensionError);
}

TEST(ApplyLayer, ConcatNeedsEqualSpatialDims) {
  EXPECT_THROW(apply_layer<double>(LayerSpec::concat_channels(), {Tensor<double>({1, 2, 2}), Tensor<double>({1, 3, 2})}),
               DimensionError);
}

TEST(ApplyLayer, FullyConnectedChecksWeightRows) {
  const Tensor<double> x({2, 3, 3});
  EXPECT_THROW(apply_layer<double>(LayerSpec::fully_connected(4), {x}, {Tensor<double>({17, 4}), Tensor<double>({4})}),
               DimensionError);
}

TEST(ApplyLayer, NonFiniteInputIsNumericError) {
  Tensor<double> x({1, 2, 2});
  x[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(apply_layer<double>(LayerSpec::relu(), {x}), NumericError);
  x[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(apply_layer<double>(LayerSpec::sigmoid(), {x}), NumericError);
}

TEST(ApplyLayer, InvalidSpecIsRejected) {
  EXPECT_THROW(apply_layer<double>(LayerSpec::maxpool2d(0, 1), {Tensor<double>({1, 2, 2})}), UsageError);
  EXPECT_THROW(apply_layer<double>(LayerSpec::bilinear_resize(0, 3), {Tensor<double>({1, 2, 2})}), UsageError);
}

TEST(ApplyLayer, RepeatedCallsAreBitIdentical) {
  std::mt19937_64 rng(5);
  const auto x = random_tensor({3, 9, 7}, rng);
  const auto w = random_tensor({4, 3, 3, 3}, rng);
  const auto b = random_tensor({4}, rng);
  const auto spec = LayerSpec::conv2d(3, 4, 2, 1);
  const auto first = apply_layer<double>(spec, {x}, {w, b});
  for (int i = 0; i < 5; ++i) EXPECT_EQ(apply_layer<double>(spec, {x}, {w, b}), first);
}

TEST(Backprop, IdentityGraphGivesOnes) {
  Tape<double> tape;
  const Var x = tape.input(Tensor<double>({2, 3}, 0.25), "x");
  const auto grads = backprop(tape, x, Tensor<double>({2, 3}, 1.0));
  EXPECT_EQ(grads.of(x), Tensor<double>({2, 3}, 1.0));
}

TEST(Backprop, ConcatAdjointSplitsSeed) {
  std::mt19937_64 rng(2);
  Tape<double> tape;
  const Var a = tape.input(random_tensor({2, 3, 3}, rng));
  const Var b = tape.input(random_tensor({1, 3, 3}, rng));
  const Var y = tape.apply(LayerSpec::concat_channels(), {a, b});
  const auto g = random_tensor({3, 3, 3}, rng);
  const auto grads = backprop(tape, y, g);
  EXPECT_EQ(grads.of(a), slice_channels(g, 0, 2));
  EXPECT_EQ(grads.of(b), slice_channels(g, 2, 1));
}

TEST(Backprop, OutputFromAnotherTapeIsUsageError) {
  Tape<double> one, two;
  const Var x = one.input(Tensor<double>({1}));
  two.input(Tensor<double>({1}));
  EXPECT_THROW(backprop(two, x, Tensor<double>({1})), UsageError);
}

TEST(Backprop, SeedShapeMustMatch) {
  Tape<double> tape;
  const Var x = tape.input(Tensor<double>({2}));
  EXPECT_THROW(backprop(tape, x, Tensor<double>({3})), DimensionError);
}

TEST(Backprop, UnreachedParamsGetZeros) {
  Tape<double> tape;
  const Tensor<double> unused({4}, 1.0);
  const Var p = tape.param("unused", unused);
  const Var x = tape.input(Tensor<double>({1, 2, 2}, 1.0));
  const Var y = tape.apply(LayerSpec::relu(), {x});
  const auto grads = backprop(tape, y, Tensor<double>({1, 2, 2}, 1.0));
  EXPECT_EQ(grads.of(p), Tensor<double>({4}));
  EXPECT_EQ(grads.named().at("unused"), Tensor<double>({4}));
}

// conv -> relu -> fc against central differences with eps 1e-5.
TEST(Backprop, ConvReluFcMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_tensor({2, 6, 5}, rng);
    const auto w1 = random_tensor({3, 2, 3, 3}, rng);
    const auto b1 = random_tensor({3}, rng, -0.1, 0.1);
    const auto w2 = random_tensor({3 * 6 * 5, 4}, rng);
    const auto b2 = random_tensor({4}, rng);
    const auto seed = random_tensor({4}, rng);
    const auto conv = LayerSpec::conv2d(3, 3, 1, 1);
    const auto fc = LayerSpec::fully_connected(4);

    auto objective = [&](const Tensor<double>& xx, const Tensor<double>& ww1, const Tensor<double>& ww2) {
      auto h = apply_layer<double>(conv, {xx}, {ww1, b1});
      h = apply_layer<double>(LayerSpec::relu(), {h});
      return dot(apply_layer<double>(fc, {h}, {ww2, b2}), seed);
    };

    Tape<double> tape;
    const Var vx = tape.input(x);
    const Var vw1 = tape.param("w1", w1);
    const Var vb1 = tape.param("b1", b1);
    const Var vw2 = tape.param("w2", w2);
    const Var vb2 = tape.param("b2", b2);
    Var h = tape.apply(conv, {vx}, {vw1, vb1});
    // keep the check away from relu kinks
    bool near_kink = false;
    for (double v : tape.value(h).data()) near_kink |= std::abs(v) < 1e-3;
    if (near_kink) continue;
    h = tape.apply(LayerSpec::relu(), {h});
    const Var y = tape.apply(fc, {h}, {vw2, vb2});
    const auto grads = backprop(tape, y, seed);

    const auto nx = central_difference([&](const Tensor<double>& v) { return objective(v, w1, w2); }, x);
    const auto nw1 = central_difference([&](const Tensor<double>& v) { return objective(x, v, w2); }, w1);
    const auto nw2 = central_difference([&](const Tensor<double>& v) { return objective(x, w1, v); }, w2);
    EXPECT_LT(max_relative_error(grads.of(vx), nx), 1e-6);
    EXPECT_LT(max_relative_error(grads.of(vw1), nw1), 1e-6);
    EXPECT_LT(max_relative_error(grads.of(vw2), nw2), 1e-6);
  }
}

TEST(GradCheck, LinearFunctionIsExact) {
  std::mt19937_64 rng(3);
  // O(1) coefficients so that rounding in f stays well below eps * |grad|.
  const auto coeffs = random_tensor({12}, rng, 0.5, 2.0);
  ScalarFunction<double> f = [&](const std::vector<Tensor<double>>& p, std::vector<Tensor<double>>* g) {
    if (g) *g = {coeffs};
    return Tensor<double>({1}, dot(p[0], coeffs));
  };
  const auto result = grad_check<double>(f, {random_tensor({12}, rng, -0.5, 0.5)}, 1e-5);
  EXPECT_LT(result.max_relative_error, 1e-10);
  EXPECT_EQ(result.coordinates_checked, 12u);
}

TEST(GradCheck, CorruptedAdjointIsDetected) {
  std::mt19937_64 rng(4);
  const auto x0 = random_tensor({2, 5, 5}, rng);
  const auto w = random_tensor({3, 2, 3, 3}, rng);
  const auto b = random_tensor({3}, rng);
  const auto r = random_tensor({3, 5, 5}, rng);
  auto make = [&](bool corrupt) {
    return ScalarFunction<double>([&, corrupt](const std::vector<Tensor<double>>& p, std::vector<Tensor<double>>* g) {
      Tape<double> tape;
      const Var x = tape.input(p[0]);
      const Var pw = tape.param("w", p[1]);
      const Var pb = tape.param("b", b);
      const Var y = tape.apply(LayerSpec::conv2d(3, 3, 1, 1), {x}, {pw, pb});
      const Var s = tape.apply(LayerSpec::sigmoid(), {y});
      if (g) {
        auto grads = backprop(tape, s, r);
        *g = {grads.of(x), grads.of(pw)};
        if (corrupt) (*g)[1] *= 2.0;
      }
      return Tensor<double>({1}, dot(tape.value(s), r));
    });
  };
  EXPECT_LT(grad_check<double>(make(false), {x0, w}, 1e-5).max_relative_error, 1e-6);
  EXPECT_GT(grad_check<double>(make(true), {x0, w}, 1e-5).max_relative_error, 1e-2);
}

TEST(GradCheck, NonScalarFunctionIsUsageError) {
  ScalarFunction<double> f = [](const std::vector<Tensor<double>>& p, std::vector<Tensor<double>>* g) {
    if (g) *g = {p[0]};
    return p[0];
  };
  EXPECT_THROW(grad_check<double>(f, {Tensor<double>({3})}, 1e-5), UsageError);
  EXPECT_THROW(grad_check<double>(f, {Tensor<double>({1})}, 0.0), UsageError);
}

TEST(GradCheck, LargeTensorsAreSubsampled) {
  ScalarFunction<double> f = [](const std::vector<Tensor<double>>& p, std::vector<Tensor<double>>* g) {
    if (g) *g = {Tensor<double>(p[0].shape(), 1.0)};
    double s = 0;
    for (double v : p[0].data()) s += v;
    return Tensor<double>({1}, s);
  };
  const auto result = grad_check<double>(f, {Tensor<double>({1000})}, 1e-5);
  EXPECT_EQ(result.coordinates_checked, 200u);
}

// ---------------------------------------------------------------------------
// Per-kind gradient property: 100 random instances each.

namespace {

struct Instance {
  LayerSpec spec;
  std::vector<Tensor<double>> inputs;
  std::vector<Tensor<double>> params;
};

Tensor<double> away_from_zero(Tensor<double> t, double margin) {
  for (auto& v : t.data()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

Tensor<double> distinct_values(Shape shape, std::mt19937_64& rng) {
  Tensor<double> t(std::move(shape));
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i) - 0.3;
  std::shuffle(v.begin(), v.end(), rng);
  t.storage().assign(v.begin(), v.end());
  return t;
}

Instance random_instance(LayerKind kind, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(1, 3), side(3, 7);
  const std::size_t c = small(rng), h = side(rng), w = side(rng);
  switch (kind) {
    case LayerKind::conv2d: {
      const int k = std::uniform_int_distribution<int>(1, 3)(rng);
      const int s = small(rng) > 2 ? 2 : 1;
      const int pad = std::uniform_int_distribution<int>(0, 1)(rng);
      const int co = small(rng);
      return {LayerSpec::conv2d(k, co, s, pad),
              {random_tensor({c, h, w}, rng)},
              {random_tensor({std::size_t(co), c, std::size_t(k), std::size_t(k)}, rng),
               random_tensor({std::size_t(co)}, rng)}};
    }
    case LayerKind::maxpool2d: return {LayerSpec::maxpool2d(2, small(rng) > 1 ? 2 : 1), {distinct_values({c, h, w}, rng)}, {}};
    case LayerKind::fully_connected: {
      const std::size_t out = small(rng) + 1;
      return {LayerSpec::fully_connected(int(out)),
              {random_tensor({c, h, w}, rng)},
              {random_tensor({c * h * w, out}, rng), random_tensor({out}, rng)}};
    }
    case LayerKind::relu: return {LayerSpec::relu(), {away_from_zero(random_tensor({c, h, w}, rng), 1e-3)}, {}};
    case LayerKind::sigmoid: return {LayerSpec::sigmoid(), {random_tensor({c, h, w}, rng, -4, 4)}, {}};
    case LayerKind::softmax: return {LayerSpec::softmax(), {random_tensor({h}, rng, -3, 3)}, {}};
    case LayerKind::concat_channels:
      return {LayerSpec::concat_channels(), {random_tensor({c, h, w}, rng), random_tensor({small(rng) + 0ul, h, w}, rng)}, {}};
    case LayerKind::bilinear_resize:
      return {LayerSpec::bilinear_resize(side(rng), side(rng)), {random_tensor({c, h, w}, rng)}, {}};
    case LayerKind::gated_mix: {
      auto gate = random_tensor({2}, rng, 0.05, 0.95);
      return {LayerSpec::gated_mix(), {gate, random_tensor({c, h, w}, rng), random_tensor({c, h, w}, rng)}, {}};
    }
  }
  return {};
}

}  // namespace

class LayerGradientProperty : public ::testing::TestWithParam<LayerKind> {};

TEST_P(LayerGradientProperty, MatchesCentralDifferences) {
  std::mt19937_64 rng(100 + static_cast<int>(GetParam()));
  for (int instance = 0; instance < 100; ++instance) {
    Instance inst = random_instance(GetParam(), rng);
    const auto out_shape = apply_layer<double>(inst.spec, inst.inputs, inst.params).shape();
    const auto seed = random_tensor(out_shape, rng);

    Tape<double> tape;
    std::vector<Var> in_vars, param_vars;
    for (const auto& t : inst.inputs) in_vars.push_back(tape.input(t));
    for (std::size_t i = 0; i < inst.params.size(); ++i) param_vars.push_back(tape.param("p" + std::to_string(i), inst.params[i]));
    const Var y = tape.apply(inst.spec, in_vars, param_vars);
    const auto grads = backprop(tape, y, seed);

    auto check = [&](std::vector<Tensor<double>>& group, std::size_t k, Var v) {
      auto f = [&](const Tensor<double>& probe) {
        const Tensor<double> saved = group[k];
        group[k] = probe;
        const double value = dot(apply_layer<double>(inst.spec, inst.inputs, inst.params), seed);
        group[k] = saved;
        return value;
      };
      const auto numeric = central_difference(f, group[k]);
      EXPECT_LT(max_relative_error(grads.of(v), numeric), 1e-4)
          << to_string(inst.spec.kind) << " instance " << instance;
    };
    for (std::size_t k = 0; k < inst.inputs.size(); ++k) check(inst.inputs, k, in_vars[k]);
    for (std::size_t k = 0; k < inst.params.size(); ++k) check(inst.params, k, param_vars[k]);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradientProperty,
                         ::testing::Values(LayerKind::conv2d, LayerKind::maxpool2d, LayerKind::fully_connected,
                                           LayerKind::relu, LayerKind::sigmoid, LayerKind::softmax,
                                           LayerKind::concat_channels, LayerKind::bilinear_resize,
                                           LayerKind::gated_mix),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(SoftmaxProperty, SimplexAndShiftInvariance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int i = 0; i < 200; ++i) {
    const auto logits = random_tensor({std::size_t(2 + i % 6)}, rng, -5, 5);
    const auto p = apply_layer<double>(LayerSpec::softmax(), {logits});
    double total = 0;
    for (double v : p.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    auto shifted = logits;
    const double c = shift(rng);
    for (auto& v : shifted.data()) v += c;
    const auto q = apply_layer<double>(LayerSpec::softmax(), {shifted});
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
  }
}

TEST(ResizeProperty, SameSizeIsIdentityAndConstantStaysConstant) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 1 + i % 7, w = 1 + (i * 3) % 5;
    const auto x = random_tensor({2, h, w}, rng);
    EXPECT_EQ(apply_layer<double>(LayerSpec::bilinear_resize(int(h), int(w)), {x}), x);
    const Tensor<double> flat({2, h, w}, 0.37);
    const auto y = apply_layer<double>(LayerSpec::bilinear_resize(7, 7), {flat});
    for (double v : y.data()) EXPECT_NEAR(v, 0.37, 1e-15);
  }
}

TEST(ConcatProperty, SlicingRecoversInputs) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const std::size_t ca = 1 + i % 3, cb = 1 + i % 4;
    const auto a = random_tensor({ca, 4, 5}, rng);
    const auto b = random_tensor({cb, 4, 5}, rng);
    const auto joined = apply_layer<double>(LayerSpec::concat_channels(), {a, b});
    EXPECT_EQ(slice_channels(joined, 0, ca), a);
    EXPECT_EQ(slice_channels(joined, ca, cb), b);
  }
}

TEST(Precision, FloatAndDoubleAgree) {
  std::mt19937_64 rng(24);
  const auto x = random_tensor({3, 8, 8}, rng);
  const auto w = random_tensor({5, 3, 3, 3}, rng);
  const auto b = random_tensor({5}, rng);
  const auto spec = LayerSpec::conv2d(3, 5, 1, 1);
  const auto yd = apply_layer<double>(spec, {x}, {w, b});
  const auto yf = apply_layer<float>(spec, {x.cast<float>()}, {w.cast<float>(), b.cast<float>()});
  for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yd[i], yf[i], 1e-4);
}
