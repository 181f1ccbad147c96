#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "iadn/dataio/synthetic.hpp"
#include "iadn/netgraph/netgraph.hpp"

using namespace iadn;

namespace {

const std::vector<std::string> kVariants = {"TDNN",          "TDNN+MSS-F",   "TDNN+MSS",   "TDNN+IAMSS-F",
                                            "TDNN+IAMSS",    "IATDNN",       "IATDNN+MSS-F", "IATDNN+MSS",
                                            "IATDNN+IAMSS-F", "IATDNN+IAMSS"};

NetworkConfig variant_config(const std::string& name) {
  NetworkConfig c;
  c.set_variant(name);
  return c;
}

/// Small config for tests that run many forward passes.
NetworkConfig small_config(const std::string& name) {
  NetworkConfig c = variant_config(name);
  c.backbone_stages = {{3, 4, true}, {3, 8, true}, {3, 8, true}};
  c.conv_pro_channels = 8;
  c.ifcnn.fc_widths = {16, 8, 2};
  c.init_std = 0.1;
  return c;
}

MultispectralFrame desk_frame(std::uint64_t seed = 3, std::size_t index = 0) {
  SyntheticParams p;
  return generate_frame(p, seed, index);
}

MultispectralFrame small_frame(std::uint64_t seed = 3) {
  SyntheticParams p;
  p.width = 32;
  p.height = 24;
  p.min_height = 10;
  p.max_height = 20;
  return generate_frame(p, seed, 0);
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

TEST(BuildNetwork, DefaultParameterCountMatchesShapeArithmetic) {
  // conv: out*in*k*k + out; fc: in*out + out
  const auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; };
  const auto fc = [](std::size_t in, std::size_t out) { return in * out + out; };
  const std::size_t streams = conv(3, 16, 3) + conv(16, 32, 3) + conv(32, 64, 3) +  // visible
                              conv(1, 16, 3) + conv(16, 32, 3) + conv(32, 64, 3);   // thermal
  const std::size_t ifcnn = fc(128 * 7 * 7, 512) + fc(512, 64) + fc(64, 2);
  const std::size_t pro = conv(128, 64, 3);
  const std::size_t heads = 2 * conv(64, 4, 1) + 2 * conv(64, 16, 1);
  const std::size_t seg = 4 * conv(64, 1, 3);
  const auto net = build_network<float>(NetworkConfig{}, 0);
  EXPECT_EQ(net.parameter_count(), streams + ifcnn + pro + heads + seg);
  EXPECT_EQ(net.parameter_count(), 3370318u);
}

TEST(BuildNetwork, HeadSetsFollowVariant) {
  const auto tdnn = build_network<float>(variant_config("TDNN"), 0);
  EXPECT_TRUE(tdnn.params.count("cls.w") && tdnn.params.count("bbox.w"));
  EXPECT_FALSE(tdnn.params.count("cls_day.w"));
  EXPECT_FALSE(tdnn.params.count("ifcnn.fc1.w"));
  const auto ia = build_network<float>(variant_config("IATDNN"), 0);
  for (const char* n : {"cls_day.w", "cls_night.w", "bbox_day.w", "bbox_night.w", "ifcnn.fc3.w"}) {
    EXPECT_TRUE(ia.params.count(n)) << n;
  }
  EXPECT_FALSE(ia.params.count("cls.w"));
}

TEST(BuildNetwork, GatedSegmentationAlwaysGetsAnIfcnn) {
  const auto net = build_network<float>(variant_config("TDNN+IAMSS-F"), 0);
  EXPECT_TRUE(net.params.count("ifcnn.fc1.w"));
  EXPECT_TRUE(net.config.has_ifcnn());
}

TEST(BuildNetwork, LastIfcnnWidthMustBeTwo) {
  NetworkConfig c;
  c.ifcnn.fc_widths = {512, 64, 3};
  EXPECT_THROW(build_network<float>(c, 0), ConfigError);
}

TEST(BuildNetwork, RejectsEvenKernelsAndEmptyAnchors) {
  NetworkConfig c;
  c.backbone_stages[0].kernel = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  NetworkConfig d;
  d.anchor_set.clear();
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(BuildNetwork, SameSeedIsBitIdenticalAndSeedsDiffer) {
  const auto a = build_network<float>(NetworkConfig{}, 5);
  const auto b = build_network<float>(NetworkConfig{}, 5);
  const auto c = build_network<float>(NetworkConfig{}, 6);
  for (const auto& [name, t] : a.params) EXPECT_TRUE(bit_equal(t, b.param(name))) << name;
  EXPECT_FALSE(bit_equal(a.param("pro.w"), c.param("pro.w")));
}

TEST(BuildNetwork, GaussianInitHasRequestedSpreadAndZeroBiases) {
  NetworkConfig c;
  c.backbone_init = BackboneInit::gaussian;
  const auto net = build_network<double>(c, 1);
  const auto& w = net.param("ifcnn.fc1.w");
  double sq = 0;
  for (double v : w.data()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(w.size())), 0.01, 2e-4);
  const auto& v = net.param("vis.conv2.w");
  double vs = 0;
  for (double x : v.data()) vs += x * x;
  EXPECT_NEAR(std::sqrt(vs / static_cast<double>(v.size())), 0.01, 1e-3);
  for (const auto& [name, t] : net.params) {
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      for (double x : t.data()) ASSERT_EQ(x, 0.0) << name;
    }
  }
}

TEST(BuildNetwork, HeInitScalesBackboneByFanIn) {
  const auto net = build_network<double>(NetworkConfig{}, 1);
  const auto& w = net.param("vis.conv3.w");  // fan-in 32 * 9
  double sq = 0;
  for (double v : w.data()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(w.size())), std::sqrt(2.0 / 288.0), 3e-3);
}

TEST(Network, MissingParameterIsUsageError) {
  const auto net = build_network<float>(variant_config("TDNN"), 0);
  EXPECT_THROW(net.param("cls_day.w"), UsageError);
}

// ---------------------------------------------------------------------------
// Forward

TEST(Forward, DeskShapesFollowStrideAndAnchors) {
  const auto net = build_network<float>(NetworkConfig{}, 0);
  const auto out = forward(net, desk_frame());
  EXPECT_EQ(out.cls_fused.shape(), (Shape{4, 16, 20}));
  EXPECT_EQ(out.bbox_fused.shape(), (Shape{16, 16, 20}));
  ASSERT_EQ(out.seg_fused.size(), 2u);
  EXPECT_EQ(out.seg_fused[0].shape(), (Shape{1, 16, 20}));
  EXPECT_EQ(out.seg_mask().shape(), (Shape{1, 16, 20}));
}

TEST(Forward, OutputsLieInOpenUnitInterval) {
  const auto net = build_network<float>(NetworkConfig{}, 0);
  const auto out = forward(net, desk_frame());
  for (float v : out.cls_fused.data()) ASSERT_TRUE(v > 0 && v < 1);
  for (const auto& s : out.seg_fused) {
    for (float v : s.data()) ASSERT_TRUE(v > 0 && v < 1);
  }
  ASSERT_TRUE(out.weights.has_value());
  EXPECT_NEAR(out.weights->w_day + out.weights->w_night, 1.0, 1e-6);
}

TEST(Forward, TdnnHasNoDayNightFields) {
  const auto net = build_network<float>(variant_config("TDNN"), 0);
  const auto out = forward(net, desk_frame());
  EXPECT_FALSE(out.has_day_night_heads());
  EXPECT_FALSE(out.bbox_night.has_value());
  EXPECT_FALSE(out.weights.has_value());
  EXPECT_TRUE(out.seg_fused.empty());
  EXPECT_THROW(out.seg_mask(), UsageError);
}

TEST(Forward, IndivisibleImageIsDimensionError) {
  const auto net = build_network<float>(NetworkConfig{}, 0);
  SyntheticParams p;
  p.width = 20;
  p.height = 12;
  p.stride = 4;
  p.min_height = 4;
  p.max_height = 8;
  EXPECT_THROW(forward(net, generate_frame(p, 1, 0)), DimensionError);
}

TEST(Forward, RepeatedCallsAreBitIdentical) {
  const auto net = build_network<float>(NetworkConfig{}, 2);
  const auto f = desk_frame();
  const auto a = forward(net, f), b = forward(net, f);
  EXPECT_TRUE(bit_equal(a.cls_fused, b.cls_fused));
  EXPECT_TRUE(bit_equal(a.bbox_fused, b.bbox_fused));
  EXPECT_TRUE(bit_equal(a.seg_fused[1], b.seg_fused[1]));
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Forward, PredictIlluminationMatchesForwardExactly) {
  const auto net = build_network<double>(small_config("IATDNN+IAMSS"), 4);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = small_frame(s);
    const auto w = predict_illumination(net, f);
    EXPECT_EQ(w, *forward(net, f).weights);
    EXPECT_NEAR(w.w_day + w.w_night, 1.0, 1e-12);
  }
  EXPECT_THROW(predict_illumination(build_network<double>(small_config("TDNN"), 0), small_frame()), ConfigError);
}

class VariantForward : public ::testing::TestWithParam<std::string> {};

TEST_P(VariantForward, FusedOutputsAreGatedMixesOfDayAndNight) {
  const NetworkConfig config = small_config(GetParam());
  const auto net = build_network<double>(config, 11);
  const auto out = forward(net, small_frame(5));
  EXPECT_EQ(out.seg_fused.size(), seg_stream_count(config.seg_variant));
  EXPECT_EQ(out.weights.has_value(), config.has_ifcnn());
  EXPECT_EQ(out.has_day_night_heads(), config.head_variant == HeadVariant::IATDNN);
  const auto near_mix = [&](const Tensor<double>& fused, const Tensor<double>& day, const Tensor<double>& night) {
    ASSERT_EQ(fused.shape(), day.shape());
    const double wd = out.weights->w_day, wn = out.weights->w_night;
    for (std::size_t i = 0; i < fused.size(); ++i) ASSERT_NEAR(fused[i], wd * day[i] + wn * night[i], 1e-6);
  };
  if (out.has_day_night_heads()) {
    near_mix(out.cls_fused, *out.cls_day, *out.cls_night);
    near_mix(out.bbox_fused, *out.bbox_day, *out.bbox_night);
  }
  if (seg_is_gated(config.seg_variant)) {
    ASSERT_EQ(out.seg_day.size(), out.seg_fused.size());
    for (std::size_t s = 0; s < out.seg_fused.size(); ++s) near_mix(out.seg_fused[s], out.seg_day[s], out.seg_night[s]);
  } else {
    EXPECT_TRUE(out.seg_day.empty());
  }
}

INSTANTIATE_TEST_SUITE_P(AllVariants, VariantForward, ::testing::ValuesIn(kVariants),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (auto& ch : n) ch = std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
                           return n;
                         });

TEST(Forward, IamssFusesEachStreamWithItsOwnMasks) {
  const auto net = build_network<double>(small_config("IATDNN+IAMSS"), 8);
  const auto out = forward(net, small_frame(2));
  ASSERT_EQ(out.seg_fused.size(), 2u);
  const double wd = out.weights->w_day, wn = out.weights->w_night;
  // Stream 1 mixed from stream 0's masks must not reproduce stream 1.
  double cross = 0;
  for (std::size_t i = 0; i < out.seg_fused[1].size(); ++i) {
    cross = std::max(cross, std::abs(out.seg_fused[1][i] - (wd * out.seg_day[0][i] + wn * out.seg_night[0][i])));
  }
  EXPECT_GT(cross, 1e-6);
}

// ---------------------------------------------------------------------------
// gated_mix

TEST(GatedMix, SpotValues) {
  const Tensor<double> day({1, 1, 3}, {0.9, 0.4, -1.0});
  const Tensor<double> night({1, 1, 3}, {0.2, 0.4, 3.0});
  const auto out = gated_mix<double>({0.7, 0.3}, day, night);
  EXPECT_NEAR(out[0], 0.69, 1e-15);
  EXPECT_NEAR(out[1], 0.4, 1e-15);
  EXPECT_NEAR(out[2], 0.2, 1e-15);
  EXPECT_TRUE(bit_equal(gated_mix<double>({1.0, 0.0}, day, night), day));
  EXPECT_TRUE(bit_equal(gated_mix<double>({0.0, 1.0}, day, night), night));
}

TEST(GatedMix, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(gated_mix<double>({0.5, 0.5}, Tensor<double>({1, 2, 2}), Tensor<double>({1, 2, 3})), DimensionError);
}

// ---------------------------------------------------------------------------
// Decode

namespace {

RawOutputs<double> raw_for(const AnchorGrid& g, double score) {
  RawOutputs<double> raw;
  raw.cls_fused = Tensor<double>({g.templates, g.grid_h, g.grid_w}, score);
  raw.bbox_fused = Tensor<double>({4 * g.templates, g.grid_h, g.grid_w});
  return raw;
}

}  // namespace

TEST(Decode, ZeroDeltasReturnAnchorBoxes) {
  const auto g = generate_anchors(16, 16, 8, {{10, 0.5}});
  auto raw = raw_for(g, 0.1);
  for (std::size_t i = 0; i < g.size(); ++i) raw.cls_fused[g.score_offset(i)] = 0.5 + 0.1 * static_cast<double>(i);
  const auto dets = decode_detections(raw, g, 0.05, 1.0);
  ASSERT_EQ(dets.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(dets[i].box, g.boxes[3 - i]);  // descending score
  }
}

TEST(Decode, ThresholdOneKeepsNothing) {
  const auto g = generate_anchors(16, 16, 8, {{10, 0.5}});
  EXPECT_TRUE(decode_detections(raw_for(g, 0.999), g, 1.0, 0.5).empty());
}

TEST(Decode, DuplicateBoxesCollapseUnderNms) {
  // Two templates of the same shape at one cell decode to identical boxes.
  const auto g = generate_anchors(8, 8, 8, {{10, 0.5}, {10, 0.5}});
  auto raw = raw_for(g, 0.0);
  raw.cls_fused[g.score_offset(0)] = 0.8;
  raw.cls_fused[g.score_offset(1)] = 0.9;
  const auto dets = decode_detections(raw, g, 0.5, 0.5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_DOUBLE_EQ(dets[0].score, 0.9);
}

TEST(Decode, DeltasApplyTheInverseEncoding) {
  const auto g = generate_anchors(8, 8, 8, {{10, 0.5}});
  auto raw = raw_for(g, 0.7);
  const Box gt{1.0, 0.5, 6.0, 8.0};
  const auto d = encode_boxes(g.boxes[0], gt);
  for (std::size_t j = 0; j < 4; ++j) raw.bbox_fused[g.delta_offset(0, j)] = d[j];
  const auto dets = decode_detections(raw, g, 0.5, 0.5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_NEAR(dets[0].box.x, gt.x, 1e-12);
  EXPECT_NEAR(dets[0].box.h, gt.h, 1e-12);
}

TEST(Decode, GridMismatchIsDimensionError) {
  const auto g = generate_anchors(16, 16, 8, {{10, 0.5}});
  const auto other = generate_anchors(16, 24, 8, {{10, 0.5}});
  EXPECT_THROW(decode_detections(raw_for(other, 0.5), g, 0.1, 0.5), DimensionError);
}

// ---------------------------------------------------------------------------
// Config text and checkpoints

TEST(ConfigText, RoundTripsEveryField) {
  NetworkConfig c;
  c.set_variant("TDNN+MSS-F");
  c.backbone_stages = {{5, 8, true}, {3, 12, false}};
  c.anchor_set = {{17.5, 0.5}};
  c.ifcnn = {5, 6, {32, 2}};
  c.conv_pro_channels = 9;
  c.init_std = 0.0123;
  c.standalone_ifcnn = true;
  c.backbone_init = BackboneInit::gaussian;
  const auto text = format_key_values(to_key_values(c));
  EXPECT_EQ(apply_key_values(NetworkConfig{}, parse_key_values(text)), c);
}

TEST(ConfigText, VariantNamesRoundTrip) {
  for (const auto& v : kVariants) EXPECT_EQ(variant_config(v).variant_name(), v);
  NetworkConfig c;
  EXPECT_THROW(c.set_variant("IATDNN+XYZ"), ConfigError);
  EXPECT_THROW(c.set_variant("RPN"), ConfigError);
}

TEST(ConfigText, MalformedValuesAreConfigErrors) {
  EXPECT_THROW(apply_key_values(NetworkConfig{}, {{"conv_pro_channels", "sixty"}}), ConfigError);
  EXPECT_THROW(apply_key_values(NetworkConfig{}, {{"backbone_stages", "3:16"}}), ConfigError);
  EXPECT_THROW(parse_key_values("no equals sign"), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto net = build_network<float>(variant_config("IATDNN+MSS"), 9);
  const auto path = std::filesystem::temp_directory_path() / "iadn_test_ckpt.iadn";
  save_checkpoint(path, net, {{"iteration", "12"}});
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.net.config, net.config);
  EXPECT_EQ(back.metadata.at("iteration"), "12");
  ASSERT_EQ(back.net.params.size(), net.params.size());
  for (const auto& [name, t] : net.params) EXPECT_TRUE(bit_equal(t, back.net.param(name))) << name;
  EXPECT_EQ(encode_checkpoint(back.net, back.metadata), encode_checkpoint(net, {{"iteration", "12"}}));
  std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutStartsWithMagicAndVersion) {
  const auto bytes = encode_checkpoint(build_network<float>(variant_config("TDNN"), 0));
  EXPECT_EQ(bytes.substr(0, 4), "IADN");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
}

TEST(Checkpoint, CorruptionIsReported) {
  const auto bytes = encode_checkpoint(build_network<float>(variant_config("TDNN"), 0));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic, "t"), DataError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version, "t"), VersionError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3), "t"), DataError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 20), "t"), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/iadn.ckpt"), DataError);
}

TEST(Checkpoint, ParameterSetMustMatchConfig) {
  auto net = build_network<float>(variant_config("TDNN"), 0);
  net.params.erase("cls.b");
  EXPECT_THROW(decode_checkpoint(encode_checkpoint(net), "t"), DataError);
}
