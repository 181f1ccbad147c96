#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/numerics/layer.hpp"
#include "iadn/numerics/tape.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

struct IlluminationWeights {
  double w_day = 0.5;
  double w_night = 0.5;

  friend bool operator==(const IlluminationWeights&, const IlluminationWeights&) = default;
};

template <typename T>
struct RawOutputs {
  std::optional<IlluminationWeights> weights;  // absent when the network has no IFCNN
  Tensor<T> cls_fused;                          // [A, gh, gw], sigmoid scores
  Tensor<T> bbox_fused;                         // [4A, gh, gw], box deltas
  std::optional<Tensor<T>> cls_day, cls_night, bbox_day, bbox_night;
  std::vector<Tensor<T>> seg_fused;             // one [1, gh, gw] mask per segmentation stream
  std::vector<Tensor<T>> seg_day, seg_night;    // per stream, gated variants only

  bool has_day_night_heads() const { return cls_day.has_value(); }

  /// Reported mask: the single stream, or the mean of the two streams.
  Tensor<T> seg_mask() const {
    if (seg_fused.empty()) throw UsageError("network has no segmentation output");
    Tensor<T> out = seg_fused[0];
    for (std::size_t s = 1; s < seg_fused.size(); ++s) out += seg_fused[s];
    out *= T(1) / static_cast<T>(seg_fused.size());
    return out;
  }
};

/// Forward pass recorded on a tape, with handles to every loss-facing output.
template <typename T>
struct ForwardTrace {
  Tape<T> tape;
  std::optional<Var> weights;
  Var cls_fused, bbox_fused;
  std::vector<Var> seg_fused;
  RawOutputs<T> outputs;
};

template <typename T>
Tensor<T> gated_mix(const IlluminationWeights& w, const Tensor<T>& day, const Tensor<T>& night) {
  const Tensor<T> weights({2}, std::vector<T>{static_cast<T>(w.w_day), static_cast<T>(w.w_night)});
  return apply_layer<T>(LayerSpec::gated_mix(), std::vector<Tensor<T>>{weights, day, night});
}

namespace detail {

/// Network input: [0, 1] pixels shifted to [-0.5, 0.5].
template <typename T>
Tensor<T> network_input(const Image& image) {
  Tensor<T> t = to_tensor<T>(image);
  for (auto& v : t.data()) v -= T(0.5);
  return t;
}

template <typename T>
class GraphBuilder {
 public:
  GraphBuilder(const Network<T>& net, Tape<T>& tape) : net_(net), tape_(tape) {}

  Var conv(const std::string& name, Var x, int kernel, int out_channels) {
    return tape_.apply(LayerSpec::conv2d(kernel, out_channels, 1, kernel / 2), {x},
                       {param(name + ".w"), param(name + ".b")});
  }
  Var fc(const std::string& name, Var x, int width) {
    return tape_.apply(LayerSpec::fully_connected(width), {x}, {param(name + ".w"), param(name + ".b")});
  }
  Var relu(Var x) { return tape_.apply(LayerSpec::relu(), {x}); }
  Var sigmoid(Var x) { return tape_.apply(LayerSpec::sigmoid(), {x}); }
  Var mix(Var w, Var day, Var night) { return tape_.apply(LayerSpec::gated_mix(), {w, day, night}); }

  Var stream(const std::string& prefix, Var x) {
    const auto& stages = net_.config.backbone_stages;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      x = relu(conv(prefix + ".conv" + std::to_string(i + 1), x, stages[i].kernel, stages[i].channels));
      if (stages[i].pool) x = tape_.apply(LayerSpec::maxpool2d(2, 2), {x});
    }
    return x;
  }

  Var ifcnn(Var tsfm) {
    const auto& spec = net_.config.ifcnn;
    Var x = tape_.apply(LayerSpec::bilinear_resize(spec.pool_h, spec.pool_w), {tsfm});
    for (std::size_t i = 0; i < spec.fc_widths.size(); ++i) {
      x = fc("ifcnn.fc" + std::to_string(i + 1), x, spec.fc_widths[i]);
      if (i + 1 < spec.fc_widths.size()) x = relu(x);
    }
    return tape_.apply(LayerSpec::softmax(), {x});
  }

 private:
  Var param(const std::string& name) { return tape_.param(name, net_.param(name)); }

  const Network<T>& net_;
  Tape<T>& tape_;
};

struct Trunk {
  Var visible, thermal, tsfm;
  std::optional<Var> weights;
};

template <typename T>
Trunk build_trunk(GraphBuilder<T>& g, Tape<T>& tape, const NetworkConfig& config, const Tensor<T>& visible,
                  const Tensor<T>& thermal) {
  if (visible.rank() != 3 || visible.dim(0) != 3 || thermal.rank() != 3 || thermal.dim(0) != 1) {
    throw DimensionError("forward: expected visible [3,H,W] and thermal [1,H,W], got " +
                         shape_string(visible.shape()) + " and " + shape_string(thermal.shape()));
  }
  if (visible.dim(1) != thermal.dim(1) || visible.dim(2) != thermal.dim(2)) {
    throw DimensionError("forward: visible and thermal sizes differ");
  }
  const std::size_t stride = config.stride();
  if (visible.dim(1) % stride != 0 || visible.dim(2) % stride != 0) {
    throw DimensionError("forward: image " + std::to_string(visible.dim(1)) + "x" + std::to_string(visible.dim(2)) +
                         " is not divisible by backbone stride " + std::to_string(stride));
  }
  Trunk t;
  t.visible = g.stream("vis", tape.input(visible, "visible", false));
  t.thermal = g.stream("th", tape.input(thermal, "thermal", false));
  t.tsfm = tape.apply(LayerSpec::concat_channels(), {t.visible, t.thermal});
  if (config.has_ifcnn()) t.weights = g.ifcnn(t.tsfm);
  return t;
}

template <typename T>
IlluminationWeights to_weights(const Tensor<T>& w) {
  return {static_cast<double>(w[0]), static_cast<double>(w[1])};
}

}  // namespace detail

template <typename T>
ForwardTrace<T> forward_traced(const Network<T>& net, const Tensor<T>& visible, const Tensor<T>& thermal) {
  const auto& config = net.config;
  ForwardTrace<T> trace;
  auto& tape = trace.tape;
  detail::GraphBuilder<T> g(net, tape);
  const detail::Trunk trunk = detail::build_trunk(g, tape, config, visible, thermal);
  auto& out = trace.outputs;
  trace.weights = trunk.weights;
  if (trunk.weights) out.weights = detail::to_weights(tape.value(*trunk.weights));

  const int a = static_cast<int>(config.anchors_per_cell());
  const Var pro = g.relu(g.conv("pro", trunk.tsfm, 3, config.conv_pro_channels));
  if (config.head_variant == HeadVariant::TDNN) {
    trace.cls_fused = g.sigmoid(g.conv("cls", pro, 1, a));
    trace.bbox_fused = g.conv("bbox", pro, 1, 4 * a);
  } else {
    const Var w = *trunk.weights;
    const Var cd = g.sigmoid(g.conv("cls_day", pro, 1, a));
    const Var cn = g.sigmoid(g.conv("cls_night", pro, 1, a));
    const Var bd = g.conv("bbox_day", pro, 1, 4 * a);
    const Var bn = g.conv("bbox_night", pro, 1, 4 * a);
    trace.cls_fused = g.mix(w, cd, cn);
    trace.bbox_fused = g.mix(w, bd, bn);
    out.cls_day = tape.value(cd);
    out.cls_night = tape.value(cn);
    out.bbox_day = tape.value(bd);
    out.bbox_night = tape.value(bn);
  }
  out.cls_fused = tape.value(trace.cls_fused);
  out.bbox_fused = tape.value(trace.bbox_fused);

  const int k = config.seg_kernel;
  auto gated_seg = [&](const std::string& prefix, Var features) {
    const Var d = g.sigmoid(g.conv(prefix + "_day", features, k, 1));
    const Var n = g.sigmoid(g.conv(prefix + "_night", features, k, 1));
    out.seg_day.push_back(tape.value(d));
    out.seg_night.push_back(tape.value(n));
    return g.mix(*trunk.weights, d, n);
  };
  switch (config.seg_variant) {
    case SegVariant::NONE: break;
    case SegVariant::MSS_F: trace.seg_fused.push_back(g.sigmoid(g.conv("seg", trunk.tsfm, k, 1))); break;
    case SegVariant::MSS:
      trace.seg_fused.push_back(g.sigmoid(g.conv("seg_vis", trunk.visible, k, 1)));
      trace.seg_fused.push_back(g.sigmoid(g.conv("seg_th", trunk.thermal, k, 1)));
      break;
    case SegVariant::IAMSS_F: trace.seg_fused.push_back(gated_seg("seg", trunk.tsfm)); break;
    case SegVariant::IAMSS:
      trace.seg_fused.push_back(gated_seg("seg_vis", trunk.visible));
      trace.seg_fused.push_back(gated_seg("seg_th", trunk.thermal));
      break;
  }
  for (const Var v : trace.seg_fused) out.seg_fused.push_back(tape.value(v));
  return trace;
}

template <typename T>
ForwardTrace<T> forward_traced(const Network<T>& net, const MultispectralFrame& frame) {
  frame.validate();
  return forward_traced(net, detail::network_input<T>(frame.visible), detail::network_input<T>(frame.thermal));
}

template <typename T>
RawOutputs<T> forward(const Network<T>& net, const MultispectralFrame& frame) {
  return forward_traced(net, frame).outputs;
}

/// Backbone and IFCNN only.
template <typename T>
IlluminationWeights predict_illumination(const Network<T>& net, const MultispectralFrame& frame) {
  if (!net.config.has_ifcnn()) {
    throw ConfigError("variant " + net.config.variant_name() + " has no illumination branch");
  }
  frame.validate();
  Tape<T> tape;
  detail::GraphBuilder<T> g(net, tape);
  const auto trunk = detail::build_trunk(g, tape, net.config, detail::network_input<T>(frame.visible),
                                         detail::network_input<T>(frame.thermal));
  return detail::to_weights(tape.value(*trunk.weights));
}

}  // namespace iadn
