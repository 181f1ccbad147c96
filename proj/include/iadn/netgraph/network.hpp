#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "iadn/netgraph/config.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

/// One learnable tensor of the architecture, in construction order.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool bias = false;
  bool backbone = false;
  std::size_t fan_in = 1;
};

namespace detail {

inline void add_conv(std::vector<ParamSpec>& out, const std::string& name, std::size_t out_c, std::size_t in_c,
                     std::size_t k, bool backbone = false) {
  out.push_back({name + ".w", {out_c, in_c, k, k}, false, backbone, in_c * k * k});
  out.push_back({name + ".b", {out_c}, true, backbone, in_c * k * k});
}

inline void add_fc(std::vector<ParamSpec>& out, const std::string& name, std::size_t in, std::size_t width) {
  out.push_back({name + ".w", {in, width}, false, false, in});
  out.push_back({name + ".b", {width}, true, false, in});
}

}  // namespace detail

/// Names of the detection head convolutions: {cls, bbox} or the four day/night copies.
inline std::vector<std::string> head_names(HeadVariant v) {
  if (v == HeadVariant::TDNN) return {"cls", "bbox"};
  return {"cls_day", "cls_night", "bbox_day", "bbox_night"};
}

/// Names of the segmentation convolutions for a variant.
inline std::vector<std::string> seg_names(SegVariant v) {
  switch (v) {
    case SegVariant::NONE: return {};
    case SegVariant::MSS_F: return {"seg"};
    case SegVariant::MSS: return {"seg_vis", "seg_th"};
    case SegVariant::IAMSS_F: return {"seg_day", "seg_night"};
    case SegVariant::IAMSS: return {"seg_vis_day", "seg_vis_night", "seg_th_day", "seg_th_night"};
  }
  return {};
}

inline std::vector<ParamSpec> parameter_layout(const NetworkConfig& config) {
  config.validate();
  std::vector<ParamSpec> out;
  for (const char* stream : {"vis", "th"}) {
    std::size_t in_c = std::string(stream) == "vis" ? 3 : 1;
    for (std::size_t i = 0; i < config.backbone_stages.size(); ++i) {
      const auto& st = config.backbone_stages[i];
      detail::add_conv(out, std::string(stream) + ".conv" + std::to_string(i + 1), static_cast<std::size_t>(st.channels),
                       in_c, static_cast<std::size_t>(st.kernel), true);
      in_c = static_cast<std::size_t>(st.channels);
    }
  }
  const std::size_t feat = config.feature_channels();
  const std::size_t tsfm = 2 * feat;
  if (config.has_ifcnn()) {
    std::size_t in = tsfm * static_cast<std::size_t>(config.ifcnn.pool_h * config.ifcnn.pool_w);
    for (std::size_t i = 0; i < config.ifcnn.fc_widths.size(); ++i) {
      const auto width = static_cast<std::size_t>(config.ifcnn.fc_widths[i]);
      detail::add_fc(out, "ifcnn.fc" + std::to_string(i + 1), in, width);
      in = width;
    }
  }
  const auto pro = static_cast<std::size_t>(config.conv_pro_channels);
  detail::add_conv(out, "pro", pro, tsfm, 3);
  const std::size_t a = config.anchors_per_cell();
  for (const auto& name : head_names(config.head_variant)) {
    detail::add_conv(out, name, name.rfind("cls", 0) == 0 ? a : 4 * a, pro, 1);
  }
  const auto sk = static_cast<std::size_t>(config.seg_kernel);
  const bool feature_stage = config.seg_variant == SegVariant::MSS_F || config.seg_variant == SegVariant::IAMSS_F;
  for (const auto& name : seg_names(config.seg_variant)) detail::add_conv(out, name, 1, feature_stage ? tsfm : feat, sk);
  return out;
}

template <typename T>
struct Network {
  NetworkConfig config;
  std::map<std::string, Tensor<T>> params;

  const Tensor<T>& param(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end()) throw UsageError("network has no parameter '" + name + "'");
    return it->second;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out{config, {}};
    for (const auto& [name, t] : params) out.params.emplace(name, t.template cast<U>());
    return out;
  }
};

/// Biases start at zero. Weights are drawn in layout order from N(0, init_std), except backbone
/// convolutions under BackboneInit::he, which use N(0, sqrt(2 / fan_in)).
template <typename T = float>
Network<T> build_network(const NetworkConfig& config, std::uint64_t seed) {
  Network<T> net{config, {}};
  std::mt19937_64 rng(seed);
  for (const auto& spec : parameter_layout(config)) {
    Tensor<T> t(spec.shape);
    if (!spec.bias) {
      const double sd = spec.backbone && config.backbone_init == BackboneInit::he
                            ? std::sqrt(2.0 / static_cast<double>(spec.fan_in))
                            : config.init_std;
      std::normal_distribution<double> normal(0.0, sd);
      for (auto& v : t.data()) v = static_cast<T>(normal(rng));
    }
    net.params.emplace(spec.name, std::move(t));
  }
  return net;
}

}  // namespace iadn
