#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iadn/dataio/seg_targets.hpp"
#include "iadn/netgraph/config.hpp"
#include "iadn/netgraph/forward.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/numerics/tensor.hpp"
#include "iadn/training/anchors.hpp"
#include "iadn/training/assignment.hpp"

namespace iadn {

enum class LossNormalization { mean, paper_sums };

inline std::string_view to_string(LossNormalization n) { return n == LossNormalization::mean ? "mean" : "paper-sums"; }

inline LossNormalization parse_normalization(std::string_view s) {
  if (s == "mean") return LossNormalization::mean;
  if (s == "paper-sums") return LossNormalization::paper_sums;
  throw ConfigError("unknown normalization '" + std::string(s) + "' (expected mean or paper-sums)");
}

struct TrainConfig {
  double lambda_bb = 5.0;
  double lambda_ia = 1.0;
  double lambda_sm = 1.0;
  std::size_t anchors_per_image = 120;
  double learning_rate = 0.001;
  std::size_t lr_step = 0;  // multiply the rate by lr_gamma every lr_step iterations; 0 keeps it constant
  double lr_gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double clip_norm = 10.0;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  LossNormalization normalization = LossNormalization::mean;
  std::size_t checkpoint_every = 0;  // 0 writes only the final checkpoint

  double learning_rate_at(std::size_t iteration) const {
    if (lr_step == 0) return learning_rate;
    return learning_rate * std::pow(lr_gamma, static_cast<double>(iteration / lr_step));
  }

  void validate() const {
    for (double v : {lambda_bb, lambda_ia, lambda_sm, weight_decay, momentum}) {
      if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("loss weights, momentum and weight_decay must be >= 0");
    }
    if (anchors_per_image < 1) throw ConfigError("anchors_per_image must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(lr_gamma > 0)) throw ConfigError("lr_gamma must be positive");
    if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
    if (momentum >= 1) throw ConfigError("momentum must be < 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline KeyValues to_key_values(const TrainConfig& c) {
  using detail::format_double;
  return {{"lambda_bb", format_double(c.lambda_bb)},
          {"lambda_ia", format_double(c.lambda_ia)},
          {"lambda_sm", format_double(c.lambda_sm)},
          {"anchors_per_image", std::to_string(c.anchors_per_image)},
          {"learning_rate", format_double(c.learning_rate)},
          {"lr_step", std::to_string(c.lr_step)},
          {"lr_gamma", format_double(c.lr_gamma)},
          {"momentum", format_double(c.momentum)},
          {"weight_decay", format_double(c.weight_decay)},
          {"clip_norm", format_double(c.clip_norm)},
          {"iterations", std::to_string(c.iterations)},
          {"seed", std::to_string(c.seed)},
          {"normalization", std::string(to_string(c.normalization))},
          {"checkpoint_every", std::to_string(c.checkpoint_every)}};
}

inline TrainConfig apply_key_values(TrainConfig c, const KeyValues& kv) {
  using detail::parse_double;
  const auto count = [](const std::string& k, const std::string& v) {
    const int n = detail::parse_int(k, v);
    if (n < 0) throw ConfigError(k + " must be >= 0");
    return static_cast<std::size_t>(n);
  };
  for (const auto& [k, v] : kv) {
    if (k == "lambda_bb") c.lambda_bb = parse_double(k, v);
    else if (k == "lambda_ia") c.lambda_ia = parse_double(k, v);
    else if (k == "lambda_sm") c.lambda_sm = parse_double(k, v);
    else if (k == "anchors_per_image") c.anchors_per_image = count(k, v);
    else if (k == "learning_rate") c.learning_rate = parse_double(k, v);
    else if (k == "lr_step") c.lr_step = count(k, v);
    else if (k == "lr_gamma") c.lr_gamma = parse_double(k, v);
    else if (k == "momentum") c.momentum = parse_double(k, v);
    else if (k == "weight_decay") c.weight_decay = parse_double(k, v);
    else if (k == "clip_norm") c.clip_norm = parse_double(k, v);
    else if (k == "iterations") c.iterations = count(k, v);
    else if (k == "seed") c.seed = detail::parse_u64(k, v);
    else if (k == "normalization") c.normalization = parse_normalization(v);
    else if (k == "checkpoint_every") c.checkpoint_every = count(k, v);
  }
  return c;
}

struct LossBreakdown {
  double L_I = 0.0;
  double L_D = 0.0;
  double L_S = 0.0;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// Scalar pieces.

inline constexpr double kProbClamp = 1e-7;

inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double smooth_l1_grad(double x) {
  if (x <= -1.0) return -1.0;
  if (x >= 1.0) return 1.0;
  return x;
}

/// -t ln p - (1 - t) ln(1 - p) with p clamped to [1e-7, 1 - 1e-7].
inline double binary_cross_entropy(double p, double target) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -target * std::log(q) - (1.0 - target) * std::log(1.0 - q);
}

/// Derivative with respect to p; zero where the clamp is active.
inline double binary_cross_entropy_grad(double p, double target) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return -target / p + (1.0 - target) / (1.0 - p);
}

// ---------------------------------------------------------------------------
// Loss terms. Each returns its value and the gradient with respect to the
// network output it consumes.

/// -t ln w_day - (1 - t) ln w_night for the day label t.
inline double loss_illumination(const IlluminationWeights& w, double label_day) {
  const auto clamp = [](double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); };
  return -label_day * std::log(clamp(w.w_day)) - (1.0 - label_day) * std::log(clamp(w.w_night));
}

/// Gradient of loss_illumination with respect to (w_day, w_night).
inline std::pair<double, double> loss_illumination_grad(const IlluminationWeights& w, double label_day) {
  const auto g = [](double p, double t) {
    return (p < kProbClamp || p > 1.0 - kProbClamp) ? 0.0 : -t / p;
  };
  return {g(w.w_day, label_day), g(w.w_night, 1.0 - label_day)};
}

template <typename T>
struct DetectionLoss {
  double cls = 0.0;
  double bbox = 0.0;
  double value = 0.0;  // cls + lambda_bb * bbox
  Tensor<T> grad_cls, grad_bbox;
};

template <typename T>
DetectionLoss<T> loss_detection(const Tensor<T>& cls_fused, const Tensor<T>& bbox_fused, const AnchorGrid& grid,
                                const SampleSet& samples, double lambda_bb,
                                LossNormalization norm = LossNormalization::mean) {
  if (samples.empty()) throw DataError("loss_detection: empty anchor sample");
  if (cls_fused.size() != grid.size() || bbox_fused.size() != 4 * grid.size()) {
    throw DimensionError("loss_detection: outputs " + shape_string(cls_fused.shape()) + " / " +
                         shape_string(bbox_fused.shape()) + " do not match " + std::to_string(grid.size()) +
                         " anchors");
  }
  DetectionLoss<T> out{0, 0, 0, Tensor<T>::zeros_like(cls_fused), Tensor<T>::zeros_like(bbox_fused)};
  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.positive;
  const double cls_norm = norm == LossNormalization::mean ? 1.0 / static_cast<double>(samples.size()) : 1.0;
  const double box_norm =
      positives == 0 ? 0.0 : (norm == LossNormalization::mean ? 1.0 / static_cast<double>(positives) : 1.0);
  for (const auto& s : samples) {
    const std::size_t ci = grid.score_offset(s.anchor);
    const double t = s.positive ? 1.0 : 0.0;
    const double p = static_cast<double>(cls_fused[ci]);
    out.cls += cls_norm * binary_cross_entropy(p, t);
    out.grad_cls[ci] += static_cast<T>(cls_norm * binary_cross_entropy_grad(p, t));
    if (!s.positive) continue;
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t bi = grid.delta_offset(s.anchor, j);
      const double r = static_cast<double>(bbox_fused[bi]) - s.target[j];
      out.bbox += box_norm * smooth_l1(r);
      out.grad_bbox[bi] += static_cast<T>(lambda_bb * box_norm * smooth_l1_grad(r));
    }
  }
  out.value = out.cls + lambda_bb * out.bbox;
  return out;
}

template <typename T>
struct SegmentationLoss {
  double value = 0.0;
  std::vector<Tensor<T>> grads;  // one per stream
};

/// Sum over streams of the cross-entropy over non-excluded cells.
template <typename T>
SegmentationLoss<T> loss_segmentation(const std::vector<Tensor<T>>& streams, const SegTargets& targets,
                                      LossNormalization norm = LossNormalization::mean) {
  SegmentationLoss<T> out;
  const std::size_t valid = targets.cells.size() - targets.count(SegLabel::excluded);
  const double scale = valid == 0 ? 0.0 : (norm == LossNormalization::mean ? 1.0 / static_cast<double>(valid) : 1.0);
  for (const auto& s : streams) {
    if (s.size() != targets.cells.size() || s.dim(s.rank() - 1) != targets.grid_w) {
      throw DimensionError("loss_segmentation: mask " + shape_string(s.shape()) + " does not match target grid " +
                           std::to_string(targets.grid_h) + "x" + std::to_string(targets.grid_w));
    }
    Tensor<T> g = Tensor<T>::zeros_like(s);
    for (std::size_t i = 0; i < targets.cells.size(); ++i) {
      if (targets.cells[i] == SegLabel::excluded) continue;
      const double t = targets.cells[i] == SegLabel::pedestrian ? 1.0 : 0.0;
      const double p = static_cast<double>(s[i]);
      out.value += scale * binary_cross_entropy(p, t);
      g[i] = static_cast<T>(scale * binary_cross_entropy_grad(p, t));
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

/// Which terms a variant trains: detection always, illumination whenever an IFCNN exists,
/// segmentation whenever a segmentation head exists.
struct ActiveTerms {
  bool illumination = false;
  bool segmentation = false;
};

inline ActiveTerms active_terms(const NetworkConfig& config) {
  return {config.has_ifcnn(), config.seg_variant != SegVariant::NONE};
}

inline LossBreakdown loss_total(double L_D, double L_I, double L_S, const TrainConfig& config,
                                ActiveTerms active = {true, true}) {
  if (!std::isfinite(L_D) || !std::isfinite(L_I) || !std::isfinite(L_S)) {
    throw NumericError("loss_total: non-finite loss term");
  }
  LossBreakdown b{active.illumination ? L_I : 0.0, L_D, active.segmentation ? L_S : 0.0, 0.0};
  b.total = b.L_D + config.lambda_ia * b.L_I + config.lambda_sm * b.L_S;
  return b;
}

}  // namespace iadn
