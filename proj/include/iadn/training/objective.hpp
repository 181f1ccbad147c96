#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/dataio/seg_targets.hpp"
#include "iadn/netgraph/decode.hpp"
#include "iadn/netgraph/forward.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/grad_check.hpp"
#include "iadn/numerics/tape.hpp"
#include "iadn/training/assignment.hpp"
#include "iadn/training/losses.hpp"

namespace iadn {

/// Per-frame supervision that does not depend on the network weights.
struct FrameTargets {
  AnchorGrid grid;
  AnchorAssignment assignment;
  SegTargets seg;
};

inline FrameTargets make_frame_targets(const NetworkConfig& config, const MultispectralFrame& frame) {
  FrameTargets t;
  t.grid = anchors_for(config, frame.height(), frame.width());
  t.assignment = assign_anchor_labels(t.grid, frame.annotations);
  t.seg = rasterize_seg_targets(frame, t.grid.grid_h, t.grid.grid_w, t.grid.stride);
  return t;
}

template <typename T>
struct Objective {
  LossBreakdown loss;
  double cls_term = 0.0;
  double bbox_term = 0.0;
  std::map<std::string, Tensor<T>> grads;  // keyed by parameter name; empty unless requested
  RawOutputs<T> outputs;
};

/// Total multi-task loss of one frame and, optionally, its gradient for every parameter.
template <typename T>
Objective<T> evaluate_objective(const Network<T>& net, const MultispectralFrame& frame, const FrameTargets& targets,
                                const SampleSet& samples, const TrainConfig& config, bool with_grads = true) {
  ForwardTrace<T> trace = forward_traced(net, frame);
  const auto& out = trace.outputs;
  const ActiveTerms active = active_terms(net.config);

  const auto det = loss_detection(out.cls_fused, out.bbox_fused, targets.grid, samples, config.lambda_bb,
                                  config.normalization);
  double L_I = 0.0, L_S = 0.0;
  std::vector<Seed<T>> seeds{{trace.cls_fused, det.grad_cls}, {trace.bbox_fused, det.grad_bbox}};
  if (active.illumination) {
    const double label = frame.is_day() ? 1.0 : 0.0;
    L_I = loss_illumination(*out.weights, label);
    const auto [gd, gn] = loss_illumination_grad(*out.weights, label);
    seeds.push_back({*trace.weights, Tensor<T>({2}, std::vector<T>{static_cast<T>(config.lambda_ia * gd),
                                                                    static_cast<T>(config.lambda_ia * gn)})});
  }
  if (active.segmentation) {
    auto seg = loss_segmentation(out.seg_fused, targets.seg, config.normalization);
    L_S = seg.value;
    for (std::size_t s = 0; s < seg.grads.size(); ++s) {
      seg.grads[s] *= static_cast<T>(config.lambda_sm);
      seeds.push_back({trace.seg_fused[s], std::move(seg.grads[s])});
    }
  }

  Objective<T> result;
  result.loss = loss_total(det.value, L_I, L_S, config, active);
  result.cls_term = det.cls;
  result.bbox_term = det.bbox;
  if (with_grads) {
    result.grads = backprop(trace.tape, std::span<const Seed<T>>(seeds)).take_named();
    result.grads.erase("visible");
    result.grads.erase("thermal");
  }
  result.outputs = std::move(trace.outputs);
  return result;
}

/// Total loss as a function of the parameter tensors named in `names` (in that order), for
/// finite-difference checking. The frame, anchor sample and targets are held fixed.
inline ScalarFunction<double> total_loss_function(const Network<double>& base, const MultispectralFrame& frame,
                                                  const FrameTargets& targets, const SampleSet& samples,
                                                  const TrainConfig& config, const std::vector<std::string>& names) {
  auto net = std::make_shared<Network<double>>(base);
  return [=](const std::vector<Tensor<double>>& point, std::vector<Tensor<double>>* grads) {
    for (std::size_t i = 0; i < names.size(); ++i) net->params.at(names[i]) = point[i];
    const auto obj = evaluate_objective(*net, frame, targets, samples, config, grads != nullptr);
    if (grads) {
      grads->clear();
      for (const auto& name : names) grads->push_back(obj.grads.at(name));
    }
    return Tensor<double>({1}, std::vector<double>{obj.loss.total});
  };
}

struct LossGradCheck {
  GradCheckResult result;
  std::string worst_parameter;
  std::size_t parameters = 0;
  std::size_t positives = 0;
};

/// Finite-difference check of the total loss at a seeded random initialisation.
inline LossGradCheck check_loss_gradients(const NetworkConfig& config, const MultispectralFrame& frame,
                                          const TrainConfig& train_config, std::uint64_t seed, double eps = 1e-5,
                                          const GradCheckOptions& options = {}) {
  const Network<double> net = build_network<double>(config, seed);
  const FrameTargets targets = make_frame_targets(config, frame);
  std::mt19937_64 rng(seed);
  const SampleSet samples = sample_minibatch(targets.assignment, train_config.anchors_per_image, rng);
  std::vector<std::string> names;
  std::vector<Tensor<double>> point;
  for (const auto& [name, t] : net.params) {
    names.push_back(name);
    point.push_back(t);
  }
  LossGradCheck out;
  out.result = grad_check(total_loss_function(net, frame, targets, samples, train_config, names), point, eps, options);
  out.worst_parameter = names[out.result.worst_tensor];
  out.parameters = names.size();
  for (const auto& s : samples) out.positives += s.positive;
  return out;
}

}  // namespace iadn
