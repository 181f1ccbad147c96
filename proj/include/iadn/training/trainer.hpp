#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/netgraph/checkpoint.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/training/losses.hpp"
#include "iadn/training/objective.hpp"

namespace iadn {

template <typename T>
struct SgdState {
  std::map<std::string, Tensor<T>> velocity;
};

/// Clips by global L2 norm, then applies decay and momentum:
/// g' = g + wd * p; v = momentum * v - lr * g'; p += v. Returns the pre-clip norm.
template <typename T>
double sgd_step(Network<T>& net, const std::map<std::string, Tensor<T>>& grads, SgdState<T>& state,
                const TrainConfig& config, double learning_rate) {
  double sq = 0.0;
  for (const auto& [name, p] : net.params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw UsageError("sgd_step: no gradient for parameter '" + name + "'");
    it->second.require_same_shape(p, "sgd_step gradient");
    for (T g : it->second.data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  if (grads.size() != net.params.size()) throw UsageError("sgd_step: gradients for unknown parameters");
  const double norm = std::sqrt(sq);
  const double scale = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
  const double lr = learning_rate, m = config.momentum, wd = config.weight_decay;
  for (auto& [name, p] : net.params) {
    const auto& g = grads.at(name);
    auto [it, fresh] = state.velocity.try_emplace(name, Tensor<T>::zeros_like(p));
    auto& v = it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = scale * static_cast<double>(g[i]) + wd * static_cast<double>(p[i]);
      v[i] = static_cast<T>(m * static_cast<double>(v[i]) - lr * gi);
      p[i] += v[i];
    }
  }
  return norm;
}

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t frame = 0;
  LossBreakdown loss;
  double cls_term = 0.0;
  double bbox_term = 0.0;
  double grad_norm = 0.0;
};

struct TrainOptions {
  /// When set, receives config.txt, loss.csv and checkpoints.
  std::optional<std::filesystem::path> run_dir;
  std::function<void(const IterationRecord&)> on_iteration;
};

namespace detail {

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace detail

inline std::string run_config_text(const NetworkConfig& net, const TrainConfig& train) {
  KeyValues kv = to_key_values(net);
  for (auto& [k, v] : to_key_values(train)) kv[k] = v;
  return format_key_values(kv);
}

/// Image-centric SGD: each iteration draws one frame and an anchor sample from a generator
/// seeded by config.seed, so identical inputs give identical parameters.
template <typename T>
std::vector<IterationRecord> train(const Dataset& dataset, Network<T>& net, const TrainConfig& config,
                                   const TrainOptions& options = {}) {
  config.validate();
  net.config.validate();
  if (dataset.frames.empty()) throw DataError("train: dataset is empty");
  std::vector<FrameTargets> targets;
  targets.reserve(dataset.frames.size());
  for (const auto& f : dataset.frames) targets.push_back(make_frame_targets(net.config, f));

  std::ofstream loss_log;
  if (options.run_dir) {
    std::filesystem::create_directories(*options.run_dir);
    std::ofstream(*options.run_dir / "config.txt") << run_config_text(net.config, config);
    loss_log.open(*options.run_dir / "loss.csv");
    if (!loss_log) throw DataError("cannot write " + (*options.run_dir / "loss.csv").string());
    loss_log << "iter,L_I,L_D,L_S,total\n";
  }
  const auto save = [&](const std::string& file, std::size_t iteration) {
    if (!options.run_dir) return;
    save_checkpoint(*options.run_dir / file, net.template cast<float>(),
                    {{"iteration", std::to_string(iteration)}, {"variant", net.config.variant_name()}});
  };

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.frames.size() - 1);
  SgdState<T> state;
  std::vector<IterationRecord> history;
  history.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const std::size_t fi = pick(rng);
    const SampleSet samples = sample_minibatch(targets[fi].assignment, config.anchors_per_image, rng);
    auto obj = evaluate_objective(net, dataset.frames[fi], targets[fi], samples, config);
    IterationRecord rec{it, fi, obj.loss, obj.cls_term, obj.bbox_term, 0.0};
    rec.grad_norm = sgd_step(net, obj.grads, state, config, config.learning_rate_at(it));
    history.push_back(rec);
    if (loss_log.is_open()) {
      using detail::format_g;
      loss_log << it << ',' << format_g(rec.loss.L_I) << ',' << format_g(rec.loss.L_D) << ','
               << format_g(rec.loss.L_S) << ',' << format_g(rec.loss.total) << '\n';
    }
    if (options.on_iteration) options.on_iteration(rec);
    if (config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0 && it + 1 < config.iterations) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06zu.iadn", it + 1);
      save(name, it + 1);
    }
  }
  save("model.iadn", config.iterations);
  return history;
}

}  // namespace iadn
