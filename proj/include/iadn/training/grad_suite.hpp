#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "iadn/dataio/synthetic.hpp"
#include "iadn/netgraph/config.hpp"
#include "iadn/numerics/grad_check.hpp"
#include "iadn/training/objective.hpp"

namespace iadn {

/// Reduced architecture for finite-difference checks of the full loss: narrow backbone,
/// default IFCNN widths, and an init scale at which loss gradients sit well above the
/// double-precision difference noise (about 1e-11 for eps = 1e-5).
inline NetworkConfig gradient_check_config(std::string_view variant) {
  NetworkConfig c;
  c.set_variant(variant);
  c.backbone_stages = {{3, 4, true}, {3, 8, true}, {3, 8, true}};
  c.conv_pro_channels = 8;
  c.init_std = 0.1;
  return c;
}

inline SyntheticParams gradient_check_frame_params() {
  SyntheticParams p;
  p.width = 32;
  p.height = 32;
  p.min_height = 22;
  p.max_height = 30;
  return p;
}

/// First synthetic frame (from `seed`) that yields at least one positive anchor.
inline MultispectralFrame gradient_check_frame(const NetworkConfig& config, std::uint64_t seed,
                                               const SyntheticParams& params = gradient_check_frame_params()) {
  for (std::size_t i = 0; i < 1000; ++i) {
    auto frame = generate_frame(params, seed, i);
    if (make_frame_targets(config, frame).assignment.count(AnchorLabel::positive) > 0) return frame;
  }
  throw DataError("no synthetic frame with a positive anchor for seed " + std::to_string(seed));
}

inline constexpr double kGradCheckEps = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kNonsmoothTolerance = 2e-4;

/// Full-loss gradient check of one variant at a seeded random initialisation.
inline LossGradCheck run_gradient_suite(std::string_view variant, std::uint64_t seed) {
  const NetworkConfig config = gradient_check_config(variant);
  const MultispectralFrame frame = gradient_check_frame(config, seed);
  GradCheckOptions options;
  options.seed = seed;
  options.nonsmooth_tolerance = kNonsmoothTolerance;
  return check_loss_gradients(config, frame, TrainConfig{}, seed, kGradCheckEps, options);
}

}  // namespace iadn
