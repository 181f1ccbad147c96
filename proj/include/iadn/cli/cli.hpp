#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iadn/cli/plot.hpp"
#include "iadn/dataio/dataset_io.hpp"
#include "iadn/dataio/synthetic.hpp"
#include "iadn/evaluation/report.hpp"
#include "iadn/netgraph/checkpoint.hpp"
#include "iadn/netgraph/config.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/training/grad_suite.hpp"
#include "iadn/training/trainer.hpp"

namespace iadn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Network and training settings after applying a config file and then flag overrides.
struct RunSettings {
  NetworkConfig network;
  TrainConfig train;
};

/// Keys accepted in config files and --set overrides.
inline std::set<std::string> known_config_keys() {
  std::set<std::string> keys{"variant"};
  for (const auto& [k, v] : to_key_values(NetworkConfig{})) keys.insert(k);
  for (const auto& [k, v] : to_key_values(TrainConfig{})) keys.insert(k);
  return keys;
}

inline RunSettings resolve_settings(const KeyValues& kv) {
  const auto known = known_config_keys();
  for (const auto& [k, v] : kv) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunSettings s;
  // Head/segmentation keys override a combined variant string given in the same layer.
  KeyValues variant_first;
  if (const auto it = kv.find("variant"); it != kv.end()) s.network.set_variant(it->second);
  for (const auto& [k, v] : kv) {
    if (k != "variant") variant_first[k] = v;
  }
  s.network = apply_key_values(s.network, variant_first);
  s.train = apply_key_values(s.train, variant_first);
  s.network.validate();
  s.train.validate();
  return s;
}

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline KeyValues parse_overrides(const std::vector<std::string>& items) {
  KeyValues kv;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
    kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return kv;
}

inline void require_dataset_dir(const std::string& dir) {
  if (!std::filesystem::is_regular_file(std::filesystem::path(dir) / "index.txt")) {
    throw DataError("'" + dir + "' is not a dataset directory (no index.txt)");
  }
}

inline void print_report(std::ostream& out, const EvalReport& report) {
  for (const auto& s : report.subsets) {
    out << s.name << ": log-average miss rate " << fmt("%.2f%%", 100.0 * s.curve.log_avg_mr) << " over "
        << s.curve.frames << " frames, " << s.curve.ground_truths << " pedestrians\n";
  }
}

}  // namespace detail

/// Parses and runs one command. Exit codes: 0 success, 1 usage or configuration error,
/// 2 runtime or data error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Illumination-aware multispectral pedestrian detection", "iadn"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  std::uint64_t seed = 0;
  const auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "Random seed")->capture_default_str(); };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multispectral dataset");
  std::string gen_out;
  SyntheticParams synth;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--frames", synth.n_frames, "Number of frames")->capture_default_str();
  gen->add_option("--width", synth.width, "Image width")->capture_default_str();
  gen->add_option("--height", synth.height, "Image height")->capture_default_str();
  gen->add_option("--day-fraction", synth.day_fraction, "Probability a frame is daytime")->capture_default_str();
  gen->add_option("--ignore-rate", synth.ignore_rate, "Probability a pedestrian is flagged ignore")
      ->capture_default_str();
  add_seed(gen);

  // train
  auto* tr = app.add_subcommand("train", "Train a network on a dataset");
  std::string train_data, train_out, config_file, variant;
  std::vector<std::string> overrides;
  std::size_t iterations = 0, checkpoint_every = 0;
  double learning_rate = 0;
  tr->add_option("--data", train_data, "Training dataset directory")->required();
  tr->add_option("--out", train_out, "Run directory")->required();
  tr->add_option("--config", config_file, "key = value config file");
  tr->add_option("--variant", variant, "Architecture, e.g. TDNN, IATDNN+IAMSS");
  tr->add_option("--iterations", iterations, "Training iterations");
  tr->add_option("--lr", learning_rate, "Learning rate");
  tr->add_option("--checkpoint-every", checkpoint_every, "Checkpoint interval (0: final only)");
  tr->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  add_seed(tr);

  // detect
  auto* det = app.add_subcommand("detect", "Write detections of a trained model");
  std::string det_model, det_data, det_out;
  DetectConfig detect_config;
  det->add_option("--model", det_model, "Checkpoint file")->required();
  det->add_option("--data", det_data, "Dataset directory")->required();
  det->add_option("--out", det_out, "Detections CSV")->required();
  det->add_option("--score-threshold", detect_config.score_threshold, "Minimum score")->capture_default_str();
  det->add_option("--nms-iou", detect_config.nms_iou, "NMS IoU threshold")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Log-average miss rate of a model or a detections file");
  std::string ev_model, ev_dets, ev_data, ev_out;
  auto* ev_model_opt = ev->add_option("--model", ev_model, "Checkpoint file");
  auto* ev_dets_opt = ev->add_option("--detections", ev_dets, "Detections CSV");
  ev_model_opt->excludes(ev_dets_opt);
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_option("--score-threshold", detect_config.score_threshold, "Minimum score")->capture_default_str();
  ev->add_option("--nms-iou", detect_config.nms_iou, "NMS IoU threshold")->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the total loss gradient");
  std::string gc_variant = "IATDNN+IAMSS";
  gc->add_option("--variant", gc_variant, "Architecture")->capture_default_str();
  add_seed(gc);

  // plot
  auto* pl = app.add_subcommand("plot", "Re-emit curve CSVs and the plot from a report");
  std::string pl_report, pl_out;
  pl->add_option("--report", pl_report, "report.csv from eval")->required();
  pl->add_option("--out", pl_out, "Output directory")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) {
      synth.validate();
      const auto ds = generate_synthetic_dataset(synth, seed);
      save_dataset(ds, gen_out);
      out << "wrote " << ds.size() << " frames (" << ds.count(Illumination::day) << " day, "
          << ds.count(Illumination::night) << " night) to " << gen_out << "\n";
    } else if (*tr) {
      KeyValues kv;
      if (!config_file.empty()) kv = parse_key_values(detail::read_text(config_file));
      for (const auto& [k, v] : detail::parse_overrides(overrides)) kv[k] = v;
      if (!variant.empty()) kv["variant"] = variant;
      if (tr->count("--iterations")) kv["iterations"] = std::to_string(iterations);
      if (tr->count("--lr")) kv["learning_rate"] = detail::format_double(learning_rate);
      if (tr->count("--checkpoint-every")) kv["checkpoint_every"] = std::to_string(checkpoint_every);
      if (tr->count("--seed") || !kv.count("seed")) kv["seed"] = std::to_string(seed);
      const RunSettings s = resolve_settings(kv);
      detail::require_dataset_dir(train_data);
      const Dataset ds = load_dataset(train_data);
      auto net = build_network<float>(s.network, s.train.seed);
      TrainOptions options;
      options.run_dir = train_out;
      const auto history = train(ds, net, s.train, options);
      out << "trained " << s.network.variant_name() << " for " << history.size() << " iterations";
      if (!history.empty()) out << ", final loss " << detail::fmt("%.6g", history.back().loss.total);
      out << "; checkpoint " << (std::filesystem::path(train_out) / "model.iadn").string() << "\n";
    } else if (*det) {
      if (!(detect_config.nms_iou >= 0 && detect_config.nms_iou <= 1)) throw UsageError("--nms-iou must lie in [0, 1]");
      detail::require_dataset_dir(det_data);
      const auto ckpt = load_checkpoint(det_model);
      const auto dets = detect_dataset(ckpt.net, load_dataset(det_data), detect_config);
      save_detections(det_out, dets);
      std::size_t n = 0;
      for (const auto& [id, d] : dets) n += d.size();
      out << "wrote " << n << " detections for " << dets.size() << " frames to " << det_out << "\n";
    } else if (*ev) {
      if (ev_model.empty() == ev_dets.empty()) throw UsageError("eval needs exactly one of --model or --detections");
      if (!(detect_config.nms_iou >= 0 && detect_config.nms_iou <= 1)) throw UsageError("--nms-iou must lie in [0, 1]");
      detail::require_dataset_dir(ev_data);
      const Dataset ds = load_dataset(ev_data);
      if (ds.frames.empty()) throw DataError("dataset " + ev_data + " has no frames");
      const DetectionSet dets =
          ev_model.empty() ? load_detections(ev_dets) : detect_dataset(load_checkpoint(ev_model).net, ds, detect_config);
      const auto report = evaluate_detections(ds, dets, EvalSetting::reasonable(ds.frames.front().height()));
      emit_report(report, ev_out);
      detail::print_report(out, report);
    } else if (*gc) {
      const auto r = run_gradient_suite(gc_variant, seed);
      const bool ok = r.result.max_relative_error < kGradCheckTolerance;
      out << gc_variant << " seed " << seed << ": max relative error "
          << detail::fmt("%.3e", r.result.max_relative_error) << " (" << r.result.coordinates_checked
          << " coordinates over " << r.parameters << " tensors, " << r.result.coordinates_skipped
          << " at non-smooth points skipped; worst " << r.worst_parameter << ") " << (ok ? "PASS" : "FAIL") << "\n";
      return ok ? kExitOk : kExitRuntime;
    } else if (*pl) {
      const auto written = emit_report(load_report(pl_report), pl_out);
      for (const auto& p : written) out << "wrote " << p.string() << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace iadn
