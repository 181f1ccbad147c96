#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iadn/numerics/error.hpp"
#include "iadn/training/anchors.hpp"

namespace iadn {

enum class HeadVariant { TDNN, IATDNN };
enum class SegVariant { NONE, MSS_F, MSS, IAMSS_F, IAMSS };

inline std::string_view to_string(HeadVariant v) { return v == HeadVariant::TDNN ? "TDNN" : "IATDNN"; }

inline std::string_view to_string(SegVariant v) {
  switch (v) {
    case SegVariant::NONE: return "NONE";
    case SegVariant::MSS_F: return "MSS-F";
    case SegVariant::MSS: return "MSS";
    case SegVariant::IAMSS_F: return "IAMSS-F";
    case SegVariant::IAMSS: return "IAMSS";
  }
  return "NONE";
}

inline HeadVariant parse_head_variant(std::string_view s) {
  if (s == "TDNN") return HeadVariant::TDNN;
  if (s == "IATDNN") return HeadVariant::IATDNN;
  throw ConfigError("unknown head variant '" + std::string(s) + "' (expected TDNN or IATDNN)");
}

inline SegVariant parse_seg_variant(std::string_view s) {
  for (auto v : {SegVariant::NONE, SegVariant::MSS_F, SegVariant::MSS, SegVariant::IAMSS_F, SegVariant::IAMSS}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown segmentation variant '" + std::string(s) + "'");
}

/// Number of supervised segmentation streams.
inline std::size_t seg_stream_count(SegVariant v) {
  switch (v) {
    case SegVariant::NONE: return 0;
    case SegVariant::MSS_F:
    case SegVariant::IAMSS_F: return 1;
    case SegVariant::MSS:
    case SegVariant::IAMSS: return 2;
  }
  return 0;
}

/// Backbone initialisation: scaled-normal (fan-in) or the plain Gaussian used for every other layer.
enum class BackboneInit { he, gaussian };

inline std::string_view to_string(BackboneInit v) { return v == BackboneInit::he ? "he" : "gaussian"; }

inline BackboneInit parse_backbone_init(std::string_view s) {
  if (s == "he") return BackboneInit::he;
  if (s == "gaussian") return BackboneInit::gaussian;
  throw ConfigError("unknown backbone_init '" + std::string(s) + "' (expected he or gaussian)");
}

inline bool seg_is_gated(SegVariant v) { return v == SegVariant::IAMSS_F || v == SegVariant::IAMSS; }

struct StageSpec {
  int kernel = 3;
  int channels = 16;
  bool pool = true;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct IfcnnSpec {
  int pool_h = 7;
  int pool_w = 7;
  std::vector<int> fc_widths{512, 64, 2};

  friend bool operator==(const IfcnnSpec&, const IfcnnSpec&) = default;
};

struct NetworkConfig {
  std::vector<StageSpec> backbone_stages{{3, 16, true}, {3, 32, true}, {3, 64, true}};
  HeadVariant head_variant = HeadVariant::IATDNN;
  SegVariant seg_variant = SegVariant::IAMSS;
  std::vector<AnchorTemplate> anchor_set{{24, 0.41}, {32, 0.41}, {44, 0.41}, {60, 0.41}};
  IfcnnSpec ifcnn;
  int conv_pro_channels = 64;
  int seg_kernel = 3;
  /// Build and train the illumination branch even when nothing is gated.
  bool standalone_ifcnn = false;
  double init_std = 0.01;
  BackboneInit backbone_init = BackboneInit::he;

  std::size_t stride() const {
    std::size_t s = 1;
    for (const auto& st : backbone_stages) s *= st.pool ? 2 : 1;
    return s;
  }
  std::size_t feature_channels() const { return static_cast<std::size_t>(backbone_stages.back().channels); }
  std::size_t anchors_per_cell() const { return anchor_set.size(); }

  bool has_ifcnn() const {
    return head_variant == HeadVariant::IATDNN || seg_is_gated(seg_variant) || standalone_ifcnn;
  }

  /// Table-style name, e.g. "IATDNN+IAMSS".
  std::string variant_name() const {
    std::string name(to_string(head_variant));
    if (seg_variant != SegVariant::NONE) name += "+" + std::string(to_string(seg_variant));
    return name;
  }

  void set_variant(std::string_view name) {
    const auto plus = name.find('+');
    head_variant = parse_head_variant(name.substr(0, plus));
    seg_variant = plus == std::string_view::npos ? SegVariant::NONE : parse_seg_variant(name.substr(plus + 1));
  }

  void validate() const {
    if (backbone_stages.empty()) throw ConfigError("backbone needs at least one stage");
    for (const auto& s : backbone_stages) {
      if (s.kernel < 1 || s.kernel % 2 == 0) throw ConfigError("backbone kernels must be odd and >= 1");
      if (s.channels < 1) throw ConfigError("backbone channels must be >= 1");
    }
    if (ifcnn.fc_widths.empty() || ifcnn.fc_widths.back() != 2) {
      throw ConfigError("last ifcnn fc width must be 2 (day and night classes)");
    }
    for (int w : ifcnn.fc_widths) {
      if (w < 1) throw ConfigError("ifcnn fc widths must be >= 1");
    }
    if (ifcnn.pool_h < 1 || ifcnn.pool_w < 1) throw ConfigError("ifcnn pool size must be >= 1");
    if (conv_pro_channels < 1) throw ConfigError("conv_pro_channels must be >= 1");
    if (seg_kernel < 1 || seg_kernel % 2 == 0) throw ConfigError("seg_kernel must be odd and >= 1");
    if (anchor_set.empty()) throw ConfigError("anchor set must not be empty");
    for (const auto& a : anchor_set) {
      if (!(a.height > 0) || !(a.ratio > 0)) throw ConfigError("anchor templates need positive height and ratio");
    }
    if (!(init_std > 0)) throw ConfigError("init_std must be positive");
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// ---------------------------------------------------------------------------
// key = value text form shared by config files, run snapshots and checkpoints.

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(sep, start);
    out.emplace_back(s.substr(start, end == std::string_view::npos ? s.size() - start : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  for (const auto& raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

inline KeyValues to_key_values(const NetworkConfig& c) {
  KeyValues kv;
  std::string stages;
  for (const auto& s : c.backbone_stages) {
    if (!stages.empty()) stages += ',';
    stages += std::to_string(s.kernel) + ":" + std::to_string(s.channels) + (s.pool ? ":pool" : ":nopool");
  }
  kv["backbone_stages"] = stages;
  kv["head_variant"] = std::string(to_string(c.head_variant));
  kv["seg_variant"] = std::string(to_string(c.seg_variant));
  std::string anchors;
  for (const auto& a : c.anchor_set) {
    if (!anchors.empty()) anchors += ',';
    anchors += detail::format_double(a.height) + ":" + detail::format_double(a.ratio);
  }
  kv["anchor_set"] = anchors;
  kv["ifcnn_pool"] = std::to_string(c.ifcnn.pool_h) + "x" + std::to_string(c.ifcnn.pool_w);
  std::string widths;
  for (int w : c.ifcnn.fc_widths) widths += (widths.empty() ? "" : ",") + std::to_string(w);
  kv["ifcnn_fc_widths"] = widths;
  kv["conv_pro_channels"] = std::to_string(c.conv_pro_channels);
  kv["seg_kernel"] = std::to_string(c.seg_kernel);
  kv["standalone_ifcnn"] = c.standalone_ifcnn ? "true" : "false";
  kv["init_std"] = detail::format_double(c.init_std);
  kv["backbone_init"] = std::string(to_string(c.backbone_init));
  return kv;
}

/// Applies every recognised key in `kv` on top of `c`; unknown keys are left for other consumers.
inline NetworkConfig apply_key_values(NetworkConfig c, const KeyValues& kv) {
  using namespace detail;
  for (const auto& [k, v] : kv) {
    if (k == "backbone_stages") {
      c.backbone_stages.clear();
      for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3 || (parts[2] != "pool" && parts[2] != "nopool")) {
          throw ConfigError("backbone_stages: expected kernel:channels:pool|nopool, got '" + item + "'");
        }
        c.backbone_stages.push_back({parse_int(k, parts[0]), parse_int(k, parts[1]), parts[2] == "pool"});
      }
    } else if (k == "head_variant") {
      c.head_variant = parse_head_variant(v);
    } else if (k == "seg_variant") {
      c.seg_variant = parse_seg_variant(v);
    } else if (k == "variant") {
      c.set_variant(v);
    } else if (k == "anchor_set") {
      c.anchor_set.clear();
      for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("anchor_set: expected height:ratio, got '" + item + "'");
        c.anchor_set.push_back({parse_double(k, parts[0]), parse_double(k, parts[1])});
      }
    } else if (k == "ifcnn_pool") {
      const auto parts = split(v, 'x');
      if (parts.size() != 2) throw ConfigError("ifcnn_pool: expected HxW, got '" + v + "'");
      c.ifcnn.pool_h = parse_int(k, parts[0]);
      c.ifcnn.pool_w = parse_int(k, parts[1]);
    } else if (k == "ifcnn_fc_widths") {
      c.ifcnn.fc_widths.clear();
      for (const auto& item : split(v, ',')) c.ifcnn.fc_widths.push_back(parse_int(k, item));
    } else if (k == "conv_pro_channels") {
      c.conv_pro_channels = parse_int(k, v);
    } else if (k == "seg_kernel") {
      c.seg_kernel = parse_int(k, v);
    } else if (k == "standalone_ifcnn") {
      c.standalone_ifcnn = parse_bool(k, v);
    } else if (k == "init_std") {
      c.init_std = parse_double(k, v);
    } else if (k == "backbone_init") {
      c.backbone_init = parse_backbone_init(v);
    }
  }
  return c;
}

}  // namespace iadn
