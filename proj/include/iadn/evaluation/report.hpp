#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/evaluation/curve.hpp"
#include "iadn/evaluation/matching.hpp"
#include "iadn/netgraph/decode.hpp"
#include "iadn/netgraph/forward.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

struct DetectConfig {
  double score_threshold = 0.01;
  double nms_iou = 0.5;
};

struct SubsetResult {
  std::string name;  // all, day, night
  EvalCurve curve;

  friend bool operator==(const SubsetResult&, const SubsetResult&) = default;
};

struct EvalReport {
  std::vector<SubsetResult> subsets;

  const SubsetResult& subset(const std::string& name) const {
    for (const auto& s : subsets) {
      if (s.name == name) return s;
    }
    throw UsageError("report has no subset '" + name + "'");
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Detections per frame id.
using DetectionSet = std::map<std::string, std::vector<Detection>>;

/// Curves for all frames and the day and night subsets. Frames missing from `detections`
/// count as frames with no detections.
inline EvalReport evaluate_detections(const Dataset& dataset, const DetectionSet& detections,
                                      const EvalSetting& setting) {
  if (dataset.frames.empty()) throw EvaluationError("evaluation dataset is empty");
  std::vector<FrameMatch> all, day, night;
  for (const auto& f : dataset.frames) {
    const auto it = detections.find(f.id);
    FrameMatch m = match_frame(it == detections.end() ? std::vector<Detection>{} : it->second, f.annotations, setting);
    (f.is_day() ? day : night).push_back(m);
    all.push_back(std::move(m));
  }
  EvalReport r;
  r.subsets.push_back({"all", mr_curve(all)});
  r.subsets.push_back({"day", mr_curve(day)});
  r.subsets.push_back({"night", mr_curve(night)});
  return r;
}

template <typename T>
DetectionSet detect_dataset(const Network<T>& net, const Dataset& dataset, const DetectConfig& config) {
  DetectionSet out;
  for (const auto& f : dataset.frames) {
    const auto raw = forward(net, f);
    out[f.id] = decode_detections(raw, anchors_for(net.config, f.height(), f.width()), config.score_threshold,
                                  config.nms_iou);
  }
  return out;
}

/// Reasonable setting scaled to the dataset's image height.
template <typename T>
EvalReport evaluate_model(const Network<T>& net, const Dataset& dataset, const DetectConfig& config = {}) {
  if (dataset.frames.empty()) throw EvaluationError("evaluation dataset is empty");
  return evaluate_detections(dataset, detect_dataset(net, dataset, config),
                             EvalSetting::reasonable(dataset.frames.front().height()));
}

// ---------------------------------------------------------------------------
// Text formats.

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace detail

/// One row per (subset, reference FPPI), a blank line, then the log-average miss rate per subset.
inline std::string format_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "subset,fppi,miss_rate,threshold,tp,fp,fn,frames\n";
  for (const auto& s : report.subsets) {
    for (std::size_t k = 0; k < kFppiPoints; ++k) {
      const auto& p = s.curve.at_points[k];
      os << s.name << ',' << detail::fmt("%.6g", s.curve.fppi_points[k]) << ','
         << detail::fmt("%.17g", s.curve.miss_rates[k]) << ',' << detail::fmt("%.17g", p.threshold) << ',' << p.tp
         << ',' << p.fp << ',' << p.fn << ',' << s.curve.frames << '\n';
    }
  }
  os << "\nsubset,log_avg_mr\n";
  for (const auto& s : report.subsets) os << s.name << ',' << detail::fmt("%.17g", s.curve.log_avg_mr) << '\n';
  return os.str();
}

inline std::string format_curve_csv(const EvalCurve& curve) {
  std::ostringstream os;
  os << "fppi,miss_rate\n";
  for (std::size_t k = 0; k < kFppiPoints; ++k) {
    os << detail::fmt("%.6g", curve.fppi_points[k]) << ',' << detail::fmt("%.10g", curve.miss_rates[k]) << '\n';
  }
  return os.str();
}

/// CSV with header "frame,x,y,w,h,score"; frames keep map order, detections their list order.
inline std::string format_detections(const DetectionSet& detections) {
  std::ostringstream os;
  os << "frame,x,y,w,h,score\n";
  for (const auto& [id, dets] : detections) {
    for (const auto& d : dets) {
      os << id;
      for (double v : {d.box.x, d.box.y, d.box.w, d.box.h, d.score}) os << ',' << detail::fmt("%.17g", v);
      os << '\n';
    }
  }
  return os.str();
}

inline DetectionSet parse_detections(std::istream& in, const std::string& context) {
  DetectionSet out;
  std::string line;
  if (!std::getline(in, line) || line != "frame,x,y,w,h,score") {
    throw DataError(context + ": expected header 'frame,x,y,w,h,score'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = iadn::detail::split(line, ',');
    const std::string where = context + ":" + std::to_string(line_no);
    if (fields.size() != 6) throw DataError(where + ": expected 6 fields");
    double v[5];
    for (std::size_t i = 0; i < 5; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(fields[i + 1], &used);
        if (used != fields[i + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError(where + ": bad number '" + fields[i + 1] + "'");
      }
    }
    if (!(v[2] > 0) || !(v[3] > 0)) throw DataError(where + ": non-positive box size");
    out[fields[0]].push_back({{v[0], v[1], v[2], v[3]}, v[4]});
  }
  return out;
}

inline void save_detections(const std::filesystem::path& path, const DetectionSet& detections) {
  detail::write_text(path, format_detections(detections));
}

inline DetectionSet load_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return parse_detections(in, path.string());
}

}  // namespace iadn
