#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "iadn/dataio/frame.hpp"
#include "iadn/dataio/pnm.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

inline constexpr const char* kDatasetHeader = "iadn-dataset";
inline constexpr const char* kDatasetVersion = "v1";

/// Layout: `index.txt` (header line "iadn-dataset v1", then one JSON record
/// per frame) plus `visible/<id>.ppm` and `thermal/<id>.pgm`.
inline void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "visible");
  fs::create_directories(dir / "thermal");
  std::ofstream index(dir / "index.txt", std::ios::binary);
  if (!index) throw DataError("cannot write " + (dir / "index.txt").string());
  index << kDatasetHeader << ' ' << kDatasetVersion << '\n';
  for (const auto& frame : dataset.frames) {
    frame.validate();
    const std::string vis = "visible/" + frame.id + ".ppm", th = "thermal/" + frame.id + ".pgm";
    write_pnm(dir / vis, frame.visible);
    write_pnm(dir / th, frame.thermal);
    nlohmann::ordered_json rec;
    rec["id"] = frame.id;
    rec["illumination"] = std::string(to_string(frame.illumination));
    rec["visible"] = vis;
    rec["thermal"] = th;
    rec["annotations"] = nlohmann::ordered_json::array();
    for (const auto& a : frame.annotations) {
      rec["annotations"].push_back(
          {{"box", {a.box.x, a.box.y, a.box.w, a.box.h}}, {"ignore", a.ignore}, {"visibility", a.visibility}});
    }
    index << rec.dump() << '\n';
  }
  if (!index) throw DataError("failed writing " + (dir / "index.txt").string());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.txt";
  std::ifstream index(index_path);
  if (!index) throw DataError("missing dataset index " + index_path.string());
  std::string line;
  std::getline(index, line);
  if (line.rfind(kDatasetHeader, 0) != 0) throw DataError(index_path.string() + ": not a dataset index");
  const std::string version = line.size() > 13 ? line.substr(13) : "";
  if (version != kDatasetVersion) {
    throw VersionError(index_path.string() + ": unsupported dataset version '" + version + "'");
  }
  Dataset ds;
  std::size_t line_no = 1;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = index_path.string() + ":" + std::to_string(line_no);
    MultispectralFrame frame;
    try {
      const auto rec = nlohmann::json::parse(line);
      frame.id = rec.at("id").get<std::string>();
      frame.illumination = parse_illumination(rec.at("illumination").get<std::string>());
      for (const auto& a : rec.at("annotations")) {
        const auto& b = a.at("box");
        if (b.size() != 4) throw DataError("annotation box needs 4 numbers");
        frame.annotations.push_back({{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                                     a.at("ignore").get<bool>(),
                                     a.at("visibility").get<double>()});
      }
      frame.visible = read_pnm(dir / rec.at("visible").get<std::string>(), "frame " + frame.id);
      frame.thermal = read_pnm(dir / rec.at("thermal").get<std::string>(), "frame " + frame.id);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed index record (" + e.what() + ")");
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    frame.validate();
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

}  // namespace iadn
