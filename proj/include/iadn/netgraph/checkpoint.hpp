#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadn/netgraph/config.hpp"
#include "iadn/netgraph/network.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

// Layout: "IADN", version byte, uint32 LE header length, JSON header, float32 LE parameter data.
inline constexpr std::array<char, 4> kCheckpointMagic{'I', 'A', 'D', 'N'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  Network<float> net;
  KeyValues metadata;  // free-form run information, e.g. the iteration
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace detail

inline std::string encode_checkpoint(const Network<float>& net, const KeyValues& metadata = {}) {
  nlohmann::ordered_json header;
  header["config"] = to_key_values(net.config);
  header["metadata"] = metadata;
  header["params"] = nlohmann::ordered_json::array();
  std::string data;
  std::size_t offset = 0;
  for (const auto& [name, t] : net.params) {
    header["params"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    for (float v : t.data()) detail::put_u32(data, std::bit_cast<std::uint32_t>(v));
    offset += t.size() * 4;
  }
  const std::string text = header.dump();
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  out.push_back(static_cast<char>(kCheckpointVersion));
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  return out + text + data;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& context) {
  const auto fail = [&](const std::string& why) { return DataError(context + ": " + why); };
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 9 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw fail("not a checkpoint (bad magic)");
  }
  if (p[4] != kCheckpointVersion) {
    throw VersionError(context + ": unsupported checkpoint version " + std::to_string(p[4]));
  }
  const std::size_t header_len = detail::get_u32(p + 5);
  if (bytes.size() < 9 + header_len) throw fail("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(9, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  const std::size_t data_start = 9 + header_len;
  Checkpoint ck;
  try {
    ck.net.config = apply_key_values(NetworkConfig{}, header.at("config").get<KeyValues>());
    ck.metadata = header.at("metadata").get<KeyValues>();
    for (const auto& entry : header.at("params")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (shape_size(shape) != count) throw fail("parameter " + name + " count does not match its shape");
      if (data_start + offset + 4 * count > bytes.size()) throw fail("truncated data for parameter " + name);
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(detail::get_u32(p + data_start + offset + 4 * i));
      }
      ck.net.params.emplace(name, Tensor<float>(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw fail(std::string("bad config: ") + e.what());
  }
  const auto layout = parameter_layout(ck.net.config);
  if (layout.size() != ck.net.params.size()) throw fail("parameter set does not match the stored config");
  for (const auto& spec : layout) {
    const auto it = ck.net.params.find(spec.name);
    if (it == ck.net.params.end()) throw fail("missing parameter " + spec.name);
    if (it->second.shape() != spec.shape) throw fail("parameter " + spec.name + " has shape " + shape_string(it->second.shape()));
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, const KeyValues& metadata = {}) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = encode_checkpoint(net, metadata);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("cannot write checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace iadn
