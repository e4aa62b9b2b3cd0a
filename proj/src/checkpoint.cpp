#include "quditcal/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace quditcal {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xFFu) << (8 * (7 - b));
  return out;
}

}  // namespace

void CheckpointData::put(const std::string& name, std::span<const double> values) {
  for (auto& [n, v] : blobs) {
    if (n == name) {
      v.assign(values.begin(), values.end());
      return;
    }
  }
  blobs.emplace_back(name, std::vector<double>(values.begin(), values.end()));
}

bool CheckpointData::has(const std::string& name) const {
  for (const auto& [n, v] : blobs)
    if (n == name) return true;
  return false;
}

const std::vector<double>& CheckpointData::get(const std::string& name) const {
  for (const auto& [n, v] : blobs)
    if (n == name) return v;
  throw CheckpointError("checkpoint has no array named '" + name + "'");
}

const std::vector<double>& CheckpointData::get(const std::string& name, std::size_t expected) const {
  const auto& v = get(name);
  if (v.size() != expected)
    throw CheckpointError("checkpoint array '" + name + "' has " + std::to_string(v.size()) +
                          " values, expected " + std::to_string(expected));
  return v;
}

void write_checkpoint(const std::filesystem::path& dir, const CheckpointData& data) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = data.meta;
  manifest["format"] = "quditcal-checkpoint";
  manifest["format_version"] = 1;
  manifest["blobs"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, values] : data.blobs) {
    manifest["blobs"].push_back({{"name", name}, {"offset", offset}, {"count", values.size()}});
    offset += values.size();
  }
  {
    std::ofstream bin(dir / "checkpoint.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw CheckpointError("cannot write " + (dir / "checkpoint.bin").string());
    for (const auto& [name, values] : data.blobs) {
      for (double x : values) {
        const std::uint64_t word = to_little(std::bit_cast<std::uint64_t>(x));
        bin.write(reinterpret_cast<const char*>(&word), sizeof word);
      }
    }
  }
  std::ofstream js(dir / "checkpoint.json", std::ios::trunc);
  if (!js) throw CheckpointError("cannot write " + (dir / "checkpoint.json").string());
  js << manifest.dump(2) << '\n';
}

CheckpointData read_checkpoint(const std::filesystem::path& dir) {
  std::ifstream js(dir / "checkpoint.json");
  if (!js) throw CheckpointError("missing " + (dir / "checkpoint.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "quditcal-checkpoint" || !manifest.contains("blobs"))
    throw CheckpointError("not a quditcal checkpoint manifest");

  std::ifstream bin(dir / "checkpoint.bin", std::ios::binary | std::ios::ate);
  if (!bin) throw CheckpointError("missing " + (dir / "checkpoint.bin").string());
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0);

  std::size_t total = 0;
  for (const auto& b : manifest["blobs"]) total += b.at("count").get<std::size_t>();
  if (bytes != total * sizeof(double))
    throw CheckpointError("checkpoint.bin holds " + std::to_string(bytes) + " bytes, manifest expects " +
                          std::to_string(total * sizeof(double)));

  CheckpointData data;
  for (const auto& b : manifest["blobs"]) {
    std::vector<double> values(b.at("count").get<std::size_t>());
    for (double& x : values) {
      std::uint64_t word = 0;
      bin.read(reinterpret_cast<char*>(&word), sizeof word);
      x = std::bit_cast<double>(to_little(word));
    }
    data.blobs.emplace_back(b.at("name").get<std::string>(), std::move(values));
  }
  if (!bin) throw CheckpointError("truncated checkpoint.bin");
  manifest.erase("blobs");
  data.meta = std::move(manifest);
  return data;
}

}  // namespace quditcal
