#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace quditcal {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint is a JSON manifest (`checkpoint.json`) plus one flat file of
/// little-endian IEEE-754 doubles (`checkpoint.bin`). The manifest's "blobs"
/// array lists each named array with its element offset and count, in file order.
struct CheckpointData {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<double>>> blobs;

  void put(const std::string& name, std::span<const double> values);
  bool has(const std::string& name) const;
  const std::vector<double>& get(const std::string& name) const;
  // get() plus an exact length check.
  const std::vector<double>& get(const std::string& name, std::size_t expected) const;
};

void write_checkpoint(const std::filesystem::path& dir, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& dir);

}  // namespace quditcal
