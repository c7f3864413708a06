#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gcvae/training.hpp"

namespace gcvae {

// Every document is JSON. Doubles are written in shortest round-trip form, so parameters
// survive save -> load bit-exactly.

/// Pretty-printed config with every field present.
std::string config_to_json(const TrainConfig& config);

/// Fields absent from the document keep the values of `base`. Unknown fields, wrong types
/// and syntax errors raise ConfigError with "<source>:<line>: ..." diagnostics.
TrainConfig parse_config(std::string_view text, const std::string& source = "<config>",
                         const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& checkpoint);
/// Throws DataError on malformed documents or an unknown version tag.
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One metrics-stream line (no trailing newline).
std::string metrics_record(const EpochMetrics& m);
EpochMetrics parse_metrics_record(std::string_view line);

struct DataFingerprint {
  std::size_t rows = 0;
  std::vector<std::string> columns;
  std::string content_hash;  // FNV-1a 64 of the file bytes, hex
};

DataFingerprint fingerprint_file(const std::filesystem::path& path, const CsvTable& table);

struct RunManifest {
  TrainConfig config;
  DataFingerprint data;
  std::map<std::string, std::string> artifacts;
  std::string tool_version;
  std::map<std::string, double> timings_s;
  std::map<std::string, std::vector<std::size_t>> splits;  // row indices into the data file
  std::string status = "running";
  std::vector<std::string> warnings;
};

std::string manifest_to_json(const RunManifest& m);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace gcvae
