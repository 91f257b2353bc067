#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lglab {

/// Provenance record written alongside every command's outputs.
struct RunManifest {
  std::string command;               // full command line
  std::string config_path;           // empty when no config file was used
  std::uint64_t base_seed = 0;
  std::string input_hash;            // hex content hash over all input bytes
  std::string started;               // ISO-8601 UTC
  std::string finished;              // ISO-8601 UTC
  std::vector<std::string> inputs;   // files covered by input_hash, in order
  std::vector<std::string> outputs;  // every file the command wrote
};

/// FNV-1a (64-bit) over a byte string.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull);

/// Hex content hash over the concatenated bytes of the named files
/// (missing files raise PreconditionError).
std::string hash_files(const std::vector<std::string>& paths);

/// Current UTC time as ISO-8601.
std::string utc_now();

/// Writes the manifest as JSON next to the outputs.
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace lglab
