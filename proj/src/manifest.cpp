#include "lglab/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lglab/types.hpp"

namespace lglab {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_files(const std::vector<std::string>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot read input file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    h = fnv1a(buf.str(), h);
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config_path"] = manifest.config_path;
  j["base_seed"] = manifest.base_seed;
  j["input_hash"] = manifest.input_hash;
  j["started"] = manifest.started;
  j["finished"] = manifest.finished;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace lglab
