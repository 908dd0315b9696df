#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace evload {

// What one pipeline stage consumed and produced.
struct StageRecord {
  std::string config_path;  // empty when the stage ran on defaults
  std::vector<std::string> input_paths;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;

  bool operator==(const StageRecord&) const = default;
};

// Provenance record written next to the outputs. Reruns update their own
// stage entry and leave the others alone; the content carries no timestamps
// so identical runs rewrite identical bytes.
struct RunManifest {
  std::string tool_version;
  std::string out_dir;
  std::map<std::string, StageRecord> stages;

  bool operator==(const RunManifest&) const = default;
};

RunManifest read_manifest_json(std::istream& in);
void write_manifest_json(const RunManifest& manifest, std::ostream& out);

}  // namespace evload
