#include "evload/manifest.hpp"

#include <istream>
#include "json.hpp"
#include <ostream>

#include "evload/errors.hpp"

namespace evload {

RunManifest read_manifest_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("unreadable manifest: ") + e.what());
  }
  RunManifest m;
  try {
    if (j.at("format").get<std::string>() != "evload_manifest") {
      throw MalformedHeader("not a manifest file");
    }
    m.tool_version = j.at("tool_version").get<std::string>();
    m.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("stages")) {
      for (const auto& [name, sj] : j.at("stages").items()) {
        StageRecord rec;
        rec.config_path = sj.value("config", "");
        if (sj.contains("inputs")) {
          rec.input_paths = sj.at("inputs").get<std::vector<std::string>>();
        }
        rec.seed = sj.value("seed", std::uint64_t{0});
        if (sj.contains("outputs")) {
          rec.outputs = sj.at("outputs").get<std::vector<std::string>>();
        }
        m.stages[name] = std::move(rec);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("incomplete manifest: ") + e.what());
  }
  return m;
}

void write_manifest_json(const RunManifest& manifest, std::ostream& out) {
  // Plain json keeps keys sorted, so rewrites are byte-stable.
  nlohmann::json j;
  j["format"] = "evload_manifest";
  j["version"] = 1;
  j["tool_version"] = manifest.tool_version;
  j["out_dir"] = manifest.out_dir;
  j["stages"] = nlohmann::json::object();
  for (const auto& [name, rec] : manifest.stages) {
    nlohmann::json sj;
    sj["config"] = rec.config_path;
    sj["inputs"] = rec.input_paths;
    sj["seed"] = rec.seed;
    sj["outputs"] = rec.outputs;
    j["stages"][name] = std::move(sj);
  }
  out << j.dump(2) << '\n';
}

}  // namespace evload
