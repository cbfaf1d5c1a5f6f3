#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "tagweave/common.hpp"
#include "tagweave/version.hpp"

namespace tagweave {

// FNV-1a over the file bytes. Strong enough to pin "same input, same output"
// reproducibility checks; not a cryptographic digest.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open for digest: " + path.string());
  std::uint64_t hash = 0xCBF29CE484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001B3ull;
    }
    if (!in) break;
  }
  char out[32];
  std::snprintf(out, sizeof(out), "fnv1a64:%016llx",
                static_cast<unsigned long long>(hash));
  return out;
}

// Every CLI run serializes one of these next to its primary output. Two runs
// with equal manifests produce byte-identical outputs; no timestamps on
// purpose.
struct RunManifest {
  std::string command;
  std::string tool_version = kVersion;
  nlohmann::json parameters = nlohmann::json::object();
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest

  void add_input(const std::filesystem::path& path) {
    inputs[path.string()] = file_digest(path);
  }
  void add_output(const std::filesystem::path& path) {
    outputs[path.string()] = file_digest(path);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["parameters"] = parameters;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    return j;
  }
};

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open for writing: " + path.string());
  out << m.to_json().dump(2) << '\n';
}

}  // namespace tagweave
