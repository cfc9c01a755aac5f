// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinsim/errors.hpp"
#include "clinsim/version.hpp"

namespace clinsim {

/// FNV-1a 64-bit digest of a file's bytes; cheap fingerprint for manifests.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + out;
}

/// Everything needed to reproduce a CLI run: the command, its flags, seeds,
/// input digests, and output paths. Written alongside every output artifact;
/// the timestamp is the only non-reproducible field.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = "clinsim";
  j["tool_version"] = kVersion;
  j["command"] = m.command;
  j["flags"] = m.flags;
  j["seeds"] = m.seeds;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, digest] : m.inputs) {
    inputs.push_back({{"path", p}, {"digest", digest}});
  }
  j["inputs"] = inputs;
  j["outputs"] = m.outputs;
  char stamp[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  j["timestamp_utc"] = stamp;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace clinsim
