// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dlens {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over every regular file under a directory, in path order, with
/// relative paths mixed into the digest.
std::string sha256_tree(const std::filesystem::path& dir);

struct RunManifest {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::string model_path;
  std::string model_hash;
  std::string stimulus_path;
  std::string stimulus_hash;
  std::map<std::string, std::string> flags;
  std::vector<std::string> outputs;  // file names relative to the manifest
  std::string timestamp;             // UTC ISO-8601; not part of reproducibility
  std::string version;

  /// Pretty JSON. With `include_timestamp` false the result depends only on
  /// the run inputs.
  std::string to_json(bool include_timestamp = true) const;
  static RunManifest from_json(const std::string& text);
};

std::string utc_timestamp();

/// Writes `manifest` as JSON to `path`.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace dlens
