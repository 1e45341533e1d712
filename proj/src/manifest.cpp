// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "dlens/error.hpp"
#include <json.hpp>

namespace dlens {
namespace {

using Ctx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

Ctx new_ctx() {
  Ctx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw LoadError("SHA-256 init failed");
  return ctx;
}

void feed_file(EVP_MD_CTX* ctx, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
}

std::string finish(EVP_MD_CTX* ctx) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  auto ctx = new_ctx();
  feed_file(ctx.get(), path);
  return finish(ctx.get());
}

std::string sha256_tree(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  auto ctx = new_ctx();
  for (const auto& f : files) {
    const std::string rel = std::filesystem::relative(f, dir).generic_string();
    EVP_DigestUpdate(ctx.get(), rel.data(), rel.size() + 1);
    feed_file(ctx.get(), f);
  }
  return finish(ctx.get());
}

std::string RunManifest::to_json(bool include_timestamp) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
  j["model"] = {{"path", model_path}, {"sha256", model_hash}};
  j["stimuli"] = {{"path", stimulus_path}, {"sha256", stimulus_hash}};
  j["flags"] = flags;
  j["outputs"] = outputs;
  j["version"] = version;
  if (include_timestamp) j["timestamp"] = timestamp;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    m.model_path = j.at("model").at("path").get<std::string>();
    m.model_hash = j.at("model").at("sha256").get<std::string>();
    m.stimulus_path = j.at("stimuli").at("path").get<std::string>();
    m.stimulus_hash = j.at("stimuli").at("sha256").get<std::string>();
    m.flags = j.at("flags").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.version = j.at("version").get<std::string>();
    if (j.contains("timestamp")) m.timestamp = j["timestamp"].get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed manifest: ") + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << manifest.to_json(true);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return RunManifest::from_json(buf.str());
}

}  // namespace dlens
