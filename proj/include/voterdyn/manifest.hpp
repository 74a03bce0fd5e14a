#pragma once

// Output directory handling and the run manifest: config snapshot, tool
// version, start/end timestamps, SHA-256 of every output file and per-step
// wall times.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "voterdyn/errors.hpp"

namespace voterdyn {

inline constexpr const char* kToolVersion = "voterdyn 1.0.0";

inline std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw ConsistencyError("SHA-256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp = std::chrono::system_clock::now()) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes files into one directory and remembers their checksums.
class OutputDirectory {
 public:
  explicit OutputDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw IoError("cannot create output directory '" + dir_.string() + "'" + (ec ? ": " + ec.message() : ""));
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
    checksums_[name] = sha256_hex(content);
  }

  const std::map<std::string, std::string>& checksums() const noexcept { return checksums_; }
  const std::filesystem::path& path() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> checksums_;
};

struct RunManifest {
  std::string command;
  std::string config_snapshot;
  std::string tool_version = kToolVersion;
  std::string started;
  std::string finished;
  std::size_t workers = 1;
  std::map<std::string, std::string> checksums;
  std::map<std::string, double> wall_times;  ///< seconds per step

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["started"] = started;
    j["finished"] = finished;
    j["workers"] = workers;
    j["config"] = config_snapshot;
    j["checksums"] = nlohmann::ordered_json(checksums);
    j["wall_times"] = nlohmann::ordered_json(wall_times);
    return j;
  }
};

}  // namespace voterdyn
