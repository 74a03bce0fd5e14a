#pragma once

// Estimate records shared by every experiment: one JSON object per line and a
// CSV mirror. Wall-clock time is carried on the record but written only where
// asked for, so estimate streams stay bit-identical across runs.

#include <cstdint>
#include <charconv>
#include <string>
#include <vector>

#include <json.hpp>

#include "voterdyn/stats.hpp"

namespace voterdyn {

inline constexpr const char* kRecordSchema = "voterdyn-estimates v1";

struct EstimateRecord {
  std::string estimator;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  double value = 0.0;
  double std_error = 0.0;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  ///< seconds; excluded from the estimate stream

  static EstimateRecord from(std::string estimator, nlohmann::ordered_json parameters, const EstimateWithError& e,
                             std::uint64_t seed) {
    return {std::move(estimator), std::move(parameters), e.value, e.std_error, e.replications, seed, 0.0};
  }

  nlohmann::ordered_json to_json(bool with_wall_time = false) const {
    nlohmann::ordered_json j;
    j["estimator"] = estimator;
    j["parameters"] = parameters;
    j["value"] = value;
    j["std_error"] = std_error;
    j["replications"] = replications;
    j["seed"] = seed;
    if (with_wall_time) j["wall_time"] = wall_time;
    return j;
  }
};

/// Shortest round-trip text of a double.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string to_jsonl(const std::vector<EstimateRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string to_csv(const std::vector<EstimateRecord>& records) {
  std::string out = std::string("# ") + kRecordSchema + "\nestimator,parameters,value,std_error,replications,seed\n";
  for (const auto& r : records) {
    out += csv_quote(r.estimator) + ',' + csv_quote(r.parameters.dump()) + ',' + format_double(r.value) + ',' +
           format_double(r.std_error) + ',' + std::to_string(r.replications) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

}  // namespace voterdyn
