#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qvest/errors.hpp"
#include "qvest/increments.hpp"

namespace qvest::harness::detail {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path.empty() ? msg : path + ": " + msg);
}

inline void convert(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) config_fail(path, "expected a number");
  out = j.get<double>();
}

inline void convert(const json& j, const std::string& path, std::int64_t& out) {
  if (!j.is_number_integer()) config_fail(path, "expected an integer");
  out = j.get<std::int64_t>();
}

inline void convert(const json& j, const std::string& path, int& out) {
  std::int64_t v = 0;
  convert(j, path, v);
  if (v < INT32_MIN || v > INT32_MAX) config_fail(path, "integer out of range");
  out = static_cast<int>(v);
}

inline void convert(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_unsigned()) config_fail(path, "expected a nonnegative integer");
  out = j.get<std::uint64_t>();
}

inline void convert(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) config_fail(path, "expected true or false");
  out = j.get<bool>();
}

inline void convert(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) config_fail(path, "expected a string");
  out = j.get<std::string>();
}

template <class T>
void convert(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) config_fail(path, "expected an array");
  std::vector<T> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) convert(j[i], path + "[" + std::to_string(i) + "]", v[i]);
  out = std::move(v);
}

inline void convert(const json& j, const std::string& path, Eigen::MatrixXd& out) {
  std::vector<std::vector<double>> rows;
  convert(j, path, rows);
  if (rows.empty()) config_fail(path, "matrix must have at least one row");
  const std::size_t cols = rows.front().size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) config_fail(path, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  out = std::move(m);
}

inline void convert(const json& j, const std::string& path, IndexPair& out) {
  std::vector<int> v;
  convert(j, path, v);
  if (v.size() != 2) config_fail(path, "expected [p, q]");
  out = IndexPair{v[0], v[1]};
}

template <class T>
void convert(const json& j, const std::string& path, std::optional<T>& out) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  T v{};
  convert(j, path, v);
  out = std::move(v);
}

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) config_fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return false;
    convert(*it, sub(key), out);
    return true;
  }

  template <class T>
  T require(const std::string& key) {
    T v{};
    if (!get(key, v)) config_fail(path_, "missing required key '" + key + "'");
    return v;
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) config_fail(path_, "unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

inline ojson matrix_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qvest::harness::detail
