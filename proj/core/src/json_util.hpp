#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "bemdc/geometry.hpp"

namespace bemdc::detail {

using Json = nlohmann::json;

[[noreturn]] inline void format_error(const std::string& context, const std::string& message) {
  throw std::invalid_argument(context + ": " + message);
}

inline const Json& require_object(const Json& j, const std::string& context) {
  if (!j.is_object()) format_error(context, "expected an object");
  return j;
}

/// Rejects keys outside `allowed`.
inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& context) {
  require_object(j, context);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) format_error(context, "unknown field '" + key + "'");
  }
}

inline const Json& field(const Json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) format_error(context, std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const Json& j, const std::string& context) {
  if (!j.is_number()) format_error(context, "expected a number");
  return j.get<double>();
}

inline double number_field(const Json& j, const char* key, const std::string& context) {
  return number(field(j, key, context), context + "." + key);
}

inline double number_or(const Json& j, const char* key, double fallback, const std::string& context) {
  return j.contains(key) ? number_field(j, key, context) : fallback;
}

inline Eigen::Vector2d vec2(const Json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 2) format_error(context, "expected [x, y]");
  return {number(j[0], context), number(j[1], context)};
}

inline Rgb rgb(const Json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) format_error(context, "expected [r, g, b]");
  return {number(j[0], context), number(j[1], context), number(j[2], context)};
}

inline Json to_json(const Eigen::Vector2d& v) { return Json::array({v.x(), v.y()}); }
inline Json to_json(const Rgb& v) { return Json::array({v(0), v(1), v(2)}); }

inline std::vector<Point2> polygon(const Json& j, const std::string& context) {
  if (!j.is_array()) format_error(context, "polygon must be an array of [x, y] vertices");
  std::vector<Point2> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vec2(j[i], context + "[" + std::to_string(i) + "]"));
  return out;
}

inline Json polygon_json(const std::vector<Point2>& vertices) {
  Json arr = Json::array();
  for (const auto& v : vertices) arr.push_back(to_json(v));
  return arr;
}

inline void check_header(const Json& j, const char* format, const std::string& context) {
  require_object(j, context);
  const Json& f = field(j, "format", context);
  if (!f.is_string() || f.get<std::string>() != format)
    format_error(context, std::string("expected format \"") + format + "\"");
  const Json& v = field(j, "version", context);
  if (!v.is_number_integer() || v.get<int>() != 1) format_error(context, "unsupported version (expected 1)");
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace bemdc::detail
