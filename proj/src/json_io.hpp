// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <string>

#include "json.hpp"
#include "ruleshap/dataset.hpp"
#include "ruleshap/error.hpp"
#include "ruleshap/rules.hpp"

namespace ruleshap::detail {

using nlohmann::json;

inline json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("malformed ") + what + " JSON: " + e.what());
  }
}

template <typename T>
T get_field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorCode::kSchema, std::string(what) + " is missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kSchema, std::string(what) + " field '" + key + "' has the wrong type");
  }
}

inline json condition_to_json(const Condition& c) {
  return {{"feature", std::string(kInputNames[c.feature])},
          {"op", c.op == Op::kLe ? "<=" : ">"},
          {"threshold", c.threshold}};
}

inline Condition condition_from_json(const json& j) {
  Condition c;
  c.feature = require_input_index(get_field<std::string>(j, "feature", "condition"));
  const auto op = get_field<std::string>(j, "op", "condition");
  if (op == "<=") {
    c.op = Op::kLe;
  } else if (op == ">") {
    c.op = Op::kGt;
  } else {
    fail(ErrorCode::kSchema, "rule condition op must be '<=' or '>', got '" + op + "'");
  }
  c.threshold = get_field<double>(j, "threshold", "condition");
  return c;
}

}  // namespace ruleshap::detail
