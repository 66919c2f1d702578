#pragma once

#include <json.hpp>

#include <fstream>
#include <string>

#include "ssrk/tableau.hpp"

namespace ssrk {

/**
 * JSON document layout:
 *   {"name": str, "s": int, "A": [[...]], "B": [[...]], "D": [[...]],
 *    "alpha": [...], "beta": [...], "gamma": [...], "c": [...], "c_hat": [...],
 *    "flags": ["explicit" | "diagonally_implicit"]}
 * Matrices are row-major: either nested rows or a flat array of s*s numbers.
 */
inline nlohmann::json to_json(const Tableau& t) {
  using nlohmann::json;
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  json flags = json::array();
  if (t.structure() == StageStructure::explicit_stages) flags.push_back("explicit");
  if (t.structure() == StageStructure::diagonally_implicit) flags.push_back("diagonally_implicit");
  return json{{"name", t.name()},       {"s", t.stages()},       {"A", mat(t.A())},
              {"B", mat(t.B())},        {"D", mat(t.D())},       {"alpha", vec(t.alpha())},
              {"beta", vec(t.beta())},  {"gamma", vec(t.gamma())}, {"c", vec(t.c())},
              {"c_hat", vec(t.c_hat())}, {"flags", flags}};
}

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw StructuralError("tableau JSON: " + where + " must be a number");
  return v.get<double>();
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& doc, const char* key, Eigen::Index s) {
  if (!doc.contains(key)) throw StructuralError(std::string("tableau JSON: missing key '") + key + "'");
  const auto& v = doc.at(key);
  if (!v.is_array()) throw StructuralError(std::string("tableau JSON: '") + key + "' must be an array");
  Eigen::MatrixXd m(s, s);
  const bool nested = !v.empty() && v.front().is_array();
  if (nested) {
    if (static_cast<Eigen::Index>(v.size()) != s)
      throw StructuralError(std::string("tableau JSON: '") + key + "' must have s rows");
    for (Eigen::Index i = 0; i < s; ++i) {
      const auto& row = v.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != s)
        throw StructuralError(std::string("tableau JSON: each row of '") + key +
                              "' must have s entries");
      for (Eigen::Index j = 0; j < s; ++j)
        m(i, j) = json_number(row.at(static_cast<std::size_t>(j)), key);
    }
  } else {
    if (static_cast<Eigen::Index>(v.size()) != s * s)
      throw StructuralError(std::string("tableau JSON: flat '") + key + "' must have s*s entries");
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        m(i, j) = json_number(v.at(static_cast<std::size_t>(i * s + j)), key);
  }
  return m;
}

inline Eigen::VectorXd json_vector(const nlohmann::json& doc, const char* key, Eigen::Index s) {
  if (!doc.contains(key)) throw StructuralError(std::string("tableau JSON: missing key '") + key + "'");
  const auto& v = doc.at(key);
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != s)
    throw StructuralError(std::string("tableau JSON: '") + key + "' must be an array of length s");
  Eigen::VectorXd out(s);
  for (Eigen::Index i = 0; i < s; ++i) out(i) = json_number(v.at(static_cast<std::size_t>(i)), key);
  return out;
}

}  // namespace detail

/// Parses and validates a tableau document; declared flags must match the A pattern.
inline Tableau tableau_from_json(const nlohmann::json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw StructuralError("tableau JSON: document must be an object");
  if (!doc.contains("s") || !doc.at("s").is_number_integer() || doc.at("s").get<long long>() < 1)
    throw StructuralError("tableau JSON: 's' must be a positive integer");
  const auto s = static_cast<Eigen::Index>(doc.at("s").get<long long>());
  std::string name = "custom";
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw StructuralError("tableau JSON: 'name' must be a string");
    name = doc.at("name").get<std::string>();
  }
  Tableau t(name, json_matrix(doc, "A", s), json_matrix(doc, "B", s), json_matrix(doc, "D", s),
            json_vector(doc, "alpha", s), json_vector(doc, "beta", s), json_vector(doc, "gamma", s),
            json_vector(doc, "c", s), json_vector(doc, "c_hat", s));
  if (doc.contains("flags")) {
    const auto& flags = doc.at("flags");
    if (!flags.is_array()) throw StructuralError("tableau JSON: 'flags' must be an array");
    for (const auto& f : flags) {
      if (!f.is_string()) throw StructuralError("tableau JSON: flags must be strings");
      const auto flag = f.get<std::string>();
      if (flag == "explicit") {
        if (!t.is_explicit())
          throw StructuralError("tableau '" + name + "' flagged explicit but A is not strictly lower triangular");
      } else if (flag == "diagonally_implicit") {
        if (t.structure() == StageStructure::fully_implicit)
          throw StructuralError("tableau '" + name + "' flagged diagonally_implicit but A is not lower triangular");
      } else {
        throw StructuralError("tableau JSON: unknown flag '" + flag + "'");
      }
    }
  }
  return t;
}

inline Tableau load_tableau(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open tableau file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw StructuralError("tableau file '" + path + "': " + e.what());
  }
  return tableau_from_json(doc);
}

}  // namespace ssrk
