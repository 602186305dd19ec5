#pragma once

// Declarative schema language: a restricted JSON-Schema-like subset with the
// kinds object, array, string, number, integer, boolean and enum. Schemas are
// immutable after parsing and safe to share across threads.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rlstruct/json.hpp"

namespace rlstruct {

enum class NodeKind { Object, Array, String, Number, Integer, Boolean, Enum };

std::string_view to_string(NodeKind kind);

struct SchemaNode {
  NodeKind kind = NodeKind::Object;
  // Object only; declaration order is preserved.
  std::vector<std::pair<std::string, SchemaNode>> properties;
  std::vector<std::string> required;
  // Array only.
  std::shared_ptr<const SchemaNode> items;
  std::optional<std::size_t> min_items;
  std::optional<std::size_t> max_items;
  // Enum only.
  std::vector<std::string> enum_values;

  const SchemaNode* property(std::string_view name) const;
  bool is_required(std::string_view name) const;
};

bool operator==(const SchemaNode& a, const SchemaNode& b);

struct Schema {
  std::string name;
  int version = 1;
  SchemaNode root;
};

inline bool operator==(const Schema& a, const Schema& b) {
  return a.name == b.name && a.version == b.version && a.root == b.root;
}

// Throws SyntaxError (with byte offset) or ConstraintError.
Schema parse_schema(std::string_view text);
Schema load_schema_file(const std::string& path);
std::string serialize_schema(const Schema& s);
json::Value schema_to_value(const Schema& s);

// Maximum nesting depth counting object and array nodes; a flat object is 1.
int schema_depth(const Schema& s);

// Preorder list of required key paths joined with '.'. Only required chains
// are followed, so the list is prefix-closed. Arrays are transparent: a key
// required on an array's element objects applies to every element.
std::vector<std::string> required_key_paths(const Schema& s);

// Every declared property path, required or not.
std::vector<std::string> declared_key_paths(const Schema& s);

// Distinct key paths present in a value tree (arrays transparent), in
// first-seen order.
std::vector<std::string> value_key_paths(const json::Value& v);

// Kind check for one node against one value. Arrays also check their size
// bounds and, recursively, the kinds of their elements; object members are
// not inspected (they are covered by key-path checks).
bool kind_compatible(const SchemaNode& node, const json::Value& v);

struct ConformanceReport {
  bool root_ok = false;
  std::vector<std::string> present;
  std::vector<std::string> missing;
  std::vector<std::string> hallucinated;

  // All required paths present with compatible kinds on an object root.
  bool complete() const { return root_ok && missing.empty(); }
  // Fraction of required paths present; 1 when nothing is required and the
  // root is an object, 0 when the root is not an object.
  double recall() const;
  // Fraction of present key paths that the schema does not declare.
  double hallucination() const;
  std::size_t total_present_paths = 0;
};

ConformanceReport check_conformance(const Schema& s, const json::Value& v);

}  // namespace rlstruct
