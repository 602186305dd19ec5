#include "rlstruct/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "rlstruct/errors.hpp"

namespace rlstruct {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Object: return "object";
    case NodeKind::Array: return "array";
    case NodeKind::String: return "string";
    case NodeKind::Number: return "number";
    case NodeKind::Integer: return "integer";
    case NodeKind::Boolean: return "boolean";
    case NodeKind::Enum: return "enum";
  }
  return "unknown";
}

const SchemaNode* SchemaNode::property(std::string_view name) const {
  for (const auto& [k, node] : properties) {
    if (k == name) return &node;
  }
  return nullptr;
}

bool SchemaNode::is_required(std::string_view name) const {
  return std::find(required.begin(), required.end(), name) != required.end();
}

bool operator==(const SchemaNode& a, const SchemaNode& b) {
  if (a.kind != b.kind || a.properties != b.properties || a.required != b.required ||
      a.min_items != b.min_items || a.max_items != b.max_items || a.enum_values != b.enum_values) {
    return false;
  }
  if (static_cast<bool>(a.items) != static_cast<bool>(b.items)) return false;
  return !a.items || *a.items == *b.items;
}

namespace {

std::optional<NodeKind> kind_from_string(std::string_view s) {
  if (s == "object") return NodeKind::Object;
  if (s == "array") return NodeKind::Array;
  if (s == "string") return NodeKind::String;
  if (s == "number") return NodeKind::Number;
  if (s == "integer") return NodeKind::Integer;
  if (s == "boolean") return NodeKind::Boolean;
  if (s == "enum") return NodeKind::Enum;
  return std::nullopt;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) { return alpha(c) || digit(c) || c == '-'; });
}

[[noreturn]] void constraint(const std::string& where, const std::string& what) {
  throw ConstraintError(where + ": " + what);
}

std::size_t read_count(const json::Value& v, const std::string& where, const char* field) {
  if (!v.is_integral() || v.as_number() < 0) {
    constraint(where, std::string(field) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v.as_number());
}

SchemaNode read_node(const json::Value& v, const std::string& where) {
  if (!v.is_object()) constraint(where, "node must be an object");
  const json::Value* kind_v = v.find("kind");
  if (kind_v == nullptr || !kind_v->is_string()) constraint(where, "missing string field 'kind'");
  const auto kind = kind_from_string(kind_v->as_string());
  if (!kind) constraint(where, "unsupported kind '" + kind_v->as_string() + "'");

  SchemaNode node;
  node.kind = *kind;
  std::set<std::string> allowed = {"kind"};
  switch (node.kind) {
    case NodeKind::Object: allowed.insert({"properties", "required"}); break;
    case NodeKind::Array: allowed.insert({"items", "min_items", "max_items"}); break;
    case NodeKind::Enum: allowed.insert("enum_values"); break;
    default: break;
  }
  for (const auto& [key, _] : v.members()) {
    if (allowed.count(key) == 0) {
      constraint(where, "field '" + key + "' is not allowed on kind " + std::string(to_string(node.kind)));
    }
  }

  if (node.kind == NodeKind::Object) {
    if (const json::Value* props = v.find("properties")) {
      if (!props->is_object()) constraint(where, "'properties' must be an object");
      for (const auto& [name, child] : props->members()) {
        if (name.empty()) constraint(where, "empty property name");
        if (name.find('.') != std::string::npos) {
          constraint(where, "property name '" + name + "' contains '.'");
        }
        node.properties.emplace_back(name, read_node(child, where + "." + name));
      }
    }
    if (const json::Value* req = v.find("required")) {
      if (!req->is_array()) constraint(where, "'required' must be an array");
      for (const auto& r : req->items()) {
        if (!r.is_string()) constraint(where, "'required' entries must be strings");
        if (node.property(r.as_string()) == nullptr) {
          constraint(where, "required key '" + r.as_string() + "' is not a declared property");
        }
        if (node.is_required(r.as_string())) {
          constraint(where, "required key '" + r.as_string() + "' listed twice");
        }
        node.required.push_back(r.as_string());
      }
    }
  } else if (node.kind == NodeKind::Array) {
    const json::Value* items = v.find("items");
    if (items == nullptr) constraint(where, "array node requires 'items'");
    node.items = std::make_shared<const SchemaNode>(read_node(*items, where + "[]"));
    if (const json::Value* mn = v.find("min_items")) node.min_items = read_count(*mn, where, "min_items");
    if (const json::Value* mx = v.find("max_items")) node.max_items = read_count(*mx, where, "max_items");
    if (node.min_items && node.max_items && *node.min_items > *node.max_items) {
      constraint(where, "min_items exceeds max_items");
    }
  } else if (node.kind == NodeKind::Enum) {
    const json::Value* vals = v.find("enum_values");
    if (vals == nullptr || !vals->is_array() || vals->items().empty()) {
      constraint(where, "enum node requires non-empty 'enum_values'");
    }
    for (const auto& e : vals->items()) {
      if (!e.is_string()) constraint(where, "enum values must be strings");
      node.enum_values.push_back(e.as_string());
    }
  }
  return node;
}

json::Value node_to_value(const SchemaNode& node) {
  json::Value out = json::Value::object();
  out.set("kind", std::string(to_string(node.kind)));
  if (node.kind == NodeKind::Object) {
    json::Value props = json::Value::object();
    for (const auto& [name, child] : node.properties) props.set(name, node_to_value(child));
    out.set("properties", std::move(props));
    json::Value req = json::Value::array();
    for (const auto& r : node.required) req.push_back(r);
    out.set("required", std::move(req));
  } else if (node.kind == NodeKind::Array) {
    out.set("items", node_to_value(*node.items));
    if (node.min_items) out.set("min_items", static_cast<double>(*node.min_items));
    if (node.max_items) out.set("max_items", static_cast<double>(*node.max_items));
  } else if (node.kind == NodeKind::Enum) {
    json::Value vals = json::Value::array();
    for (const auto& e : node.enum_values) vals.push_back(e);
    out.set("enum_values", std::move(vals));
  }
  return out;
}

int node_depth(const SchemaNode& node) {
  switch (node.kind) {
    case NodeKind::Object: {
      int deepest = 0;
      for (const auto& [_, child] : node.properties) deepest = std::max(deepest, node_depth(child));
      return 1 + deepest;
    }
    case NodeKind::Array: return 1 + node_depth(*node.items);
    default: return 0;
  }
}

// Follows arrays down to the first non-array node.
const SchemaNode& through_arrays(const SchemaNode& node) {
  const SchemaNode* n = &node;
  while (n->kind == NodeKind::Array) n = n->items.get();
  return *n;
}

void collect_required(const SchemaNode& node, const std::string& prefix, std::vector<std::string>& out) {
  const SchemaNode& obj = through_arrays(node);
  if (obj.kind != NodeKind::Object) return;
  for (const auto& key : obj.required) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    out.push_back(path);
    collect_required(*obj.property(key), path, out);
  }
}

void collect_declared(const SchemaNode& node, const std::string& prefix, std::vector<std::string>& out) {
  const SchemaNode& obj = through_arrays(node);
  if (obj.kind != NodeKind::Object) return;
  for (const auto& [key, child] : obj.properties) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    out.push_back(path);
    collect_declared(child, path, out);
  }
}

void collect_value_paths(const json::Value& v, const std::string& prefix, std::vector<std::string>& out,
                         std::set<std::string>& seen) {
  if (v.is_array()) {
    for (const auto& item : v.items()) collect_value_paths(item, prefix, out, seen);
  } else if (v.is_object()) {
    for (const auto& [key, child] : v.members()) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (seen.insert(path).second) out.push_back(path);
      collect_value_paths(child, path, out, seen);
    }
  }
}

// Expands a value through nested arrays down to its non-array leaves.
void flatten_arrays(const json::Value& v, std::vector<const json::Value*>& out) {
  if (v.is_array()) {
    for (const auto& item : v.items()) flatten_arrays(item, out);
  } else {
    out.push_back(&v);
  }
}

// `instances` are values already known to be objects matching `obj`.
void check_required(const SchemaNode& obj, const std::vector<const json::Value*>& instances, bool parent_ok,
                    const std::string& prefix, ConformanceReport& report) {
  for (const auto& key : obj.required) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    const SchemaNode& child = *obj.property(key);
    bool ok = parent_ok;
    std::vector<const json::Value*> next;
    if (ok) {
      for (const json::Value* inst : instances) {
        const json::Value* found = inst->find(key);
        if (found == nullptr || !kind_compatible(child, *found)) {
          ok = false;
          break;
        }
        flatten_arrays(*found, next);
      }
    }
    (ok ? report.present : report.missing).push_back(path);
    const SchemaNode& child_obj = through_arrays(child);
    if (child_obj.kind == NodeKind::Object) {
      if (!ok) next.clear();
      check_required(child_obj, next, ok, path, report);
    }
  }
}

}  // namespace

bool kind_compatible(const SchemaNode& node, const json::Value& v) {
  switch (node.kind) {
    case NodeKind::Object: return v.is_object();
    case NodeKind::String: return v.is_string();
    case NodeKind::Number: return v.is_number();
    case NodeKind::Integer: return v.is_integral();
    case NodeKind::Boolean: return v.is_bool();
    case NodeKind::Enum:
      return v.is_string() &&
             std::find(node.enum_values.begin(), node.enum_values.end(), v.as_string()) != node.enum_values.end();
    case NodeKind::Array: {
      if (!v.is_array()) return false;
      const auto n = v.items().size();
      if (node.min_items && n < *node.min_items) return false;
      if (node.max_items && n > *node.max_items) return false;
      return std::all_of(v.items().begin(), v.items().end(),
                         [&](const json::Value& item) { return kind_compatible(*node.items, item); });
    }
  }
  return false;
}

Schema parse_schema(std::string_view text) {
  const json::ParseOutcome parsed = json::parse_strict(text);
  if (!parsed.valid) {
    throw SyntaxError("schema document is not valid JSON: " + std::string(json::to_string(*parsed.error_kind)) +
                      " at offset " + std::to_string(*parsed.error_offset));
  }
  const json::Value& doc = *parsed.value;
  if (!doc.is_object()) constraint("schema", "document must be an object");
  for (const auto& [key, _] : doc.members()) {
    if (key != "name" && key != "version" && key != "root") constraint("schema", "unknown field '" + key + "'");
  }
  const json::Value* name = doc.find("name");
  const json::Value* version = doc.find("version");
  const json::Value* root = doc.find("root");
  if (name == nullptr || !name->is_string() || !is_identifier(name->as_string())) {
    constraint("schema", "'name' must be an identifier");
  }
  if (version == nullptr || !version->is_integral()) constraint("schema", "'version' must be an integer");
  if (root == nullptr) constraint("schema", "missing 'root'");

  Schema s;
  s.name = name->as_string();
  s.version = static_cast<int>(version->as_number());
  s.root = read_node(*root, "root");
  if (s.root.kind != NodeKind::Object) constraint("root", "root node must be an object");
  return s;
}

Schema load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

json::Value schema_to_value(const Schema& s) {
  json::Value doc = json::Value::object();
  doc.set("name", s.name);
  doc.set("version", s.version);
  doc.set("root", node_to_value(s.root));
  return doc;
}

std::string serialize_schema(const Schema& s) { return json::serialize(schema_to_value(s)); }

int schema_depth(const Schema& s) { return node_depth(s.root); }

std::vector<std::string> required_key_paths(const Schema& s) {
  std::vector<std::string> out;
  collect_required(s.root, "", out);
  return out;
}

std::vector<std::string> declared_key_paths(const Schema& s) {
  std::vector<std::string> out;
  collect_declared(s.root, "", out);
  return out;
}

std::vector<std::string> value_key_paths(const json::Value& v) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_value_paths(v, "", out, seen);
  return out;
}

double ConformanceReport::recall() const {
  if (!root_ok) return 0.0;
  const std::size_t total = present.size() + missing.size();
  if (total == 0) return 1.0;
  return static_cast<double>(present.size()) / static_cast<double>(total);
}

double ConformanceReport::hallucination() const {
  if (total_present_paths == 0) return 0.0;
  return static_cast<double>(hallucinated.size()) / static_cast<double>(total_present_paths);
}

ConformanceReport check_conformance(const Schema& s, const json::Value& v) {
  ConformanceReport report;
  report.root_ok = v.is_object();
  std::vector<const json::Value*> roots;
  if (report.root_ok) roots.push_back(&v);
  check_required(s.root, roots, report.root_ok, "", report);

  const auto declared = declared_key_paths(s);
  const std::set<std::string> declared_set(declared.begin(), declared.end());
  const auto present_paths = value_key_paths(v);
  report.total_present_paths = present_paths.size();
  for (const auto& p : present_paths) {
    if (declared_set.count(p) == 0) report.hallucinated.push_back(p);
  }
  return report;
}

}  // namespace rlstruct
