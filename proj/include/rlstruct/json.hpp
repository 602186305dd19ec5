#pragma once

// Strict JSON value tree, parser and serializer.
//
// The parser accepts exactly the RFC 8259 grammar: no comments, no trailing
// commas, no single quotes, no NaN/Infinity literals. Any value (including a
// scalar) may appear at the top level. Invalid input never throws; it is
// reported through ParseOutcome with the byte offset of the first offending
// character.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace rlstruct::json {

class Value {
 public:
  enum class Kind { Null, Bool, Number, String, Array, Object };

  using Array = std::vector<Value>;
  using Members = std::vector<std::pair<std::string, Value>>;

  Value() = default;
  Value(std::nullptr_t) {}
  Value(bool b) : data_(b) {}
  Value(double d) : data_(d) {}
  Value(int i) : data_(static_cast<double>(i)) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(Array a) : data_(std::move(a)) {}
  Value(Members m) : data_(std::move(m)) {}

  static Value array() { return Value(Array{}); }
  static Value object() { return Value(Members{}); }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_bool() const { return kind() == Kind::Bool; }
  bool is_number() const { return kind() == Kind::Number; }
  bool is_string() const { return kind() == Kind::String; }
  bool is_array() const { return kind() == Kind::Array; }
  bool is_object() const { return kind() == Kind::Object; }
  // Finite number with no fractional part.
  bool is_integral() const;

  bool as_bool() const { return std::get<bool>(data_); }
  double as_number() const { return std::get<double>(data_); }
  const std::string& as_string() const { return std::get<std::string>(data_); }
  const Array& items() const { return std::get<Array>(data_); }
  Array& items() { return std::get<Array>(data_); }
  const Members& members() const { return std::get<Members>(data_); }
  Members& members() { return std::get<Members>(data_); }

  // Object lookup; nullptr when absent or when this is not an object.
  const Value* find(std::string_view key) const;
  // Inserts or replaces (last write wins, position of the first kept).
  void set(std::string key, Value v);
  void push_back(Value v) { items().push_back(std::move(v)); }

  friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }

 private:
  std::variant<std::monostate, bool, double, std::string, Array, Members> data_;
};

enum class ErrorKind {
  UnexpectedToken,
  UnterminatedString,
  TrailingContent,
  DepthExceeded,
  BadNumber,
  BadEscape,
};

std::string_view to_string(ErrorKind kind);

struct ParseOptions {
  int max_depth = 64;
};

struct ParseOutcome {
  bool valid = false;
  std::optional<Value> value;             // present iff valid
  std::optional<ErrorKind> error_kind;    // present iff !valid
  std::optional<std::size_t> error_offset;
  bool duplicate_keys = false;
};

ParseOutcome parse_strict(std::string_view text, const ParseOptions& options = {});

// Compact serialization. Keys keep insertion order; numbers use the shortest
// decimal form that round-trips to the same double.
std::string serialize(const Value& v);
std::string format_number(double d);
std::string quote(std::string_view s);

// Result of locating the candidate document inside a raw completion.
struct Candidate {
  std::string text;
  bool has_fence = false;
  bool fence_tagged_json = false;
  // Literal substring "json" appears anywhere in the completion.
  bool mentions_json = false;
};

Candidate extract_candidate(std::string_view completion);

}  // namespace rlstruct::json
