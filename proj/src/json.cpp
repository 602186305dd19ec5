#include "rlstruct/json.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace rlstruct::json {

bool Value::is_integral() const {
  if (!is_number()) return false;
  const double d = as_number();
  return std::isfinite(d) && std::floor(d) == d;
}

const Value* Value::find(std::string_view key) const {
  if (!is_object()) return nullptr;
  for (const auto& [k, v] : members()) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Value::set(std::string key, Value v) {
  auto& ms = members();
  for (auto& [k, existing] : ms) {
    if (k == key) {
      existing = std::move(v);
      return;
    }
  }
  ms.emplace_back(std::move(key), std::move(v));
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnexpectedToken: return "UnexpectedToken";
    case ErrorKind::UnterminatedString: return "UnterminatedString";
    case ErrorKind::TrailingContent: return "TrailingContent";
    case ErrorKind::DepthExceeded: return "DepthExceeded";
    case ErrorKind::BadNumber: return "BadNumber";
    case ErrorKind::BadEscape: return "BadEscape";
  }
  return "Unknown";
}

namespace {

struct Failure {
  ErrorKind kind;
  std::size_t offset;
};

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options)
      : text_(text), max_depth_(options.max_depth) {}

  ParseOutcome run() {
    ParseOutcome out;
    Value v;
    skip_ws();
    if (!parse_value(v, 0)) return fail(out);
    skip_ws();
    if (pos_ != text_.size()) {
      failure_ = {ErrorKind::TrailingContent, pos_};
      return fail(out);
    }
    out.valid = true;
    out.value = std::move(v);
    out.duplicate_keys = duplicates_;
    return out;
  }

 private:
  ParseOutcome fail(ParseOutcome& out) {
    out.valid = false;
    out.error_kind = failure_.kind;
    out.error_offset = failure_.offset;
    out.duplicate_keys = duplicates_;
    return out;
  }

  bool error(ErrorKind kind, std::size_t offset) {
    failure_ = {kind, offset};
    return false;
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void skip_ws() {
    while (!at_end()) {
      const char c = peek();
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') break;
      ++pos_;
    }
  }

  bool parse_value(Value& out, int depth) {
    if (at_end()) return error(ErrorKind::UnexpectedToken, pos_);
    switch (peek()) {
      case '{': return parse_object(out, depth + 1);
      case '[': return parse_array(out, depth + 1);
      case '"': {
        std::string s;
        if (!parse_string(s)) return false;
        out = Value(std::move(s));
        return true;
      }
      case 't': return parse_literal("true", Value(true), out);
      case 'f': return parse_literal("false", Value(false), out);
      case 'n': return parse_literal("null", Value(nullptr), out);
      default:
        if (peek() == '-' || (peek() >= '0' && peek() <= '9')) return parse_number(out);
        return error(ErrorKind::UnexpectedToken, pos_);
    }
  }

  bool parse_literal(std::string_view word, Value v, Value& out) {
    for (char expected : word) {
      if (at_end() || peek() != expected) return error(ErrorKind::UnexpectedToken, pos_);
      ++pos_;
    }
    out = std::move(v);
    return true;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  bool parse_number(Value& out) {
    const std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    if (at_end() || !is_digit(peek())) return error(ErrorKind::BadNumber, pos_);
    if (peek() == '0') {
      ++pos_;
      if (!at_end() && is_digit(peek())) return error(ErrorKind::BadNumber, pos_);
    } else {
      while (!at_end() && is_digit(peek())) ++pos_;
    }
    if (!at_end() && peek() == '.') {
      ++pos_;
      if (at_end() || !is_digit(peek())) return error(ErrorKind::BadNumber, pos_);
      while (!at_end() && is_digit(peek())) ++pos_;
    }
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      ++pos_;
      if (!at_end() && (peek() == '+' || peek() == '-')) ++pos_;
      if (at_end() || !is_digit(peek())) return error(ErrorKind::BadNumber, pos_);
      while (!at_end() && is_digit(peek())) ++pos_;
    }
    double d = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, d);
    // Magnitudes beyond double range are rejected so that every accepted
    // document re-serializes to valid JSON.
    if (ec != std::errc() || ptr != last || !std::isfinite(d)) {
      return error(ErrorKind::BadNumber, start);
    }
    out = Value(d);
    return true;
  }

  static int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  // Reads the 4 hex digits after "\u"; pos_ points at the first digit.
  bool read_hex4(std::size_t escape_at, unsigned& code) {
    code = 0;
    for (int i = 0; i < 4; ++i) {
      if (at_end()) return error(ErrorKind::UnterminatedString, string_start_);
      const int h = hex_value(peek());
      if (h < 0) return error(ErrorKind::BadEscape, escape_at);
      code = code * 16 + static_cast<unsigned>(h);
      ++pos_;
    }
    return true;
  }

  static void append_utf8(std::string& s, unsigned cp) {
    if (cp < 0x80) {
      s += static_cast<char>(cp);
    } else if (cp < 0x800) {
      s += static_cast<char>(0xC0 | (cp >> 6));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      s += static_cast<char>(0xE0 | (cp >> 12));
      s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      s += static_cast<char>(0xF0 | (cp >> 18));
      s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      s += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  bool parse_string(std::string& out) {
    string_start_ = pos_;
    ++pos_;  // opening quote
    while (true) {
      if (at_end()) return error(ErrorKind::UnterminatedString, string_start_);
      const char c = peek();
      if (c == '"') {
        ++pos_;
        return true;
      }
      if (static_cast<unsigned char>(c) < 0x20) return error(ErrorKind::UnexpectedToken, pos_);
      if (c != '\\') {
        out += c;
        ++pos_;
        continue;
      }
      const std::size_t escape_at = pos_;
      ++pos_;
      if (at_end()) return error(ErrorKind::UnterminatedString, string_start_);
      const char e = peek();
      ++pos_;
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case '/': out += '/'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        case 't': out += '\t'; break;
        case 'u': {
          unsigned code = 0;
          if (!read_hex4(escape_at, code)) return false;
          if (code >= 0xD800 && code <= 0xDBFF && pos_ + 1 < text_.size() &&
              text_[pos_] == '\\' && text_[pos_ + 1] == 'u') {
            // Possible surrogate pair; a lone surrogate is kept as is.
            const std::size_t save = pos_;
            const std::size_t low_at = pos_;
            pos_ += 2;
            unsigned low = 0;
            if (!read_hex4(low_at, low)) return false;
            if (low >= 0xDC00 && low <= 0xDFFF) {
              code = 0x10000 + ((code - 0xD800) << 10) + (low - 0xDC00);
            } else {
              pos_ = save;
            }
          }
          append_utf8(out, code);
          break;
        }
        default:
          return error(ErrorKind::BadEscape, escape_at);
      }
    }
  }

  bool parse_array(Value& out, int depth) {
    if (depth > max_depth_) return error(ErrorKind::DepthExceeded, pos_);
    ++pos_;
    Value arr = Value::array();
    skip_ws();
    if (!at_end() && peek() == ']') {
      ++pos_;
      out = std::move(arr);
      return true;
    }
    while (true) {
      skip_ws();
      Value item;
      if (!parse_value(item, depth)) return false;
      arr.push_back(std::move(item));
      skip_ws();
      if (at_end()) return error(ErrorKind::UnexpectedToken, pos_);
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        out = std::move(arr);
        return true;
      }
      return error(ErrorKind::UnexpectedToken, pos_);
    }
  }

  bool parse_object(Value& out, int depth) {
    if (depth > max_depth_) return error(ErrorKind::DepthExceeded, pos_);
    ++pos_;
    Value obj = Value::object();
    skip_ws();
    if (!at_end() && peek() == '}') {
      ++pos_;
      out = std::move(obj);
      return true;
    }
    while (true) {
      skip_ws();
      if (at_end() || peek() != '"') return error(ErrorKind::UnexpectedToken, pos_);
      std::string key;
      if (!parse_string(key)) return false;
      skip_ws();
      if (at_end() || peek() != ':') return error(ErrorKind::UnexpectedToken, pos_);
      ++pos_;
      skip_ws();
      Value v;
      if (!parse_value(v, depth)) return false;
      if (obj.find(key) != nullptr) duplicates_ = true;
      obj.set(std::move(key), std::move(v));
      skip_ws();
      if (at_end()) return error(ErrorKind::UnexpectedToken, pos_);
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == '}') {
        ++pos_;
        out = std::move(obj);
        return true;
      }
      return error(ErrorKind::UnexpectedToken, pos_);
    }
  }

  std::string_view text_;
  int max_depth_;
  std::size_t pos_ = 0;
  std::size_t string_start_ = 0;
  bool duplicates_ = false;
  Failure failure_{ErrorKind::UnexpectedToken, 0};
};

void serialize_into(std::string& out, const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: out += "null"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case Value::Kind::Number: out += format_number(v.as_number()); break;
    case Value::Kind::String: out += quote(v.as_string()); break;
    case Value::Kind::Array: {
      out += '[';
      bool first = true;
      for (const auto& item : v.items()) {
        if (!first) out += ',';
        first = false;
        serialize_into(out, item);
      }
      out += ']';
      break;
    }
    case Value::Kind::Object: {
      out += '{';
      bool first = true;
      for (const auto& [k, item] : v.members()) {
        if (!first) out += ',';
        first = false;
        out += quote(k);
        out += ':';
        serialize_into(out, item);
      }
      out += '}';
      break;
    }
  }
}

std::string_view trim(std::string_view s) {
  const auto ws = std::string_view(" \t\r\n");
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

ParseOutcome parse_strict(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).run();
}

std::string format_number(double d) {
  if (d == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  if (ec != std::errc()) return "null";
  return std::string(buf, ptr);
}

std::string quote(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          static const char* hex = "0123456789abcdef";
          out += "\\u00";
          out += hex[(c >> 4) & 0xF];
          out += hex[c & 0xF];
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

std::string serialize(const Value& v) {
  std::string out;
  serialize_into(out, v);
  return out;
}

Candidate extract_candidate(std::string_view completion) {
  Candidate c;
  c.mentions_json = completion.find("json") != std::string_view::npos;
  const auto open = completion.find("```");
  if (open != std::string_view::npos) {
    std::size_t body = open + 3;
    std::string_view info;
    const auto newline = completion.find('\n', body);
    const auto next_tick = completion.find('`', body);
    if (newline != std::string_view::npos && (next_tick == std::string_view::npos || newline < next_tick)) {
      info = trim(completion.substr(body, newline - body));
      body = newline + 1;
    }
    const auto close = completion.find("```", body);
    if (close != std::string_view::npos) {
      c.has_fence = true;
      std::string tag(info);
      for (auto& ch : tag) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      c.fence_tagged_json = tag == "json";
      c.text = std::string(trim(completion.substr(body, close - body)));
      return c;
    }
  }
  c.text = std::string(trim(completion));
  return c;
}

}  // namespace rlstruct::json
