#include "json_oracle.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace oracle {

namespace {

struct Cursor {
  std::string_view s;
  std::size_t i = 0;
  int depth = 0;
  int max_depth = 64;

  bool done() const { return i >= s.size(); }
  char peek() const { return done() ? '\0' : s[i]; }
  void ws() {
    while (!done() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
  }
  bool eat(char c) {
    if (peek() != c || done()) return false;
    ++i;
    return true;
  }
  bool literal(std::string_view word) {
    if (s.substr(i, word.size()) != word) return false;
    i += word.size();
    return true;
  }
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) { return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F'); }

bool value(Cursor& c);

bool string_token(Cursor& c) {
  if (!c.eat('"')) return false;
  while (!c.done()) {
    const auto ch = static_cast<unsigned char>(c.s[c.i]);
    if (ch == '"') {
      ++c.i;
      return true;
    }
    if (ch < 0x20) return false;
    if (ch == '\\') {
      ++c.i;
      if (c.done()) return false;
      const char e = c.s[c.i++];
      if (e == 'u') {
        for (int k = 0; k < 4; ++k) {
          if (c.done() || !is_hex(c.s[c.i])) return false;
          ++c.i;
        }
      } else if (std::string_view("\"\\/bfnrt").find(e) == std::string_view::npos) {
        return false;
      }
      continue;
    }
    ++c.i;
  }
  return false;
}

bool number_token(Cursor& c) {
  const std::size_t start = c.i;
  c.eat('-');
  if (c.eat('0')) {
  } else if (!c.done() && c.peek() >= '1' && c.peek() <= '9') {
    while (!c.done() && is_digit(c.peek())) ++c.i;
  } else {
    return false;
  }
  if (c.eat('.')) {
    if (c.done() || !is_digit(c.peek())) return false;
    while (!c.done() && is_digit(c.peek())) ++c.i;
  }
  if (c.peek() == 'e' || c.peek() == 'E') {
    ++c.i;
    if (c.peek() == '+' || c.peek() == '-') ++c.i;
    if (c.done() || !is_digit(c.peek())) return false;
    while (!c.done() && is_digit(c.peek())) ++c.i;
  }
  // Magnitudes beyond the double range are rejected.
  const std::string text(c.s.substr(start, c.i - start));
  return std::isfinite(std::strtod(text.c_str(), nullptr));
}

bool container(Cursor& c, char open, char close, bool keyed) {
  if (!c.eat(open)) return false;
  if (++c.depth > c.max_depth) return false;
  c.ws();
  if (c.eat(close)) {
    --c.depth;
    return true;
  }
  for (;;) {
    c.ws();
    if (keyed) {
      if (!string_token(c)) return false;
      c.ws();
      if (!c.eat(':')) return false;
      c.ws();
    }
    if (!value(c)) return false;
    c.ws();
    if (c.eat(close)) {
      --c.depth;
      return true;
    }
    if (!c.eat(',')) return false;
  }
}

bool value(Cursor& c) {
  switch (c.peek()) {
    case '{': return container(c, '{', '}', true);
    case '[': return container(c, '[', ']', false);
    case '"': return string_token(c);
    case 't': return c.literal("true");
    case 'f': return c.literal("false");
    case 'n': return c.literal("null");
    default: return !c.done() && (c.peek() == '-' || is_digit(c.peek())) && number_token(c);
  }
}

}  // namespace

bool valid_json(std::string_view text, int max_depth) {
  Cursor c{text, 0, 0, max_depth};
  c.ws();
  if (!value(c)) return false;
  c.ws();
  return c.done();
}

}  // namespace oracle
