#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json_oracle.hpp"
#include "rlstruct/json.hpp"

using namespace rlstruct;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream b;
  b << in.rdbuf();
  return b.str();
}

const fs::path kFixtures = fs::path(RLSTRUCT_SOURCE_DIR) / "tests" / "fixtures" / "json";

}  // namespace

TEST_SUITE("json") {
  TEST_CASE("small documents") {
    CHECK(json::parse_strict("{}").valid);
    CHECK(json::parse_strict("  [1, 2.5, \"x\", true, null]  ").valid);
    CHECK(json::parse_strict("42").valid);

    const auto trailing = json::parse_strict("{\"a\":1,}");
    CHECK_FALSE(trailing.valid);
    CHECK(*trailing.error_kind == json::ErrorKind::UnexpectedToken);
    CHECK(*trailing.error_offset == 7);

    const auto brace = json::parse_strict("{ \"item\": \"Chili\", \"amount\": \"2 pcs\" ], ...");
    CHECK_FALSE(brace.valid);
    CHECK(*brace.error_kind == json::ErrorKind::UnexpectedToken);

    const auto open = json::parse_strict("{\"a\":\"b");
    CHECK(*open.error_kind == json::ErrorKind::UnterminatedString);
    CHECK(*open.error_offset == 5);

    const auto empty = json::parse_strict("");
    CHECK(*empty.error_kind == json::ErrorKind::UnexpectedToken);
    CHECK(*empty.error_offset == 0);
  }

  TEST_CASE("outcome invariants") {
    for (std::string_view s : {"{", "}", "[1,]", "\"\\q\"", "1e999", "{} x", "{\"a\":1}"}) {
      const auto o = json::parse_strict(s);
      CHECK(o.valid == o.value.has_value());
      CHECK(o.valid != o.error_kind.has_value());
      CHECK(o.valid != o.error_offset.has_value());
      if (!o.valid) CHECK(*o.error_offset <= s.size());
    }
  }

  TEST_CASE("duplicate keys keep the last value and set the flag") {
    const auto o = json::parse_strict("{\"a\":1,\"b\":2,\"a\":3}");
    REQUIRE(o.valid);
    CHECK(o.duplicate_keys);
    CHECK(o.value->find("a")->as_number() == 3);
    CHECK(o.value->members().size() == 2);
  }

  TEST_CASE("depth cap") {
    const std::string ok = std::string(64, '[') + std::string(64, ']');
    const std::string deep = std::string(65, '[') + std::string(65, ']');
    CHECK(json::parse_strict(ok).valid);
    const auto o = json::parse_strict(deep);
    CHECK_FALSE(o.valid);
    CHECK(*o.error_kind == json::ErrorKind::DepthExceeded);
    const std::string huge(200000, '[');
    CHECK(*json::parse_strict(huge).error_kind == json::ErrorKind::DepthExceeded);
  }

  TEST_CASE("valid fixtures parse and round-trip") {
    int n = 0;
    for (const auto& e : fs::directory_iterator(kFixtures / "valid")) {
      const std::string text = slurp(e.path());
      const auto o = json::parse_strict(text);
      INFO(e.path().filename().string());
      REQUIRE(o.valid);
      CHECK(oracle::valid_json(text));
      const auto again = json::parse_strict(json::serialize(*o.value));
      REQUIRE(again.valid);
      CHECK(*again.value == *o.value);
      ++n;
    }
    CHECK(n >= 10);
  }

  TEST_CASE("invalid fixtures fail with the kind named in the file") {
    int n = 0;
    for (const auto& e : fs::directory_iterator(kFixtures / "invalid")) {
      const std::string name = e.path().stem().string();
      const std::string kind = name.substr(0, name.find('-'));
      const std::string text = slurp(e.path());
      const auto o = json::parse_strict(text);
      INFO(name);
      REQUIRE_FALSE(o.valid);
      CHECK(std::string(json::to_string(*o.error_kind)) == kind);
      CHECK_FALSE(oracle::valid_json(text));
      ++n;
    }
    CHECK(n >= 10);
  }

  TEST_CASE("serializer uses shortest round-trip numbers") {
    CHECK(json::format_number(0.1) == "0.1");
    CHECK(json::format_number(3) == "3");
    CHECK(json::format_number(2.9) == "2.9");
    CHECK(json::format_number(1e21) == "1e+21");
    for (double d : {0.1 + 0.2, 1.0 / 3.0, -2.5e-300, 123456789.125}) {
      const auto o = json::parse_strict(json::format_number(d));
      REQUIRE(o.valid);
      CHECK(o.value->as_number() == d);
    }
  }

  TEST_CASE("candidate extraction") {
    auto c = json::extract_candidate("```json\n{}\n```");
    CHECK(c.text == "{}");
    CHECK(c.has_fence);
    CHECK(c.fence_tagged_json);
    c = json::extract_candidate("{}");
    CHECK(c.text == "{}");
    CHECK_FALSE(c.has_fence);
    CHECK_FALSE(c.fence_tagged_json);
    c = json::extract_candidate("```\n{\"a\":1}\n```");
    CHECK(c.text == "{\"a\":1}");
    CHECK(c.has_fence);
    CHECK_FALSE(c.fence_tagged_json);
    c = json::extract_candidate("intro\n```JSON\n[1]\n```\n```json\n[2]\n```");
    CHECK(c.text == "[1]");
    CHECK(c.fence_tagged_json);
    c = json::extract_candidate("```json\n{\"a\":1}");
    CHECK_FALSE(c.has_fence);
    CHECK(c.mentions_json);
  }

  TEST_CASE("all strings up to length 4 over the symbol alphabet agree with the oracle") {
    const std::string alphabet = "{}[]:,\"1a ";
    std::string s;
    long cases = 0, disagreements = 0;
    for (int len = 1; len <= 4; ++len) {
      std::vector<int> idx(static_cast<std::size_t>(len), 0);
      for (;;) {
        s.clear();
        for (int i : idx) s += alphabet[static_cast<std::size_t>(i)];
        ++cases;
        if (json::parse_strict(s).valid != oracle::valid_json(s)) ++disagreements;
        int k = len - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == 10) idx[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
      }
    }
    CHECK(cases == 11110);
    CHECK(disagreements == 0);
  }
}
