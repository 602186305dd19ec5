#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>

#include "naive_scorer.hpp"
#include "rlstruct/errors.hpp"
#include "rlstruct/reward.hpp"

using namespace rlstruct;

namespace {

const std::string kRoot = RLSTRUCT_SOURCE_DIR;

const Schema& schema(const std::string& name) {
  static std::map<std::string, Schema> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, load_schema_file(kRoot + "/schemas/" + name + ".json")).first;
  return it->second;
}

json::Value value(const std::string& text) { return *json::parse_strict(text).value; }

const std::string kPerfect =
    "```json\n{\"recipe\":\"stew\",\"ingredients\":[{\"item\":\"salt\",\"amount\":2}],\"steps\":[\"boil\"]}\n```";
const std::string kPerfectTruth =
    "{\"recipe\":\"stew\",\"ingredients\":[{\"item\":\"salt\",\"amount\":2}],\"steps\":[\"boil\"]}";

}  // namespace

TEST_SUITE("reward") {
  TEST_CASE("validity") {
    CHECK(reward_valid("{}") == 1.0);
    CHECK(reward_valid("{") == 0.0);
    CHECK(reward_valid("{ \"item\": \"Chili\", \"amount\": \"2 pcs\" ], ...") == 0.0);
  }

  TEST_CASE("structure") {
    const Schema& s = schema("recipe");
    CHECK(reward_struct(kPerfectTruth, s) == 1.0);
    CHECK(reward_struct("{\"recipe\":\"stew\",\"ingredients\":[{\"item\":\"salt\",\"amount\":2}]}", s) == 0.0);
    CHECK(reward_struct("{\"recipe\":\"stew\",", s) == 0.0);
  }

  TEST_CASE("format") {
    CHECK(reward_format("```json\n{}\n```") == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(reward_format("```\n{}\n```") == 0.5);
    CHECK(reward_format("{}") == 0.0);
  }

  TEST_CASE("correctness") {
    CHECK(token_f1({"a", "b"}, {"b", "c"}) == 0.5);
    CHECK(reward_correct("{\"x\":\"a b\"}", value("{\"y\":\"b c\"}")) == 0.5);
    CHECK(reward_correct(kPerfectTruth, value(kPerfectTruth)) == 1.0);
    CHECK(reward_correct("{\"x\":", value("{\"x\":1}")) == 0.0);
    CHECK(content_tokens(value("{\"k\":[\"Hello, World\", 2.50, true, null, -0]}")) ==
          std::vector<std::string>{"hello", "world", "2.5", "true", "0"});
  }

  TEST_CASE("length") {
    CHECK(reward_length(std::string(100, 'x')) == 0.0);
    CHECK(reward_length(std::string(10, 'x')) == -0.1);
    CHECK(reward_length(std::string(513, 'x')) == -0.1);
    CHECK(reward_length(std::string(512, 'x')) == 0.0);
    CHECK(reward_length(std::string(20, 'x')) == 0.0);
    CHECK(char_length("\xc3\xa9t\xc3\xa9") == 3);
  }

  TEST_CASE("totals") {
    const json::Value truth = value(kPerfectTruth);
    const auto perfect = reward_total(kPerfect, schema("recipe"), &truth);
    CHECK(perfect.total == doctest::Approx(2.9).epsilon(1e-12));

    const auto empty = reward_total("", schema("recipe"), &truth);
    CHECK(empty.r_valid == 0.0);
    CHECK(empty.r_struct == 0.0);
    CHECK(empty.r_format == 0.0);
    CHECK(empty.r_correct == 0.0);
    CHECK(empty.r_length == -0.1);
    CHECK(empty.total == doctest::Approx(-0.01).epsilon(1e-12));

    // Missing a required key, unfenced, half the truth tokens.
    const json::Value qa_truth = value("{\"reasoning\":\"b c\",\"answer\":\"\"}");
    const auto partial = reward_total("{\"reasoning\": \"a b\"}", schema("flat_qa"), &qa_truth);
    CHECK(partial.r_valid == 1.0);
    CHECK(partial.r_struct == 0.0);
    CHECK(partial.r_format == 0.0);
    CHECK(partial.r_correct == 0.5);
    CHECK(partial.r_length == 0.0);
    CHECK(partial.total == doctest::Approx(1.25).epsilon(1e-12));
  }

  TEST_CASE("stored total is exactly the weighted sum") {
    const json::Value truth = value(kPerfectTruth);
    RewardConfig cfg;
    cfg.w_valid = 0.3;
    cfg.w_format = 1.7;
    cfg.w_length = 0.9;
    for (const std::string c : {kPerfect, std::string("{}"), std::string("x"), std::string("```\n[1]\n```")}) {
      const auto b = reward_total(c, schema("recipe"), &truth, cfg);
      const double sum =
          cfg.w_valid * b.r_valid + cfg.w_struct * b.r_struct + cfg.w_format * b.r_format +
          cfg.w_correct * b.r_correct + cfg.w_length * b.r_length;
      CHECK(b.total - sum == 0.0);
    }
  }

  TEST_CASE("adding a missing key never lowers the total") {
    const json::Value truth = value(kPerfectTruth);
    const auto without = reward_total("{\"recipe\":\"stew\",\"ingredients\":[{\"item\":\"salt\",\"amount\":2}]}",
                                      schema("recipe"), &truth);
    const auto with = reward_total(kPerfectTruth, schema("recipe"), &truth);
    CHECK(with.total >= without.total);
  }

  TEST_CASE("structural mass dominates semantic mass") {
    const RewardConfig cfg;
    CHECK(cfg.w_valid + cfg.w_struct > cfg.w_correct);
    CHECK(cfg.theoretical_max() == doctest::Approx(2.9).epsilon(1e-12));
  }

  TEST_CASE("config validation") {
    RewardConfig cfg;
    cfg.w_correct = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.l_min = 600;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("fixture corpus agrees with the naive scorer") {
    std::ifstream in(kRoot + "/tests/fixtures/reward/corpus.jsonl");
    REQUIRE(in);
    std::map<std::string, nlohmann::json> docs;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto row = nlohmann::json::parse(line);
      const std::string name = row["schema"];
      if (!docs.count(name)) {
        std::ifstream f(kRoot + "/schemas/" + name + ".json");
        docs[name] = nlohmann::json::parse(f);
      }
      const std::string completion = row["completion"];
      const bool has_truth = row.contains("ground_truth");
      nlohmann::json truth_doc = has_truth ? row["ground_truth"] : nlohmann::json();
      const auto expected = oracle::naive_score(completion, docs[name], has_truth ? &truth_doc : nullptr);

      std::optional<json::Value> truth;
      if (has_truth) truth = value(truth_doc.dump());
      const auto got = reward_total(completion, schema(name), truth ? &*truth : nullptr);
      INFO("line " << n << ": " << completion);
      CHECK(got.r_valid == expected.valid);
      CHECK(got.r_struct == expected.structure);
      CHECK(got.r_format == expected.format);
      CHECK(got.r_length == expected.length);
      CHECK(std::abs(got.r_correct - expected.correct) <= 1e-12);
      CHECK(std::abs(got.total - expected.total) <= 1e-12);
      ++n;
    }
    CHECK(n == 200);
  }
}
