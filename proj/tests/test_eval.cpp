#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "rlstruct/errors.hpp"
#include "rlstruct/eval.hpp"

using namespace rlstruct;

namespace {

const Schema& abc_schema() {
  static const Schema s = parse_schema(
      R"({"name":"abc","version":1,"root":{"kind":"object","properties":{"a":{"kind":"string"},"b":{"kind":"string"},"c":{"kind":"string"}},"required":["a","b","c"]}})");
  return s;
}

json::Value value(const std::string& text) { return *json::parse_strict(text).value; }

EvalSample sample(int id, const std::string& completion, const std::string& truth) {
  return EvalSample{id, 0, completion, value(truth)};
}

const std::string kTruth = R"({"a":"p q","b":"r","c":"s"})";

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("exact ground truths score 1 everywhere") {
    const auto rep = score_samples(abc_schema(), {sample(0, "```json\n" + kTruth + "\n```", kTruth),
                                                  sample(1, "```json\n" + kTruth + "\n```", kTruth)});
    CHECK(rep.json_validity == 1.0);
    CHECK(rep.structural_accuracy == 1.0);
    CHECK(rep.format_consistency == 1.0);
    CHECK(rep.schema_compliance == 1.0);
    CHECK(rep.content_accuracy == 1.0);
    CHECK(rep.hallucination_rate == 0.0);
    CHECK(rep.gap_estimate == 0.0);
    CHECK(rep.n_samples == 2);
  }

  TEST_CASE("a missing and an invented key") {
    const auto rep = score_samples(abc_schema(), {sample(0, R"({"a":"p q","b":"r","x":"s"})", kTruth)});
    CHECK(rep.schema_compliance == 2.0 / 3.0);
    CHECK(rep.hallucination_rate == 1.0 / 3.0);
    CHECK(rep.structural_accuracy == 0.0);
    CHECK(rep.json_validity == 1.0);
  }

  TEST_CASE("half the content tokens") {
    const auto rep = score_samples(abc_schema(), {sample(0, R"({"a":"u v","b":"","c":""})", R"({"a":"v w","b":"","c":""})")});
    CHECK(rep.content_accuracy == 0.5);
    CHECK_FALSE(rep.judge_enabled);
  }

  TEST_CASE("a policy that always emits an empty object") {
    std::vector<EvalSample> s;
    for (int i = 0; i < 5; ++i) s.push_back(sample(i, "{}", kTruth));
    const auto rep = score_samples(abc_schema(), s);
    CHECK(rep.json_validity == 1.0);
    CHECK(rep.gap_estimate == 0.0);
    CHECK(rep.schema_compliance == 0.0);
    CHECK(rep.structural_accuracy == 0.0);
    CHECK(rep.hallucination_rate == 0.0);
  }

  TEST_CASE("gap is one minus validity") {
    const auto rep = score_samples(abc_schema(), {sample(0, "{", kTruth), sample(1, kTruth, kTruth), sample(2, "x", kTruth)});
    CHECK(rep.json_validity == 1.0 / 3.0);
    CHECK(rep.gap_estimate == 1.0 - rep.json_validity);
    CHECK(rep.structural_accuracy <= rep.json_validity);
  }

  TEST_CASE("stub judge") {
    CHECK(stub_judge_score(1.0) == 5);
    CHECK(stub_judge_score(0.5) == 3);
    CHECK(stub_judge_score(0.0) == 1);
    CHECK(stub_judge_score(0.29) == 1);
    CHECK(stub_judge_score(0.3) == 2);
    StubJudge judge;
    const auto rep = score_samples(abc_schema(), {sample(0, R"({"a":"u v","b":"","c":""})", R"({"a":"v w","b":"","c":""})")},
                                   RewardConfig{}, &judge);
    CHECK(rep.judge_enabled);
    CHECK(rep.samples[0].judge == 3);
    CHECK(rep.content_accuracy == doctest::Approx(0.4 * 0.5 + 0.6 * 3.0 / 5.0).epsilon(1e-15));
  }

  TEST_CASE("unavailable judge falls back to token F1") {
    UnavailableJudge judge;
    CHECK_THROWS_AS(judge.score("{}", value("{}")), JudgeUnavailable);
    const auto rep = score_samples(abc_schema(), {sample(0, R"({"a":"u v","b":"","c":""})", R"({"a":"v w","b":"","c":""})")},
                                   RewardConfig{}, &judge);
    CHECK_FALSE(rep.judge_enabled);
    CHECK(rep.content_accuracy == 0.5);
    CHECK(report_to_value(rep, false).find("judge")->as_string() == "judge-disabled");
  }

  TEST_CASE("appending a perfect sample never hurts") {
    std::vector<EvalSample> s{sample(0, R"({"a":"u v","b":"r","x":"s"})", kTruth), sample(1, "{", kTruth),
                              sample(2, "```\n{\"a\":\"p\"}\n```", kTruth)};
    const auto before = score_samples(abc_schema(), s);
    s.push_back(sample(3, "```json\n" + kTruth + "\n```", kTruth));
    const auto after = score_samples(abc_schema(), s);
    CHECK(after.json_validity >= before.json_validity);
    CHECK(after.structural_accuracy >= before.structural_accuracy);
    CHECK(after.format_consistency >= before.format_consistency);
    CHECK(after.schema_compliance >= before.schema_compliance);
    CHECK(after.content_accuracy >= before.content_accuracy);
    CHECK(after.hallucination_rate <= before.hallucination_rate);
  }

  TEST_CASE("structure equals compliance on all-or-nothing corpora") {
    const auto rep = score_samples(abc_schema(), {sample(0, kTruth, kTruth), sample(1, "{}", kTruth), sample(2, kTruth, kTruth)});
    CHECK(rep.structural_accuracy == rep.schema_compliance);
  }

  TEST_CASE("empty corpora are rejected") {
    CHECK_THROWS_AS(score_samples(abc_schema(), {}), EmptyCorpus);
  }

  TEST_CASE("policy evaluation is deterministic across workers") {
    const Schema s = load_schema_file(std::string(RLSTRUCT_SOURCE_DIR) + "/schemas/flat_qa.json");
    const Schema schemas[] = {s};
    const Vocab vocab = task_vocab(schemas);
    PolicyConfig pc;
    pc.vocab_size = static_cast<int>(vocab.size());
    pc.embed_dim = 8;
    pc.layers = 1;
    pc.mlp_dim = 8;
    pc.context = 64;
    const PolicyParams params = PolicyParams::init(pc);
    const auto corpus = generate(s, 1, 6, &vocab);
    EvalOptions opt;
    opt.max_tokens = 16;
    opt.samples_per_prompt = 2;
    const auto a = evaluate(params, vocab, s, corpus, opt);
    opt.workers = 3;
    const auto b = evaluate(params, vocab, s, corpus, opt);
    REQUIRE(a.n_samples == 12);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].completion == b.samples[i].completion);
    CHECK(json::serialize(report_to_value(a)) == json::serialize(report_to_value(b)));
    CHECK(a.gap_estimate == 1.0 - a.json_validity);
    CHECK_THROWS_AS(evaluate(params, vocab, s, {}, opt), EmptyCorpus);
  }

  TEST_CASE("csv row matches header width") {
    const auto rep = score_samples(abc_schema(), {sample(0, kTruth, kTruth)});
    const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
    CHECK(commas(report_csv_header()) == commas(report_csv_row("full", rep)));
  }
}
