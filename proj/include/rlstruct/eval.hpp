#pragma once

// Metric suite over a frozen policy and a task corpus.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlstruct/policy.hpp"
#include "rlstruct/reward.hpp"
#include "rlstruct/schema.hpp"
#include "rlstruct/taskgen.hpp"

namespace rlstruct {

// Content judge scoring a completion against the ground truth on 1..5.
class JudgeAdapter {
 public:
  virtual ~JudgeAdapter() = default;
  // Throws JudgeUnavailable when the judge cannot be reached.
  virtual int score(const std::string& completion, const json::Value& truth) = 0;
};

// Deterministic stand-in: round-half-up of 5 * token F1, clamped to 1..5.
class StubJudge : public JudgeAdapter {
 public:
  int score(const std::string& completion, const json::Value& truth) override;
};

// Always throws JudgeUnavailable.
class UnavailableJudge : public JudgeAdapter {
 public:
  int score(const std::string& completion, const json::Value& truth) override;
};

int stub_judge_score(double f1);

struct EvalSample {
  int instance_id = 0;
  int sample_index = 0;
  std::string completion;
  json::Value truth;
};

struct SampleRecord {
  int instance_id = 0;
  int sample_index = 0;
  std::string completion;
  RewardBreakdown reward;
  double content = 0.0;
  std::optional<int> judge;
};

struct MetricsReport {
  double structural_accuracy = 0.0;
  double json_validity = 0.0;
  double format_consistency = 0.0;
  double schema_compliance = 0.0;
  double content_accuracy = 0.0;
  double hallucination_rate = 0.0;
  double gap_estimate = 0.0;
  std::size_t n_samples = 0;
  bool judge_enabled = false;
  double mean_total_reward = 0.0;
  std::vector<SampleRecord> samples;
};

// Scores already generated completions. Throws EmptyCorpus.
MetricsReport score_samples(const Schema& schema, const std::vector<EvalSample>& samples,
                            const RewardConfig& reward = {}, JudgeAdapter* judge = nullptr);

struct EvalOptions {
  double temperature = 1.0;
  int samples_per_prompt = 1;
  int max_tokens = 64;
  std::uint64_t seed = 0;
  int workers = 1;
  RewardConfig reward;
  JudgeAdapter* judge = nullptr;
};

// Samples from the policy on every instance and scores the results.
// Throws EmptyCorpus.
MetricsReport evaluate(const PolicyParams& params, const Vocab& vocab, const Schema& schema,
                       const std::vector<TaskInstance>& corpus, const EvalOptions& options = {});
MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<TaskInstance>& corpus,
                       const EvalOptions& options = {});

// Structured report (metrics plus per-sample records).
json::Value report_to_value(const MetricsReport& report, bool include_samples = true);
// Flat CSV for cross-run tables.
std::string report_csv_header();
std::string report_csv_row(const std::string& label, const MetricsReport& report);

}  // namespace rlstruct
