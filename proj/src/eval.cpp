#include "rlstruct/eval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "rlstruct/errors.hpp"

namespace rlstruct {

int stub_judge_score(double f1) {
  const double x = std::floor(5.0 * f1 + 0.5);
  return static_cast<int>(std::clamp(x, 1.0, 5.0));
}

int StubJudge::score(const std::string& completion, const json::Value& truth) {
  return stub_judge_score(reward_correct(completion, truth));
}

int UnavailableJudge::score(const std::string&, const json::Value&) {
  throw JudgeUnavailable("no judge endpoint configured");
}

MetricsReport score_samples(const Schema& schema, const std::vector<EvalSample>& samples, const RewardConfig& reward,
                            JudgeAdapter* judge) {
  if (samples.empty()) throw EmptyCorpus("evaluation corpus is empty");
  MetricsReport rep;
  rep.n_samples = samples.size();
  rep.judge_enabled = judge != nullptr;
  for (const auto& s : samples) {
    SampleRecord r;
    r.instance_id = s.instance_id;
    r.sample_index = s.sample_index;
    r.completion = s.completion;
    r.reward = reward_total(s.completion, schema, &s.truth, reward);
    if (rep.judge_enabled) {
      try {
        r.judge = judge->score(s.completion, s.truth);
      } catch (const JudgeUnavailable&) {
        rep.judge_enabled = false;
      }
    }
    rep.samples.push_back(std::move(r));
  }

  const double fmt_max = reward.format_md_bonus + reward.format_json_bonus;
  std::size_t parsed = 0;
  double halluc = 0.0;
  for (auto& r : rep.samples) {
    const double f1 = r.reward.r_correct;
    if (!rep.judge_enabled) r.judge.reset();
    r.content = rep.judge_enabled ? 0.4 * f1 + 0.6 * (static_cast<double>(*r.judge) / 5.0) : f1;
    rep.json_validity += r.reward.r_valid;
    rep.structural_accuracy += r.reward.r_struct;
    rep.format_consistency += fmt_max > 0.0 ? r.reward.r_format / fmt_max : 0.0;
    rep.schema_compliance += r.reward.flags.key_path_recall;
    rep.content_accuracy += r.content;
    rep.mean_total_reward += r.reward.total;
    if (r.reward.r_valid == 1.0) {
      ++parsed;
      halluc += r.reward.flags.hallucination_rate;
    }
  }
  const double n = static_cast<double>(rep.n_samples);
  rep.json_validity /= n;
  rep.structural_accuracy /= n;
  rep.format_consistency /= n;
  rep.schema_compliance /= n;
  rep.content_accuracy /= n;
  rep.mean_total_reward /= n;
  rep.hallucination_rate = parsed > 0 ? halluc / static_cast<double>(parsed) : 0.0;
  rep.gap_estimate = 1.0 - rep.json_validity;
  return rep;
}

MetricsReport evaluate(const PolicyParams& params, const Vocab& vocab, const Schema& schema,
                       const std::vector<TaskInstance>& corpus, const EvalOptions& options) {
  if (corpus.empty()) throw EmptyCorpus("evaluation corpus is empty");
  if (options.samples_per_prompt < 1) throw ConfigError("samples_per_prompt must be positive");
  const CompiledPolicy compiled(params);
  const std::size_t per = static_cast<std::size_t>(options.samples_per_prompt);
  const std::size_t n = corpus.size() * per;
  std::vector<EvalSample> samples(n);
  SampleOptions so;
  so.temperature = options.temperature;
  so.max_tokens = options.max_tokens;
  so.eos = vocab.eos();

  auto run = [&](std::size_t i) {
    const TaskInstance& inst = corpus[i / per];
    const std::vector<int> prompt = prompt_ids(inst, vocab);
    std::mt19937_64 rng(stream_seed(options.seed, {static_cast<std::uint64_t>(inst.id), i % per}));
    const Completion c = sample(compiled, vocab, prompt, so, rng);
    samples[i] = EvalSample{inst.id, static_cast<int>(i % per), c.text, inst.ground_truth};
  };
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < w; ++t) {
      threads.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += w) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return score_samples(schema, samples, options.reward, options.judge);
}

MetricsReport evaluate(const Checkpoint& checkpoint, const std::vector<TaskInstance>& corpus,
                       const EvalOptions& options) {
  if (!checkpoint.schema) throw CheckpointError("checkpoint carries no schema");
  return evaluate(checkpoint.params, checkpoint.vocab, *checkpoint.schema, corpus, options);
}

json::Value report_to_value(const MetricsReport& r, bool include_samples) {
  json::Value v = json::Value::object();
  json::Value m = json::Value::object();
  m.set("structural_accuracy", r.structural_accuracy);
  m.set("json_validity", r.json_validity);
  m.set("format_consistency", r.format_consistency);
  m.set("schema_compliance", r.schema_compliance);
  m.set("content_accuracy", r.content_accuracy);
  m.set("hallucination_rate", r.hallucination_rate);
  m.set("gap_estimate", r.gap_estimate);
  v.set("metrics", std::move(m));
  v.set("n_samples", static_cast<double>(r.n_samples));
  v.set("judge", r.judge_enabled ? "enabled" : "judge-disabled");
  v.set("mean_total_reward", r.mean_total_reward);
  if (include_samples) {
    json::Value arr = json::Value::array();
    for (const auto& s : r.samples) {
      json::Value o = json::Value::object();
      o.set("instance_id", s.instance_id);
      o.set("sample_index", s.sample_index);
      o.set("completion", s.completion);
      o.set("r_valid", s.reward.r_valid);
      o.set("r_struct", s.reward.r_struct);
      o.set("r_format", s.reward.r_format);
      o.set("r_correct", s.reward.r_correct);
      o.set("r_length", s.reward.r_length);
      o.set("total", s.reward.total);
      o.set("content", s.content);
      o.set("judge", s.judge ? json::Value(*s.judge) : json::Value(nullptr));
      arr.push_back(std::move(o));
    }
    v.set("samples", std::move(arr));
  }
  return v;
}

std::string report_csv_header() {
  return "label,structural_accuracy,json_validity,format_consistency,schema_compliance,content_accuracy,"
         "hallucination_rate,gap_estimate,n_samples,judge";
}

std::string report_csv_row(const std::string& label, const MetricsReport& r) {
  std::string out = label;
  for (double x : {r.structural_accuracy, r.json_validity, r.format_consistency, r.schema_compliance,
                   r.content_accuracy, r.hallucination_rate, r.gap_estimate}) {
    out += "," + json::format_number(x);
  }
  out += "," + std::to_string(r.n_samples) + "," + (r.judge_enabled ? "enabled" : "judge-disabled");
  return out;
}

}  // namespace rlstruct
