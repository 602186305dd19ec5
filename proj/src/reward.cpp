#include "rlstruct/reward.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "rlstruct/errors.hpp"

namespace rlstruct {

void RewardConfig::validate() const {
  for (double w : {w_valid, w_struct, w_format, w_correct, w_length}) {
    if (!(w >= 0.0)) throw ConfigError("reward weights must be non-negative");
  }
  if (l_min > l_max) throw ConfigError("reward.l_min exceeds reward.l_max");
}

double RewardConfig::theoretical_max() const {
  return w_valid * 1.0 + w_struct * 1.0 + w_format * (format_md_bonus + format_json_bonus) + w_correct * 1.0 +
         w_length * std::max(0.0, length_penalty);
}

double weighted_total(const RewardBreakdown& b) {
  const RewardConfig& c = b.config;
  return c.w_valid * b.r_valid + c.w_struct * b.r_struct + c.w_format * b.r_format + c.w_correct * b.r_correct +
         c.w_length * b.r_length;
}

std::size_t char_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

namespace {

void split_words(const std::string& s, std::vector<std::string>& out) {
  std::string cur;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    // Bytes >= 0x80 belong to multi-byte code points and are kept as word
    // characters.
    if (std::isalnum(u) || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
}

void collect_tokens(const json::Value& v, std::vector<std::string>& out) {
  switch (v.kind()) {
    case json::Value::Kind::Null: break;
    case json::Value::Kind::Bool: out.push_back(v.as_bool() ? "true" : "false"); break;
    case json::Value::Kind::Number: out.push_back(json::format_number(v.as_number())); break;
    case json::Value::Kind::String: split_words(v.as_string(), out); break;
    case json::Value::Kind::Array:
      for (const auto& item : v.items()) collect_tokens(item, out);
      break;
    case json::Value::Kind::Object:
      for (const auto& [_, child] : v.members()) collect_tokens(child, out);
      break;
  }
}

json::ParseOutcome parse_candidate(std::string_view completion) {
  return json::parse_strict(json::extract_candidate(completion).text);
}

double format_score(const json::Candidate& c, const RewardConfig& cfg) {
  return cfg.format_md_bonus * (c.has_fence ? 1.0 : 0.0) + cfg.format_json_bonus * (c.fence_tagged_json ? 1.0 : 0.0);
}

double length_score(std::size_t len, const RewardConfig& cfg) {
  return (len < cfg.l_min || len > cfg.l_max) ? cfg.length_penalty : 0.0;
}

}  // namespace

std::vector<std::string> content_tokens(const json::Value& v) {
  std::vector<std::string> out;
  collect_tokens(v, out);
  return out;
}

double token_f1(const std::vector<std::string>& candidate, const std::vector<std::string>& truth) {
  if (candidate.empty() && truth.empty()) return 1.0;
  if (candidate.empty() || truth.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : truth) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : candidate) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(candidate.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(truth.size());
  return 2.0 * precision * recall / (precision + recall);
}

double reward_valid(std::string_view completion) { return parse_candidate(completion).valid ? 1.0 : 0.0; }

double reward_struct(std::string_view completion, const Schema& schema) {
  const auto parsed = parse_candidate(completion);
  if (!parsed.valid) return 0.0;
  return check_conformance(schema, *parsed.value).complete() ? 1.0 : 0.0;
}

double reward_format(std::string_view completion, const RewardConfig& cfg) {
  return format_score(json::extract_candidate(completion), cfg);
}

double reward_correct(std::string_view completion, const json::Value& truth) {
  const auto parsed = parse_candidate(completion);
  if (!parsed.valid) return 0.0;
  return token_f1(content_tokens(*parsed.value), content_tokens(truth));
}

double reward_length(std::string_view completion, const RewardConfig& cfg) {
  return length_score(char_length(completion), cfg);
}

RewardBreakdown reward_total(std::string_view completion, const Schema& schema, const json::Value* truth,
                             const RewardConfig& cfg) {
  RewardBreakdown b;
  b.config = cfg;
  RewardFlags& f = b.flags;

  const json::Candidate cand = json::extract_candidate(completion);
  f.has_fence = cand.has_fence;
  f.fence_tagged_json = cand.fence_tagged_json;
  f.mentions_json = cand.mentions_json;
  f.has_ground_truth = truth != nullptr;
  f.length = char_length(completion);

  const json::ParseOutcome parsed = json::parse_strict(cand.text);
  f.duplicate_keys = parsed.duplicate_keys;
  if (parsed.valid) {
    b.r_valid = 1.0;
    const ConformanceReport conf = check_conformance(schema, *parsed.value);
    b.r_struct = conf.complete() ? 1.0 : 0.0;
    f.missing_key_paths = conf.missing;
    f.hallucinated_key_paths = conf.hallucinated;
    f.key_path_recall = conf.recall();
    f.hallucination_rate = conf.hallucination();
    if (truth != nullptr) b.r_correct = token_f1(content_tokens(*parsed.value), content_tokens(*truth));
  } else {
    f.parse_error = parsed.error_kind;
    f.parse_error_offset = parsed.error_offset;
    f.missing_key_paths = required_key_paths(schema);
  }
  b.r_format = format_score(cand, cfg);
  b.r_length = length_score(f.length, cfg);
  b.total = weighted_total(b);
  return b;
}

}  // namespace rlstruct
