#pragma once

// Hierarchical reward for structured output. A completion is scored on five
// components which are combined as a weighted sum:
//
//   validity  1 if the extracted candidate parses as strict JSON
//   structure 1 if it parses and every required key path is present with a
//             compatible kind
//   format    md bonus for a fenced block plus json bonus for a `json` tag
//   correct   token F1 between candidate values and ground-truth values
//   length    penalty when the character length is outside [l_min, l_max]
//
// Everything here is pure and safe for concurrent use.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlstruct/json.hpp"
#include "rlstruct/schema.hpp"

namespace rlstruct {

struct RewardConfig {
  double w_valid = 1.0;
  double w_struct = 1.0;
  double w_format = 0.5;
  double w_correct = 0.5;
  double w_length = 0.1;
  std::size_t l_min = 20;
  std::size_t l_max = 512;
  double format_md_bonus = 0.5;
  double format_json_bonus = 0.3;
  double length_penalty = -0.1;

  // Throws ConfigError on negative weights or l_min > l_max.
  void validate() const;
  // Best achievable total: every indicator on, F1 = 1, no length penalty.
  double theoretical_max() const;
};

struct RewardFlags {
  std::optional<json::ErrorKind> parse_error;
  std::optional<std::size_t> parse_error_offset;
  bool duplicate_keys = false;
  bool has_fence = false;
  bool fence_tagged_json = false;
  bool mentions_json = false;
  bool has_ground_truth = false;
  std::size_t length = 0;
  std::vector<std::string> missing_key_paths;
  std::vector<std::string> hallucinated_key_paths;
  // Partial credit diagnostic; not part of the reward.
  double key_path_recall = 0.0;
  double hallucination_rate = 0.0;
};

struct RewardBreakdown {
  double r_valid = 0.0;
  double r_struct = 0.0;
  double r_format = 0.0;
  double r_correct = 0.0;
  double r_length = 0.0;
  double total = 0.0;
  RewardConfig config;
  RewardFlags flags;
};

// Weighted sum in a fixed order; reward_total stores exactly this value.
double weighted_total(const RewardBreakdown& b);

double reward_valid(std::string_view completion);
double reward_struct(std::string_view completion, const Schema& schema);
double reward_format(std::string_view completion, const RewardConfig& cfg = {});
double reward_correct(std::string_view completion, const json::Value& truth);
double reward_length(std::string_view completion, const RewardConfig& cfg = {});

RewardBreakdown reward_total(std::string_view completion, const Schema& schema, const json::Value* truth,
                             const RewardConfig& cfg = {});

// Content tokens of a value tree, keys excluded: strings are lowercased and
// split on non-alphanumerics, numbers become their canonical decimal form,
// booleans become "true"/"false", null contributes nothing.
std::vector<std::string> content_tokens(const json::Value& v);
// Multiset F1. Two empty multisets score 1, one empty multiset scores 0.
double token_f1(const std::vector<std::string>& candidate, const std::vector<std::string>& truth);

// Number of Unicode code points in a UTF-8 string.
std::size_t char_length(std::string_view s);

}  // namespace rlstruct
