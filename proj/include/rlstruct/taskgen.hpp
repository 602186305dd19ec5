#pragma once

// Deterministic synthetic tasks. Each instance carries a short digit code in
// its prompt; every leaf of the ground-truth tree is a fixed function of one
// of those digits, so the content is learnable from the prompt alone.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlstruct/json.hpp"
#include "rlstruct/schema.hpp"
#include "rlstruct/vocab.hpp"

namespace rlstruct {

struct TaskInstance {
  int id = 0;
  std::string schema_name;
  std::vector<std::string> prompt_tokens;
  json::Value ground_truth;
};

struct TaskOptions {
  int code_digits = 4;
  // Array length when the schema leaves max_items open.
  std::size_t default_max_items = 3;
};

// Word pool for string-kind leaves.
const std::vector<std::string>& string_words();

// Vocabulary covering the given schemas plus the string word pool when any of
// them has a string leaf.
Vocab task_vocab(std::span<const Schema> schemas);

// Throws VocabOverflow when `vocab` is given and cannot express a key, enum
// value or string word the generator may emit.
std::vector<TaskInstance> generate(const Schema& schema, std::uint64_t seed, int n, const Vocab* vocab = nullptr,
                                   const TaskOptions& options = {});

// Ground truth for a specific digit code (exposed for tests).
json::Value ground_truth_for(const Schema& schema, const std::vector<int>& digits, const TaskOptions& options = {});

// Canonical serialization (schema key order, no whitespace).
std::string canonical_json(const TaskInstance& instance);
// Canonical serialization wrapped in a json-tagged fence.
std::string canonical_completion(const TaskInstance& instance);

std::vector<int> prompt_ids(const TaskInstance& instance, const Vocab& vocab);

// One instance per line.
std::string instance_to_line(const TaskInstance& instance);
TaskInstance instance_from_line(std::string_view line);
void write_instances(const std::string& path, const std::vector<TaskInstance>& instances);
std::vector<TaskInstance> read_instances(const std::string& path);

}  // namespace rlstruct
