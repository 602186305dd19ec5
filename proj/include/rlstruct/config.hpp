#pragma once

// Training configuration and its flat `dotted.key = value` file format.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "rlstruct/grpo.hpp"
#include "rlstruct/reward.hpp"

namespace rlstruct {

enum class Schedule { Constant, Cosine };
enum class ReferenceMode { WarmStart, Initial };

struct PolicyHyper {
  int embed_dim = 32;
  int layers = 2;
  int mlp_dim = 64;
  int context = 128;
  int adapter_rank = 0;
  double adapter_alpha = 8.0;
  double init_scale = 0.1;
};

struct OptimizerConfig {
  double learning_rate = 1e-3;
  Schedule schedule = Schedule::Cosine;
  int total_steps = 400;
  int batch_size = 4;
  double min_lr_ratio = 0.0;
  double grad_clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Maximum-likelihood warm start on taskgen targets. The noise rates corrupt
// a fraction of the targets so the warm-started policy behaves like an
// imperfect supervised base model.
struct WarmStartConfig {
  double learning_rate = 3e-3;
  int batch_size = 16;
  double syntax_noise = 0.0;
  double drop_key_noise = 0.3;
  double fence_noise = 0.0;
};

struct SamplingConfig {
  double temperature = 1.0;
  int max_tokens = 64;
};

struct TaskConfig {
  std::string schema = "math";
  std::string schema_dir = "schemas";
  int dataset_size = 1000;
  int code_digits = 4;
};

enum class CurriculumBaseline { Start, Zero };

struct CurriculumConfig {
  double fraction = 0.9;
  // Start: threshold = start + fraction * (plateau - start).
  // Zero:  threshold = fraction * plateau.
  CurriculumBaseline baseline = CurriculumBaseline::Start;
  int window = 5;
  double plateau_tail = 0.1;
  double min_rise = 0.02;
};

struct EvalConfig {
  int corpus_size = 200;
  std::uint64_t corpus_seed = 1000003;
  double temperature = 1.0;
  int samples_per_prompt = 1;
};

struct TrainConfig {
  RewardConfig reward;
  GrpoConfig grpo;
  PolicyHyper policy;
  OptimizerConfig optimizer;
  int warm_start_steps = 200;
  WarmStartConfig warm_start;
  ReferenceMode reference = ReferenceMode::WarmStart;
  SamplingConfig sampling;
  TaskConfig task;
  CurriculumConfig curriculum;
  EvalConfig eval;
  std::uint64_t seed = 0;
  int workers = 1;
  int checkpoint_every = 0;  // 0: final checkpoint only

  // Throws ConfigError.
  void validate() const;
};

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// Every settable key, in the order used when echoing a config.
const std::vector<ConfigField>& config_fields();

// Applies one `key=value` assignment. Throws ConfigError for unknown keys or
// unparsable values.
void apply_override(TrainConfig& cfg, std::string_view assignment);
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

// Parses a config document: `key = value` lines, '#' comments, blank lines.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config_file(const std::string& path, TrainConfig base = {});

// Renders every field as `key = value`, one per line.
std::string render_config(const TrainConfig& cfg);

}  // namespace rlstruct
