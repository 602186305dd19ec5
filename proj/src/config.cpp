#include "rlstruct/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rlstruct/errors.hpp"

namespace rlstruct {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = std::string_view(" \t\r\n");
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::string show(double v) { return json::format_number(v); }

// Field factories over member accessors.
template <typename Get>
ConfigField double_field(std::string key, std::string help, Get access) {
  return ConfigField{key, std::move(help),
                     [key, access](TrainConfig& c, const std::string& v) { access(c) = parse_double(key, v); },
                     [access](const TrainConfig& c) { return show(access(const_cast<TrainConfig&>(c))); }};
}

template <typename T, typename Get>
ConfigField int_field(std::string key, std::string help, Get access) {
  return ConfigField{key, std::move(help),
                     [key, access](TrainConfig& c, const std::string& v) { access(c) = parse_integer<T>(key, v); },
                     [access](const TrainConfig& c) { return std::to_string(access(const_cast<TrainConfig&>(c))); }};
}

template <typename Get>
ConfigField string_field(std::string key, std::string help, Get access) {
  return ConfigField{key, std::move(help), [access](TrainConfig& c, const std::string& v) { access(c) = v; },
                     [access](const TrainConfig& c) { return access(const_cast<TrainConfig&>(c)); }};
}

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  f.push_back(double_field("reward.w_valid", "weight of the validity component",
                           [](TrainConfig& c) -> double& { return c.reward.w_valid; }));
  f.push_back(double_field("reward.w_struct", "weight of the structure component",
                           [](TrainConfig& c) -> double& { return c.reward.w_struct; }));
  f.push_back(double_field("reward.w_format", "weight of the format component",
                           [](TrainConfig& c) -> double& { return c.reward.w_format; }));
  f.push_back(double_field("reward.w_correct", "weight of the correctness component",
                           [](TrainConfig& c) -> double& { return c.reward.w_correct; }));
  f.push_back(double_field("reward.w_length", "weight of the length component",
                           [](TrainConfig& c) -> double& { return c.reward.w_length; }));
  f.push_back(int_field<std::size_t>("reward.l_min", "minimum completion length in characters",
                                     [](TrainConfig& c) -> std::size_t& { return c.reward.l_min; }));
  f.push_back(int_field<std::size_t>("reward.l_max", "maximum completion length in characters",
                                     [](TrainConfig& c) -> std::size_t& { return c.reward.l_max; }));
  f.push_back(double_field("reward.format_md_bonus", "format score for a fenced block",
                           [](TrainConfig& c) -> double& { return c.reward.format_md_bonus; }));
  f.push_back(double_field("reward.format_json_bonus", "format score for a json-tagged fence",
                           [](TrainConfig& c) -> double& { return c.reward.format_json_bonus; }));
  f.push_back(double_field("reward.length_penalty", "length score outside [l_min, l_max]",
                           [](TrainConfig& c) -> double& { return c.reward.length_penalty; }));

  f.push_back(int_field<int>("grpo.group_size", "completions sampled per prompt",
                             [](TrainConfig& c) -> int& { return c.grpo.group_size; }));
  f.push_back(double_field("grpo.clip_eps", "ratio clip half-width",
                           [](TrainConfig& c) -> double& { return c.grpo.clip_eps; }));
  f.push_back(double_field("grpo.kl_beta", "KL penalty coefficient",
                           [](TrainConfig& c) -> double& { return c.grpo.kl_beta; }));
  f.push_back(double_field("grpo.epsilon_std", "added to the group std",
                           [](TrainConfig& c) -> double& { return c.grpo.epsilon_std; }));
  f.push_back(int_field<int>("grpo.epochs", "policy-gradient epochs per sampled batch",
                             [](TrainConfig& c) -> int& { return c.grpo.epochs; }));
  f.push_back(ConfigField{
      "grpo.ratio_level", "sequence | token",
      [](TrainConfig& c, const std::string& v) {
        if (v == "sequence") {
          c.grpo.ratio_level = RatioLevel::Sequence;
        } else if (v == "token") {
          c.grpo.ratio_level = RatioLevel::Token;
        } else {
          throw ConfigError("'grpo.ratio_level' expects sequence or token, got '" + v + "'");
        }
      },
      [](const TrainConfig& c) { return std::string(c.grpo.ratio_level == RatioLevel::Sequence ? "sequence" : "token"); }});

  f.push_back(int_field<int>("policy.embed_dim", "embedding width",
                             [](TrainConfig& c) -> int& { return c.policy.embed_dim; }));
  f.push_back(int_field<int>("policy.layers", "number of attention+MLP blocks",
                             [](TrainConfig& c) -> int& { return c.policy.layers; }));
  f.push_back(int_field<int>("policy.mlp_dim", "MLP hidden width",
                             [](TrainConfig& c) -> int& { return c.policy.mlp_dim; }));
  f.push_back(int_field<int>("policy.context", "maximum sequence length",
                             [](TrainConfig& c) -> int& { return c.policy.context; }));
  f.push_back(int_field<int>("policy.adapter_rank", "low-rank adapter rank for the RL phase (0 = full training)",
                             [](TrainConfig& c) -> int& { return c.policy.adapter_rank; }));
  f.push_back(double_field("policy.adapter_alpha", "adapter scale numerator (scale = alpha / rank)",
                           [](TrainConfig& c) -> double& { return c.policy.adapter_alpha; }));
  f.push_back(double_field("policy.init_scale", "uniform init half-range",
                           [](TrainConfig& c) -> double& { return c.policy.init_scale; }));

  f.push_back(double_field("optimizer.learning_rate", "peak learning rate of the RL phase",
                           [](TrainConfig& c) -> double& { return c.optimizer.learning_rate; }));
  f.push_back(ConfigField{
      "optimizer.schedule", "constant | cosine",
      [](TrainConfig& c, const std::string& v) {
        if (v == "constant") {
          c.optimizer.schedule = Schedule::Constant;
        } else if (v == "cosine") {
          c.optimizer.schedule = Schedule::Cosine;
        } else {
          throw ConfigError("'optimizer.schedule' expects constant or cosine, got '" + v + "'");
        }
      },
      [](const TrainConfig& c) { return std::string(c.optimizer.schedule == Schedule::Cosine ? "cosine" : "constant"); }});
  f.push_back(int_field<int>("optimizer.total_steps", "RL steps",
                             [](TrainConfig& c) -> int& { return c.optimizer.total_steps; }));
  f.push_back(int_field<int>("optimizer.batch_size", "prompts per RL step",
                             [](TrainConfig& c) -> int& { return c.optimizer.batch_size; }));
  f.push_back(double_field("optimizer.min_lr_ratio", "cosine floor as a fraction of the peak",
                           [](TrainConfig& c) -> double& { return c.optimizer.min_lr_ratio; }));
  f.push_back(double_field("optimizer.grad_clip", "global gradient-norm clip (0 disables)",
                           [](TrainConfig& c) -> double& { return c.optimizer.grad_clip; }));
  f.push_back(double_field("optimizer.beta1", "Adam beta1", [](TrainConfig& c) -> double& { return c.optimizer.beta1; }));
  f.push_back(double_field("optimizer.beta2", "Adam beta2", [](TrainConfig& c) -> double& { return c.optimizer.beta2; }));
  f.push_back(double_field("optimizer.adam_eps", "Adam epsilon",
                           [](TrainConfig& c) -> double& { return c.optimizer.adam_eps; }));

  f.push_back(int_field<int>("warm_start_steps", "maximum-likelihood warm-start steps before RL",
                             [](TrainConfig& c) -> int& { return c.warm_start_steps; }));
  f.push_back(double_field("warm_start.learning_rate", "warm-start learning rate",
                           [](TrainConfig& c) -> double& { return c.warm_start.learning_rate; }));
  f.push_back(int_field<int>("warm_start.batch_size", "warm-start sequences per step",
                             [](TrainConfig& c) -> int& { return c.warm_start.batch_size; }));
  f.push_back(double_field("warm_start.syntax_noise", "fraction of warm-start targets with a syntax defect",
                           [](TrainConfig& c) -> double& { return c.warm_start.syntax_noise; }));
  f.push_back(double_field("warm_start.drop_key_noise", "fraction of warm-start targets missing one key",
                           [](TrainConfig& c) -> double& { return c.warm_start.drop_key_noise; }));
  f.push_back(double_field("warm_start.fence_noise", "fraction of warm-start targets without a json fence",
                           [](TrainConfig& c) -> double& { return c.warm_start.fence_noise; }));
  f.push_back(ConfigField{
      "reference", "warm | initial: which parameters the frozen reference copies",
      [](TrainConfig& c, const std::string& v) {
        if (v == "warm") {
          c.reference = ReferenceMode::WarmStart;
        } else if (v == "initial") {
          c.reference = ReferenceMode::Initial;
        } else {
          throw ConfigError("'reference' expects warm or initial, got '" + v + "'");
        }
      },
      [](const TrainConfig& c) { return std::string(c.reference == ReferenceMode::WarmStart ? "warm" : "initial"); }});

  f.push_back(double_field("sampling.temperature", "sampling temperature during RL",
                           [](TrainConfig& c) -> double& { return c.sampling.temperature; }));
  f.push_back(int_field<int>("sampling.max_tokens", "completion token budget",
                             [](TrainConfig& c) -> int& { return c.sampling.max_tokens; }));

  f.push_back(string_field("task.schema", "schema name (file <schema_dir>/<name>.json)",
                           [](TrainConfig& c) -> std::string& { return c.task.schema; }));
  f.push_back(string_field("task.schema_dir", "schema registry directory",
                           [](TrainConfig& c) -> std::string& { return c.task.schema_dir; }));
  f.push_back(int_field<int>("task.dataset_size", "training instances",
                             [](TrainConfig& c) -> int& { return c.task.dataset_size; }));
  f.push_back(int_field<int>("task.code_digits", "digits in each task prompt",
                             [](TrainConfig& c) -> int& { return c.task.code_digits; }));

  f.push_back(double_field("curriculum.fraction", "fraction of the rise that counts as reached",
                           [](TrainConfig& c) -> double& { return c.curriculum.fraction; }));
  f.push_back(ConfigField{
      "curriculum.baseline", "start | zero: what the fraction of the plateau is measured from",
      [](TrainConfig& c, const std::string& v) {
        if (v == "start") {
          c.curriculum.baseline = CurriculumBaseline::Start;
        } else if (v == "zero") {
          c.curriculum.baseline = CurriculumBaseline::Zero;
        } else {
          throw ConfigError("'curriculum.baseline' expects start or zero, got '" + v + "'");
        }
      },
      [](const TrainConfig& c) {
        return std::string(c.curriculum.baseline == CurriculumBaseline::Start ? "start" : "zero");
      }});
  f.push_back(int_field<int>("curriculum.window", "centered moving-average window",
                             [](TrainConfig& c) -> int& { return c.curriculum.window; }));
  f.push_back(double_field("curriculum.plateau_tail", "fraction of final steps averaged for the plateau",
                           [](TrainConfig& c) -> double& { return c.curriculum.plateau_tail; }));
  f.push_back(double_field("curriculum.min_rise", "smallest plateau-minus-start change treated as a rise",
                           [](TrainConfig& c) -> double& { return c.curriculum.min_rise; }));

  f.push_back(int_field<int>("eval.corpus_size", "held-out instances", [](TrainConfig& c) -> int& { return c.eval.corpus_size; }));
  f.push_back(int_field<std::uint64_t>("eval.corpus_seed", "held-out corpus seed",
                                       [](TrainConfig& c) -> std::uint64_t& { return c.eval.corpus_seed; }));
  f.push_back(double_field("eval.temperature", "evaluation sampling temperature",
                           [](TrainConfig& c) -> double& { return c.eval.temperature; }));
  f.push_back(int_field<int>("eval.samples_per_prompt", "samples per held-out prompt",
                             [](TrainConfig& c) -> int& { return c.eval.samples_per_prompt; }));

  f.push_back(int_field<std::uint64_t>("seeds.master", "master seed for every random stream",
                                       [](TrainConfig& c) -> std::uint64_t& { return c.seed; }));
  f.push_back(int_field<int>("workers", "sampling/gradient worker threads (results do not depend on it)",
                             [](TrainConfig& c) -> int& { return c.workers; }));
  f.push_back(int_field<int>("checkpoint_every", "checkpoint cadence in RL steps (0 = final only)",
                             [](TrainConfig& c) -> int& { return c.checkpoint_every; }));
  return f;
}

}  // namespace

void TrainConfig::validate() const {
  reward.validate();
  grpo.validate();
  if (optimizer.total_steps < 1) throw ConfigError("optimizer.total_steps must be at least 1");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("optimizer.learning_rate must be non-negative");
  if (optimizer.batch_size < 1) throw ConfigError("optimizer.batch_size must be at least 1");
  if (optimizer.min_lr_ratio < 0.0 || optimizer.min_lr_ratio > 1.0) {
    throw ConfigError("optimizer.min_lr_ratio must lie in [0, 1]");
  }
  if (warm_start_steps < 0) throw ConfigError("warm_start_steps must be non-negative");
  if (warm_start.batch_size < 1) throw ConfigError("warm_start.batch_size must be at least 1");
  for (double p : {warm_start.syntax_noise, warm_start.drop_key_noise, warm_start.fence_noise}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("warm_start noise rates must lie in [0, 1]");
  }
  if (!(sampling.temperature >= 0.0)) throw ConfigError("sampling.temperature must be non-negative");
  if (sampling.max_tokens < 1) throw ConfigError("sampling.max_tokens must be positive");
  if (task.dataset_size < 1) throw ConfigError("task.dataset_size must be positive");
  if (policy.adapter_rank < 0) throw ConfigError("policy.adapter_rank must be non-negative");
  if (curriculum.window < 1) throw ConfigError("curriculum.window must be positive");
  if (eval.corpus_size < 1 || eval.samples_per_prompt < 1) throw ConfigError("eval sizes must be positive");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : config_fields()) {
    if (f.key == key) {
      f.set(cfg, std::string(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_override(TrainConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string render_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace rlstruct
