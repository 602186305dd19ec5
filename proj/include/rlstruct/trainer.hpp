#pragma once

// Training driver: maximum-likelihood warm start, reference snapshot, then
// the GRPO loop (sample a group per prompt, score, normalize within groups,
// take one clipped, KL-penalized policy-gradient update per batch).

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rlstruct/config.hpp"
#include "rlstruct/policy.hpp"
#include "rlstruct/schema.hpp"
#include "rlstruct/taskgen.hpp"
#include "rlstruct/vocab.hpp"

namespace rlstruct {

struct TrainLogRecord {
  long step = 0;
  double r_valid = 0.0;
  double r_struct = 0.0;
  double r_format = 0.0;
  double r_correct = 0.0;
  double r_length = 0.0;
  double total = 0.0;
  double objective = 0.0;
  double kl_mean = 0.0;
  double clip_fraction = 0.0;
  double grad_norm_valid = 0.0;
  double grad_norm_correct = 0.0;
  double wall_time = 0.0;  // seconds since the RL phase began
};

// Every TrainLogRecord field name, in declaration order.
const std::vector<std::string>& log_record_fields();

// The log file holds every field except wall_time, which lives in a
// separate timing file so that logs of identical runs are byte-identical.
std::string log_header();
std::string log_line(const TrainLogRecord& r);
std::string timing_header();
std::string timing_line(const TrainLogRecord& r);

// Reads a log file (and, if present, its timing file). Throws IoError.
std::vector<TrainLogRecord> read_log(const std::string& log_path, const std::string& timing_path = "");

// Per-component CSV with columns in log_record_fields() order.
std::string log_to_csv(const std::vector<TrainLogRecord>& log);

struct TrainOutputs {
  // When non-empty: train.log, timing.tsv, config.cfg and checkpoints go here.
  std::string dir;
  std::function<void(const TrainLogRecord&)> on_step;
  std::function<void(const std::string&)> on_message;
};

struct TrainResult {
  Schema schema;
  Vocab vocab;
  PolicyParams warm_params;  // after the warm start, before the RL phase
  Checkpoint final;
  std::vector<TrainLogRecord> log;
  double warm_seconds = 0.0;
  double rl_seconds = 0.0;
};

// Loads `<task.schema_dir>/<task.schema>.json`. Throws UnknownSchema.
Schema resolve_schema(const TaskConfig& task);

// Training instances for a config (deterministic in cfg.seed).
std::vector<TaskInstance> training_corpus(const TrainConfig& cfg, const Schema& schema, const Vocab& vocab);
// cfg.eval.corpus_size instances generated from cfg.eval.corpus_seed, skipping
// any whose prompt also occurs in training_corpus(cfg, ...).
std::vector<TaskInstance> held_out_corpus(const TrainConfig& cfg, const Schema& schema, const Vocab& vocab);

// Throws ConfigError before doing any work, NonFiniteLoss (after saving the
// last good checkpoint when an output dir is set) on a non-finite update.
TrainResult train(const TrainConfig& cfg, const TrainOutputs& outputs = {});
TrainResult train(const TrainConfig& cfg, const Schema& schema, const TrainOutputs& outputs = {});

// Warm-start target for one instance: the canonical completion, corrupted
// according to the configured noise rates.
std::string warm_start_target(const TaskInstance& instance, const WarmStartConfig& cfg, std::mt19937_64& rng);

enum class PhaseStatus { Reached, PlateauUndefined };

struct ComponentPhase {
  std::string component;
  PhaseStatus status = PhaseStatus::PlateauUndefined;
  double start = 0.0;    // first smoothed value
  double plateau = 0.0;  // mean of the final tail of the raw curve
  double threshold = 0.0;
  std::optional<long> step;  // first step at which the smoothed curve crosses threshold
};

struct CurriculumReport {
  std::vector<ComponentPhase> components;  // r_valid, r_struct, r_format, r_correct
  std::vector<std::string> ordering;       // components with a step, earliest first
  bool syntax_before_semantics = false;    // step(r_valid) < step(r_correct)
};

// Centered moving average; the window shrinks at the edges.
std::vector<double> smooth(const std::vector<double>& xs, int window);

// A component's threshold is start + fraction * (plateau - start), or
// fraction * plateau with CurriculumBaseline::Zero. A curve whose plateau
// differs from its start by less than min_rise, or that is not finite, has no
// defined plateau. Throws ConfigError on an empty log.
CurriculumReport detect_curriculum(const std::vector<TrainLogRecord>& log, const CurriculumConfig& cfg = {});

}  // namespace rlstruct
