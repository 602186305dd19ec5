#pragma once

// Reward-component ablations: the same config and seed trained with selected
// weights zeroed, each variant evaluated with the full metric suite.

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "rlstruct/config.hpp"
#include "rlstruct/eval.hpp"
#include "rlstruct/trainer.hpp"

namespace rlstruct {

enum class RewardComponent { Valid, Struct, Format };

// "valid" | "struct" | "format". Throws ConfigError.
RewardComponent parse_component(std::string_view name);
std::string component_name(RewardComponent c);

using DropSet = std::set<RewardComponent>;

// "full" for the empty set, otherwise "w/o valid+struct" style.
std::string variant_label(const DropSet& drop);

TrainConfig ablated_config(const TrainConfig& cfg, const DropSet& drop);

struct AblationVariant {
  std::string label;
  DropSet drop;
  MetricsReport metrics;
  std::vector<TrainLogRecord> log;
};

struct AblationReport {
  std::vector<AblationVariant> variants;  // the full run first
};

struct AblationOptions {
  // Per-variant output directories are created below this when non-empty.
  std::string dir;
  std::function<void(const std::string&)> on_message;
};

// Trains and evaluates the full config plus one variant per drop set, all on
// the same seed and held-out corpus. Metrics use the full reward weights.
AblationReport run_ablation(const TrainConfig& cfg, const std::vector<DropSet>& drops,
                            const AblationOptions& options = {});

// Evaluates a finished training run on the config's held-out corpus with the
// config's eval settings.
MetricsReport evaluate_run(const TrainConfig& cfg, const TrainResult& run, const RewardConfig& reward);

json::Value ablation_to_value(const AblationReport& report);

}  // namespace rlstruct
