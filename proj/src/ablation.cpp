#include "rlstruct/ablation.hpp"

#include <filesystem>

#include "rlstruct/errors.hpp"

namespace rlstruct {

RewardComponent parse_component(std::string_view name) {
  if (name == "valid") return RewardComponent::Valid;
  if (name == "struct") return RewardComponent::Struct;
  if (name == "format") return RewardComponent::Format;
  throw ConfigError("unknown reward component '" + std::string(name) + "' (expected valid, struct or format)");
}

std::string component_name(RewardComponent c) {
  switch (c) {
    case RewardComponent::Valid: return "valid";
    case RewardComponent::Struct: return "struct";
    case RewardComponent::Format: return "format";
  }
  return "";
}

std::string variant_label(const DropSet& drop) {
  if (drop.empty()) return "full";
  std::string out = "w/o ";
  bool first = true;
  for (RewardComponent c : drop) {
    out += (first ? "" : "+") + component_name(c);
    first = false;
  }
  return out;
}

TrainConfig ablated_config(const TrainConfig& cfg, const DropSet& drop) {
  TrainConfig out = cfg;
  for (RewardComponent c : drop) {
    switch (c) {
      case RewardComponent::Valid: out.reward.w_valid = 0.0; break;
      case RewardComponent::Struct: out.reward.w_struct = 0.0; break;
      case RewardComponent::Format: out.reward.w_format = 0.0; break;
    }
  }
  return out;
}

MetricsReport evaluate_run(const TrainConfig& cfg, const TrainResult& run, const RewardConfig& reward) {
  const auto corpus = held_out_corpus(cfg, run.schema, run.vocab);
  EvalOptions eo;
  eo.temperature = cfg.eval.temperature;
  eo.samples_per_prompt = cfg.eval.samples_per_prompt;
  eo.max_tokens = cfg.sampling.max_tokens;
  eo.seed = stream_seed(cfg.seed, {0xe7a1});
  eo.workers = cfg.workers;
  eo.reward = reward;
  return evaluate(run.final.params, run.vocab, run.schema, corpus, eo);
}

AblationReport run_ablation(const TrainConfig& cfg, const std::vector<DropSet>& drops,
                            const AblationOptions& options) {
  cfg.validate();
  const Schema schema = resolve_schema(cfg.task);
  std::vector<DropSet> all = {DropSet{}};
  for (const auto& d : drops) {
    if (!d.empty()) all.push_back(d);
  }
  AblationReport report;
  for (const auto& drop : all) {
    const std::string label = variant_label(drop);
    if (options.on_message) options.on_message("training variant " + label);
    TrainOutputs outs;
    if (!options.dir.empty()) {
      std::string slug = drop.empty() ? "full" : "without";
      for (RewardComponent c : drop) slug += "_" + component_name(c);
      outs.dir = (std::filesystem::path(options.dir) / slug).string();
    }
    outs.on_message = options.on_message;
    const TrainConfig vcfg = ablated_config(cfg, drop);
    const TrainResult run = train(vcfg, schema, outs);
    AblationVariant v;
    v.label = label;
    v.drop = drop;
    v.metrics = evaluate_run(vcfg, run, cfg.reward);
    v.log = run.log;
    report.variants.push_back(std::move(v));
  }
  return report;
}

json::Value ablation_to_value(const AblationReport& report) {
  json::Value arr = json::Value::array();
  for (const auto& v : report.variants) {
    json::Value o = json::Value::object();
    o.set("label", v.label);
    json::Value dropped = json::Value::array();
    for (RewardComponent c : v.drop) dropped.push_back(component_name(c));
    o.set("dropped", std::move(dropped));
    o.set("report", report_to_value(v.metrics, false));
    arr.push_back(std::move(o));
  }
  json::Value doc = json::Value::object();
  doc.set("variants", std::move(arr));
  return doc;
}

}  // namespace rlstruct
