// rlstruct command-line entry point.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "rlstruct/ablation.hpp"
#include "rlstruct/config.hpp"
#include "rlstruct/errors.hpp"
#include "rlstruct/eval.hpp"
#include "rlstruct/reward.hpp"
#include "rlstruct/schema.hpp"
#include "rlstruct/service.hpp"
#include "rlstruct/taskgen.hpp"
#include "rlstruct/trainer.hpp"

namespace fs = std::filesystem;
using namespace rlstruct;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};
TcpServer* g_server = nullptr;

void on_signal(int) {
  g_stop.store(true);
  if (g_server != nullptr) g_server->stop();
}

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "Config file of `key = value` lines");
  app->add_option("--set", c.sets, "Override one config key (key=value); repeatable")->allow_extra_args(false);
  if (with_out) app->add_option("--out", c.out, "Parent directory for the timestamped run directory")->default_str("runs");
  app->add_option("--seed", c.seed, "Master seed (default 0)");
  app->add_flag("--quiet", c.quiet, "Suppress progress output");
}

TrainConfig effective_config(const Common& c) {
  TrainConfig cfg;
  if (!c.config.empty()) cfg = load_config_file(c.config);
  for (const auto& s : c.sets) apply_override(cfg, s);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// <parent>/<kind>-YYYYmmdd-HHMMSS[-n]
fs::path make_run_dir(const std::string& parent, const std::string& kind) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream name;
  name << kind << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path base = fs::path(parent.empty() ? "runs" : parent) / name.str();
  fs::path dir = base;
  for (int n = 1; fs::exists(dir); ++n) dir = base.string() + "-" + std::to_string(n);
  fs::create_directories(dir);
  return dir;
}

Schema schema_arg(const std::string& arg, const std::string& schema_dir) {
  if (fs::is_regular_file(arg)) return load_schema_file(arg);
  const fs::path p = fs::path(schema_dir) / (arg + ".json");
  if (!fs::is_regular_file(p)) throw UnknownSchema("no schema file or registered schema named '" + arg + "'");
  return load_schema_file(p.string());
}

json::Value parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  const auto parsed = json::parse_strict(text);
  if (!parsed.valid) {
    throw SyntaxError(path + " is not valid JSON (" + std::string(json::to_string(*parsed.error_kind)) +
                      " at offset " + std::to_string(*parsed.error_offset) + ")");
  }
  return *parsed.value;
}

std::string metrics_line(const MetricsReport& r) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << "validity=" << r.json_validity << " structural=" << r.structural_accuracy
    << " format=" << r.format_consistency << " compliance=" << r.schema_compliance
    << " content=" << r.content_accuracy << " hallucination=" << r.hallucination_rate << " gap=" << r.gap_estimate;
  return o.str();
}

int cmd_train(const Common& c) {
  const TrainConfig cfg = effective_config(c);
  const fs::path dir = make_run_dir(c.out, "train");
  TrainOutputs outs;
  outs.dir = dir.string();
  if (!c.quiet) {
    outs.on_message = [](const std::string& m) { std::cerr << m << '\n'; };
    const int every = std::max(1, cfg.optimizer.total_steps / 20);
    outs.on_step = [every](const TrainLogRecord& r) {
      if (r.step % every == 0) {
        std::cerr << std::fixed << std::setprecision(3) << "step " << r.step << " valid=" << r.r_valid
                  << " struct=" << r.r_struct << " format=" << r.r_format << " correct=" << r.r_correct
                  << " total=" << r.total << " kl=" << r.kl_mean << '\n';
      }
    };
  }
  const TrainResult run = train(cfg, outs);
  const MetricsReport rep = evaluate_run(cfg, run, cfg.reward);
  write_file(dir / "report.json", json::serialize(report_to_value(rep)) + "\n");
  write_file(dir / "metrics.csv", report_csv_header() + "\n" + report_csv_row("final", rep) + "\n");
  const CurriculumReport cur = detect_curriculum(run.log, cfg.curriculum);
  std::string ordering;
  for (const auto& o : cur.ordering) ordering += (ordering.empty() ? "" : " < ") + o;
  write_file(dir / "curriculum.txt", "ordering: " + ordering + "\nsyntax_before_semantics: " +
                                         (cur.syntax_before_semantics ? "true" : "false") + "\n");
  std::cout << "run: " << dir.string() << "\n" << metrics_line(rep) << "\n";
  return 0;
}

JudgeAdapter* judge_for(const std::string& name) {
  static StubJudge stub;
  static UnavailableJudge unavailable;
  if (name == "none") return nullptr;
  if (name == "stub") return &stub;
  if (name == "unavailable") return &unavailable;
  throw ConfigError("unknown judge '" + name + "' (expected none, stub or unavailable)");
}

int cmd_eval(const Common& c, const std::string& checkpoint_path, const std::string& corpus_path,
             const std::string& judge) {
  const TrainConfig cfg = effective_config(c);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (!ckpt.schema) throw CheckpointError("checkpoint carries no schema");
  const std::vector<TaskInstance> corpus =
      corpus_path.empty() ? held_out_corpus(cfg, *ckpt.schema, ckpt.vocab) : read_instances(corpus_path);
  EvalOptions eo;
  eo.temperature = cfg.eval.temperature;
  eo.samples_per_prompt = cfg.eval.samples_per_prompt;
  eo.max_tokens = cfg.sampling.max_tokens;
  eo.seed = stream_seed(cfg.seed, {0xe7a1});
  eo.workers = cfg.workers;
  eo.reward = cfg.reward;
  eo.judge = judge_for(judge);
  const MetricsReport rep = evaluate(ckpt, corpus, eo);
  const fs::path dir = make_run_dir(c.out, "eval");
  write_file(dir / "config.cfg", render_config(cfg));
  write_file(dir / "report.json", json::serialize(report_to_value(rep)) + "\n");
  write_file(dir / "metrics.csv", report_csv_header() + "\n" + report_csv_row("eval", rep) + "\n");
  std::cout << "run: " << dir.string() << "\n" << metrics_line(rep) << "\n";
  return 0;
}

int cmd_reward(const Common& c, const std::string& schema, const std::string& schema_dir,
               const std::string& completion_file, const std::optional<std::string>& completion,
               const std::string& truth_file) {
  const TrainConfig cfg = effective_config(c);
  if (completion_file.empty() == !completion.has_value()) {
    throw ConfigError("give exactly one of --completion-file and --completion");
  }
  const Schema s = schema_arg(schema, schema_dir);
  const std::string text = completion ? *completion : read_file(completion_file);
  std::optional<json::Value> truth;
  if (!truth_file.empty()) truth = parse_json_file(truth_file);
  const RewardBreakdown b = reward_total(text, s, truth ? &*truth : nullptr, cfg.reward);
  std::cout << json::serialize(score_to_value(b)) << "\n";
  return 0;
}

int cmd_schema_check(const std::string& path) {
  const Schema s = load_schema_file(path);
  std::cout << "name: " << s.name << "\n";
  std::cout << "version: " << s.version << "\n";
  std::cout << "depth: " << schema_depth(s) << "\n";
  std::cout << "required key paths:\n";
  for (const auto& p : required_key_paths(s)) std::cout << "  " << p << "\n";
  return 0;
}

int cmd_curves(const std::string& source, const std::string& out_file) {
  std::string log_path = source;
  std::string timing_path;
  if (fs::is_directory(source)) {
    log_path = (fs::path(source) / "train.log").string();
    const fs::path timing = fs::path(source) / "timing.tsv";
    if (fs::exists(timing)) timing_path = timing.string();
  }
  const std::string csv = log_to_csv(read_log(log_path, timing_path));
  if (out_file.empty()) {
    std::cout << csv;
  } else {
    write_file(out_file, csv);
  }
  return 0;
}

int cmd_serve(const Common& c, const std::string& schema_dir, std::optional<int> tcp_port, const std::string& host) {
  const TrainConfig cfg = effective_config(c);
  const RewardService service(SchemaRegistry::load_dir(schema_dir), cfg.reward);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!tcp_port) {
    std::ios::sync_with_stdio(false);
    const std::size_t n = serve_stream(service, std::cin, std::cout, &g_stop);
    if (!c.quiet) std::cerr << "served " << n << " requests\n";
    return 0;
  }
  TcpServer server(service);
  const int port = server.listen(host, *tcp_port);
  g_server = &server;
  if (!c.quiet) std::cerr << "listening on " << host << ":" << port << "\n";
  std::cout << "port " << port << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& drops) {
  const TrainConfig cfg = effective_config(c);
  std::vector<DropSet> sets;
  const std::vector<std::string> specs = drops.empty() ? std::vector<std::string>{"valid", "struct", "format"} : drops;
  for (const auto& spec : specs) {
    DropSet d;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) d.insert(parse_component(item));
    }
    sets.push_back(d);
  }
  const fs::path dir = make_run_dir(c.out, "ablate");
  write_file(dir / "config.cfg", render_config(cfg));
  AblationOptions opts;
  opts.dir = dir.string();
  if (!c.quiet) opts.on_message = [](const std::string& m) { std::cerr << m << '\n'; };
  const AblationReport rep = run_ablation(cfg, sets, opts);
  write_file(dir / "ablation.json", json::serialize(ablation_to_value(rep)) + "\n");
  std::string csv = report_csv_header() + "\n";
  for (const auto& v : rep.variants) csv += report_csv_row(v.label, v.metrics) + "\n";
  write_file(dir / "ablation.csv", csv);
  std::cout << "run: " << dir.string() << "\n";
  for (const auto& v : rep.variants) std::cout << v.label << ": " << metrics_line(v.metrics) << "\n";
  return 0;
}

int cmd_generate(const Common& c, const std::string& schema, const std::string& schema_dir, int n,
                 const std::string& out_file) {
  const TrainConfig cfg = effective_config(c);
  const Schema s = schema_arg(schema, schema_dir);
  const Vocab vocab = task_vocab(std::span<const Schema>(&s, 1));
  TaskOptions topt;
  topt.code_digits = cfg.task.code_digits;
  const auto instances = generate(s, cfg.seed, n, &vocab, topt);
  if (out_file.empty()) {
    for (const auto& inst : instances) std::cout << instance_to_line(inst) << "\n";
  } else {
    write_instances(out_file, instances);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlstruct: schema-driven reward, GRPO training and evaluation for structured output"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;

  auto* train_cmd = app.add_subcommand("train", "Warm start then GRPO-train a toy policy; evaluate the result");
  add_common(train_cmd, common);

  std::string checkpoint, corpus, judge = "none";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with the full metric suite");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--corpus", corpus, "Instances file (one JSON object per line); default: held-out corpus");
  eval_cmd->add_option("--judge", judge, "Content judge: none | stub | unavailable")->default_str("none");

  std::string schema, schema_dir = "schemas", completion_file, truth_file;
  std::optional<std::string> completion;
  auto* reward_cmd = app.add_subcommand("reward", "Score one completion and print the breakdown");
  add_common(reward_cmd, common, false);
  reward_cmd->add_option("--schema", schema, "Schema file or registered schema name")->required();
  reward_cmd->add_option("--schema-dir", schema_dir, "Schema registry directory")->default_str("schemas");
  reward_cmd->add_option("--completion-file", completion_file, "File holding the raw completion");
  reward_cmd->add_option("--completion", completion, "Raw completion text");
  reward_cmd->add_option("--truth-file", truth_file, "Ground-truth JSON file");

  std::string schema_path;
  auto* check_cmd = app.add_subcommand("schema-check", "Validate a schema file; print depth and required key paths");
  check_cmd->add_option("schema", schema_path, "Schema file")->required();

  std::string curves_source, curves_out;
  auto* curves_cmd = app.add_subcommand("curves", "Convert a training log into per-component CSV");
  curves_cmd->add_option("source", curves_source, "Run directory or train.log file")->required();
  curves_cmd->add_option("--out", curves_out, "CSV output file (default: stdout)");

  std::optional<int> tcp_port;
  std::string host = "127.0.0.1";
  auto* serve_cmd = app.add_subcommand("serve", "Serve reward requests over stdio (default) or TCP");
  add_common(serve_cmd, common, false);
  serve_cmd->add_option("--schema-dir", schema_dir, "Schema registry directory")->default_str("schemas");
  serve_cmd->add_option("--tcp", tcp_port, "Listen on this TCP port (0 = any free port)");
  serve_cmd->add_option("--host", host, "TCP listen address")->default_str("127.0.0.1");

  std::vector<std::string> drops;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train the full reward and ablated variants; compare metrics");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--drop", drops,
                         "Components to drop in one variant, comma separated (valid,struct,format); repeatable; "
                         "default: one variant per component");

  int gen_n = 10;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("generate", "Write task instances, one JSON object per line");
  add_common(gen_cmd, common, false);
  gen_cmd->add_option("--schema", schema, "Schema file or registered schema name")->required();
  gen_cmd->add_option("--schema-dir", schema_dir, "Schema registry directory")->default_str("schemas");
  gen_cmd->add_option("-n", gen_n, "Number of instances")->default_str("10");
  gen_cmd->add_option("--out", gen_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_eval(common, checkpoint, corpus, judge);
    if (*reward_cmd) return cmd_reward(common, schema, schema_dir, completion_file, completion, truth_file);
    if (*check_cmd) return cmd_schema_check(schema_path);
    if (*curves_cmd) return cmd_curves(curves_source, curves_out);
    if (*serve_cmd) return cmd_serve(common, schema_dir, tcp_port, host);
    if (*ablate_cmd) return cmd_ablate(common, drops);
    if (*gen_cmd) return cmd_generate(common, schema, schema_dir, gen_n, gen_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.error_class() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
