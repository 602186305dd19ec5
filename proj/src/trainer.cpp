#include "rlstruct/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "rlstruct/errors.hpp"
#include "rlstruct/grpo.hpp"
#include "rlstruct/optimizer.hpp"
#include "rlstruct/reward.hpp"

namespace rlstruct {

namespace {

// Stream keys.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kWarmStream = 3;
constexpr std::uint64_t kOrderStream = 4;
constexpr std::uint64_t kSampleStream = 5;
constexpr std::uint64_t kAdapterStream = 6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) over `workers` threads; i is assigned to worker
// i mod workers. The first failing index (lowest) is rethrown.
template <typename F>
void parallel_for(std::size_t n, int workers, F fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += w) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void collect_objects(json::Value& v, std::vector<json::Value*>& out) {
  if (v.is_object()) {
    if (!v.members().empty()) out.push_back(&v);
    for (auto& [k, child] : v.members()) collect_objects(child, out);
  } else if (v.is_array()) {
    for (auto& child : v.items()) collect_objects(child, out);
  }
}

std::string break_syntax(const std::string& body, std::mt19937_64& rng) {
  static const std::string kBreakable = "{}[]:,\"";
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::string out = body;
    if (rng() % 2 == 0) {
      std::vector<std::size_t> spots;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (kBreakable.find(out[i]) != std::string::npos) spots.push_back(i);
      }
      if (spots.empty()) continue;
      out.erase(spots[rng() % spots.size()], 1);
    } else {
      std::vector<std::size_t> spots;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == '}' || out[i] == ']') spots.push_back(i);
      }
      if (spots.empty()) continue;
      out.insert(spots[rng() % spots.size()], 1, ',');
    }
    if (!json::parse_strict(out).valid) return out;
  }
  return body;
}

std::string field_text(double x) { return json::format_number(x); }

std::vector<double> field_values(const TrainLogRecord& r) {
  return {static_cast<double>(r.step), r.r_valid, r.r_struct, r.r_format, r.r_correct, r.r_length, r.total,
          r.objective, r.kl_mean, r.clip_fraction, r.grad_norm_valid, r.grad_norm_correct, r.wall_time};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_field(const std::string& s, const std::string& path) {
  const auto parsed = json::parse_strict(s);
  if (!parsed.valid || !parsed.value->is_number()) throw IoError("bad numeric field '" + s + "' in " + path);
  return parsed.value->as_number();
}

struct SampleWork {
  std::size_t prompt = 0;
  Completion completion;
  RewardBreakdown reward;
  std::vector<double> logp_ref;
  std::vector<double> logp_theta;
  Gradient effective;
  Gradient unit;
};

class Run {
 public:
  Run(const TrainConfig& cfg, const Schema& schema, const TrainOutputs& out)
      : cfg_(cfg), schema_(schema), out_(out), vocab_(task_vocab(std::span<const Schema>(&schema_, 1))) {}

  TrainResult execute();

 private:
  void message(const std::string& m) const {
    if (out_.on_message) out_.on_message(m);
  }
  std::string path(const std::string& name) const { return (std::filesystem::path(out_.dir) / name).string(); }
  void save(const PolicyParams& params, long step, const std::string& name) const {
    if (out_.dir.empty()) return;
    save_checkpoint(path(name), Checkpoint{vocab_, params, step, cfg_.seed, "stream-keyed", schema_});
  }

  void warm_start(PolicyParams& params);
  std::size_t data_index(long step, std::size_t j);
  TrainLogRecord rl_step(long step, PolicyParams& params, Adam& opt, const ReferenceSnapshot& ref);

  const TrainConfig& cfg_;
  Schema schema_;
  const TrainOutputs& out_;
  Vocab vocab_;
  std::vector<TaskInstance> data_;
  std::vector<std::vector<int>> prompts_;
  std::vector<std::size_t> order_;
  long order_epoch_ = -1;
};

void Run::warm_start(PolicyParams& params) {
  Adam opt(params, cfg_.optimizer.beta1, cfg_.optimizer.beta2, cfg_.optimizer.adam_eps);
  message("grpo: " + std::to_string(cfg_.optimizer.total_steps) + " steps, reward max " +
          json::format_number(cfg_.reward.theoretical_max()));
  const auto& w = cfg_.warm_start;
  for (int s = 0; s < cfg_.warm_start_steps; ++s) {
    std::mt19937_64 rng(stream_seed(cfg_.seed, {kWarmStream, static_cast<std::uint64_t>(s)}));
    std::vector<std::vector<int>> targets;
    std::vector<std::size_t> which;
    std::size_t total_tokens = 0;
    for (int b = 0; b < w.batch_size; ++b) {
      const std::size_t idx = rng() % data_.size();
      std::vector<int> ids = vocab_.encode(warm_start_target(data_[idx], w, rng));
      ids.push_back(vocab_.eos());
      if (prompts_[idx].size() + ids.size() > static_cast<std::size_t>(cfg_.policy.context)) {
        throw ConfigError("warm-start target does not fit policy.context");
      }
      total_tokens += ids.size();
      targets.push_back(std::move(ids));
      which.push_back(idx);
    }
    const double coeff = 1.0 / static_cast<double>(total_tokens);
    std::vector<WeightedSequence> batch;
    for (std::size_t b = 0; b < targets.size(); ++b) {
      batch.push_back(WeightedSequence{prompts_[which[b]], targets[b], std::span<const double>(&coeff, 1)});
    }
    Gradient g = grad_logprob_weighted(params, batch);
    g.scale(-1.0);
    clip_gradient(g, cfg_.optimizer.grad_clip);
    if (!g.all_finite()) throw NonFiniteLoss("non-finite gradient during warm start step " + std::to_string(s));
    opt.step(params, g, w.learning_rate);
  }
}

std::size_t Run::data_index(long step, std::size_t j) {
  const std::size_t n = data_.size();
  const std::size_t g = static_cast<std::size_t>(step) * static_cast<std::size_t>(cfg_.optimizer.batch_size) + j;
  const long epoch = static_cast<long>(g / n);
  if (epoch != order_epoch_) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(stream_seed(cfg_.seed, {kOrderStream, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = n; i > 1; --i) std::swap(order_[i - 1], order_[rng() % i]);
    order_epoch_ = epoch;
  }
  return order_[g % n];
}

TrainLogRecord Run::rl_step(long step, PolicyParams& params, Adam& opt, const ReferenceSnapshot& ref) {
  const std::size_t B = static_cast<std::size_t>(cfg_.optimizer.batch_size);
  const std::size_t G = static_cast<std::size_t>(cfg_.grpo.group_size);
  const std::size_t N = B * G;
  std::vector<std::size_t> batch(B);
  for (std::size_t j = 0; j < B; ++j) batch[j] = data_index(step, j);

  SampleOptions so;
  so.temperature = cfg_.sampling.temperature;
  so.max_tokens = cfg_.sampling.max_tokens;
  so.eos = vocab_.eos();

  auto compiled = std::make_unique<CompiledPolicy>(params);
  std::vector<SampleWork> work(N);
  parallel_for(N, cfg_.workers, [&](std::size_t i) {
    const std::size_t j = i / G;
    const std::size_t k = i % G;
    SampleWork& s = work[i];
    s.prompt = batch[j];
    std::mt19937_64 rng(stream_seed(cfg_.seed, {kSampleStream, static_cast<std::uint64_t>(step), j, k}));
    s.completion = sample(*compiled, vocab_, prompts_[s.prompt], so, rng);
    s.reward = reward_total(s.completion.text, schema_, &data_[s.prompt].ground_truth, cfg_.reward);
    s.logp_ref = logprob(ref.compiled(), prompts_[s.prompt], s.completion.tokens).per_token;
    s.logp_theta = s.completion.logprobs;
  });

  std::vector<GroupAdvantages> adv;
  for (std::size_t j = 0; j < B; ++j) {
    std::vector<double> totals;
    for (std::size_t k = 0; k < G; ++k) totals.push_back(work[j * G + k].reward.total);
    adv.push_back(group_advantages(totals, cfg_.grpo.epsilon_std));
  }

  TrainLogRecord rec;
  rec.step = step;
  for (const auto& s : work) {
    rec.r_valid += s.reward.r_valid;
    rec.r_struct += s.reward.r_struct;
    rec.r_format += s.reward.r_format;
    rec.r_correct += s.reward.r_correct;
    rec.r_length += s.reward.r_length;
    rec.total += s.reward.total;
  }
  for (double* f : {&rec.r_valid, &rec.r_struct, &rec.r_format, &rec.r_correct, &rec.r_length, &rec.total}) {
    *f /= static_cast<double>(N);
  }

  const double lr = scheduled_lr(cfg_.optimizer, static_cast<int>(step));
  for (int epoch = 0; epoch < cfg_.grpo.epochs; ++epoch) {
    if (epoch > 0) {
      compiled = std::make_unique<CompiledPolicy>(params);
      parallel_for(N, cfg_.workers, [&](std::size_t i) {
        work[i].logp_theta = logprob(*compiled, prompts_[work[i].prompt], work[i].completion.tokens).per_token;
      });
    }
    std::vector<GroupTerms> groups(B);
    for (std::size_t j = 0; j < B; ++j) {
      for (std::size_t k = 0; k < G; ++k) {
        const SampleWork& s = work[j * G + k];
        groups[j].samples.push_back(
            SampleTerms{s.logp_theta, s.completion.logprobs, s.logp_ref, adv[j].advantages[k]});
      }
    }
    const ObjectiveResult res = grpo_objective(groups, cfg_.grpo);
    if (!std::isfinite(res.objective)) {
      save(params, step, "checkpoint_last_good.json");
      throw NonFiniteLoss("non-finite objective at step " + std::to_string(step));
    }
    if (epoch == 0) {
      rec.objective = res.objective;
      rec.kl_mean = res.kl_mean;
      rec.clip_fraction = res.clip_fraction;
    }

    parallel_for(N, cfg_.workers, [&](std::size_t i) {
      SampleWork& s = work[i];
      const Trace tr = forward(*compiled, prompts_[s.prompt], s.completion.tokens);
      s.effective = params.zero_gradient();
      backward(*compiled, tr, res.token_coefficients[i / G][i % G], s.effective);
      if (epoch == 0) {
        const std::vector<double> ones(s.completion.tokens.size(), 1.0);
        s.unit = params.zero_gradient();
        backward(*compiled, tr, ones, s.unit);
      }
    });

    Gradient eff = params.zero_gradient();
    for (const auto& s : work) eff.add(s.effective);
    Gradient grad = project_gradient(params, eff);
    grad.scale(-1.0);
    clip_gradient(grad, cfg_.optimizer.grad_clip);
    if (!grad.all_finite()) {
      save(params, step, "checkpoint_last_good.json");
      throw NonFiniteLoss("non-finite gradient at step " + std::to_string(step));
    }

    if (epoch == 0) {
      Gradient gv = params.zero_gradient();
      Gradient gc = params.zero_gradient();
      for (std::size_t j = 0; j < B; ++j) {
        double mv = 0.0, mc = 0.0;
        for (std::size_t k = 0; k < G; ++k) {
          mv += work[j * G + k].reward.r_valid;
          mc += work[j * G + k].reward.r_correct;
        }
        mv /= static_cast<double>(G);
        mc /= static_cast<double>(G);
        for (std::size_t k = 0; k < G; ++k) {
          const SampleWork& s = work[j * G + k];
          gv.add(s.unit, (s.reward.r_valid - mv) / static_cast<double>(N));
          gc.add(s.unit, (s.reward.r_correct - mc) / static_cast<double>(N));
        }
      }
      rec.grad_norm_valid = cfg_.reward.w_valid * project_gradient(params, gv).norm();
      rec.grad_norm_correct = cfg_.reward.w_correct * project_gradient(params, gc).norm();
    }

    const PolicyParams before = params;
    opt.step(params, grad, lr);
    if (!params.all_finite()) {
      save(before, step, "checkpoint_last_good.json");
      throw NonFiniteLoss("non-finite parameters after step " + std::to_string(step));
    }
  }
  return rec;
}

TrainResult Run::execute() {
  cfg_.validate();
  const int prompt_len = cfg_.task.code_digits + 3;
  if (prompt_len + cfg_.sampling.max_tokens > cfg_.policy.context) {
    throw ConfigError("prompt length plus sampling.max_tokens exceeds policy.context");
  }
  data_ = training_corpus(cfg_, schema_, vocab_);
  for (const auto& inst : data_) prompts_.push_back(prompt_ids(inst, vocab_));

  PolicyConfig pc;
  pc.vocab_size = vocab_.size();
  pc.embed_dim = cfg_.policy.embed_dim;
  pc.layers = cfg_.policy.layers;
  pc.mlp_dim = cfg_.policy.mlp_dim;
  pc.context = cfg_.policy.context;
  pc.init_scale = cfg_.policy.init_scale;
  pc.seed = stream_seed(cfg_.seed, {kInitStream});
  PolicyParams params = PolicyParams::init(pc);
  const PolicyParams initial = params;

  if (!out_.dir.empty()) {
    std::filesystem::create_directories(out_.dir);
    std::ofstream(path("config.cfg"), std::ios::binary | std::ios::trunc) << render_config(cfg_);
  }

  TrainResult result{schema_, vocab_, params, Checkpoint{vocab_, params, 0, cfg_.seed, "", schema_}, {}, 0.0, 0.0};
  const auto warm_t0 = Clock::now();
  if (cfg_.warm_start_steps > 0) {
    message("warm start: " + std::to_string(cfg_.warm_start_steps) + " steps");
    warm_start(params);
  }
  result.warm_seconds = seconds_since(warm_t0);
  result.warm_params = params;

  const ReferenceSnapshot ref(cfg_.reference == ReferenceMode::WarmStart ? params : initial);
  if (cfg_.policy.adapter_rank > 0) {
    params.enable_adapters(cfg_.policy.adapter_rank, cfg_.policy.adapter_alpha, stream_seed(cfg_.seed, {kAdapterStream}));
  }
  Adam opt(params, cfg_.optimizer.beta1, cfg_.optimizer.beta2, cfg_.optimizer.adam_eps);

  std::ofstream log_out;
  std::ofstream timing_out;
  if (!out_.dir.empty()) {
    log_out.open(path("train.log"), std::ios::binary | std::ios::trunc);
    timing_out.open(path("timing.tsv"), std::ios::binary | std::ios::trunc);
    if (!log_out || !timing_out) throw IoError("cannot write logs in " + out_.dir);
    log_out << log_header() << '\n';
    timing_out << timing_header() << '\n';
  }

  const auto rl_t0 = Clock::now();
  for (long step = 0; step < cfg_.optimizer.total_steps; ++step) {
    TrainLogRecord rec = rl_step(step, params, opt, ref);
    rec.wall_time = seconds_since(rl_t0);
    if (log_out.is_open()) {
      log_out << log_line(rec) << '\n' << std::flush;
      timing_out << timing_line(rec) << '\n' << std::flush;
    }
    if (out_.on_step) out_.on_step(rec);
    result.log.push_back(rec);
    if (cfg_.checkpoint_every > 0 && (step + 1) % cfg_.checkpoint_every == 0 &&
        step + 1 < cfg_.optimizer.total_steps) {
      save(params, step + 1, "checkpoint_step" + std::to_string(step + 1) + ".json");
    }
  }
  result.rl_seconds = seconds_since(rl_t0);
  result.final = Checkpoint{vocab_, params, cfg_.optimizer.total_steps, cfg_.seed, "stream-keyed", schema_};
  if (!out_.dir.empty()) save_checkpoint(path("checkpoint_final.json"), result.final);
  return result;
}

}  // namespace

const std::vector<std::string>& log_record_fields() {
  static const std::vector<std::string> fields = {
      "step",  "r_valid",   "r_struct", "r_format",      "r_correct",       "r_length",          "total",
      "objective", "kl_mean", "clip_fraction", "grad_norm_valid", "grad_norm_correct", "wall_time"};
  return fields;
}

std::string log_header() {
  const auto& f = log_record_fields();
  std::string out;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) out += (i ? "\t" : "") + f[i];
  return out;
}

std::string log_line(const TrainLogRecord& r) {
  const auto v = field_values(r);
  std::string out = std::to_string(r.step);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) out += "\t" + field_text(v[i]);
  return out;
}

std::string timing_header() { return "step\twall_time"; }

std::string timing_line(const TrainLogRecord& r) { return std::to_string(r.step) + "\t" + field_text(r.wall_time); }

std::vector<TrainLogRecord> read_log(const std::string& log_path, const std::string& timing_path) {
  std::ifstream in(log_path, std::ios::binary);
  if (!in) throw IoError("cannot open log " + log_path);
  std::string line;
  if (!std::getline(in, line) || line != log_header()) throw IoError(log_path + " does not start with the log header");
  std::vector<TrainLogRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() + 1 != log_record_fields().size()) throw IoError("wrong column count in " + log_path);
    std::vector<double> v;
    for (const auto& c : cols) v.push_back(parse_field(c, log_path));
    TrainLogRecord r;
    r.step = static_cast<long>(v[0]);
    r.r_valid = v[1];
    r.r_struct = v[2];
    r.r_format = v[3];
    r.r_correct = v[4];
    r.r_length = v[5];
    r.total = v[6];
    r.objective = v[7];
    r.kl_mean = v[8];
    r.clip_fraction = v[9];
    r.grad_norm_valid = v[10];
    r.grad_norm_correct = v[11];
    out.push_back(r);
  }
  if (!timing_path.empty()) {
    std::ifstream tin(timing_path, std::ios::binary);
    if (!tin) throw IoError("cannot open timing file " + timing_path);
    if (!std::getline(tin, line) || line != timing_header()) throw IoError(timing_path + " has no timing header");
    std::size_t i = 0;
    while (std::getline(tin, line) && i < out.size()) {
      if (line.empty()) continue;
      const auto cols = split(line, '\t');
      if (cols.size() != 2) throw IoError("wrong column count in " + timing_path);
      out[i++].wall_time = parse_field(cols[1], timing_path);
    }
  }
  return out;
}

std::string log_to_csv(const std::vector<TrainLogRecord>& log) {
  std::string out;
  const auto& f = log_record_fields();
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
  out += "\n";
  for (const auto& r : log) {
    const auto v = field_values(r);
    out += std::to_string(r.step);
    for (std::size_t i = 1; i < v.size(); ++i) out += "," + field_text(v[i]);
    out += "\n";
  }
  return out;
}

std::vector<TaskInstance> training_corpus(const TrainConfig& cfg, const Schema& schema, const Vocab& vocab) {
  TaskOptions topt;
  topt.code_digits = cfg.task.code_digits;
  return generate(schema, stream_seed(cfg.seed, {kDataStream}), cfg.task.dataset_size, &vocab, topt);
}

std::vector<TaskInstance> held_out_corpus(const TrainConfig& cfg, const Schema& schema, const Vocab& vocab) {
  std::set<std::vector<std::string>> seen;
  for (const auto& inst : training_corpus(cfg, schema, vocab)) seen.insert(inst.prompt_tokens);
  TaskOptions topt;
  topt.code_digits = cfg.task.code_digits;
  std::vector<TaskInstance> out;
  int pool = cfg.eval.corpus_size;
  for (int attempt = 0; attempt < 8 && static_cast<int>(out.size()) < cfg.eval.corpus_size; ++attempt) {
    pool *= 2;
    out.clear();
    for (auto& inst : generate(schema, cfg.eval.corpus_seed, pool, &vocab, topt)) {
      if (seen.count(inst.prompt_tokens) != 0) continue;
      inst.id = static_cast<int>(out.size());
      out.push_back(std::move(inst));
      if (static_cast<int>(out.size()) == cfg.eval.corpus_size) break;
    }
  }
  if (static_cast<int>(out.size()) < cfg.eval.corpus_size) {
    throw ConfigError("cannot find enough task codes disjoint from the training set");
  }
  return out;
}

Schema resolve_schema(const TaskConfig& task) {
  const auto p = std::filesystem::path(task.schema_dir) / (task.schema + ".json");
  if (!std::filesystem::exists(p)) {
    throw UnknownSchema("no schema named '" + task.schema + "' in " + task.schema_dir);
  }
  return load_schema_file(p.string());
}

TrainResult train(const TrainConfig& cfg, const TrainOutputs& outputs) {
  cfg.validate();
  return train(cfg, resolve_schema(cfg.task), outputs);
}

TrainResult train(const TrainConfig& cfg, const Schema& schema, const TrainOutputs& outputs) {
  Run run(cfg, schema, outputs);
  return run.execute();
}

std::string warm_start_target(const TaskInstance& instance, const WarmStartConfig& cfg, std::mt19937_64& rng) {
  const double u_drop = uniform01(rng);
  const double u_syntax = uniform01(rng);
  const double u_fence = uniform01(rng);
  json::Value truth = instance.ground_truth;
  if (u_drop < cfg.drop_key_noise) {
    std::vector<json::Value*> objects;
    collect_objects(truth, objects);
    if (!objects.empty()) {
      auto& members = objects[rng() % objects.size()]->members();
      members.erase(members.begin() + static_cast<std::ptrdiff_t>(rng() % members.size()));
    }
  }
  std::string body = json::serialize(truth);
  if (u_syntax < cfg.syntax_noise) body = break_syntax(body, rng);
  if (u_fence < cfg.fence_noise) {
    if (rng() % 2 == 0) return body;
    return "```\n" + body + "\n```";
  }
  return "```json\n" + body + "\n```";
}

std::vector<double> smooth(const std::vector<double>& xs, int window) {
  const long n = static_cast<long>(xs.size());
  const long half = std::max(0, window - 1) / 2;
  std::vector<double> out(xs.size());
  for (long i = 0; i < n; ++i) {
    const long lo = std::max(0L, i - half);
    const long hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (long k = lo; k <= hi; ++k) s += xs[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

CurriculumReport detect_curriculum(const std::vector<TrainLogRecord>& log, const CurriculumConfig& cfg) {
  if (log.empty()) throw ConfigError("detect_curriculum needs a non-empty log");
  if (cfg.window < 1) throw ConfigError("curriculum.window must be positive");
  const std::vector<std::pair<std::string, double TrainLogRecord::*>> comps = {
      {"r_valid", &TrainLogRecord::r_valid},
      {"r_struct", &TrainLogRecord::r_struct},
      {"r_format", &TrainLogRecord::r_format},
      {"r_correct", &TrainLogRecord::r_correct}};
  CurriculumReport report;
  const std::size_t n = log.size();
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.plateau_tail * static_cast<double>(n))));
  for (const auto& [name, member] : comps) {
    std::vector<double> raw;
    for (const auto& r : log) raw.push_back(r.*member);
    const std::vector<double> sm = smooth(raw, cfg.window);
    ComponentPhase ph;
    ph.component = name;
    ph.start = sm.front();
    double plateau = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) plateau += raw[i];
    ph.plateau = plateau / static_cast<double>(tail);
    const double rise = ph.plateau - ph.start;
    const bool finite = std::all_of(raw.begin(), raw.end(), [](double x) { return std::isfinite(x); });
    if (finite && std::abs(rise) >= cfg.min_rise) {
      ph.threshold = cfg.baseline == CurriculumBaseline::Start ? ph.start + cfg.fraction * rise
                                                               : cfg.fraction * ph.plateau;
      const double dir = rise > 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dir * (sm[i] - ph.threshold) >= 0.0) {
          ph.step = log[i].step;
          break;
        }
      }
      if (ph.step) ph.status = PhaseStatus::Reached;
    }
    report.components.push_back(ph);
  }
  std::vector<const ComponentPhase*> reached;
  for (const auto& c : report.components) {
    if (c.step) reached.push_back(&c);
  }
  std::stable_sort(reached.begin(), reached.end(),
                   [](const ComponentPhase* a, const ComponentPhase* b) { return *a->step < *b->step; });
  for (const auto* c : reached) report.ordering.push_back(c->component);
  const auto& v = report.components[0];
  const auto& c = report.components[3];
  report.syntax_before_semantics = v.step && c.step && *v.step < *c.step;
  return report;
}

}  // namespace rlstruct
