#include <fstream>
#include <sstream>

#include "rlstruct/errors.hpp"
#include "rlstruct/policy.hpp"

namespace rlstruct {

namespace {

constexpr const char* kFormat = "rlstruct-checkpoint";
constexpr int kVersion = 1;

json::Value number_array(const std::vector<double>& xs) {
  json::Value arr = json::Value::array();
  arr.items().reserve(xs.size());
  for (double x : xs) arr.push_back(x);
  return arr;
}

json::Value int_array(const std::vector<int>& xs) {
  json::Value arr = json::Value::array();
  for (int x : xs) arr.push_back(x);
  return arr;
}

const json::Value& field(const json::Value& obj, std::string_view name) {
  const json::Value* v = obj.find(name);
  if (v == nullptr) throw CheckpointError("checkpoint is missing field '" + std::string(name) + "'");
  return *v;
}

double number(const json::Value& obj, std::string_view name) {
  const json::Value& v = field(obj, name);
  if (!v.is_number()) throw CheckpointError("checkpoint field '" + std::string(name) + "' must be a number");
  return v.as_number();
}

std::uint64_t u64(const json::Value& obj, std::string_view name) {
  const json::Value& v = field(obj, name);
  if (!v.is_string()) throw CheckpointError("checkpoint field '" + std::string(name) + "' must be a string");
  try {
    return std::stoull(v.as_string());
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint field '" + std::string(name) + "' is not an unsigned integer");
  }
}

std::vector<double> doubles(const json::Value& v) {
  if (!v.is_array()) throw CheckpointError("expected a number array");
  std::vector<double> out;
  out.reserve(v.items().size());
  for (const auto& x : v.items()) {
    if (!x.is_number()) throw CheckpointError("expected a number array");
    out.push_back(x.as_number());
  }
  return out;
}

std::vector<int> ints(const json::Value& v) {
  std::vector<int> out;
  for (double d : doubles(v)) out.push_back(static_cast<int>(d));
  return out;
}

struct SelfTest {
  std::vector<int> prompt;
  std::vector<int> completion;
};

SelfTest self_test_fixture(const Vocab& vocab, const PolicyConfig& cfg) {
  SelfTest st;
  st.prompt.push_back(vocab.bos());
  const int room = std::min(8, cfg.context - 2);
  for (int id = 0; id < vocab.size() && static_cast<int>(st.completion.size()) < room; ++id) {
    if (!vocab.is_special(id)) st.completion.push_back(id);
  }
  st.completion.push_back(vocab.eos());
  return st;
}

}  // namespace

class CheckpointCodec {
 public:
  static json::Value encode(const Checkpoint& ckpt) {
    const PolicyParams& p = ckpt.params;
    const PolicyConfig& c = p.config();
    json::Value doc = json::Value::object();
    doc.set("format", kFormat);
    doc.set("version", kVersion);
    doc.set("step", static_cast<double>(ckpt.step));
    doc.set("master_seed", std::to_string(ckpt.master_seed));
    doc.set("rng_state", ckpt.rng_state);

    json::Value vocab = json::Value::array();
    for (const auto& t : ckpt.vocab.tokens()) vocab.push_back(t);
    doc.set("vocab", std::move(vocab));

    json::Value pol = json::Value::object();
    pol.set("vocab_size", c.vocab_size);
    pol.set("embed_dim", c.embed_dim);
    pol.set("layers", c.layers);
    pol.set("mlp_dim", c.mlp_dim);
    pol.set("context", c.context);
    pol.set("init_scale", c.init_scale);
    pol.set("seed", std::to_string(c.seed));
    doc.set("policy", std::move(pol));

    json::Value adapters = json::Value::object();
    adapters.set("rank", p.adapter_rank_);
    adapters.set("alpha", p.adapter_alpha_);
    doc.set("adapters", std::move(adapters));

    json::Value tensors = json::Value::array();
    for (const auto& t : p.tensors_) {
      json::Value tv = json::Value::object();
      tv.set("name", t.name);
      tv.set("rows", t.rows);
      tv.set("cols", t.cols);
      tv.set("trainable", t.trainable);
      tv.set("data", number_array(t.data));
      tensors.push_back(std::move(tv));
    }
    doc.set("tensors", std::move(tensors));
    doc.set("schema", ckpt.schema ? schema_to_value(*ckpt.schema) : json::Value(nullptr));

    const SelfTest st = self_test_fixture(ckpt.vocab, c);
    const SequenceLogprob lp = logprob(p, st.prompt, st.completion);
    json::Value test = json::Value::object();
    test.set("prompt", int_array(st.prompt));
    test.set("completion", int_array(st.completion));
    test.set("logprobs", number_array(lp.per_token));
    doc.set("self_test", std::move(test));
    return doc;
  }

  static Checkpoint decode(const json::Value& doc) {
    if (!doc.is_object()) throw CheckpointError("checkpoint must be a JSON object");
    const json::Value& fmt = field(doc, "format");
    if (!fmt.is_string() || fmt.as_string() != kFormat) throw CheckpointError("not an rlstruct checkpoint");
    if (number(doc, "version") != kVersion) throw CheckpointError("unsupported checkpoint version");

    std::vector<std::string> tokens;
    const json::Value& vocab_v = field(doc, "vocab");
    if (!vocab_v.is_array()) throw CheckpointError("'vocab' must be an array");
    for (const auto& t : vocab_v.items()) {
      if (!t.is_string()) throw CheckpointError("vocab entries must be strings");
      tokens.push_back(t.as_string());
    }

    const json::Value& pol = field(doc, "policy");
    PolicyConfig c;
    c.vocab_size = static_cast<int>(number(pol, "vocab_size"));
    c.embed_dim = static_cast<int>(number(pol, "embed_dim"));
    c.layers = static_cast<int>(number(pol, "layers"));
    c.mlp_dim = static_cast<int>(number(pol, "mlp_dim"));
    c.context = static_cast<int>(number(pol, "context"));
    c.init_scale = number(pol, "init_scale");
    c.seed = u64(pol, "seed");
    c.validate();

    PolicyParams p;
    p.cfg_ = c;
    const json::Value& adapters = field(doc, "adapters");
    p.adapter_rank_ = static_cast<int>(number(adapters, "rank"));
    p.adapter_alpha_ = number(adapters, "alpha");
    const json::Value& tensors = field(doc, "tensors");
    if (!tensors.is_array()) throw CheckpointError("'tensors' must be an array");
    for (const auto& tv : tensors.items()) {
      Tensor t;
      const json::Value& name = field(tv, "name");
      if (!name.is_string()) throw CheckpointError("tensor name must be a string");
      t.name = name.as_string();
      t.rows = static_cast<int>(number(tv, "rows"));
      t.cols = static_cast<int>(number(tv, "cols"));
      const json::Value& tr = field(tv, "trainable");
      if (!tr.is_bool()) throw CheckpointError("tensor 'trainable' must be a boolean");
      t.trainable = tr.as_bool();
      t.data = doubles(field(tv, "data"));
      if (t.data.size() != static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols)) {
        throw CheckpointError("tensor " + t.name + " has the wrong number of values");
      }
      p.tensors_.push_back(std::move(t));
    }
    const PolicyParams reference = PolicyParams::init(c);
    p.base_count_ = reference.base_count_;
    const std::size_t expected = p.base_count_ + (p.adapter_rank_ > 0 ? 2 * reference.adapter_targets().size() : 0);
    if (p.tensors_.size() != expected) throw CheckpointError("checkpoint tensor count does not match its config");
    for (std::size_t i = 0; i < p.base_count_; ++i) {
      const Tensor& want = reference.tensors_[i];
      if (p.tensors_[i].name != want.name || p.tensors_[i].rows != want.rows || p.tensors_[i].cols != want.cols) {
        throw CheckpointError("tensor " + p.tensors_[i].name + " does not match the policy layout");
      }
    }

    Checkpoint ckpt{Vocab(std::move(tokens)), std::move(p), 0, 0, {}, std::nullopt};
    if (ckpt.vocab.size() != c.vocab_size) throw CheckpointError("vocab size does not match policy config");
    ckpt.step = static_cast<long>(number(doc, "step"));
    ckpt.master_seed = u64(doc, "master_seed");
    const json::Value& rng = field(doc, "rng_state");
    if (!rng.is_string()) throw CheckpointError("'rng_state' must be a string");
    ckpt.rng_state = rng.as_string();
    const json::Value& schema = field(doc, "schema");
    if (!schema.is_null()) ckpt.schema = parse_schema(json::serialize(schema));

    const json::Value& test = field(doc, "self_test");
    const std::vector<int> prompt = ints(field(test, "prompt"));
    const std::vector<int> completion = ints(field(test, "completion"));
    const std::vector<double> recorded = doubles(field(test, "logprobs"));
    const SequenceLogprob now = logprob(ckpt.params, prompt, completion);
    if (now.per_token != recorded) {
      throw CheckpointError("checkpoint self-test failed: recomputed log-probs differ from the recorded ones");
    }
    return ckpt;
  }
};

std::string encode_checkpoint(const Checkpoint& ckpt) { return json::serialize(CheckpointCodec::encode(ckpt)); }

Checkpoint decode_checkpoint(std::string_view text) {
  const json::ParseOutcome parsed = json::parse_strict(text);
  if (!parsed.valid) {
    throw CheckpointError("checkpoint is not valid JSON (" + std::string(json::to_string(*parsed.error_kind)) +
                          " at offset " + std::to_string(*parsed.error_offset) + ")");
  }
  return CheckpointCodec::decode(*parsed.value);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << encode_checkpoint(ckpt) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace rlstruct
