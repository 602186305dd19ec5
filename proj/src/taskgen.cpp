#include "rlstruct/taskgen.hpp"

#include <fstream>
#include <random>

#include "rlstruct/errors.hpp"
#include "rlstruct/policy.hpp"

namespace rlstruct {

const std::vector<std::string>& string_words() {
  static const std::vector<std::string> words = {"alpha", "bravo", "delta", "echo",  "gold",
                                                 "kilo",  "lima",  "nova",  "oscar", "tango"};
  return words;
}

namespace {

class LeafCursor {
 public:
  LeafCursor(const std::vector<int>& digits) : digits_(digits) {}
  int current() const { return digits_[next_ % digits_.size()]; }
  int take() { return digits_[next_++ % digits_.size()]; }
  int peek_after() const { return digits_[(next_ + 1) % digits_.size()]; }

 private:
  const std::vector<int>& digits_;
  std::size_t next_ = 0;
};

json::Value build(const SchemaNode& node, LeafCursor& cur, const TaskOptions& opt) {
  switch (node.kind) {
    case NodeKind::Object: {
      json::Value obj = json::Value::object();
      for (const auto& [key, child] : node.properties) obj.set(key, build(child, cur, opt));
      return obj;
    }
    case NodeKind::Array: {
      const std::size_t lo = node.min_items.value_or(1);
      const std::size_t hi = node.max_items.value_or(std::max(lo, opt.default_max_items));
      const std::size_t count = lo + static_cast<std::size_t>(cur.current()) % (hi - lo + 1);
      json::Value arr = json::Value::array();
      for (std::size_t i = 0; i < count; ++i) arr.push_back(build(*node.items, cur, opt));
      return arr;
    }
    case NodeKind::Enum: {
      const std::size_t n = node.enum_values.size();
      const int second = cur.peek_after();
      const int d = cur.take();
      const std::size_t idx = n <= 10 ? static_cast<std::size_t>(d) % n : static_cast<std::size_t>(10 * d + second) % n;
      return json::Value(node.enum_values[idx]);
    }
    case NodeKind::String: return json::Value(string_words()[static_cast<std::size_t>(cur.take())]);
    case NodeKind::Integer:
    case NodeKind::Number: return json::Value(cur.take());
    case NodeKind::Boolean: return json::Value(cur.take() % 2 == 1);
  }
  return json::Value(nullptr);
}

void check_vocab(const SchemaNode& node, const Vocab& vocab) {
  auto need = [&](const std::string& w) {
    if (!vocab.find(w)) throw VocabOverflow("word '" + w + "' is not in the vocabulary");
  };
  for (const auto& [key, child] : node.properties) {
    need(key);
    check_vocab(child, vocab);
  }
  if (node.items) check_vocab(*node.items, vocab);
  for (const auto& e : node.enum_values) need(e);
  if (node.kind == NodeKind::String) {
    for (const auto& w : string_words()) need(w);
  }
}

bool has_string_leaf(const SchemaNode& node) {
  if (node.kind == NodeKind::String) return true;
  for (const auto& [key, child] : node.properties) {
    if (has_string_leaf(child)) return true;
  }
  return node.items && has_string_leaf(*node.items);
}

}  // namespace

Vocab task_vocab(std::span<const Schema> schemas) {
  bool strings = false;
  for (const auto& s : schemas) strings = strings || has_string_leaf(s.root);
  if (!strings) return Vocab::for_schemas(schemas);
  const auto& words = string_words();
  return Vocab::for_schemas(schemas, std::span<const std::string>(words.data(), words.size()));
}

json::Value ground_truth_for(const Schema& schema, const std::vector<int>& digits, const TaskOptions& options) {
  if (digits.empty()) throw ConfigError("task code needs at least one digit");
  LeafCursor cur(digits);
  return build(schema.root, cur, options);
}

std::vector<TaskInstance> generate(const Schema& schema, std::uint64_t seed, int n, const Vocab* vocab,
                                   const TaskOptions& options) {
  if (n < 1) throw ConfigError("generate: n must be at least 1");
  if (options.code_digits < 1) throw ConfigError("generate: code_digits must be at least 1");
  if (vocab != nullptr) {
    check_vocab(schema.root, *vocab);
    if (!vocab->find(Vocab::schema_tag(schema.name))) {
      throw VocabOverflow("schema tag for '" + schema.name + "' is not in the vocabulary");
    }
  }
  std::mt19937_64 rng(stream_seed(seed, {0x7a5c}));
  std::vector<TaskInstance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> digits;
    for (int k = 0; k < options.code_digits; ++k) digits.push_back(static_cast<int>(rng() % 10));
    TaskInstance inst;
    inst.id = i;
    inst.schema_name = schema.name;
    inst.prompt_tokens.emplace_back(Vocab::kBos);
    inst.prompt_tokens.push_back(Vocab::schema_tag(schema.name));
    for (int d : digits) inst.prompt_tokens.push_back(std::to_string(d));
    inst.prompt_tokens.emplace_back(Vocab::kSep);
    inst.ground_truth = ground_truth_for(schema, digits, options);
    out.push_back(std::move(inst));
  }
  return out;
}

std::string canonical_json(const TaskInstance& instance) { return json::serialize(instance.ground_truth); }

std::string canonical_completion(const TaskInstance& instance) {
  return "```json\n" + canonical_json(instance) + "\n```";
}

std::vector<int> prompt_ids(const TaskInstance& instance, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(instance.prompt_tokens.size());
  for (const auto& t : instance.prompt_tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::string instance_to_line(const TaskInstance& instance) {
  json::Value v = json::Value::object();
  v.set("id", instance.id);
  v.set("schema_name", instance.schema_name);
  json::Value prompt = json::Value::array();
  for (const auto& t : instance.prompt_tokens) prompt.push_back(t);
  v.set("prompt_tokens", std::move(prompt));
  v.set("ground_truth", instance.ground_truth);
  return json::serialize(v);
}

TaskInstance instance_from_line(std::string_view line) {
  const auto parsed = json::parse_strict(line);
  if (!parsed.valid || !parsed.value->is_object()) throw IoError("instance line is not a JSON object");
  const json::Value& v = *parsed.value;
  const json::Value* id = v.find("id");
  const json::Value* name = v.find("schema_name");
  const json::Value* prompt = v.find("prompt_tokens");
  const json::Value* truth = v.find("ground_truth");
  if (id == nullptr || !id->is_integral() || name == nullptr || !name->is_string() || prompt == nullptr ||
      !prompt->is_array() || truth == nullptr) {
    throw IoError("instance line is missing id, schema_name, prompt_tokens or ground_truth");
  }
  TaskInstance inst;
  inst.id = static_cast<int>(id->as_number());
  inst.schema_name = name->as_string();
  for (const auto& t : prompt->items()) {
    if (!t.is_string()) throw IoError("prompt_tokens entries must be strings");
    inst.prompt_tokens.push_back(t.as_string());
  }
  inst.ground_truth = *truth;
  return inst;
}

void write_instances(const std::string& path, const std::vector<TaskInstance>& instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& inst : instances) out << instance_to_line(inst) << '\n';
}

std::vector<TaskInstance> read_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<TaskInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(instance_from_line(line));
  }
  return out;
}

}  // namespace rlstruct
