#pragma once

// Tiny autoregressive token policy with exact log-probabilities and
// hand-written backpropagation.
//
// Architecture: token + position embeddings, `layers` pre-norm blocks of
// single-head causal attention and a GELU MLP, then an RMS-normalized output
// head. Every tensor is double precision. Optional low-rank adapters add
// (alpha / rank) * A * B to each attention/MLP matrix and to the head; when
// they are enabled the base weights are frozen.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rlstruct/schema.hpp"
#include "rlstruct/vocab.hpp"

namespace rlstruct {

struct PolicyConfig {
  int vocab_size = 0;
  int embed_dim = 32;
  int layers = 2;
  int mlp_dim = 64;
  int context = 128;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  bool trainable = true;
};

// Gradient laid out like PolicyParams::tensors(); frozen tensors stay zero.
struct Gradient {
  std::vector<std::vector<double>> data;

  void add(const Gradient& other, double scale = 1.0);
  void scale(double s);
  double norm() const;
  bool all_finite() const;
};

class PolicyParams {
 public:
  static PolicyParams init(const PolicyConfig& cfg);

  // Adds A (uniform init) and B (zeros) factors for every designated matrix
  // and freezes the base weights.
  void enable_adapters(int rank, double alpha, std::uint64_t seed);

  const PolicyConfig& config() const { return cfg_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  const Tensor* find(std::string_view name) const;
  Tensor* find(std::string_view name);

  bool adapters_enabled() const { return adapter_rank_ > 0; }
  int adapter_rank() const { return adapter_rank_; }
  double adapter_alpha() const { return adapter_alpha_; }
  std::size_t base_tensor_count() const { return base_count_; }
  std::size_t parameter_count(bool trainable_only = false) const;
  bool all_finite() const;

  Gradient zero_gradient() const;

  // Names of matrices that receive adapters, in adapter order.
  std::vector<std::string> adapter_targets() const;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b);

 private:
  friend class CheckpointCodec;
  PolicyConfig cfg_;
  std::vector<Tensor> tensors_;
  std::size_t base_count_ = 0;
  int adapter_rank_ = 0;
  double adapter_alpha_ = 0.0;
};

// Effective (adapter-merged) weights. Immutable; may be shared by many
// sampling threads.
class CompiledPolicy {
 public:
  explicit CompiledPolicy(const PolicyParams& params);
  const PolicyConfig& config() const { return cfg_; }
  const std::vector<double>& weight(std::size_t base_index) const { return weights_[base_index]; }

 private:
  PolicyConfig cfg_;
  std::vector<std::vector<double>> weights_;
};

// Immutable copy of a parameter set taken at snapshot time.
class ReferenceSnapshot {
 public:
  explicit ReferenceSnapshot(const PolicyParams& params) : params_(params), compiled_(params_) {}
  const PolicyParams& params() const { return params_; }
  const CompiledPolicy& compiled() const { return compiled_; }

 private:
  const PolicyParams params_;
  const CompiledPolicy compiled_;
};

ReferenceSnapshot snapshot(const PolicyParams& params);

// Activations of one forward pass over prompt + completion; row t holds the
// state after reading sequence[t] and the distribution for sequence[t + 1].
struct Trace {
  struct Layer {
    std::vector<double> h_in, a, rms_a, q, k, v, att, o, h_mid, b, rms_b, u, g;
  };
  int capacity = 0;
  int rows = 0;
  std::vector<int> sequence;
  int prompt_length = 0;
  std::vector<Layer> layers;
  std::vector<double> h_out, f, rms_f, logits, logz;

  Trace(const PolicyConfig& cfg, int capacity);
  // Log-probability of sequence[t + 1] at row t.
  double target_logprob(int row) const;
};

// Full forward pass. Throws UnknownToken for out-of-range ids and ConfigError
// when the sequence exceeds the context.
Trace forward(const CompiledPolicy& policy, std::span<const int> prompt, std::span<const int> completion);

struct SequenceLogprob {
  std::vector<double> per_token;
  double sum = 0.0;
};

SequenceLogprob logprob(const CompiledPolicy& policy, std::span<const int> prompt, std::span<const int> completion);
SequenceLogprob logprob(const PolicyParams& params, std::span<const int> prompt, std::span<const int> completion);

// Accumulates the gradient of sum_t coeff[t] * log p(completion[t]) into
// `effective` (laid out over the base tensors; adapter slots untouched).
void backward(const CompiledPolicy& policy, const Trace& trace, std::span<const double> coefficients,
              Gradient& effective);

// Maps a gradient over effective weights to the trainable tensors: identity
// for full training, chain rule onto A/B (base zeroed) with adapters.
Gradient project_gradient(const PolicyParams& params, const Gradient& effective);

struct WeightedSequence {
  std::span<const int> prompt;
  std::span<const int> completion;
  // One coefficient per completion token, or a single value broadcast to all.
  std::span<const double> coefficients;
};

Gradient grad_logprob_weighted(const PolicyParams& params, std::span<const WeightedSequence> batch);

struct SampleOptions {
  double temperature = 1.0;
  int max_tokens = 64;
  int eos = -1;
};

struct Completion {
  std::vector<int> prompt;
  std::vector<int> tokens;  // includes the terminating EOS when present
  std::vector<double> logprobs;  // under the sampling parameters, temperature 1
  std::string text;
  bool truncated = false;  // LengthExceeded: hit max_tokens without EOS
};

// Temperatures at or below this value select the argmax token.
inline constexpr double kGreedyTemperature = 1e-6;

Completion sample(const CompiledPolicy& policy, const Vocab& vocab, std::span<const int> prompt,
                  const SampleOptions& options, std::mt19937_64& rng);

// One completion per seed; deterministic in (params, prompt, seeds).
// Throws ConfigError when fewer than two seeds are given.
std::vector<Completion> sample_group(const CompiledPolicy& policy, const Vocab& vocab, std::span<const int> prompt,
                                     const SampleOptions& options, std::span<const std::uint64_t> seeds);

// Stream seed derived from a master seed and a key tuple.
std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> key);
double uniform01(std::mt19937_64& rng);

struct Checkpoint {
  Vocab vocab;
  PolicyParams params;
  long step = 0;
  std::uint64_t master_seed = 0;
  std::string rng_state;
  std::optional<Schema> schema;
};

// Text format: one JSON document; doubles use shortest round-trip decimals so
// reloading is bit-exact. A self-test block stores log-probs for a fixture
// sequence; load_checkpoint recomputes them and throws CheckpointError on any
// bit difference.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view text);

}  // namespace rlstruct
