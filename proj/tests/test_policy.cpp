#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rlstruct/errors.hpp"
#include "rlstruct/policy.hpp"

using namespace rlstruct;

namespace {

Vocab small_vocab() {
  return Vocab({"<bos>", "<eos>", "<pad>", "<sep>", "a", "b", "c", "{", "}", "1"});
}

PolicyConfig small_config(int vocab_size) {
  PolicyConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = 6;
  c.layers = 2;
  c.mlp_dim = 8;
  c.context = 16;
  c.init_scale = 0.4;
  c.seed = 11;
  return c;
}

double weighted_objective(const PolicyParams& p, const std::vector<int>& prompt, const std::vector<int>& completion,
                          const std::vector<double>& coeff) {
  const SequenceLogprob lp = logprob(p, prompt, completion);
  double s = 0.0;
  for (std::size_t t = 0; t < coeff.size(); ++t) s += coeff[t] * lp.per_token[t];
  return s;
}

void check_fd(PolicyParams& p) {
  const std::vector<int> prompt = {0, 4, 9, 3};
  const std::vector<int> completion = {7, 5, 6, 8, 1};
  const std::vector<double> coeff = {0.7, -1.3, 0.4, 2.0, -0.5};
  const WeightedSequence seq{prompt, completion, coeff};
  const Gradient g = grad_logprob_weighted(p, std::span<const WeightedSequence>(&seq, 1));
  REQUIRE(p.parameter_count(true) <= 2000);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t ti = 0; ti < p.tensors().size(); ++ti) {
    Tensor& t = p.tensors()[ti];
    for (std::size_t k = 0; k < t.data.size(); ++k) {
      const double saved = t.data[k];
      t.data[k] = saved + h;
      const double up = weighted_objective(p, prompt, completion, coeff);
      t.data[k] = saved - h;
      const double down = weighted_objective(p, prompt, completion, coeff);
      t.data[k] = saved;
      const double fd = t.trainable ? (up - down) / (2 * h) : 0.0;
      const double an = g.data[ti][k];
      const double rel = std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an));
      if (std::abs(fd - an) > 1e-7) worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("finite differences agree with backprop") {
    const Vocab v = small_vocab();
    PolicyParams p = PolicyParams::init(small_config(v.size()));
    check_fd(p);
  }

  TEST_CASE("finite differences agree with backprop through adapters") {
    const Vocab v = small_vocab();
    PolicyParams p = PolicyParams::init(small_config(v.size()));
    p.enable_adapters(2, 4.0, 5);
    // Non-zero B so that gradients reach A as well.
    for (auto& t : p.tensors()) {
      if (t.name.size() > 2 && t.name.substr(t.name.size() - 2) == ".B") {
        for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] = 0.05 * std::sin(static_cast<double>(k) + 1.0);
      }
    }
    check_fd(p);
  }

  TEST_CASE("next-token distribution sums to one") {
    const Vocab v = small_vocab();
    const PolicyParams p = PolicyParams::init(small_config(v.size()));
    const CompiledPolicy cp(p);
    const std::vector<int> prompt = {0, 4, 5};
    double total = 0.0;
    for (int tok = 0; tok < v.size(); ++tok) {
      const std::vector<int> c = {tok};
      total += std::exp(logprob(cp, prompt, c).sum);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  TEST_CASE("sampled log-probs equal recomputed log-probs exactly") {
    const Vocab v = small_vocab();
    const PolicyParams p = PolicyParams::init(small_config(v.size()));
    const CompiledPolicy cp(p);
    const std::vector<int> prompt = {0, 4};
    for (std::uint64_t s = 0; s < 20; ++s) {
      std::mt19937_64 rng(s);
      SampleOptions o;
      o.max_tokens = 10;
      o.eos = v.eos();
      const Completion c = sample(cp, v, prompt, o, rng);
      const SequenceLogprob lp = logprob(cp, prompt, c.tokens);
      CHECK(lp.per_token == c.logprobs);
    }
  }

  TEST_CASE("sample groups are deterministic in their seeds") {
    const Vocab v = small_vocab();
    const PolicyParams p = PolicyParams::init(small_config(v.size()));
    const CompiledPolicy cp(p);
    const std::vector<int> prompt = {0, 4};
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
    SampleOptions o;
    o.max_tokens = 10;
    o.eos = v.eos();
    const auto a = sample_group(cp, v, prompt, o, seeds);
    const auto b = sample_group(cp, v, prompt, o, seeds);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tokens == b[i].tokens);
    CHECK_THROWS_AS(sample_group(cp, v, prompt, o, std::span<const std::uint64_t>(seeds.data(), 1)), ConfigError);
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    const Vocab v = small_vocab();
    PolicyParams p = PolicyParams::init(small_config(v.size()));
    p.enable_adapters(2, 4.0, 9);
    Checkpoint ck{v, p, 42, 7, "abc", std::nullopt};
    const Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
    CHECK(back.params == p);
    CHECK(back.vocab == v);
    CHECK(back.step == 42);
    CHECK(back.master_seed == 7);
    std::string text = encode_checkpoint(ck);
    const auto pos = text.find("\"logprobs\":[") + 12;
    text[pos + 3] = text[pos + 3] == '1' ? '2' : '1';
    CHECK_THROWS_AS(decode_checkpoint(text), CheckpointError);
  }

  TEST_CASE("greedy sampling is deterministic") {
    const Vocab v = small_vocab();
    const PolicyParams p = PolicyParams::init(small_config(v.size()));
    const CompiledPolicy cp(p);
    const std::vector<int> prompt = {0, 4};
    SampleOptions o;
    o.temperature = 0.0;
    o.max_tokens = 8;
    o.eos = v.eos();
    std::mt19937_64 r1(1), r2(2);
    CHECK(sample(cp, v, prompt, o, r1).tokens == sample(cp, v, prompt, o, r2).tokens);
  }
}
