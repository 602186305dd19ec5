#include "rlstruct/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlstruct/errors.hpp"

namespace rlstruct {

namespace {

constexpr double kRmsEps = 1e-5;
constexpr int kPerLayer = 8;
enum LayerSlot { kWq = 0, kWk, kWv, kWo, kW1, kB1, kW2, kB2 };
constexpr std::size_t kTokEmb = 0;
constexpr std::size_t kPosEmb = 1;

std::size_t layer_index(int layer, LayerSlot slot) { return 2 + static_cast<std::size_t>(layer) * kPerLayer + slot; }
std::size_t head_index(const PolicyConfig& c) { return 2 + static_cast<std::size_t>(c.layers) * kPerLayer; }
std::size_t head_bias_index(const PolicyConfig& c) { return head_index(c) + 1; }

const char* slot_name(int slot) {
  static const char* names[] = {"wq", "wk", "wv", "wo", "w1", "b1", "w2", "b2"};
  return names[slot];
}

// Base tensor indices that receive adapters.
std::vector<std::size_t> adapter_base_indices(const PolicyConfig& c) {
  std::vector<std::size_t> out;
  for (int l = 0; l < c.layers; ++l) {
    for (LayerSlot s : {kWq, kWk, kWv, kWo, kW1, kW2}) out.push_back(layer_index(l, s));
  }
  out.push_back(head_index(c));
  return out;
}

// y += x * W for row vector x (len in) and W (in x out, row-major).
void vec_mat_acc(const double* x, const double* W, int in, int out, double* y) {
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = W + static_cast<std::size_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

// x += W * dy, i.e. dx = dy * W^T.
void mat_vec_acc(const double* W, const double* dy, int in, int out, double* dx) {
  for (int i = 0; i < in; ++i) {
    const double* row = W + static_cast<std::size_t>(i) * out;
    double s = 0.0;
    for (int j = 0; j < out; ++j) s += row[j] * dy[j];
    dx[i] += s;
  }
}

// dW += x^T dy.
void outer_acc(const double* x, const double* dy, int in, int out, double* dW) {
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* row = dW + static_cast<std::size_t>(i) * out;
    for (int j = 0; j < out; ++j) row[j] += xi * dy[j];
  }
}

double rms_norm(const double* x, int n, double* y) {
  double ss = 0.0;
  for (int i = 0; i < n; ++i) ss += x[i] * x[i];
  const double r = std::sqrt(ss / n + kRmsEps);
  for (int i = 0; i < n; ++i) y[i] = x[i] / r;
  return r;
}

// dx += d(y)/dx^T dy for y = x / rms(x).
void rms_norm_back(const double* y, double r, const double* dy, int n, double* dx) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += dy[i] * y[i];
  dot /= n;
  for (int i = 0; i < n; ++i) dx[i] += (dy[i] - y[i] * dot) / r;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u))); }

double gelu_grad(double u) {
  const double th = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

void fill_uniform(std::vector<double>& v, double scale, std::mt19937_64& rng) {
  for (double& x : v) x = (2.0 * uniform01(rng) - 1.0) * scale;
}

// Computes row t of the trace given rows 0..t-1 are already present.
void compute_row(const CompiledPolicy& w, Trace& tr, int t) {
  const PolicyConfig& c = w.config();
  const int d = c.embed_dim;
  const int H = c.mlp_dim;
  const int V = c.vocab_size;
  const std::size_t td = static_cast<std::size_t>(t) * d;
  const int token = tr.sequence[static_cast<std::size_t>(t)];

  std::vector<double> h(static_cast<std::size_t>(d));
  const auto& tok = w.weight(kTokEmb);
  const auto& pos = w.weight(kPosEmb);
  for (int i = 0; i < d; ++i) h[i] = tok[static_cast<std::size_t>(token) * d + i] + pos[td + i];

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> tmp(static_cast<std::size_t>(std::max(d, H)));
  for (int l = 0; l < c.layers; ++l) {
    Trace::Layer& L = tr.layers[static_cast<std::size_t>(l)];
    std::copy(h.begin(), h.end(), L.h_in.begin() + td);
    L.rms_a[t] = rms_norm(h.data(), d, &L.a[td]);
    std::fill(&L.q[td], &L.q[td] + d, 0.0);
    std::fill(&L.k[td], &L.k[td] + d, 0.0);
    std::fill(&L.v[td], &L.v[td] + d, 0.0);
    vec_mat_acc(&L.a[td], w.weight(layer_index(l, kWq)).data(), d, d, &L.q[td]);
    vec_mat_acc(&L.a[td], w.weight(layer_index(l, kWk)).data(), d, d, &L.k[td]);
    vec_mat_acc(&L.a[td], w.weight(layer_index(l, kWv)).data(), d, d, &L.v[td]);

    double* att = &L.att[static_cast<std::size_t>(t) * tr.capacity];
    double mx = -INFINITY;
    for (int j = 0; j <= t; ++j) {
      double s = 0.0;
      const double* kj = &L.k[static_cast<std::size_t>(j) * d];
      for (int i = 0; i < d; ++i) s += L.q[td + i] * kj[i];
      att[j] = s * scale;
      mx = std::max(mx, att[j]);
    }
    double z = 0.0;
    for (int j = 0; j <= t; ++j) {
      att[j] = std::exp(att[j] - mx);
      z += att[j];
    }
    for (int j = 0; j <= t; ++j) att[j] /= z;
    double* o = &L.o[td];
    std::fill(o, o + d, 0.0);
    for (int j = 0; j <= t; ++j) {
      const double* vj = &L.v[static_cast<std::size_t>(j) * d];
      for (int i = 0; i < d; ++i) o[i] += att[j] * vj[i];
    }
    vec_mat_acc(o, w.weight(layer_index(l, kWo)).data(), d, d, h.data());
    std::copy(h.begin(), h.end(), L.h_mid.begin() + td);

    L.rms_b[t] = rms_norm(h.data(), d, &L.b[td]);
    const std::size_t tH = static_cast<std::size_t>(t) * H;
    double* u = &L.u[tH];
    const auto& b1 = w.weight(layer_index(l, kB1));
    std::copy(b1.begin(), b1.end(), u);
    vec_mat_acc(&L.b[td], w.weight(layer_index(l, kW1)).data(), d, H, u);
    double* g = &L.g[tH];
    for (int k = 0; k < H; ++k) g[k] = gelu(u[k]);
    const auto& b2 = w.weight(layer_index(l, kB2));
    for (int i = 0; i < d; ++i) h[i] += b2[i];
    vec_mat_acc(g, w.weight(layer_index(l, kW2)).data(), H, d, h.data());
  }

  std::copy(h.begin(), h.end(), tr.h_out.begin() + td);
  tr.rms_f[t] = rms_norm(h.data(), d, &tr.f[td]);
  double* logits = &tr.logits[static_cast<std::size_t>(t) * V];
  const auto& hb = w.weight(head_bias_index(c));
  std::copy(hb.begin(), hb.end(), logits);
  vec_mat_acc(&tr.f[td], w.weight(head_index(c)).data(), d, V, logits);
  double mx = -INFINITY;
  for (int j = 0; j < V; ++j) mx = std::max(mx, logits[j]);
  double z = 0.0;
  for (int j = 0; j < V; ++j) z += std::exp(logits[j] - mx);
  tr.logz[t] = mx + std::log(z);
  tr.rows = t + 1;
}

void check_tokens(const PolicyConfig& c, std::span<const int> ids) {
  for (int id : ids) {
    if (id < 0 || id >= c.vocab_size) throw UnknownToken("token id " + std::to_string(id) + " out of range");
  }
}

}  // namespace

void PolicyConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("policy.vocab_size must be at least 2");
  if (embed_dim < 1 || layers < 1 || mlp_dim < 1) throw ConfigError("policy dimensions must be positive");
  if (context < 2) throw ConfigError("policy.context must be at least 2");
  if (!(init_scale > 0.0)) throw ConfigError("policy.init_scale must be positive");
}

void Gradient::add(const Gradient& other, double s) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& a = data[i];
    const auto& b = other.data[i];
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += s * b[j];
  }
}

void Gradient::scale(double s) {
  for (auto& t : data) {
    for (double& x : t) x *= s;
  }
}

double Gradient::norm() const {
  double ss = 0.0;
  for (const auto& t : data) {
    for (double x : t) ss += x * x;
  }
  return std::sqrt(ss);
}

bool Gradient::all_finite() const {
  for (const auto& t : data) {
    for (double x : t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg) {
  cfg.validate();
  PolicyParams p;
  p.cfg_ = cfg;
  const int d = cfg.embed_dim;
  const int H = cfg.mlp_dim;
  const int V = cfg.vocab_size;
  auto add = [&](std::string name, int rows, int cols) {
    p.tensors_.push_back(Tensor{std::move(name), rows, cols,
                                std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0), true});
  };
  add("tok_emb", V, d);
  add("pos_emb", cfg.context, d);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + slot_name(kWq), d, d);
    add(pre + slot_name(kWk), d, d);
    add(pre + slot_name(kWv), d, d);
    add(pre + slot_name(kWo), d, d);
    add(pre + slot_name(kW1), d, H);
    add(pre + slot_name(kB1), 1, H);
    add(pre + slot_name(kW2), H, d);
    add(pre + slot_name(kB2), 1, d);
  }
  add("head", d, V);
  add("head_b", 1, V);
  p.base_count_ = p.tensors_.size();

  std::mt19937_64 rng(stream_seed(cfg.seed, {0x9011c7}));
  for (auto& t : p.tensors_) {
    if (t.rows == 1) continue;  // biases start at zero
    fill_uniform(t.data, cfg.init_scale, rng);
  }
  return p;
}

void PolicyParams::enable_adapters(int rank, double alpha, std::uint64_t seed) {
  if (rank < 1) throw ConfigError("adapter rank must be positive");
  if (adapters_enabled()) throw ConfigError("adapters are already enabled");
  adapter_rank_ = rank;
  adapter_alpha_ = alpha;
  for (auto& t : tensors_) t.trainable = false;
  std::mt19937_64 rng(stream_seed(seed, {0xada9}));
  for (std::size_t idx : adapter_base_indices(cfg_)) {
    const Tensor& base = tensors_[idx];
    Tensor a{base.name + ".A", base.rows, rank, std::vector<double>(static_cast<std::size_t>(base.rows) * rank), true};
    Tensor b{base.name + ".B", rank, base.cols, std::vector<double>(static_cast<std::size_t>(rank) * base.cols, 0.0),
             true};
    fill_uniform(a.data, cfg_.init_scale, rng);
    tensors_.push_back(std::move(a));
    tensors_.push_back(std::move(b));
  }
}

const Tensor* PolicyParams::find(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Tensor* PolicyParams::find(std::string_view name) {
  for (auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::size_t PolicyParams::parameter_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (!trainable_only || t.trainable) n += t.data.size();
  }
  return n;
}

bool PolicyParams::all_finite() const {
  for (const auto& t : tensors_) {
    for (double x : t.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

Gradient PolicyParams::zero_gradient() const {
  Gradient g;
  g.data.reserve(tensors_.size());
  for (const auto& t : tensors_) g.data.emplace_back(t.data.size(), 0.0);
  return g;
}

std::vector<std::string> PolicyParams::adapter_targets() const {
  std::vector<std::string> out;
  for (std::size_t idx : adapter_base_indices(cfg_)) out.push_back(tensors_[idx].name);
  return out;
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  if (a.tensors_.size() != b.tensors_.size() || a.adapter_rank_ != b.adapter_rank_ ||
      a.adapter_alpha_ != b.adapter_alpha_) {
    return false;
  }
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const Tensor& x = a.tensors_[i];
    const Tensor& y = b.tensors_[i];
    if (x.name != y.name || x.rows != y.rows || x.cols != y.cols || x.trainable != y.trainable || x.data != y.data) {
      return false;
    }
  }
  return true;
}

CompiledPolicy::CompiledPolicy(const PolicyParams& params) : cfg_(params.config()) {
  const auto& ts = params.tensors();
  weights_.reserve(params.base_tensor_count());
  for (std::size_t i = 0; i < params.base_tensor_count(); ++i) weights_.push_back(ts[i].data);
  if (!params.adapters_enabled()) return;
  const int r = params.adapter_rank();
  const double s = params.adapter_alpha() / r;
  std::size_t slot = params.base_tensor_count();
  for (std::size_t idx : adapter_base_indices(cfg_)) {
    const Tensor& base = ts[idx];
    const Tensor& A = ts[slot];
    const Tensor& B = ts[slot + 1];
    slot += 2;
    auto& W = weights_[idx];
    for (int i = 0; i < base.rows; ++i) {
      for (int k = 0; k < r; ++k) {
        const double aik = s * A.data[static_cast<std::size_t>(i) * r + k];
        if (aik == 0.0) continue;
        const double* brow = &B.data[static_cast<std::size_t>(k) * base.cols];
        double* wrow = &W[static_cast<std::size_t>(i) * base.cols];
        for (int j = 0; j < base.cols; ++j) wrow[j] += aik * brow[j];
      }
    }
  }
}

ReferenceSnapshot snapshot(const PolicyParams& params) { return ReferenceSnapshot(params); }

Trace::Trace(const PolicyConfig& cfg, int cap) : capacity(cap) {
  const std::size_t n = static_cast<std::size_t>(cap);
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const std::size_t H = static_cast<std::size_t>(cfg.mlp_dim);
  layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& L : layers) {
    for (auto* v : {&L.h_in, &L.a, &L.q, &L.k, &L.v, &L.o, &L.h_mid, &L.b}) v->assign(n * d, 0.0);
    L.rms_a.assign(n, 0.0);
    L.rms_b.assign(n, 0.0);
    L.att.assign(n * n, 0.0);
    L.u.assign(n * H, 0.0);
    L.g.assign(n * H, 0.0);
  }
  h_out.assign(n * d, 0.0);
  f.assign(n * d, 0.0);
  rms_f.assign(n, 0.0);
  logits.assign(n * static_cast<std::size_t>(cfg.vocab_size), 0.0);
  logz.assign(n, 0.0);
}

double Trace::target_logprob(int row) const {
  const std::size_t V = logits.size() / static_cast<std::size_t>(capacity);
  const int target = sequence[static_cast<std::size_t>(row) + 1];
  return logits[static_cast<std::size_t>(row) * V + static_cast<std::size_t>(target)] - logz[row];
}

Trace forward(const CompiledPolicy& policy, std::span<const int> prompt, std::span<const int> completion) {
  const PolicyConfig& c = policy.config();
  if (prompt.empty()) throw ConfigError("prompt must contain at least one token");
  check_tokens(c, prompt);
  check_tokens(c, completion);
  const int total = static_cast<int>(prompt.size() + completion.size());
  if (total > c.context) {
    throw ConfigError("sequence of " + std::to_string(total) + " tokens exceeds context " + std::to_string(c.context));
  }
  const int rows = std::max(1, total - 1);
  Trace tr(c, rows);
  tr.sequence.assign(prompt.begin(), prompt.end());
  tr.sequence.insert(tr.sequence.end(), completion.begin(), completion.end());
  tr.prompt_length = static_cast<int>(prompt.size());
  for (int t = 0; t < total - 1; ++t) compute_row(policy, tr, t);
  return tr;
}

SequenceLogprob logprob(const CompiledPolicy& policy, std::span<const int> prompt, std::span<const int> completion) {
  SequenceLogprob out;
  if (completion.empty()) return out;
  const Trace tr = forward(policy, prompt, completion);
  out.per_token.reserve(completion.size());
  for (std::size_t i = 0; i < completion.size(); ++i) {
    const double lp = tr.target_logprob(tr.prompt_length - 1 + static_cast<int>(i));
    out.per_token.push_back(lp);
    out.sum += lp;
  }
  return out;
}

SequenceLogprob logprob(const PolicyParams& params, std::span<const int> prompt, std::span<const int> completion) {
  return logprob(CompiledPolicy(params), prompt, completion);
}

void backward(const CompiledPolicy& policy, const Trace& tr, std::span<const double> coefficients,
              Gradient& grad) {
  const PolicyConfig& c = policy.config();
  const int d = c.embed_dim;
  const int H = c.mlp_dim;
  const int V = c.vocab_size;
  const int R = tr.rows;
  const int first = tr.prompt_length - 1;
  const int n_completion = static_cast<int>(tr.sequence.size()) - tr.prompt_length;
  if (static_cast<int>(coefficients.size()) != n_completion) {
    throw LengthMismatch("backward: " + std::to_string(coefficients.size()) + " coefficients for " +
                         std::to_string(n_completion) + " completion tokens");
  }
  if (n_completion == 0) return;

  std::vector<double> dh(static_cast<std::size_t>(R) * d, 0.0);
  std::vector<double> dlog(static_cast<std::size_t>(V));
  std::vector<double> df(static_cast<std::size_t>(d));
  auto& dhead = grad.data[head_index(c)];
  auto& dhead_b = grad.data[head_bias_index(c)];
  const auto& head = policy.weight(head_index(c));
  for (int i = 0; i < n_completion; ++i) {
    const double coeff = coefficients[static_cast<std::size_t>(i)];
    if (coeff == 0.0) continue;
    const int t = first + i;
    const int target = tr.sequence[static_cast<std::size_t>(t) + 1];
    const double* logits = &tr.logits[static_cast<std::size_t>(t) * V];
    for (int j = 0; j < V; ++j) dlog[j] = -coeff * std::exp(logits[j] - tr.logz[t]);
    dlog[target] += coeff;
    const std::size_t td = static_cast<std::size_t>(t) * d;
    outer_acc(&tr.f[td], dlog.data(), d, V, dhead.data());
    for (int j = 0; j < V; ++j) dhead_b[j] += dlog[j];
    std::fill(df.begin(), df.end(), 0.0);
    mat_vec_acc(head.data(), dlog.data(), d, V, df.data());
    rms_norm_back(&tr.f[td], tr.rms_f[t], df.data(), d, &dh[td]);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> dg(static_cast<std::size_t>(H));
  std::vector<double> db(static_cast<std::size_t>(d));
  std::vector<double> dq(static_cast<std::size_t>(R) * d);
  std::vector<double> dk(static_cast<std::size_t>(R) * d);
  std::vector<double> dv(static_cast<std::size_t>(R) * d);
  std::vector<double> dout(static_cast<std::size_t>(d));
  std::vector<double> dp(static_cast<std::size_t>(R));
  std::vector<double> da(static_cast<std::size_t>(d));

  for (int l = c.layers - 1; l >= 0; --l) {
    const Trace::Layer& L = tr.layers[static_cast<std::size_t>(l)];
    const auto& W1 = policy.weight(layer_index(l, kW1));
    const auto& W2 = policy.weight(layer_index(l, kW2));
    auto& dW1 = grad.data[layer_index(l, kW1)];
    auto& dB1 = grad.data[layer_index(l, kB1)];
    auto& dW2 = grad.data[layer_index(l, kW2)];
    auto& dB2 = grad.data[layer_index(l, kB2)];
    for (int t = 0; t < R; ++t) {
      const std::size_t td = static_cast<std::size_t>(t) * d;
      const std::size_t tH = static_cast<std::size_t>(t) * H;
      const double* dht = &dh[td];
      std::fill(dg.begin(), dg.end(), 0.0);
      mat_vec_acc(W2.data(), dht, H, d, dg.data());
      outer_acc(&L.g[tH], dht, H, d, dW2.data());
      for (int i = 0; i < d; ++i) dB2[i] += dht[i];
      for (int k = 0; k < H; ++k) dg[k] *= gelu_grad(L.u[tH + k]);
      outer_acc(&L.b[td], dg.data(), d, H, dW1.data());
      for (int k = 0; k < H; ++k) dB1[k] += dg[k];
      std::fill(db.begin(), db.end(), 0.0);
      mat_vec_acc(W1.data(), dg.data(), d, H, db.data());
      rms_norm_back(&L.b[td], L.rms_b[t], db.data(), d, &dh[td]);
    }

    const auto& Wq = policy.weight(layer_index(l, kWq));
    const auto& Wk = policy.weight(layer_index(l, kWk));
    const auto& Wv = policy.weight(layer_index(l, kWv));
    const auto& Wo = policy.weight(layer_index(l, kWo));
    auto& dWq = grad.data[layer_index(l, kWq)];
    auto& dWk = grad.data[layer_index(l, kWk)];
    auto& dWv = grad.data[layer_index(l, kWv)];
    auto& dWo = grad.data[layer_index(l, kWo)];
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (int t = 0; t < R; ++t) {
      const std::size_t td = static_cast<std::size_t>(t) * d;
      std::fill(dout.begin(), dout.end(), 0.0);
      mat_vec_acc(Wo.data(), &dh[td], d, d, dout.data());
      outer_acc(&L.o[td], &dh[td], d, d, dWo.data());
      const double* att = &L.att[static_cast<std::size_t>(t) * tr.capacity];
      double weighted = 0.0;
      for (int j = 0; j <= t; ++j) {
        const double* vj = &L.v[static_cast<std::size_t>(j) * d];
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += dout[i] * vj[i];
        dp[j] = s;
        weighted += att[j] * s;
        double* dvj = &dv[static_cast<std::size_t>(j) * d];
        for (int i = 0; i < d; ++i) dvj[i] += att[j] * dout[i];
      }
      for (int j = 0; j <= t; ++j) {
        const double ds = att[j] * (dp[j] - weighted) * scale;
        if (ds == 0.0) continue;
        const double* kj = &L.k[static_cast<std::size_t>(j) * d];
        double* dkj = &dk[static_cast<std::size_t>(j) * d];
        for (int i = 0; i < d; ++i) {
          dq[td + i] += ds * kj[i];
          dkj[i] += ds * L.q[td + i];
        }
      }
    }
    for (int t = 0; t < R; ++t) {
      const std::size_t td = static_cast<std::size_t>(t) * d;
      outer_acc(&L.a[td], &dq[td], d, d, dWq.data());
      outer_acc(&L.a[td], &dk[td], d, d, dWk.data());
      outer_acc(&L.a[td], &dv[td], d, d, dWv.data());
      std::fill(da.begin(), da.end(), 0.0);
      mat_vec_acc(Wq.data(), &dq[td], d, d, da.data());
      mat_vec_acc(Wk.data(), &dk[td], d, d, da.data());
      mat_vec_acc(Wv.data(), &dv[td], d, d, da.data());
      rms_norm_back(&L.a[td], L.rms_a[t], da.data(), d, &dh[td]);
    }
  }

  auto& dtok = grad.data[kTokEmb];
  auto& dpos = grad.data[kPosEmb];
  for (int t = 0; t < R; ++t) {
    const std::size_t td = static_cast<std::size_t>(t) * d;
    const std::size_t tok = static_cast<std::size_t>(tr.sequence[static_cast<std::size_t>(t)]) * d;
    for (int i = 0; i < d; ++i) {
      dtok[tok + i] += dh[td + i];
      dpos[td + i] += dh[td + i];
    }
  }
}

Gradient project_gradient(const PolicyParams& params, const Gradient& effective) {
  Gradient out = params.zero_gradient();
  const auto& ts = params.tensors();
  if (!params.adapters_enabled()) {
    for (std::size_t i = 0; i < params.base_tensor_count(); ++i) {
      if (ts[i].trainable) out.data[i] = effective.data[i];
    }
    return out;
  }
  const int r = params.adapter_rank();
  const double s = params.adapter_alpha() / r;
  std::size_t slot = params.base_tensor_count();
  for (std::size_t idx : adapter_base_indices(params.config())) {
    const Tensor& base = ts[idx];
    const auto& A = ts[slot].data;
    const auto& B = ts[slot + 1].data;
    const auto& dW = effective.data[idx];
    auto& dA = out.data[slot];
    auto& dB = out.data[slot + 1];
    slot += 2;
    const int rows = base.rows;
    const int cols = base.cols;
    // dA = s * dW * B^T ; dB = s * A^T * dW
    for (int i = 0; i < rows; ++i) {
      const double* dwrow = &dW[static_cast<std::size_t>(i) * cols];
      for (int k = 0; k < r; ++k) {
        const double* brow = &B[static_cast<std::size_t>(k) * cols];
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += dwrow[j] * brow[j];
        dA[static_cast<std::size_t>(i) * r + k] += s * acc;
        const double aik = s * A[static_cast<std::size_t>(i) * r + k];
        double* dbrow = &dB[static_cast<std::size_t>(k) * cols];
        for (int j = 0; j < cols; ++j) dbrow[j] += aik * dwrow[j];
      }
    }
  }
  return out;
}

Gradient grad_logprob_weighted(const PolicyParams& params, std::span<const WeightedSequence> batch) {
  const CompiledPolicy compiled(params);
  Gradient effective = params.zero_gradient();
  for (const auto& item : batch) {
    if (item.completion.empty()) continue;
    const Trace tr = forward(compiled, item.prompt, item.completion);
    std::vector<double> coeffs;
    if (item.coefficients.size() == 1) {
      coeffs.assign(item.completion.size(), item.coefficients[0]);
    } else {
      coeffs.assign(item.coefficients.begin(), item.coefficients.end());
    }
    for (double x : coeffs) {
      if (!std::isfinite(x)) throw ConfigError("grad_logprob_weighted: non-finite coefficient");
    }
    backward(compiled, tr, coeffs, effective);
  }
  return project_gradient(params, effective);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(master));
  words.push_back(static_cast<std::uint32_t>(master >> 32));
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Completion sample(const CompiledPolicy& policy, const Vocab& vocab, std::span<const int> prompt,
                  const SampleOptions& options, std::mt19937_64& rng) {
  const PolicyConfig& c = policy.config();
  if (prompt.empty()) throw ConfigError("prompt must contain at least one token");
  if (!(options.temperature >= 0.0)) throw ConfigError("sampling temperature must be non-negative");
  check_tokens(c, prompt);
  const int P = static_cast<int>(prompt.size());
  const int max_tokens = std::min(options.max_tokens, c.context - P);
  if (max_tokens < 1) throw ConfigError("prompt leaves no room in the context");
  const int eos = options.eos >= 0 ? options.eos : vocab.eos();
  const int V = c.vocab_size;

  Completion out;
  out.prompt.assign(prompt.begin(), prompt.end());
  Trace tr(c, P + max_tokens - 1);
  tr.sequence = out.prompt;
  tr.prompt_length = P;
  std::vector<double> probs(static_cast<std::size_t>(V));
  for (int t = 0; t < P - 1; ++t) compute_row(policy, tr, t);
  for (int step = 0; step < max_tokens; ++step) {
    const int row = P - 1 + step;
    compute_row(policy, tr, row);
    const double* logits = &tr.logits[static_cast<std::size_t>(row) * V];
    int chosen = 0;
    if (options.temperature <= kGreedyTemperature) {
      chosen = static_cast<int>(std::max_element(logits, logits + V) - logits);
    } else {
      double mx = -INFINITY;
      for (int j = 0; j < V; ++j) mx = std::max(mx, logits[j]);
      double z = 0.0;
      for (int j = 0; j < V; ++j) {
        probs[j] = std::exp((logits[j] - mx) / options.temperature);
        z += probs[j];
      }
      const double u = uniform01(rng) * z;
      double acc = 0.0;
      chosen = V - 1;
      for (int j = 0; j < V; ++j) {
        acc += probs[j];
        if (u < acc) {
          chosen = j;
          break;
        }
      }
    }
    out.tokens.push_back(chosen);
    out.logprobs.push_back(logits[chosen] - tr.logz[row]);
    if (chosen == eos) break;
    if (step + 1 < max_tokens) tr.sequence.push_back(chosen);
  }
  out.truncated = out.tokens.empty() || out.tokens.back() != eos;
  out.text = vocab.decode(out.tokens);
  return out;
}

std::vector<Completion> sample_group(const CompiledPolicy& policy, const Vocab& vocab, std::span<const int> prompt,
                                     const SampleOptions& options, std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw ConfigError("sample_group needs a group of at least 2");
  std::vector<Completion> out;
  out.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    std::mt19937_64 rng(s);
    out.push_back(sample(policy, vocab, prompt, options, rng));
  }
  return out;
}

}  // namespace rlstruct
