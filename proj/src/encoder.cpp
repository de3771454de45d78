#include "rr2qc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rr2qc/error.hpp"

namespace rr2qc {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (vocab_size < Vocab::kNumReserved)
    throw DomainError("encoder: vocab_size below reserved token count");
  if (num_layers < 1) throw DomainError("encoder: num_layers must be >= 1");
  if (hidden_dim < 1 || num_heads < 1 || hidden_dim % num_heads != 0)
    throw DomainError("encoder: hidden_dim must be a positive multiple of num_heads");
  if (max_seq_len < 1) throw DomainError("encoder: max_seq_len must be >= 1");
  if (proj_dim < 1 || proj_dim > hidden_dim)
    throw DomainError("encoder: proj_dim must lie in [1, hidden_dim]");
  if (!(mlm_mask_rate > 0 && mlm_mask_rate < 1))
    throw DomainError("encoder: mlm_mask_rate must lie in (0, 1)");
}

Scalar similarity(const Embedding& a, const Embedding& b) {
  if (a.space != b.space)
    throw DomainError("similarity: embeddings from different spaces");
  if (a.v.size() != b.v.size())
    throw DomainError("similarity: embedding lengths differ");
  return a.v.dot(b.v);
}

// ---------------------------------------------------------------------
// ParamStore

Mat& ParamStore::add(const std::string& name, Eigen::Index rows,
                     Eigen::Index cols) {
  auto [it, fresh] = slots_.try_emplace(name);
  if (!fresh) throw DomainError("parameter '" + name + "' already registered");
  names_.push_back(name);
  it->second.value = Mat::Zero(rows, cols);
  it->second.grad = Mat::Zero(rows, cols);
  return it->second.value;
}

ParamStore::Slot& ParamStore::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw LookupError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Slot& ParamStore::slot(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw LookupError("unknown parameter '" + name + "'");
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return slots_.count(name) > 0;
}
Mat& ParamStore::value(const std::string& name) { return slot(name).value; }
const Mat& ParamStore::value(const std::string& name) const {
  return slot(name).value;
}
Mat& ParamStore::grad(const std::string& name) { return slot(name).grad; }
const Mat& ParamStore::grad(const std::string& name) const {
  return slot(name).grad;
}

void ParamStore::zero_grads() {
  for (auto& [name, s] : slots_) s.grad.setZero();
}

void ParamStore::set_frozen(const std::string& name, bool frozen) {
  slot(name).frozen = frozen;
}
bool ParamStore::frozen(const std::string& name) const {
  return slot(name).frozen;
}

NamedTensors ParamStore::snapshot() const {
  NamedTensors out;
  out.reserve(names_.size());
  for (const auto& name : names_) out.emplace_back(name, slot(name).value);
  return out;
}

void ParamStore::load_values(const NamedTensors& tensors) {
  for (const auto& [name, value] : tensors) {
    if (has(name)) {
      Slot& s = slot(name);
      if (s.value.rows() != value.rows() || s.value.cols() != value.cols())
        throw DomainError("parameter '" + name + "' shape mismatch on load");
      s.value = value;
    } else {
      add(name, value.rows(), value.cols()) = value;
    }
  }
}

void momentum_update(ParamStore& theta_M, const ParamStore& theta_Q, Scalar m) {
  for (const auto& name : theta_Q.names()) {
    if (!theta_M.has(name))
      throw DomainError("momentum_update: '" + name + "' missing from theta_M");
    Mat& dst = theta_M.value(name);
    const Mat& src = theta_Q.value(name);
    if (dst.rows() != src.rows() || dst.cols() != src.cols())
      throw DomainError("momentum_update: '" + name + "' shape mismatch");
    dst = m * dst + (1 - m) * src;
  }
}

AdamOptimizer::AdamOptimizer(Scalar lr_, Scalar beta1, Scalar beta2, Scalar eps)
    : lr(lr_), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ParamStore& params) {
  ++t_;
  const Scalar bc1 = 1 - std::pow(beta1_, Scalar(t_));
  const Scalar bc2 = 1 - std::pow(beta2_, Scalar(t_));
  for (const auto& name : params.names()) {
    if (params.frozen(name)) continue;
    const Mat& g = params.grad(name);
    auto [it, fresh] = moments_.try_emplace(name);
    if (fresh) {
      it->second.first = Mat::Zero(g.rows(), g.cols());
      it->second.second = Mat::Zero(g.rows(), g.cols());
    }
    Mat& m = it->second.first;
    Mat& v = it->second.second;
    m = beta1_ * m + (1 - beta1_) * g;
    v = beta2_ * v + (1 - beta2_) * g.cwiseProduct(g);
    params.value(name).array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

// ---------------------------------------------------------------------
// Transformer

namespace {

std::string lname(int l, const char* part) {
  return "layer" + std::to_string(l) + "." + part;
}

Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (1 + std::erf(x * Scalar(M_SQRT1_2)));
}

Scalar gelu_grad(Scalar x) {
  const Scalar phi = std::exp(-Scalar(0.5) * x * x) /
                     std::sqrt(2 * Scalar(M_PI));
  return Scalar(0.5) * (1 + std::erf(x * Scalar(M_SQRT1_2))) + x * phi;
}

constexpr Scalar kLnEps = 1e-5;

// Row-wise layer norm; returns y and fills xhat/istd for backward.
Mat layer_norm(const Mat& x, const Vec& g, const Vec& b, Mat& xhat, Vec& istd) {
  const auto T = x.rows();
  const auto H = x.cols();
  xhat.resize(T, H);
  istd.resize(T);
  Mat y(T, H);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Scalar mu = x.row(t).mean();
    const Scalar var = (x.row(t).array() - mu).square().mean();
    const Scalar is = Scalar(1) / std::sqrt(var + kLnEps);
    istd(t) = is;
    xhat.row(t) = (x.row(t).array() - mu) * is;
    y.row(t) = xhat.row(t).cwiseProduct(g.transpose()) + b.transpose();
  }
  return y;
}

// dx for row-wise layer norm; accumulates dg/db.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& istd,
                        const Vec& g, Mat& dg, Mat& db) {
  const auto T = dy.rows();
  const auto H = dy.cols();
  Mat dx(T, H);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::RowVectorXd dxhat = dy.row(t).cwiseProduct(g.transpose());
    const Scalar mean_dxhat = dxhat.mean();
    const Scalar mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(t)).mean();
    dx.row(t) = istd(t) * (dxhat.array() - mean_dxhat -
                           xhat.row(t).array() * mean_dxhat_xhat);
  }
  dg.noalias() += (dy.cwiseProduct(xhat)).colwise().sum().transpose();
  db.noalias() += dy.colwise().sum().transpose();
  return dx;
}

// y = x * W^T + 1 b^T
Mat linear(const Mat& x, const Mat& w, const Vec& b) {
  Mat y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Mat softmax_rows(const Mat& s) {
  Mat a(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar mx = s.row(r).maxCoeff();
    a.row(r) = (s.row(r).array() - mx).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

}  // namespace

TransformerEncoder::TransformerEncoder(EncoderConfig cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  std::normal_distribution<Scalar> init(0, 0.02);
  auto randm = [&](Mat& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = init(rng);
  };

  const int H = cfg_.hidden_dim, F = cfg_.ffn_dim();
  randm(params_.add("emb.tok", cfg_.vocab_size, H));
  randm(params_.add("emb.pos", cfg_.max_seq_len, H));
  for (int l = 0; l < cfg_.num_layers; ++l) {
    params_.add(lname(l, "ln1.g"), H, 1).setOnes();
    params_.add(lname(l, "ln1.b"), H, 1);
    for (const char* part : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      randm(params_.add(lname(l, part), H, H));
    for (const char* part : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
      params_.add(lname(l, part), H, 1);
    params_.add(lname(l, "ln2.g"), H, 1).setOnes();
    params_.add(lname(l, "ln2.b"), H, 1);
    randm(params_.add(lname(l, "ffn.w1"), F, H));
    params_.add(lname(l, "ffn.b1"), F, 1);
    randm(params_.add(lname(l, "ffn.w2"), H, F));
    params_.add(lname(l, "ffn.b2"), H, 1);
  }
  params_.add("final_ln.g", H, 1).setOnes();
  params_.add("final_ln.b", H, 1);
  randm(params_.add("proj.w", cfg_.proj_dim, H));
  params_.add("proj.b", cfg_.proj_dim, 1);
  randm(params_.add("mlm.w", cfg_.vocab_size, H));
  params_.add("mlm.b", cfg_.vocab_size, 1);
}

Mat TransformerEncoder::forward(const std::vector<TokenId>& tokens,
                                Cache* cache) const {
  std::vector<TokenId> seq = tokens;
  if (int(seq.size()) > cfg_.max_seq_len) seq.resize(cfg_.max_seq_len);
  if (seq.empty()) throw DomainError("encoder: empty token list");
  const int T = int(seq.size());
  const int H = cfg_.hidden_dim;
  const int d = cfg_.head_dim();
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(d));

  const Mat& tok = params_.value("emb.tok");
  const Mat& pos = params_.value("emb.pos");
  Mat x(T, H);
  for (int t = 0; t < T; ++t) {
    if (seq[t] < 0 || seq[t] >= cfg_.vocab_size)
      throw DomainError("encoder: token id outside the vocabulary");
    x.row(t) = tok.row(seq[t]) + pos.row(t);
  }

  Cache local;
  Cache& c = cache ? *cache : local;
  c.tokens = std::move(seq);
  c.layers.assign(cfg_.num_layers, LayerCache{});

  for (int l = 0; l < cfg_.num_layers; ++l) {
    LayerCache& lc = c.layers[l];
    lc.x_in = x;
    Mat xn = layer_norm(x, params_.value(lname(l, "ln1.g")),
                        params_.value(lname(l, "ln1.b")), lc.ln1_xhat,
                        lc.ln1_istd);
    lc.q = linear(xn, params_.value(lname(l, "attn.wq")),
                  params_.value(lname(l, "attn.bq")));
    lc.k = linear(xn, params_.value(lname(l, "attn.wk")),
                  params_.value(lname(l, "attn.bk")));
    lc.v = linear(xn, params_.value(lname(l, "attn.wv")),
                  params_.value(lname(l, "attn.bv")));
    lc.attn.resize(cfg_.num_heads);
    lc.attn_concat.resize(T, H);
    for (int h = 0; h < cfg_.num_heads; ++h) {
      auto qh = lc.q.middleCols(h * d, d);
      auto kh = lc.k.middleCols(h * d, d);
      auto vh = lc.v.middleCols(h * d, d);
      lc.attn[h] = softmax_rows(qh * kh.transpose() * inv_sqrt_d);
      lc.attn_concat.middleCols(h * d, d) = lc.attn[h] * vh;
    }
    Mat attn_out = linear(lc.attn_concat, params_.value(lname(l, "attn.wo")),
                          params_.value(lname(l, "attn.bo")));
    lc.x_mid = x + attn_out;

    Mat xn2 = layer_norm(lc.x_mid, params_.value(lname(l, "ln2.g")),
                         params_.value(lname(l, "ln2.b")), lc.ln2_xhat,
                         lc.ln2_istd);
    lc.ffn_pre = linear(xn2, params_.value(lname(l, "ffn.w1")),
                        params_.value(lname(l, "ffn.b1")));
    lc.ffn_act = lc.ffn_pre.unaryExpr([](Scalar u) { return gelu(u); });
    Mat ffn_out = linear(lc.ffn_act, params_.value(lname(l, "ffn.w2")),
                         params_.value(lname(l, "ffn.b2")));
    x = lc.x_mid + ffn_out;
  }

  c.final_in = x;
  c.hidden = layer_norm(x, params_.value("final_ln.g"),
                        params_.value("final_ln.b"), c.final_xhat,
                        c.final_istd);
  c.feature = c.hidden.colwise().mean().transpose();
  return c.hidden;
}

Embedding TransformerEncoder::encode_pool(const std::vector<TokenId>& tokens,
                                          Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  forward(tokens, &c);
  return Embedding{c.feature, EmbeddingSpace::kFeature};
}

Embedding TransformerEncoder::project(const Embedding& feature,
                                      bool* zero_flagged) const {
  if (feature.space != EmbeddingSpace::kFeature)
    throw DomainError("project: expected a feature-space embedding");
  if (feature.v.size() != cfg_.hidden_dim)
    throw DomainError("project: feature length mismatch");
  Vec pre = params_.value("proj.w") * feature.v + params_.value("proj.b");
  const Scalar norm = pre.norm();
  if (zero_flagged) *zero_flagged = (norm == 0);
  if (norm > 0) pre /= norm;
  return Embedding{std::move(pre), EmbeddingSpace::kProjected};
}

Vec TransformerEncoder::mlm_logits(const Vec& hidden_row) const {
  return params_.value("mlm.w") * hidden_row + params_.value("mlm.b");
}

void TransformerEncoder::backward(const Cache& cache, const Mat& d_hidden,
                                  const Vec& d_feature, const Vec& d_proj) {
  const int T = int(cache.tokens.size());
  const int H = cfg_.hidden_dim;
  const int d = cfg_.head_dim();
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(Scalar(d));

  Mat dhid = Mat::Zero(T, H);
  if (d_hidden.size() > 0) {
    if (d_hidden.rows() != T || d_hidden.cols() != H)
      throw DomainError("backward: d_hidden shape mismatch");
    dhid = d_hidden;
  }

  Vec dfeat = Vec::Zero(H);
  if (d_feature.size() > 0) dfeat = d_feature;

  if (d_proj.size() > 0) {
    // y = v / |v|; recompute v from the cached pooled feature.
    Vec pre = params_.value("proj.w") * cache.feature + params_.value("proj.b");
    const Scalar norm = pre.norm();
    if (norm > 0) {
      const Vec y = pre / norm;
      const Vec dv = (d_proj - y * y.dot(d_proj)) / norm;
      params_.grad("proj.w").noalias() += dv * cache.feature.transpose();
      params_.grad("proj.b").noalias() += dv;
      dfeat.noalias() += params_.value("proj.w").transpose() * dv;
    }
  }

  // Mean pool spreads the feature gradient uniformly over positions.
  dhid.rowwise() += (dfeat / Scalar(T)).transpose();

  Mat dx = layer_norm_backward(dhid, cache.final_xhat, cache.final_istd,
                               params_.value("final_ln.g"),
                               params_.grad("final_ln.g"),
                               params_.grad("final_ln.b"));

  for (int l = cfg_.num_layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[l];

    // FFN block: x = x_mid + W2 gelu(W1 LN2(x_mid) + b1) + b2
    Mat d_ffn_out = dx;
    Mat d_act = d_ffn_out * params_.value(lname(l, "ffn.w2"));
    params_.grad(lname(l, "ffn.w2")).noalias() +=
        d_ffn_out.transpose() * lc.ffn_act;
    params_.grad(lname(l, "ffn.b2")).noalias() +=
        d_ffn_out.colwise().sum().transpose();
    Mat d_pre =
        d_act.cwiseProduct(lc.ffn_pre.unaryExpr([](Scalar u) { return gelu_grad(u); }));
    Mat d_xn2 = d_pre * params_.value(lname(l, "ffn.w1"));
    // xn2 was not cached; rebuild it from the cached normalized input.
    Mat xn2 = lc.ln2_xhat;
    xn2.array().rowwise() *=
        params_.value(lname(l, "ln2.g")).col(0).transpose().array();
    xn2.rowwise() += params_.value(lname(l, "ln2.b")).col(0).transpose();
    params_.grad(lname(l, "ffn.w1")).noalias() += d_pre.transpose() * xn2;
    params_.grad(lname(l, "ffn.b1")).noalias() +=
        d_pre.colwise().sum().transpose();

    Mat d_mid = dx;  // residual branch
    d_mid += layer_norm_backward(d_xn2, lc.ln2_xhat, lc.ln2_istd,
                                 params_.value(lname(l, "ln2.g")),
                                 params_.grad(lname(l, "ln2.g")),
                                 params_.grad(lname(l, "ln2.b")));

    // Attention block: x_mid = x_in + Wo concat_h(A_h V_h) + bo
    Mat d_attn_out = d_mid;
    Mat d_concat = d_attn_out * params_.value(lname(l, "attn.wo"));
    params_.grad(lname(l, "attn.wo")).noalias() +=
        d_attn_out.transpose() * lc.attn_concat;
    params_.grad(lname(l, "attn.bo")).noalias() +=
        d_attn_out.colwise().sum().transpose();

    Mat dq = Mat::Zero(T, H), dk = Mat::Zero(T, H), dv = Mat::Zero(T, H);
    for (int h = 0; h < cfg_.num_heads; ++h) {
      auto qh = lc.q.middleCols(h * d, d);
      auto kh = lc.k.middleCols(h * d, d);
      auto vh = lc.v.middleCols(h * d, d);
      const Mat& a = lc.attn[h];
      Mat d_oh = d_concat.middleCols(h * d, d);
      Mat d_a = d_oh * vh.transpose();
      dv.middleCols(h * d, d).noalias() += a.transpose() * d_oh;
      // softmax rows: ds = a .* (da - rowdot(da, a))
      Mat d_s(T, T);
      for (int r = 0; r < T; ++r) {
        const Scalar dot = d_a.row(r).dot(a.row(r));
        d_s.row(r) = a.row(r).array() * (d_a.row(r).array() - dot);
      }
      d_s *= inv_sqrt_d;
      dq.middleCols(h * d, d).noalias() += d_s * kh;
      dk.middleCols(h * d, d).noalias() += d_s.transpose() * qh;
    }

    Mat xn1 = lc.ln1_xhat;
    xn1.array().rowwise() *=
        params_.value(lname(l, "ln1.g")).col(0).transpose().array();
    xn1.rowwise() += params_.value(lname(l, "ln1.b")).col(0).transpose();

    Mat d_xn1 = dq * params_.value(lname(l, "attn.wq"));
    d_xn1.noalias() += dk * params_.value(lname(l, "attn.wk"));
    d_xn1.noalias() += dv * params_.value(lname(l, "attn.wv"));
    params_.grad(lname(l, "attn.wq")).noalias() += dq.transpose() * xn1;
    params_.grad(lname(l, "attn.wk")).noalias() += dk.transpose() * xn1;
    params_.grad(lname(l, "attn.wv")).noalias() += dv.transpose() * xn1;
    params_.grad(lname(l, "attn.bq")).noalias() +=
        dq.colwise().sum().transpose();
    params_.grad(lname(l, "attn.bk")).noalias() +=
        dk.colwise().sum().transpose();
    params_.grad(lname(l, "attn.bv")).noalias() +=
        dv.colwise().sum().transpose();

    dx = d_mid;  // residual to x_in
    dx += layer_norm_backward(d_xn1, lc.ln1_xhat, lc.ln1_istd,
                              params_.value(lname(l, "ln1.g")),
                              params_.grad(lname(l, "ln1.g")),
                              params_.grad(lname(l, "ln1.b")));
  }

  Mat& d_tok = params_.grad("emb.tok");
  Mat& d_pos = params_.grad("emb.pos");
  for (int t = 0; t < T; ++t) {
    d_tok.row(cache.tokens[t]) += dx.row(t);
    d_pos.row(t) += dx.row(t);
  }
}

void TransformerEncoder::freeze_layers(Scalar fraction) {
  if (fraction < 0 || fraction > 1)
    throw DomainError("freeze_layers: fraction outside [0, 1]");
  const int n_frozen = int(std::floor(fraction * cfg_.num_layers));
  for (const auto& name : params_.names()) params_.set_frozen(name, false);
  for (int l = 0; l < n_frozen; ++l)
    for (const auto& name : params_.names())
      if (name.rfind("layer" + std::to_string(l) + ".", 0) == 0)
        params_.set_frozen(name, true);
  if (n_frozen >= 1) {
    params_.set_frozen("emb.tok", true);
    params_.set_frozen("emb.pos", true);
  }
}

std::vector<std::string> encoder_layer_prefixes(const EncoderConfig& cfg) {
  std::vector<std::string> out;
  for (int l = 0; l < cfg.num_layers; ++l)
    out.push_back("layer" + std::to_string(l) + ".");
  return out;
}

MaskedBatch apply_mlm_masking(const std::vector<std::vector<TokenId>>& batch,
                              const EncoderConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<Scalar> uniform(0, 1);
  std::uniform_int_distribution<TokenId> random_token(Vocab::kNumReserved,
                                                      cfg.vocab_size - 1);
  MaskedBatch out;
  out.inputs.reserve(batch.size());
  out.targets.reserve(batch.size());
  for (const auto& seq : batch) {
    std::vector<TokenId> input = seq;
    if (int(input.size()) > cfg.max_seq_len) input.resize(cfg.max_seq_len);
    std::vector<std::pair<int, TokenId>> targets;
    for (int t = 0; t < int(input.size()); ++t) {
      if (uniform(rng) >= cfg.mlm_mask_rate) continue;
      targets.emplace_back(t, input[t]);
      const Scalar r = uniform(rng);
      if (r < 0.8)
        input[t] = Vocab::kMask;
      else if (r < 0.9)
        input[t] = random_token(rng);
      // else keep the original token
    }
    out.inputs.push_back(std::move(input));
    out.targets.push_back(std::move(targets));
  }
  return out;
}

MlmLossResult mlm_loss(TransformerEncoder& encoder,
                       const std::vector<std::vector<TokenId>>& batch,
                       Rng& rng, bool accumulate_grads) {
  if (batch.empty()) throw DomainError("mlm_loss: empty batch");
  const MaskedBatch masked = apply_mlm_masking(batch, encoder.config(), rng);

  std::size_t total_masked = 0;
  for (const auto& t : masked.targets) total_masked += t.size();
  if (total_masked == 0) return {0, 0};

  const Mat& wm = encoder.params().value("mlm.w");
  MlmLossResult res;
  res.masked = total_masked;
  const Scalar inv_n = Scalar(1) / Scalar(total_masked);

  for (std::size_t i = 0; i < masked.inputs.size(); ++i) {
    if (masked.targets[i].empty()) continue;
    TransformerEncoder::Cache cache;
    encoder.forward(masked.inputs[i], &cache);
    Mat d_hidden;
    if (accumulate_grads)
      d_hidden = Mat::Zero(cache.hidden.rows(), cache.hidden.cols());
    for (const auto& [pos, original] : masked.targets[i]) {
      Vec logits = encoder.mlm_logits(cache.hidden.row(pos).transpose());
      const Scalar mx = logits.maxCoeff();
      const Scalar lse = mx + std::log((logits.array() - mx).exp().sum());
      res.loss += (lse - logits(original)) * inv_n;
      if (accumulate_grads) {
        Vec dz = (logits.array() - lse).exp().matrix() * inv_n;
        dz(original) -= inv_n;
        encoder.params().grad("mlm.w").noalias() +=
            dz * cache.hidden.row(pos);
        encoder.params().grad("mlm.b").noalias() += dz;
        d_hidden.row(pos).noalias() += (wm.transpose() * dz).transpose();
      }
    }
    if (accumulate_grads) encoder.backward(cache, d_hidden, Vec(), Vec());
  }
  return res;
}

// ---------------------------------------------------------------------
// Checkpoints

namespace fs = std::filesystem;

void save_encoder(const TransformerEncoder& encoder, const Vocab& vocab,
                  const std::string& dir) {
  fs::create_directories(dir);
  const EncoderConfig& c = encoder.config();
  json cfg{{"vocab_size", c.vocab_size},   {"num_layers", c.num_layers},
           {"hidden_dim", c.hidden_dim},   {"num_heads", c.num_heads},
           {"max_seq_len", c.max_seq_len}, {"proj_dim", c.proj_dim},
           {"mlm_mask_rate", c.mlm_mask_rate}};
  std::ofstream out(fs::path(dir) / "config.json");
  if (!out) throw IoError("cannot write encoder config under '" + dir + "'");
  out << cfg.dump(2) << "\n";
  out.close();
  vocab.save((fs::path(dir) / "vocab.json").string());
  save_tensors((fs::path(dir) / "tensors.bin").string(),
               encoder.params().snapshot());
}

TransformerEncoder load_encoder(const std::string& dir, Vocab* vocab) {
  std::ifstream in(fs::path(dir) / "config.json");
  if (!in) throw IoError("cannot open encoder config under '" + dir + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ParseError("encoder config under '" + dir + "': " + e.what());
  }
  EncoderConfig c;
  c.vocab_size = cfg.at("vocab_size").get<int>();
  c.num_layers = cfg.at("num_layers").get<int>();
  c.hidden_dim = cfg.at("hidden_dim").get<int>();
  c.num_heads = cfg.at("num_heads").get<int>();
  c.max_seq_len = cfg.at("max_seq_len").get<int>();
  c.proj_dim = cfg.at("proj_dim").get<int>();
  c.mlm_mask_rate = cfg.at("mlm_mask_rate").get<Scalar>();

  TransformerEncoder encoder(c, /*seed=*/0);
  encoder.params().load_values(
      load_tensors((fs::path(dir) / "tensors.bin").string()));
  if (vocab) *vocab = Vocab::load((fs::path(dir) / "vocab.json").string());
  return encoder;
}

}  // namespace rr2qc
