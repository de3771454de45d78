#ifndef RR2QC_ENCODER_HPP
#define RR2QC_ENCODER_HPP

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rr2qc/checkpoint.hpp"
#include "rr2qc/types.hpp"
#include "rr2qc/vocab.hpp"

namespace rr2qc {

struct EncoderConfig {
  int vocab_size = 0;
  int num_layers = 2;
  int hidden_dim = 64;
  int num_heads = 4;
  int max_seq_len = 64;
  int proj_dim = 64;
  Scalar mlm_mask_rate = 0.15;

  int ffn_dim() const { return 4 * hidden_dim; }
  int head_dim() const { return hidden_dim / num_heads; }
  void validate() const;  // throws DomainError on broken invariants
};

enum class EmbeddingSpace { kProjected, kFeature };

// Projected embeddings are L2-normalized so dot-product similarities are
// bounded; feature embeddings are raw pooled states (class centers live
// there and compare by Euclidean distance).
struct Embedding {
  Vec v;
  EmbeddingSpace space = EmbeddingSpace::kFeature;
};

// Dot product of two same-space, same-length embeddings.
Scalar similarity(const Embedding& a, const Embedding& b);

// Named parameter registry: values, gradients, and freeze flags. Names
// keep insertion order so archives are stable.
class ParamStore {
 public:
  Mat& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  bool has(const std::string& name) const;
  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);
  const Mat& grad(const std::string& name) const;

  void zero_grads();
  void set_frozen(const std::string& name, bool frozen);
  bool frozen(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }

  NamedTensors snapshot() const;  // values only, insertion order
  // Loads values by name; known tensors are shape-checked, unknown ones
  // are added (checkpoints may carry heads the current model lacks).
  void load_values(const NamedTensors& tensors);

 private:
  struct Slot {
    Mat value;
    Mat grad;
    bool frozen = false;
  };
  std::vector<std::string> names_;
  std::unordered_map<std::string, Slot> slots_;
  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;
};

// theta_M <- m * theta_M + (1 - m) * theta_Q, values only. Every tensor
// of theta_Q must exist in theta_M with the same shape.
void momentum_update(ParamStore& theta_M, const ParamStore& theta_Q,
                     Scalar m = 0.9);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                         Scalar eps = 1e-8);
  // One update from accumulated gradients; frozen tensors untouched.
  void step(ParamStore& params);

  Scalar lr;

 private:
  Scalar beta1_, beta2_, eps_;
  long t_ = 0;
  std::unordered_map<std::string, std::pair<Mat, Mat>> moments_;
};

// Pre-LN transformer encoder with mean pooling, an L2-normalized
// projection head, and an MLM head. Forward passes are deterministic for
// fixed weights; backward accumulates parameter gradients from cached
// activations.
class TransformerEncoder {
 public:
  struct LayerCache {
    Mat x_in, ln1_xhat;
    Vec ln1_istd;
    Mat q, k, v;
    std::vector<Mat> attn;  // per-head row softmax, T x T
    Mat attn_concat;        // heads merged, before the output projection
    Mat x_mid, ln2_xhat;
    Vec ln2_istd;
    Mat ffn_pre, ffn_act;
  };
  struct Cache {
    std::vector<TokenId> tokens;  // after truncation
    std::vector<LayerCache> layers;
    Mat final_in, final_xhat;
    Vec final_istd;
    Mat hidden;   // T x hidden final states
    Vec feature;  // pooled mean
  };

  TransformerEncoder(EncoderConfig cfg, uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Final hidden states (T x hidden); input truncated from the right to
  // max_seq_len. Empty input -> DomainError.
  Mat forward(const std::vector<TokenId>& tokens, Cache* cache = nullptr) const;

  // Mean of the final hidden states (feature space).
  Embedding encode_pool(const std::vector<TokenId>& tokens,
                        Cache* cache = nullptr) const;

  // Linear map to proj_dim, then L2 normalization. A vector that
  // projects to zero is returned as-is with *zero_flagged set.
  Embedding project(const Embedding& feature,
                    bool* zero_flagged = nullptr) const;

  // MLM logits over the vocabulary for one final hidden state row.
  Vec mlm_logits(const Vec& hidden_row) const;

  // Accumulates gradients for one cached pass. Any of the three grads
  // may be empty (size 0): d_hidden is T x hidden on the final states,
  // d_feature is on the pooled mean, d_proj on the normalized projection.
  void backward(const Cache& cache, const Mat& d_hidden, const Vec& d_feature,
                const Vec& d_proj);

  // Lowest floor(fraction * num_layers) layers frozen; the embedding
  // tables freeze together with layer 0. fraction outside [0,1] is a
  // DomainError. Unfreezes everything first, so calls are idempotent.
  void freeze_layers(Scalar fraction);

 private:
  EncoderConfig cfg_;
  ParamStore params_;
};

// Parameter names follow "layer{i}.{part}"; helpers used by trainers.
std::vector<std::string> encoder_layer_prefixes(const EncoderConfig& cfg);

// 80/10/10 corruption of a mask_rate fraction of positions.
struct MaskedBatch {
  std::vector<std::vector<TokenId>> inputs;
  // (position, original token) per sequence, ascending positions
  std::vector<std::vector<std::pair<int, TokenId>>> targets;
};
MaskedBatch apply_mlm_masking(const std::vector<std::vector<TokenId>>& batch,
                              const EncoderConfig& cfg, Rng& rng);

struct MlmLossResult {
  Scalar loss = 0;
  std::size_t masked = 0;  // 0 means the loss carries no signal
};

// Cross-entropy over masked positions only, averaged per masked token.
// With accumulate_grads the encoder receives d(loss)/d(params).
MlmLossResult mlm_loss(TransformerEncoder& encoder,
                       const std::vector<std::vector<TokenId>>& batch,
                       Rng& rng, bool accumulate_grads);

// Checkpoint directory: config.json + vocab.json + tensors.bin.
void save_encoder(const TransformerEncoder& encoder, const Vocab& vocab,
                  const std::string& dir);
TransformerEncoder load_encoder(const std::string& dir, Vocab* vocab);

}  // namespace rr2qc

#endif  // RR2QC_ENCODER_HPP
