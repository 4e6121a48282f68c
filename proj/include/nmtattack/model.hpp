#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nmtattack/graph.hpp"
#include "nmtattack/rng.hpp"
#include "nmtattack/vocab.hpp"

namespace nmtattack {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int ffn_width = 128;
    int max_len = 32;
    double dropout = 0.0;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct LayerNormParams {
    Tensor gamma, beta;
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnParams {
    Tensor w1, b1, w2, b2;
};

struct EncoderLayer {
    LayerNormParams ln1;
    AttentionParams self_attn;
    LayerNormParams ln2;
    FfnParams ffn;
};

struct DecoderLayer {
    LayerNormParams ln1;
    AttentionParams self_attn;
    LayerNormParams ln2;
    AttentionParams cross_attn;
    LayerNormParams ln3;
    FfnParams ffn;
};

using NamedParam = std::pair<std::string, Tensor*>;

// Runtime switches for a forward pass. Attack- and evaluation-time forwards
// use the default (deterministic, no dropout).
struct ForwardOptions {
    bool train = false;
    Rng* dropout_rng = nullptr;
};

// Tiny pre-LN transformer encoder-decoder translator. The embedding matrix
// is stored row-per-token ([V x d]); a soft input Z (positions x vocab,
// rows on the simplex) enters through the linear combination Z * embedding,
// and the output projection is weight-tied to the same matrix.
class NmtModel {
  public:
    ModelConfig config;
    Tensor embedding;       // [V x d]
    Tensor pos_embedding;   // [max_len x d]
    std::vector<EncoderLayer> encoder;
    std::vector<DecoderLayer> decoder;
    LayerNormParams enc_ln, dec_ln;

    NmtModel() = default;
    explicit NmtModel(ModelConfig cfg);
    void init_parameters(Rng& rng);

    std::vector<NamedParam> named_parameters();
    std::vector<const Tensor*> parameters() const;
    void set_trainable(bool on);
    void zero_grad() const;

    // Encoder over hard token ids or an in-graph soft matrix [k x V].
    Var encode(Graph& g, const std::vector<int>& x, const ForwardOptions& opt = {}) const;
    Var encode_soft(Graph& g, Var z_rows, double simplex_tol = 1e-6) const;

    // Teacher-forced decoder logits for predicting y[1..] from y[:-1].
    Var decode_logits(Graph& g, Var enc_out, const std::vector<int>& y_in,
                      const ForwardOptions& opt = {}) const;
};

// Decoder-only causal language model sharing the vocabulary with the NMT
// model; exposes per-position contextual vectors ahead of the tied output
// projection.
class CausalLm {
  public:
    ModelConfig config;
    Tensor embedding;      // [V x d]
    Tensor pos_embedding;  // [max_len x d]
    std::vector<EncoderLayer> layers;  // self-attention blocks, causally masked
    LayerNormParams final_ln;

    CausalLm() = default;
    explicit CausalLm(ModelConfig cfg);
    void init_parameters(Rng& rng);

    std::vector<NamedParam> named_parameters();
    std::vector<const Tensor*> parameters() const;
    void set_trainable(bool on);
    void zero_grad() const;

    Var hidden_states(Graph& g, const std::vector<int>& x, const ForwardOptions& opt = {}) const;
    Var hidden_states_soft(Graph& g, Var z_rows, double simplex_tol = 1e-6) const;
    Var logits(Graph& g, Var hidden) const;
};

// Teacher-forced mean cross-entropy of translating `x` (or soft input) into
// y. Differentiable w.r.t. a soft input through the embedding product.
Var nmt_loss(Graph& g, const NmtModel& f, const std::vector<int>& x, const std::vector<int>& y,
             const ForwardOptions& opt = {});
Var nmt_loss_soft(Graph& g, const NmtModel& f, Var z_rows, const std::vector<int>& y,
                  double simplex_tol = 1e-6);
// Convenience overload: binds a [k x V] tensor as a graph leaf first.
Var nmt_loss_soft(Graph& g, const NmtModel& f, const Tensor& z_rows, const std::vector<int>& y,
                  double simplex_tol = 1e-6);

// Greedy argmax decoding from BOS until EOS or max_out content tokens.
// Returns content token ids (no BOS/EOS). Ties break toward the lowest id.
std::vector<int> translate(const NmtModel& f, const std::vector<int>& x, int max_out);

// Contextual embedding rows v_1..v_k (final pre-projection hidden states).
Var lm_embed(Graph& g, const CausalLm& lm, const std::vector<int>& x);
Var lm_embed_soft(Graph& g, const CausalLm& lm, Var z_rows, double simplex_tol = 1e-6);
Tensor lm_embed_values(const CausalLm& lm, const std::vector<int>& x);

// Mean next-token negative log-likelihood over positions 2..k.
double lm_nll(const CausalLm& lm, const std::vector<int>& x);

// Validates that each row of a soft input sums to 1 within tol.
void check_simplex_rows(const Graph& g, Var z_rows, double tol = 1e-6);

}  // namespace nmtattack
