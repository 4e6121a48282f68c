#include "nmtattack/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nmtattack {

void ModelConfig::validate() const {
    if (vocab_size <= Vocabulary::N_SPECIAL)
        throw ConfigError("vocab_size must exceed " + std::to_string(Vocabulary::N_SPECIAL));
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || ffn_width <= 0)
        throw ConfigError("model dimensions must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                          std::to_string(n_heads));
    if (max_len < 4) throw ConfigError("max_len must be at least 4");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

void collect_ln(std::vector<NamedParam>& out, const std::string& prefix, LayerNormParams& p) {
    out.emplace_back(prefix + ".gamma", &p.gamma);
    out.emplace_back(prefix + ".beta", &p.beta);
}

void collect_attn(std::vector<NamedParam>& out, const std::string& prefix, AttentionParams& p) {
    out.emplace_back(prefix + ".wq", &p.wq);
    out.emplace_back(prefix + ".bq", &p.bq);
    out.emplace_back(prefix + ".wk", &p.wk);
    out.emplace_back(prefix + ".bk", &p.bk);
    out.emplace_back(prefix + ".wv", &p.wv);
    out.emplace_back(prefix + ".bv", &p.bv);
    out.emplace_back(prefix + ".wo", &p.wo);
    out.emplace_back(prefix + ".bo", &p.bo);
}

void collect_ffn(std::vector<NamedParam>& out, const std::string& prefix, FfnParams& p) {
    out.emplace_back(prefix + ".w1", &p.w1);
    out.emplace_back(prefix + ".b1", &p.b1);
    out.emplace_back(prefix + ".w2", &p.w2);
    out.emplace_back(prefix + ".b2", &p.b2);
}

void allocate_ln(LayerNormParams& p, int d) {
    p.gamma = Tensor({d});
    p.beta = Tensor({d});
}

void allocate_attn(AttentionParams& p, int d) {
    p.wq = Tensor({d, d});
    p.bq = Tensor({d});
    p.wk = Tensor({d, d});
    p.bk = Tensor({d});
    p.wv = Tensor({d, d});
    p.bv = Tensor({d});
    p.wo = Tensor({d, d});
    p.bo = Tensor({d});
}

void allocate_ffn(FfnParams& p, int d, int ffn) {
    p.w1 = Tensor({d, ffn});
    p.b1 = Tensor({ffn});
    p.w2 = Tensor({ffn, d});
    p.b2 = Tensor({d});
}

// GPT-2 style: weights N(0, 0.02), biases/beta 0, gamma 1. Keys identify the
// role by their final component.
void init_named(std::vector<NamedParam>& params, Rng& rng) {
    for (auto& [name, t] : params) {
        const std::size_t dot = name.rfind('.');
        const std::string last = dot == std::string::npos ? name : name.substr(dot + 1);
        if (last == "gamma") {
            std::fill(t->data.begin(), t->data.end(), 1.0);
        } else if (last == "beta" || last[0] == 'b') {
            std::fill(t->data.begin(), t->data.end(), 0.0);
        } else {
            for (double& x : t->data) x = rng.normal(0.0, 0.02);
        }
    }
}

Var dropout(Graph& g, Var x, double rate, const ForwardOptions& opt) {
    if (!opt.train || rate <= 0.0 || opt.dropout_rng == nullptr) return x;
    const double keep = 1.0 - rate;
    std::vector<double> mask(g.value(x).size());
    for (double& m : mask) m = opt.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    return g.mul(x, g.constant(g.shape(x), std::move(mask)));
}

Var ln(Graph& g, const LayerNormParams& p, Var x) {
    return g.add_rowvec(g.mul_rowvec(g.layer_norm(x), g.leaf(p.gamma)), g.leaf(p.beta));
}

Var attention(Graph& g, const AttentionParams& p, const ModelConfig& cfg, Var q_in, Var kv_in,
              bool causal, const ForwardOptions& opt) {
    const int tq = g.shape(q_in)[0];
    const int tk = g.shape(kv_in)[0];
    Var q = g.add_rowvec(g.matmul(q_in, g.leaf(p.wq)), g.leaf(p.bq));
    Var k = g.add_rowvec(g.matmul(kv_in, g.leaf(p.wk)), g.leaf(p.bk));
    Var v = g.add_rowvec(g.matmul(kv_in, g.leaf(p.wv)), g.leaf(p.bv));

    Var mask;
    if (causal) {
        std::vector<double> m(static_cast<std::size_t>(tq) * tk, 0.0);
        for (int i = 0; i < tq; ++i)
            for (int j = i + 1; j < tk; ++j) m[static_cast<std::size_t>(i) * tk + j] = -1e9;
        mask = g.constant({tq, tk}, std::move(m));
    }

    const int hd = cfg.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
        Var qh = g.slice_cols(q, h * hd, hd);
        Var kh = g.slice_cols(k, h * hd, hd);
        Var vh = g.slice_cols(v, h * hd, hd);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt);
        if (causal) scores = g.add(scores, mask);
        Var attn = dropout(g, g.softmax_rows(scores), cfg.dropout, opt);
        heads.push_back(g.matmul(attn, vh));
    }
    Var out = g.add_rowvec(g.matmul(g.concat_cols(heads), g.leaf(p.wo)), g.leaf(p.bo));
    return dropout(g, out, cfg.dropout, opt);
}

Var ffn_forward(Graph& g, const FfnParams& p, const ModelConfig& cfg, Var x,
                const ForwardOptions& opt) {
    Var h = g.relu(g.add_rowvec(g.matmul(x, g.leaf(p.w1)), g.leaf(p.b1)));
    Var out = g.add_rowvec(g.matmul(h, g.leaf(p.w2)), g.leaf(p.b2));
    return dropout(g, out, cfg.dropout, opt);
}

Var encoder_block(Graph& g, const EncoderLayer& l, const ModelConfig& cfg, Var h, bool causal,
                  const ForwardOptions& opt) {
    Var a = ln(g, l.ln1, h);
    h = g.add(h, attention(g, l.self_attn, cfg, a, a, causal, opt));
    h = g.add(h, ffn_forward(g, l.ffn, cfg, ln(g, l.ln2, h), opt));
    return h;
}

Var embed_hard(Graph& g, const Tensor& emb, const Tensor& pos, const std::vector<int>& ids,
               const ModelConfig& cfg) {
    if (ids.empty()) throw LengthError("empty token sequence");
    if (static_cast<int>(ids.size()) > cfg.max_len)
        throw LengthError("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                          std::to_string(cfg.max_len));
    std::vector<int> positions(ids.size());
    std::iota(positions.begin(), positions.end(), 0);
    return g.add(g.gather_rows(g.leaf(emb), ids), g.gather_rows(g.leaf(pos), positions));
}

Var embed_soft(Graph& g, const Tensor& emb, const Tensor& pos, Var z_rows, const ModelConfig& cfg,
               double simplex_tol) {
    if (g.shape(z_rows).size() != 2 || g.shape(z_rows)[1] != cfg.vocab_size)
        throw DimensionError("soft input must be [k x " + std::to_string(cfg.vocab_size) +
                             "], got " + shape_str(g.shape(z_rows)));
    const int k = g.shape(z_rows)[0];
    if (k == 0) throw LengthError("empty soft input");
    if (k > cfg.max_len)
        throw LengthError("soft input of " + std::to_string(k) + " positions exceeds max_len " +
                          std::to_string(cfg.max_len));
    check_simplex_rows(g, z_rows, simplex_tol);
    std::vector<int> positions(static_cast<std::size_t>(k));
    std::iota(positions.begin(), positions.end(), 0);
    return g.add(g.matmul(z_rows, g.leaf(emb)), g.gather_rows(g.leaf(pos), positions));
}

}  // namespace

void check_simplex_rows(const Graph& g, Var z_rows, double tol) {
    const Shape& s = g.shape(z_rows);
    if (s.size() != 2) throw DimensionError("soft input must be rank 2, got " + shape_str(s));
    const std::vector<double>& v = g.value(z_rows);
    for (int i = 0; i < s[0]; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < s[1]; ++j) rowsum += v[static_cast<std::size_t>(i) * s[1] + j];
        if (std::fabs(rowsum - 1.0) > tol)
            throw SimplexError("soft input distribution at position " + std::to_string(i) +
                               " sums to " + std::to_string(rowsum));
    }
}

NmtModel::NmtModel(ModelConfig cfg) : config(cfg) {
    config.validate();
    embedding = Tensor({config.vocab_size, config.d_model});
    pos_embedding = Tensor({config.max_len, config.d_model});
    encoder.resize(static_cast<std::size_t>(config.n_layers));
    decoder.resize(static_cast<std::size_t>(config.n_layers));
    for (EncoderLayer& l : encoder) {
        allocate_ln(l.ln1, config.d_model);
        allocate_attn(l.self_attn, config.d_model);
        allocate_ln(l.ln2, config.d_model);
        allocate_ffn(l.ffn, config.d_model, config.ffn_width);
    }
    for (DecoderLayer& l : decoder) {
        allocate_ln(l.ln1, config.d_model);
        allocate_attn(l.self_attn, config.d_model);
        allocate_ln(l.ln2, config.d_model);
        allocate_attn(l.cross_attn, config.d_model);
        allocate_ln(l.ln3, config.d_model);
        allocate_ffn(l.ffn, config.d_model, config.ffn_width);
    }
    allocate_ln(enc_ln, config.d_model);
    allocate_ln(dec_ln, config.d_model);
}

void NmtModel::init_parameters(Rng& rng) {
    auto params = named_parameters();
    init_named(params, rng);
}

std::vector<NamedParam> NmtModel::named_parameters() {
    std::vector<NamedParam> out;
    out.emplace_back("embedding", &embedding);
    out.emplace_back("pos_embedding", &pos_embedding);
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        const std::string p = "enc." + std::to_string(i);
        collect_ln(out, p + ".ln1", encoder[i].ln1);
        collect_attn(out, p + ".attn", encoder[i].self_attn);
        collect_ln(out, p + ".ln2", encoder[i].ln2);
        collect_ffn(out, p + ".ffn", encoder[i].ffn);
    }
    for (std::size_t i = 0; i < decoder.size(); ++i) {
        const std::string p = "dec." + std::to_string(i);
        collect_ln(out, p + ".ln1", decoder[i].ln1);
        collect_attn(out, p + ".self", decoder[i].self_attn);
        collect_ln(out, p + ".ln2", decoder[i].ln2);
        collect_attn(out, p + ".cross", decoder[i].cross_attn);
        collect_ln(out, p + ".ln3", decoder[i].ln3);
        collect_ffn(out, p + ".ffn", decoder[i].ffn);
    }
    collect_ln(out, "enc_ln", enc_ln);
    collect_ln(out, "dec_ln", dec_ln);
    return out;
}

std::vector<const Tensor*> NmtModel::parameters() const {
    auto named = const_cast<NmtModel*>(this)->named_parameters();
    std::vector<const Tensor*> out;
    out.reserve(named.size());
    for (auto& [name, t] : named) out.push_back(t);
    return out;
}

void NmtModel::set_trainable(bool on) {
    for (auto& [name, t] : named_parameters()) t->set_requires_grad(on);
}

void NmtModel::zero_grad() const {
    for (const Tensor* t : parameters()) t->zero_grad();
}

Var NmtModel::encode(Graph& g, const std::vector<int>& x, const ForwardOptions& opt) const {
    Var h = embed_hard(g, embedding, pos_embedding, x, config);
    h = dropout(g, h, config.dropout, opt);
    for (const EncoderLayer& l : encoder) h = encoder_block(g, l, config, h, false, opt);
    return ln(g, enc_ln, h);
}

Var NmtModel::encode_soft(Graph& g, Var z_rows, double simplex_tol) const {
    Var h = embed_soft(g, embedding, pos_embedding, z_rows, config, simplex_tol);
    ForwardOptions opt;
    for (const EncoderLayer& l : encoder) h = encoder_block(g, l, config, h, false, opt);
    return ln(g, enc_ln, h);
}

namespace {

Var decode_hidden(Graph& g, const NmtModel& f, Var enc_out, const std::vector<int>& y_in,
                  const ForwardOptions& opt) {
    Var h = embed_hard(g, f.embedding, f.pos_embedding, y_in, f.config);
    h = dropout(g, h, f.config.dropout, opt);
    for (const DecoderLayer& l : f.decoder) {
        Var a = ln(g, l.ln1, h);
        h = g.add(h, attention(g, l.self_attn, f.config, a, a, /*causal=*/true, opt));
        Var b = ln(g, l.ln2, h);
        h = g.add(h, attention(g, l.cross_attn, f.config, b, enc_out, /*causal=*/false, opt));
        h = g.add(h, ffn_forward(g, l.ffn, f.config, ln(g, l.ln3, h), opt));
    }
    return ln(g, f.dec_ln, h);
}

}  // namespace

Var NmtModel::decode_logits(Graph& g, Var enc_out, const std::vector<int>& y_in,
                            const ForwardOptions& opt) const {
    Var h = decode_hidden(g, *this, enc_out, y_in, opt);
    return g.matmul(h, g.transpose(g.leaf(embedding)));
}

CausalLm::CausalLm(ModelConfig cfg) : config(cfg) {
    config.validate();
    embedding = Tensor({config.vocab_size, config.d_model});
    pos_embedding = Tensor({config.max_len, config.d_model});
    layers.resize(static_cast<std::size_t>(config.n_layers));
    for (EncoderLayer& l : layers) {
        allocate_ln(l.ln1, config.d_model);
        allocate_attn(l.self_attn, config.d_model);
        allocate_ln(l.ln2, config.d_model);
        allocate_ffn(l.ffn, config.d_model, config.ffn_width);
    }
    allocate_ln(final_ln, config.d_model);
}

void CausalLm::init_parameters(Rng& rng) {
    auto params = named_parameters();
    init_named(params, rng);
}

std::vector<NamedParam> CausalLm::named_parameters() {
    std::vector<NamedParam> out;
    out.emplace_back("embedding", &embedding);
    out.emplace_back("pos_embedding", &pos_embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "blk." + std::to_string(i);
        collect_ln(out, p + ".ln1", layers[i].ln1);
        collect_attn(out, p + ".attn", layers[i].self_attn);
        collect_ln(out, p + ".ln2", layers[i].ln2);
        collect_ffn(out, p + ".ffn", layers[i].ffn);
    }
    collect_ln(out, "final_ln", final_ln);
    return out;
}

std::vector<const Tensor*> CausalLm::parameters() const {
    auto named = const_cast<CausalLm*>(this)->named_parameters();
    std::vector<const Tensor*> out;
    out.reserve(named.size());
    for (auto& [name, t] : named) out.push_back(t);
    return out;
}

void CausalLm::set_trainable(bool on) {
    for (auto& [name, t] : named_parameters()) t->set_requires_grad(on);
}

void CausalLm::zero_grad() const {
    for (const Tensor* t : parameters()) t->zero_grad();
}

Var CausalLm::hidden_states(Graph& g, const std::vector<int>& x, const ForwardOptions& opt) const {
    Var h = embed_hard(g, embedding, pos_embedding, x, config);
    h = dropout(g, h, config.dropout, opt);
    for (const EncoderLayer& l : layers) h = encoder_block(g, l, config, h, /*causal=*/true, opt);
    return ln(g, final_ln, h);
}

Var CausalLm::hidden_states_soft(Graph& g, Var z_rows, double simplex_tol) const {
    Var h = embed_soft(g, embedding, pos_embedding, z_rows, config, simplex_tol);
    ForwardOptions opt;
    for (const EncoderLayer& l : layers) h = encoder_block(g, l, config, h, /*causal=*/true, opt);
    return ln(g, final_ln, h);
}

Var CausalLm::logits(Graph& g, Var hidden) const {
    return g.matmul(hidden, g.transpose(g.leaf(embedding)));
}

namespace {

Var teacher_forced_loss(Graph& g, const NmtModel& f, Var enc_out, const std::vector<int>& y,
                        const ForwardOptions& opt) {
    if (y.size() < 2) throw LengthError("reference must contain at least BOS and EOS");
    const std::vector<int> y_in(y.begin(), y.end() - 1);
    const std::vector<int> targets(y.begin() + 1, y.end());
    Var logits = f.decode_logits(g, enc_out, y_in, opt);
    return g.cross_entropy(logits, targets, Vocabulary::PAD);
}

}  // namespace

Var nmt_loss(Graph& g, const NmtModel& f, const std::vector<int>& x, const std::vector<int>& y,
             const ForwardOptions& opt) {
    return teacher_forced_loss(g, f, f.encode(g, x, opt), y, opt);
}

Var nmt_loss_soft(Graph& g, const NmtModel& f, Var z_rows, const std::vector<int>& y,
                  double simplex_tol) {
    return teacher_forced_loss(g, f, f.encode_soft(g, z_rows, simplex_tol), y, {});
}

Var nmt_loss_soft(Graph& g, const NmtModel& f, const Tensor& z_rows, const std::vector<int>& y,
                  double simplex_tol) {
    return nmt_loss_soft(g, f, g.leaf(z_rows), y, simplex_tol);
}

std::vector<int> translate(const NmtModel& f, const std::vector<int>& x, int max_out) {
    Graph g;
    Var enc = f.encode(g, x);
    std::vector<int> y_in{Vocabulary::BOS};
    std::vector<int> out;
    const int cap = std::min(max_out, f.config.max_len - 1);
    const int vocab = f.config.vocab_size;
    for (int step = 0; step < cap; ++step) {
        Var h = decode_hidden(g, f, enc, y_in, {});
        // project only the newest position through the tied output matrix
        Var last = g.gather_rows(h, {static_cast<int>(y_in.size()) - 1});
        Var logits = g.matmul(last, g.transpose(g.leaf(f.embedding)));
        const std::vector<double>& row = g.value(logits);
        int best = 0;
        for (int j = 1; j < vocab; ++j)
            if (row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(best)]) best = j;
        if (best == Vocabulary::EOS) break;
        out.push_back(best);
        y_in.push_back(best);
    }
    return out;
}

Var lm_embed(Graph& g, const CausalLm& lm, const std::vector<int>& x) {
    return lm.hidden_states(g, x);
}

Var lm_embed_soft(Graph& g, const CausalLm& lm, Var z_rows, double simplex_tol) {
    return lm.hidden_states_soft(g, z_rows, simplex_tol);
}

Tensor lm_embed_values(const CausalLm& lm, const std::vector<int>& x) {
    Graph g;
    Var h = lm_embed(g, lm, x);
    return Tensor(g.shape(h), g.value(h));
}

double lm_nll(const CausalLm& lm, const std::vector<int>& x) {
    if (x.size() < 2)
        throw LengthError("lm_nll needs at least 2 tokens, got " + std::to_string(x.size()));
    Graph g;
    const std::vector<int> input(x.begin(), x.end() - 1);
    const std::vector<int> targets(x.begin() + 1, x.end());
    Var logits = lm.logits(g, lm.hidden_states(g, input));
    return g.scalar_value(g.cross_entropy(logits, targets, Vocabulary::PAD));
}

}  // namespace nmtattack
