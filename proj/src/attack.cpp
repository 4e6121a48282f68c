#include "nmtattack/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "nmtattack/train.hpp"

namespace nmtattack {

void AttackConfig::validate() const {
    if (alpha < 0.0) throw ConfigError("attack alpha must be >= 0");
    if (lr <= 0.0) throw ConfigError("attack lr must be positive");
    if (iterations < 0) throw ConfigError("attack iterations must be >= 0");
    if (batch < 1) throw ConfigError("attack batch must be >= 1");
    if (tau <= 0.0) throw ConfigError("attack tau must be positive");
    if (init_value <= 0.0) throw ConfigError("attack init_value must be positive");
    if (n_samples < 1) throw ConfigError("attack n_samples must be >= 1");
}

namespace {
constexpr double kMaskedLogit = -1e9;
}

std::vector<double> AdversarialDistribution::column_softmax(int position) const {
    const int v = vocab();
    std::vector<double> out(static_cast<std::size_t>(v));
    double m = logits.at(0, position);
    for (int r = 1; r < v; ++r) m = std::max(m, logits.at(r, position));
    double z = 0.0;
    for (int r = 0; r < v; ++r) {
        out[static_cast<std::size_t>(r)] = std::exp(logits.at(r, position) - m);
        z += out[static_cast<std::size_t>(r)];
    }
    for (double& x : out) x /= z;
    return out;
}

std::vector<int> AdversarialDistribution::argmax_tokens() const {
    std::vector<int> out(original.size());
    for (int j = 0; j < length(); ++j) {
        if (position_protected[static_cast<std::size_t>(j)]) {
            out[static_cast<std::size_t>(j)] = original[static_cast<std::size_t>(j)];
            continue;
        }
        int best = 0;
        for (int r = 1; r < vocab(); ++r)
            if (logits.at(r, j) > logits.at(best, j)) best = r;
        out[static_cast<std::size_t>(j)] = best;
    }
    return out;
}

AdversarialDistribution init_distribution(const std::vector<int>& x, double init_value,
                                          const Vocabulary& vocab, bool forbid_specials) {
    if (init_value <= 0.0)
        throw ConfigError("distribution init_value must be positive, got " +
                          std::to_string(init_value));
    if (x.empty()) throw LengthError("cannot attack an empty sentence");
    const int v = vocab.size();
    const int k = static_cast<int>(x.size());
    for (int id : x)
        if (id < 0 || id >= v) throw IndexError("token id " + std::to_string(id) + " out of vocabulary");

    AdversarialDistribution dist;
    dist.original = x;
    dist.logits = Tensor({v, k});
    dist.position_protected.assign(static_cast<std::size_t>(k), false);
    dist.row_forbidden.assign(static_cast<std::size_t>(v), false);

    for (int j = 0; j < k; ++j) {
        const int id = x[static_cast<std::size_t>(j)];
        dist.logits.at(id, j) = init_value;
        if (id == Vocabulary::BOS || id == Vocabulary::EOS || id == Vocabulary::PAD)
            dist.position_protected[static_cast<std::size_t>(j)] = true;
    }
    if (forbid_specials) {
        for (int r = 0; r < Vocabulary::N_SPECIAL; ++r) {
            dist.row_forbidden[static_cast<std::size_t>(r)] = true;
            for (int j = 0; j < k; ++j) {
                if (dist.position_protected[static_cast<std::size_t>(j)]) continue;
                if (x[static_cast<std::size_t>(j)] == r) continue;  // keep the original reachable
                dist.logits.at(r, j) = kMaskedLogit;
            }
        }
    }
    dist.logits.set_requires_grad(true);
    return dist;
}

GumbelSample gumbel_softmax_sample_with_noise(Graph& g, const AdversarialDistribution& dist,
                                              double tau, std::vector<double> noise) {
    if (tau <= 0.0) throw ConfigError("gumbel softmax tau must be positive");
    const int k = dist.length();
    const int v = dist.vocab();
    if (noise.size() != static_cast<std::size_t>(k) * static_cast<std::size_t>(v))
        throw DimensionError("gumbel noise size " + std::to_string(noise.size()) +
                             " does not match " + std::to_string(k) + "x" + std::to_string(v));

    GumbelSample sample;
    sample.noise = noise;
    Var p_rows = g.transpose(g.leaf(dist.logits));  // [k x V], row per position
    Var noisy = g.scale(g.add(p_rows, g.constant({k, v}, std::move(noise))), 1.0 / tau);
    Var soft = g.softmax_rows(noisy);

    // Protected rows are overwritten by exact one-hots through constant masks,
    // which also zeroes their gradient path.
    std::vector<double> keep(static_cast<std::size_t>(k) * v, 1.0);
    std::vector<double> pinned(static_cast<std::size_t>(k) * v, 0.0);
    bool any_protected = false;
    for (int j = 0; j < k; ++j) {
        if (!dist.position_protected[static_cast<std::size_t>(j)]) continue;
        any_protected = true;
        for (int r = 0; r < v; ++r) keep[static_cast<std::size_t>(j) * v + r] = 0.0;
        pinned[static_cast<std::size_t>(j) * v + dist.original[static_cast<std::size_t>(j)]] = 1.0;
    }
    if (any_protected) {
        soft = g.add(g.mul(soft, g.constant({k, v}, std::move(keep))),
                     g.constant({k, v}, std::move(pinned)));
    }
    sample.z_rows = soft;
    return sample;
}

GumbelSample gumbel_softmax_sample(Graph& g, const AdversarialDistribution& dist, double tau,
                                   Rng& rng) {
    const std::size_t n = static_cast<std::size_t>(dist.length()) * static_cast<std::size_t>(dist.vocab());
    std::vector<double> noise(n);
    for (double& x : noise) x = rng.gumbel();
    return gumbel_softmax_sample_with_noise(g, dist, tau, std::move(noise));
}

Var adv_loss(Graph& g, Var z_rows, const std::vector<int>& y, const NmtModel& f) {
    return g.scale(nmt_loss_soft(g, f, z_rows, y), -1.0);
}

namespace {

// idf weights of the original tokens, zeroed on special positions.
std::vector<double> similarity_weights(const std::vector<int>& x, const IdfTable& idf) {
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!Vocabulary::is_special(x[i])) w[i] = idf.weight(x[i]);
    return w;
}

Var sim_loss_pre(Graph& g, Var z_rows, const Tensor& clean_embed,
                 const std::vector<double>& weights, const CausalLm& lm) {
    Var v_adv = lm_embed_soft(g, lm, z_rows);
    Var cos = g.cosine_rows(g.leaf(clean_embed), v_adv);
    Var w = g.constant({static_cast<int>(weights.size())}, weights);
    return g.scale(g.sum(g.mul(cos, w)), -1.0);
}

}  // namespace

Var sim_loss(Graph& g, Var z_rows, const std::vector<int>& x, const CausalLm& lm,
             const IdfTable& idf) {
    if (g.shape(z_rows)[0] != static_cast<int>(x.size()))
        throw DimensionError("sim_loss: sample has " + std::to_string(g.shape(z_rows)[0]) +
                             " positions for a sentence of " + std::to_string(x.size()));
    return sim_loss_pre(g, z_rows, lm_embed_values(lm, x), similarity_weights(x, idf), lm);
}

namespace {

struct ObjectiveContext {
    const std::vector<int>* x;
    const std::vector<int>* y;
    const NmtModel* f;
    const CausalLm* lm;
    Tensor clean_embed;              // empty when alpha == 0
    std::vector<double> sim_weights;
    double alpha = 0.0;
    double tau = 1.0;
    int batch = 1;
};

ObjectiveContext make_context(const std::vector<int>& x, const std::vector<int>& y,
                              const NmtModel& f, const CausalLm& lm, const IdfTable& idf,
                              double alpha, double tau, int batch) {
    ObjectiveContext ctx;
    ctx.x = &x;
    ctx.y = &y;
    ctx.f = &f;
    ctx.lm = &lm;
    ctx.alpha = alpha;
    ctx.tau = tau;
    ctx.batch = batch;
    if (alpha != 0.0) {
        ctx.clean_embed = lm_embed_values(lm, x);
        ctx.sim_weights = similarity_weights(x, idf);
    }
    return ctx;
}

ObjectiveParts objective_with_context(Graph& g, const AdversarialDistribution& dist,
                                      const ObjectiveContext& ctx, Rng& rng) {
    if (ctx.batch < 1) throw ConfigError("objective batch must be >= 1");
    Var total;
    double adv_sum = 0.0, sim_sum = 0.0;
    for (int b = 0; b < ctx.batch; ++b) {
        GumbelSample sample = gumbel_softmax_sample(g, dist, ctx.tau, rng);
        Var adv = adv_loss(g, sample.z_rows, *ctx.y, *ctx.f);
        adv_sum += g.scalar_value(adv);
        Var term = adv;
        if (ctx.alpha != 0.0) {
            Var sim = sim_loss_pre(g, sample.z_rows, ctx.clean_embed, ctx.sim_weights, *ctx.lm);
            sim_sum += g.scalar_value(sim);
            term = g.add(adv, g.scale(sim, ctx.alpha));
        }
        total = b == 0 ? term : g.add(total, term);
    }
    ObjectiveParts parts;
    parts.total = g.scale(total, 1.0 / ctx.batch);
    parts.adv_value = adv_sum / ctx.batch;
    parts.sim_value = sim_sum / ctx.batch;
    return parts;
}

}  // namespace

ObjectiveParts total_objective(Graph& g, const AdversarialDistribution& dist,
                               const std::vector<int>& x, const std::vector<int>& y,
                               const NmtModel& f, const CausalLm& lm, const IdfTable& idf,
                               double alpha, double tau, int batch, Rng& rng) {
    const ObjectiveContext ctx = make_context(x, y, f, lm, idf, alpha, tau, batch);
    return objective_with_context(g, dist, ctx, rng);
}

namespace {

void mask_gradient(AdversarialDistribution& dist) {
    if (dist.logits.grad.empty()) return;
    const int v = dist.vocab();
    const int k = dist.length();
    for (int r = 0; r < v; ++r)
        for (int j = 0; j < k; ++j) {
            if (dist.row_forbidden[static_cast<std::size_t>(r)] ||
                dist.position_protected[static_cast<std::size_t>(j)])
                dist.logits.grad[static_cast<std::size_t>(r) * k + j] = 0.0;
        }
}

}  // namespace

OptimizeTrace optimize(AdversarialDistribution& dist, const AttackConfig& cfg,
                       const std::vector<int>& x, const std::vector<int>& y, const NmtModel& f,
                       const CausalLm& lm, const IdfTable& idf, Rng& rng) {
    cfg.validate();
    const ObjectiveContext ctx = make_context(x, y, f, lm, idf, cfg.alpha, cfg.tau, cfg.batch);
    Adam adam(cfg.lr);
    const std::vector<const Tensor*> params{&dist.logits};

    OptimizeTrace trace;
    trace.adv.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        Graph g;
        ObjectiveParts parts = objective_with_context(g, dist, ctx, rng);
        const double total = g.scalar_value(parts.total);
        if (!std::isfinite(total))
            throw DivergenceError("attack objective became non-finite at iteration " +
                                  std::to_string(it));
        g.backward(parts.total);
        mask_gradient(dist);
        adam.step(params);
        dist.logits.zero_grad();

        trace.adv.push_back(parts.adv_value);
        trace.nmt.push_back(-parts.adv_value);
        trace.sim.push_back(parts.sim_value);
        trace.total.push_back(total);
    }
    return trace;
}

std::vector<std::vector<int>> sample_candidates(const AdversarialDistribution& dist, int n,
                                                Rng& rng) {
    if (n < 1) throw ConfigError("sample_candidates needs n >= 1");
    const int k = dist.length();
    const int v = dist.vocab();
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int draw = 0; draw < n; ++draw) {
        std::vector<int> sentence(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            if (dist.position_protected[static_cast<std::size_t>(j)]) {
                sentence[static_cast<std::size_t>(j)] = dist.original[static_cast<std::size_t>(j)];
                continue;
            }
            // Gumbel-max: argmax of perturbed logits is a categorical draw
            int best = -1;
            double best_score = 0.0;
            for (int r = 0; r < v; ++r) {
                const double score = dist.logits.at(r, j) + rng.gumbel();
                if (dist.row_forbidden[static_cast<std::size_t>(r)] &&
                    r != dist.original[static_cast<std::size_t>(j)])
                    continue;
                if (best < 0 || score > best_score) {
                    best = r;
                    best_score = score;
                }
            }
            sentence[static_cast<std::size_t>(j)] = best;
        }
        out.push_back(std::move(sentence));
    }
    return out;
}

namespace {

int changed_tokens(const std::vector<int>& a, const std::vector<int>& b) {
    int n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++n;
    return n;
}

}  // namespace

int select_index(const std::vector<double>& scores,
                 const std::vector<std::vector<int>>& candidates, const std::vector<int>& x) {
    int best = 0;
    int best_changed = changed_tokens(candidates[0], x);
    for (int i = 1; i < static_cast<int>(candidates.size()); ++i) {
        const double score = scores[static_cast<std::size_t>(i)];
        const double incumbent = scores[static_cast<std::size_t>(best)];
        if (score > incumbent) continue;
        if (score < incumbent) {
            best = i;
            best_changed = changed_tokens(candidates[static_cast<std::size_t>(i)], x);
            continue;
        }
        const int changed = changed_tokens(candidates[static_cast<std::size_t>(i)], x);
        if (changed < best_changed) {
            best = i;
            best_changed = changed;
        }
    }
    return best;
}

SelectionResult select_best(const std::vector<std::vector<int>>& candidates,
                            const std::vector<int>& x, const NmtModel& f,
                            const std::vector<int>& y) {
    if (candidates.empty()) throw ConfigError("select_best: empty candidate list");
    SelectionResult res;
    res.bleu_scores.reserve(candidates.size());
    std::map<std::vector<int>, double> cache;
    for (const std::vector<int>& cand : candidates) {
        auto it = cache.find(cand);
        if (it == cache.end()) {
            const std::vector<int> translation = translate(f, cand, f.config.max_len);
            it = cache.emplace(cand, bleu(translation, y)).first;
        }
        res.bleu_scores.push_back(it->second);
    }
    res.unique_translated = static_cast<int>(cache.size());
    res.best_index = select_index(res.bleu_scores, candidates, x);
    return res;
}

namespace {

AttackResult run_attack(const std::vector<int>& x, const std::vector<int>& y,
                        const NmtModel& f_optimize, const NmtModel& f_select, const CausalLm& lm,
                        const IdfTable& idf, const AttackConfig& cfg, const Vocabulary& vocab) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    AttackResult result;
    result.original = x;
    result.reference = y;
    result.config = cfg;

    AdversarialDistribution dist = init_distribution(x, cfg.init_value, vocab, cfg.forbid_specials);
    Rng rng(cfg.seed);
    result.trace = optimize(dist, cfg, x, y, f_optimize, lm, idf, rng);
    result.candidates = sample_candidates(dist, cfg.n_samples, rng);

    SelectionResult sel = select_best(result.candidates, x, f_select, y);
    result.adversarial = result.candidates[static_cast<std::size_t>(sel.best_index)];
    result.candidate_bleu = std::move(sel.bleu_scores);
    result.unique_candidates = sel.unique_translated;
    result.queries = static_cast<int>(result.candidates.size());

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace

AttackResult attack_whitebox(const std::vector<int>& x, const std::vector<int>& y,
                             const NmtModel& f, const CausalLm& lm, const IdfTable& idf,
                             const AttackConfig& cfg, const Vocabulary& vocab) {
    return run_attack(x, y, f, f, lm, idf, cfg, vocab);
}

AttackResult attack_blackbox(const std::vector<int>& x, const std::vector<int>& y,
                             const NmtModel& f_ref, const CausalLm& lm, const IdfTable& idf,
                             const AttackConfig& cfg, const NmtModel& f_target,
                             const Vocabulary& vocab) {
    if (f_ref.config.vocab_size != f_target.config.vocab_size ||
        f_ref.config.vocab_size != vocab.size())
        throw ConfigError("black-box attack: reference, target and vocabulary sizes disagree (" +
                          std::to_string(f_ref.config.vocab_size) + ", " +
                          std::to_string(f_target.config.vocab_size) + ", " +
                          std::to_string(vocab.size()) + ")");
    return run_attack(x, y, f_ref, f_target, lm, idf, cfg, vocab);
}

std::vector<int> knn_baseline(const std::vector<int>& x, const std::vector<int>& y,
                              const NmtModel& f, int n_replace, const Vocabulary& vocab) {
    std::vector<int> content_positions;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!Vocabulary::is_special(x[i])) content_positions.push_back(static_cast<int>(i));
    if (n_replace < 0 || n_replace > static_cast<int>(content_positions.size()))
        throw ConfigError("knn baseline: n_replace " + std::to_string(n_replace) + " exceeds " +
                          std::to_string(content_positions.size()) + " content positions");
    if (n_replace == 0) return x;

    // gradient of the translation loss w.r.t. the one-hot input
    const int v = vocab.size();
    Tensor z({static_cast<int>(x.size()), v});
    for (std::size_t i = 0; i < x.size(); ++i) z.at(static_cast<int>(i), x[i]) = 1.0;
    z.set_requires_grad(true);
    {
        Graph g;
        g.backward(nmt_loss_soft(g, f, g.leaf(z), y));
    }

    std::vector<std::pair<double, int>> ranked;  // (-norm, position)
    for (int pos : content_positions) {
        double norm2 = 0.0;
        for (int r = 0; r < v; ++r) {
            const double gr = z.grad[static_cast<std::size_t>(pos) * v + r];
            norm2 += gr * gr;
        }
        ranked.emplace_back(-std::sqrt(norm2), pos);
    }
    std::sort(ranked.begin(), ranked.end());

    std::vector<int> out = x;
    const int d = f.config.d_model;
    for (int i = 0; i < n_replace; ++i) {
        const int pos = ranked[static_cast<std::size_t>(i)].second;
        const int token = x[static_cast<std::size_t>(pos)];
        const double* e_tok = f.embedding.data.data() + static_cast<std::size_t>(token) * d;
        double tok_norm = 0.0;
        for (int c = 0; c < d; ++c) tok_norm += e_tok[c] * e_tok[c];
        tok_norm = std::sqrt(tok_norm);

        int nearest = -1;
        double best_cos = 0.0;
        for (int u = Vocabulary::N_SPECIAL; u < v; ++u) {
            if (u == token) continue;
            const double* e_u = f.embedding.data.data() + static_cast<std::size_t>(u) * d;
            double dot = 0.0, u_norm = 0.0;
            for (int c = 0; c < d; ++c) {
                dot += e_tok[c] * e_u[c];
                u_norm += e_u[c] * e_u[c];
            }
            const double cos = dot / std::max(tok_norm * std::sqrt(u_norm), 1e-300);
            if (nearest < 0 || cos > best_cos) {
                nearest = u;
                best_cos = cos;
            }
        }
        out[static_cast<std::size_t>(pos)] = nearest;
    }
    return out;
}

std::vector<int> random_replacement_baseline(const std::vector<int>& x, int n_replace,
                                             const Vocabulary& vocab, Rng& rng) {
    std::vector<int> content_positions;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!Vocabulary::is_special(x[i])) content_positions.push_back(static_cast<int>(i));
    if (n_replace < 0 || n_replace > static_cast<int>(content_positions.size()))
        throw ConfigError("random baseline: n_replace " + std::to_string(n_replace) + " exceeds " +
                          std::to_string(content_positions.size()) + " content positions");
    // partial Fisher-Yates to pick distinct positions
    std::vector<int> pool = content_positions;
    std::vector<int> out = x;
    for (int i = 0; i < n_replace; ++i) {
        const int pick = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
        const int pos = pool[static_cast<std::size_t>(i)];
        int replacement = x[static_cast<std::size_t>(pos)];
        while (replacement == x[static_cast<std::size_t>(pos)])
            replacement = Vocabulary::N_SPECIAL + rng.uniform_int(vocab.n_content());
        out[static_cast<std::size_t>(pos)] = replacement;
    }
    return out;
}

}  // namespace nmtattack
