#pragma once

#include <cstdint>
#include <vector>

#include "nmtattack/metrics.hpp"
#include "nmtattack/model.hpp"
#include "nmtattack/vocab.hpp"

namespace nmtattack {

struct AttackConfig {
    double alpha = 1.0;        // similarity loss weight
    double lr = 0.3;           // Adam learning rate on the logit matrix
    int iterations = 100;
    int batch = 5;             // Gumbel samples averaged per optimizer step
    double tau = 1.0;          // Gumbel-Softmax temperature
    double init_value = 15.0;  // positive logit placed on the original tokens
    int n_samples = 100;       // candidates drawn from the optimized distribution
    std::uint64_t seed = 0;
    bool forbid_specials = true;

    void validate() const;
};

// Per-position categorical logits over the vocabulary, stored token-major as
// [V x k]. Positions holding BOS/EOS/PAD are protected: their columns always
// decode to the original token and receive no updates. With forbid_specials,
// special-token rows are pushed to -1e9 everywhere else (except the original
// token's own entry, so a fresh distribution always decodes to x).
struct AdversarialDistribution {
    Tensor logits;  // [V x k], requires_grad
    std::vector<int> original;
    std::vector<bool> position_protected;  // size k
    std::vector<bool> row_forbidden;       // size V

    int length() const { return static_cast<int>(original.size()); }
    int vocab() const { return logits.shape[0]; }

    std::vector<double> column_softmax(int position) const;
    std::vector<int> argmax_tokens() const;
};

AdversarialDistribution init_distribution(const std::vector<int>& x, double init_value,
                                          const Vocabulary& vocab, bool forbid_specials = true);

struct GumbelSample {
    Var z_rows;                 // [k x V], each row on the probability simplex
    std::vector<double> noise;  // the Gumbel draw used, row-major [k x V]
};

// softmax((P + G) / tau) per position, differentiable w.r.t. the
// distribution with the noise held constant; protected positions come out as
// exact one-hot rows.
GumbelSample gumbel_softmax_sample(Graph& g, const AdversarialDistribution& dist, double tau,
                                   Rng& rng);
GumbelSample gumbel_softmax_sample_with_noise(Graph& g, const AdversarialDistribution& dist,
                                              double tau, std::vector<double> noise);

// L_Adv = -L_f(x', y)
Var adv_loss(Graph& g, Var z_rows, const std::vector<int>& y, const NmtModel& f);

// L_Sim = -sum_i w_i cos(v_i, v'_i) over non-special positions; the clean
// side embeddings are constants.
Var sim_loss(Graph& g, Var z_rows, const std::vector<int>& x, const CausalLm& lm,
             const IdfTable& idf);

struct ObjectiveParts {
    Var total;
    double adv_value = 0.0;  // mean L_Adv across the batch
    double sim_value = 0.0;  // mean L_Sim across the batch
};

// Monte Carlo estimate of the relaxed objective: mean over `batch` fresh
// Gumbel samples of adv_loss + alpha * sim_loss. With alpha == 0 the
// similarity branch is not built at all.
ObjectiveParts total_objective(Graph& g, const AdversarialDistribution& dist,
                               const std::vector<int>& x, const std::vector<int>& y,
                               const NmtModel& f, const CausalLm& lm, const IdfTable& idf,
                               double alpha, double tau, int batch, Rng& rng);

struct OptimizeTrace {
    std::vector<double> adv;    // L_Adv per iteration
    std::vector<double> nmt;    // L_f = -L_Adv, stored both ways
    std::vector<double> sim;    // L_Sim per iteration
    std::vector<double> total;
};

// Adam on the logit matrix only; protected columns and forbidden rows get
// their gradients zeroed before every step. Throws DivergenceError naming
// the iteration if the objective goes non-finite.
OptimizeTrace optimize(AdversarialDistribution& dist, const AttackConfig& cfg,
                       const std::vector<int>& x, const std::vector<int>& y, const NmtModel& f,
                       const CausalLm& lm, const IdfTable& idf, Rng& rng);

// Hard categorical draws from the per-position distributions via Gumbel-max;
// protected positions copy the original token, duplicates are kept.
std::vector<std::vector<int>> sample_candidates(const AdversarialDistribution& dist, int n,
                                                Rng& rng);

struct SelectionResult {
    int best_index = -1;
    std::vector<double> bleu_scores;
    int unique_translated = 0;  // distinct candidate sentences actually decoded
};

// Translates every candidate and returns the BLEU minimizer against the
// reference; ties break toward fewer changed tokens, then the earliest index.
SelectionResult select_best(const std::vector<std::vector<int>>& candidates,
                            const std::vector<int>& x, const NmtModel& f,
                            const std::vector<int>& y);

// The argmin-with-tie-breaks core of select_best over precomputed scores.
int select_index(const std::vector<double>& scores,
                 const std::vector<std::vector<int>>& candidates, const std::vector<int>& x);

struct AttackResult {
    std::vector<int> original;
    std::vector<int> reference;
    std::vector<int> adversarial;
    std::vector<std::vector<int>> candidates;
    std::vector<double> candidate_bleu;
    OptimizeTrace trace;
    AttackConfig config;
    double wall_seconds = 0.0;
    int queries = 0;            // candidates scored against the selection model
    int unique_candidates = 0;
};

AttackResult attack_whitebox(const std::vector<int>& x, const std::vector<int>& y,
                             const NmtModel& f, const CausalLm& lm, const IdfTable& idf,
                             const AttackConfig& cfg, const Vocabulary& vocab);

// Optimizes against f_ref, then scores the sampled candidates with
// f_target's translations; the query count equals n_samples.
AttackResult attack_blackbox(const std::vector<int>& x, const std::vector<int>& y,
                             const NmtModel& f_ref, const CausalLm& lm, const IdfTable& idf,
                             const AttackConfig& cfg, const NmtModel& f_target,
                             const Vocabulary& vocab);

// Gradient-ranked positions, each replaced by its nearest non-special
// neighbor in the NMT embedding space (cosine distance, excluding itself).
std::vector<int> knn_baseline(const std::vector<int>& x, const std::vector<int>& y,
                              const NmtModel& f, int n_replace, const Vocabulary& vocab);

// Replaces n_replace random distinct content positions with random
// non-special tokens different from the originals.
std::vector<int> random_replacement_baseline(const std::vector<int>& x, int n_replace,
                                             const Vocabulary& vocab, Rng& rng);

}  // namespace nmtattack
