#pragma once

#include <string>
#include <vector>

#include "nmtattack/model.hpp"
#include "nmtattack/vocab.hpp"

namespace nmtattack {

// Sentence BLEU-4 in [0, 100]: clipped n-gram matches, add-one smoothing on
// the n >= 2 precisions, standard brevity penalty, specials stripped first.
// Hypotheses shorter than 4 tokens use orders up to their length.
double bleu(const std::vector<int>& hypothesis, const std::vector<int>& reference);

// Character n-gram F-score (n = 1..6, beta = 2) in [0, 100]. Whitespace runs
// collapse to single spaces and n-grams made purely of spaces are excluded.
double chrf(const std::string& hypothesis, const std::string& reference);

// Same-length token error rate: percent of content positions that differ.
double ter(const std::vector<int>& x, const std::vector<int>& x_adv);

// (clean - adv) / clean; requires clean > 0.
double relative_decrease(double clean, double adv);

// idf-weighted mean cosine of LM contextual embeddings over non-special
// positions; falls back to the unweighted mean when all weights are zero.
double similarity(const std::vector<int>& x, const std::vector<int>& x_adv, const CausalLm& lm,
                  const IdfTable& idf);

double perplexity(const std::vector<int>& x, const CausalLm& lm);

struct MetricReport {
    double bleu_clean = 0.0;
    double bleu_adv = 0.0;
    double chrf_clean = 0.0;
    double chrf_adv = 0.0;
    double rdbleu = 0.0;
    double rdchrf = 0.0;
    bool rdbleu_defined = false;
    bool rdchrf_defined = false;
    bool success = false;  // bleu_adv < 0.5 * bleu_clean
    double similarity = 0.0;
    double perplexity = 0.0;
    double ter = 0.0;
};

MetricReport evaluate(const std::vector<int>& x, const std::vector<int>& x_adv,
                      const std::vector<int>& y, const NmtModel& f, const CausalLm& lm,
                      const IdfTable& idf, const Vocabulary& vocab);

struct CorpusSummary {
    double asr = 0.0;  // percent of successes among sentences with bleu_clean > 0
    double mean_rdbleu = 0.0;
    double mean_rdchrf = 0.0;
    double mean_similarity = 0.0;
    double mean_perplexity = 0.0;
    double mean_ter = 0.0;
    int sentences = 0;
    int undefined_rdbleu = 0;  // excluded from the rdbleu mean and the ASR denominator
    int undefined_rdchrf = 0;
};

CorpusSummary aggregate(const std::vector<MetricReport>& reports);

}  // namespace nmtattack
