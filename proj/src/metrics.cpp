#include "nmtattack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace nmtattack {

namespace {

std::vector<int> strip_specials(const std::vector<int>& ids) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (int t : ids)
        if (!Vocabulary::is_special(t)) out.push_back(t);
    return out;
}

std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& tokens, int n) {
    std::map<std::vector<int>, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
        ++counts[std::vector<int>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
    return counts;
}

}  // namespace

double bleu(const std::vector<int>& hypothesis, const std::vector<int>& reference) {
    const std::vector<int> hyp = strip_specials(hypothesis);
    const std::vector<int> ref = strip_specials(reference);
    if (ref.empty()) throw InputError("bleu: reference is empty");
    if (hyp.empty()) return 0.0;

    const int max_order = std::min<int>(4, static_cast<int>(hyp.size()));
    double log_sum = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto hc = ngram_counts(hyp, n);
        const auto rc = ngram_counts(ref, n);
        long long matches = 0;
        long long total = 0;
        for (const auto& [gram, count] : hc) {
            total += count;
            auto it = rc.find(gram);
            if (it != rc.end()) matches += std::min(count, it->second);
        }
        if (n == 1) {
            if (matches == 0) return 0.0;
            log_sum += std::log(static_cast<double>(matches) / static_cast<double>(total));
        } else {
            log_sum += std::log(static_cast<double>(matches + 1) / static_cast<double>(total + 1));
        }
    }
    log_sum /= max_order;
    const double bp = hyp.size() >= ref.size()
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
    return 100.0 * bp * std::exp(log_sum);
}

namespace {

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    bool in_space = true;  // also trims leading spaces
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

bool pure_space(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' '; });
}

std::map<std::string, int> char_ngram_counts(const std::string& s, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(s.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
        std::string gram = s.substr(i, static_cast<std::size_t>(n));
        if (!pure_space(gram)) ++counts[std::move(gram)];
    }
    return counts;
}

}  // namespace

double chrf(const std::string& hypothesis, const std::string& reference) {
    const std::string hyp = collapse_whitespace(hypothesis);
    const std::string ref = collapse_whitespace(reference);
    if (ref.empty()) throw InputError("chrf: reference is empty");

    constexpr int kMaxOrder = 6;
    constexpr double kBeta2 = 4.0;  // beta = 2
    double sum_p = 0.0, sum_r = 0.0;
    int orders = 0;
    for (int n = 1; n <= kMaxOrder; ++n) {
        const auto hc = char_ngram_counts(hyp, n);
        const auto rc = char_ngram_counts(ref, n);
        long long h_total = 0, r_total = 0, matches = 0;
        for (const auto& [gram, count] : hc) {
            h_total += count;
            auto it = rc.find(gram);
            if (it != rc.end()) matches += std::min(count, it->second);
        }
        for (const auto& [gram, count] : rc) r_total += count;
        if (h_total == 0 && r_total == 0) continue;
        ++orders;
        if (h_total > 0) sum_p += static_cast<double>(matches) / static_cast<double>(h_total);
        if (r_total > 0) sum_r += static_cast<double>(matches) / static_cast<double>(r_total);
    }
    if (orders == 0) return 0.0;
    const double p = sum_p / orders;
    const double r = sum_r / orders;
    if (p + r == 0.0) return 0.0;
    return 100.0 * (1.0 + kBeta2) * p * r / (kBeta2 * p + r);
}

double ter(const std::vector<int>& x, const std::vector<int>& x_adv) {
    if (x.size() != x_adv.size())
        throw InputError("ter: length mismatch, " + std::to_string(x.size()) + " vs " +
                         std::to_string(x_adv.size()));
    int content = 0, changed = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (Vocabulary::is_special(x[i])) continue;
        ++content;
        if (x[i] != x_adv[i]) ++changed;
    }
    if (content == 0) return 0.0;
    return 100.0 * static_cast<double>(changed) / static_cast<double>(content);
}

double relative_decrease(double clean, double adv) {
    if (clean <= 0.0)
        throw UndefinedRatioError("relative decrease undefined for clean score " +
                                  std::to_string(clean));
    return (clean - adv) / clean;
}

double similarity(const std::vector<int>& x, const std::vector<int>& x_adv, const CausalLm& lm,
                  const IdfTable& idf) {
    if (x.size() != x_adv.size())
        throw InputError("similarity: length mismatch, " + std::to_string(x.size()) + " vs " +
                         std::to_string(x_adv.size()));
    Graph g;
    Var v_clean = lm_embed(g, lm, x);
    Var v_adv = lm_embed(g, lm, x_adv);
    Var cos = g.cosine_rows(v_clean, v_adv);
    const std::vector<double>& c = g.value(cos);

    double weighted = 0.0, total_w = 0.0, plain = 0.0;
    int content = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (Vocabulary::is_special(x[i])) continue;
        const double w = idf.weight(x[i]);
        weighted += w * c[i];
        total_w += w;
        plain += c[i];
        ++content;
    }
    if (content == 0) return 1.0;
    if (total_w > 0.0) return weighted / total_w;
    return plain / content;
}

double perplexity(const std::vector<int>& x, const CausalLm& lm) {
    return std::exp(lm_nll(lm, x));
}

MetricReport evaluate(const std::vector<int>& x, const std::vector<int>& x_adv,
                      const std::vector<int>& y, const NmtModel& f, const CausalLm& lm,
                      const IdfTable& idf, const Vocabulary& vocab) {
    MetricReport r;
    const int max_out = f.config.max_len;
    const std::vector<int> t_clean = translate(f, x, max_out);
    const std::vector<int> t_adv = translate(f, x_adv, max_out);

    r.bleu_clean = bleu(t_clean, y);
    r.bleu_adv = bleu(t_adv, y);
    const std::string ref_text = vocab.decode(y);
    r.chrf_clean = chrf(vocab.decode(t_clean), ref_text);
    r.chrf_adv = chrf(vocab.decode(t_adv), ref_text);

    r.rdbleu_defined = r.bleu_clean > 0.0;
    if (r.rdbleu_defined) r.rdbleu = relative_decrease(r.bleu_clean, r.bleu_adv);
    r.rdchrf_defined = r.chrf_clean > 0.0;
    if (r.rdchrf_defined) r.rdchrf = relative_decrease(r.chrf_clean, r.chrf_adv);
    r.success = r.bleu_adv < 0.5 * r.bleu_clean;

    r.similarity = similarity(x, x_adv, lm, idf);
    r.perplexity = perplexity(x_adv, lm);
    r.ter = ter(x, x_adv);
    return r;
}

CorpusSummary aggregate(const std::vector<MetricReport>& reports) {
    CorpusSummary s;
    s.sentences = static_cast<int>(reports.size());
    if (reports.empty()) return s;
    int successes = 0;
    double rdbleu_sum = 0.0, rdchrf_sum = 0.0;
    for (const MetricReport& r : reports) {
        if (r.rdbleu_defined) {
            rdbleu_sum += r.rdbleu;
            if (r.success) ++successes;
        } else {
            ++s.undefined_rdbleu;
        }
        if (r.rdchrf_defined)
            rdchrf_sum += r.rdchrf;
        else
            ++s.undefined_rdchrf;
        s.mean_similarity += r.similarity;
        s.mean_perplexity += r.perplexity;
        s.mean_ter += r.ter;
    }
    const int defined_bleu = s.sentences - s.undefined_rdbleu;
    const int defined_chrf = s.sentences - s.undefined_rdchrf;
    s.asr = defined_bleu > 0 ? 100.0 * successes / defined_bleu : 0.0;
    s.mean_rdbleu = defined_bleu > 0 ? rdbleu_sum / defined_bleu : 0.0;
    s.mean_rdchrf = defined_chrf > 0 ? rdchrf_sum / defined_chrf : 0.0;
    s.mean_similarity /= s.sentences;
    s.mean_perplexity /= s.sentences;
    s.mean_ter /= s.sentences;
    return s;
}

}  // namespace nmtattack
