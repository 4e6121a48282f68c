#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmtattack/corpus.hpp"
#include "nmtattack/metrics.hpp"
#include "nmtattack/train.hpp"
#include "testutil.hpp"

using namespace nmtattack;

namespace {

// Independent brute-force BLEU: greedy position matching against used-flags
// instead of count maps, product-then-root instead of mean logs.
long long oracle_matches(const std::vector<int>& hyp, const std::vector<int>& ref, int n) {
    const int h = static_cast<int>(hyp.size()) - n + 1;
    const int r = static_cast<int>(ref.size()) - n + 1;
    if (h <= 0 || r <= 0) return 0;
    std::vector<bool> used(static_cast<std::size_t>(r), false);
    long long m = 0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < r; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            bool eq = true;
            for (int t = 0; t < n; ++t)
                if (hyp[static_cast<std::size_t>(i + t)] != ref[static_cast<std::size_t>(j + t)]) {
                    eq = false;
                    break;
                }
            if (eq) {
                used[static_cast<std::size_t>(j)] = true;
                ++m;
                break;
            }
        }
    }
    return m;
}

double oracle_bleu(const std::vector<int>& hyp, const std::vector<int>& ref) {
    if (hyp.empty()) return 0.0;
    const int max_order = std::min<int>(4, static_cast<int>(hyp.size()));
    double prod = 1.0;
    for (int n = 1; n <= max_order; ++n) {
        const long long m = oracle_matches(hyp, ref, n);
        const long long tot = static_cast<long long>(hyp.size()) - n + 1;
        const double p = n == 1 ? static_cast<double>(m) / static_cast<double>(tot)
                                : static_cast<double>(m + 1) / static_cast<double>(tot + 1);
        if (p == 0.0) return 0.0;
        prod *= p;
    }
    const double geo = std::pow(prod, 1.0 / max_order);
    const double bp = hyp.size() >= ref.size()
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
    return 100.0 * bp * geo;
}

std::vector<std::vector<int>> all_sequences(int max_len, int alphabet_lo, int alphabet_size) {
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> frontier{{}};
    for (int len = 1; len <= max_len; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& seq : frontier)
            for (int a = 0; a < alphabet_size; ++a) {
                std::vector<int> s = seq;
                s.push_back(alphabet_lo + a);
                next.push_back(s);
                out.push_back(std::move(s));
                s = next.back();
            }
        frontier = std::move(next);
    }
    return out;
}

}  // namespace

TEST_CASE("bleu identities") {
    const std::vector<int> a{4, 5, 6, 7, 8};
    CHECK(bleu(a, a) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(bleu({9, 10, 11}, {4, 5, 6}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(bleu(a, {1, 2}), InputError);  // specials-only reference

    // pinned by an independent hand-executed n-gram worksheet:
    // hyp "the cat sat down" vs ref "the cat sat on"
    const std::vector<int> hyp{20, 21, 22, 23};
    const std::vector<int> ref{20, 21, 22, 24};
    CHECK(bleu(hyp, ref) == doctest::Approx(65.80370064762462).epsilon(1e-9));
}

TEST_CASE("bleu is invariant to special-token framing") {
    const std::vector<int> hyp{4, 5, 6, 7};
    const std::vector<int> ref{4, 5, 6, 8};
    std::vector<int> framed_hyp{1};
    framed_hyp.insert(framed_hyp.end(), hyp.begin(), hyp.end());
    framed_hyp.push_back(2);
    std::vector<int> framed_ref{1};
    framed_ref.insert(framed_ref.end(), ref.begin(), ref.end());
    framed_ref.push_back(2);
    CHECK(bleu(framed_hyp, framed_ref) == doctest::Approx(bleu(hyp, ref)).epsilon(1e-12));
}

TEST_CASE("bleu equals independent brute-force counter on small instances") {
    auto seqs = all_sequences(4, 10, 3);
    for (const auto& hyp : seqs)
        for (const auto& ref : seqs) {
            const double fast = bleu(hyp, ref);
            const double slow = oracle_bleu(hyp, ref);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
        }
}

TEST_CASE("chrf identities and pinned value") {
    CHECK(chrf("abcd", "abcd") == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(chrf("xyz", "abc") == doctest::Approx(0.0));
    // pinned from a hand-computed character n-gram table
    CHECK(chrf("abcd", "abce") == doctest::Approx(47.91666666666667).epsilon(1e-9));
    CHECK(chrf("a  b", "a b") == doctest::Approx(100.0).epsilon(1e-9));  // whitespace collapsing
    CHECK_THROWS_AS(chrf("abc", "  "), InputError);
}

TEST_CASE("ter identities") {
    const std::vector<int> x{1, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 2};
    CHECK(ter(x, x) == doctest::Approx(0.0));
    std::vector<int> one = x;
    one[3] = 20;
    CHECK(ter(x, one) == doctest::Approx(10.0));
    std::vector<int> all = x;
    for (std::size_t i = 1; i + 1 < all.size(); ++i) all[i] += 30;
    CHECK(ter(x, all) == doctest::Approx(100.0));
    CHECK_THROWS_AS(ter(x, {1, 2}), InputError);
}

TEST_CASE("relative decrease") {
    CHECK(relative_decrease(40.0, 19.0) == doctest::Approx(0.525));
    CHECK(relative_decrease(40.0, 40.0) == doctest::Approx(0.0));
    CHECK(relative_decrease(40.0, 0.0) == doctest::Approx(1.0));
    CHECK(relative_decrease(40.0, 50.0) < 0.0);
    CHECK_THROWS_AS(relative_decrease(0.0, 10.0), UndefinedRatioError);
}

TEST_CASE("success flag is scale invariant") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const double clean = rng.uniform(1.0, 100.0);
        const double adv = rng.uniform(0.0, 100.0);
        const double k = rng.uniform(0.01, 50.0);
        CHECK((adv < 0.5 * clean) == (k * adv < 0.5 * (k * clean)));
    }
}

TEST_CASE("perplexity basics") {
    ModelConfig cfg;
    cfg.vocab_size = 8;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.ffn_width = 32;
    cfg.max_len = 16;
    Rng rng(2);
    CausalLm lm(cfg);
    lm.init_parameters(rng);
    std::fill(lm.embedding.data.begin(), lm.embedding.data.end(), 0.0);
    CHECK(perplexity({1, 5, 6, 2}, lm) == doctest::Approx(8.0).epsilon(1e-9));

    CausalLm lm2(cfg);
    lm2.init_parameters(rng);
    CHECK(perplexity({1, 5, 6, 2}, lm2) >= 1.0);
}

TEST_CASE("similarity respects idf weighting") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(20));
    // Documents: ids 4 and 8..10 appear in every document (idf 0), id 5 in
    // exactly one, ids 11..19 spread across a few documents each.
    std::vector<std::vector<int>> docs;
    for (int i = 0; i < 20; ++i) {
        std::vector<int> d{1, 4, 8, 9, 10, static_cast<int>(11 + (i % 9)), 2};
        if (i == 0) d.push_back(5);
        docs.push_back(d);
    }
    IdfTable idf = IdfTable::compute(docs, v.size());
    CHECK(idf.weight(4) == doctest::Approx(0.0));
    CHECK(idf.weight(8) == doctest::Approx(0.0));
    CHECK(idf.weight(5) > 1.0);

    ModelConfig cfg;
    cfg.vocab_size = v.size();
    cfg.d_model = 24;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.ffn_width = 48;
    cfg.max_len = 16;
    Rng rng(8);
    CausalLm lm(cfg);
    lm.init_parameters(rng);
    TrainOptions topt;
    topt.epochs = 6;
    topt.lr = 3e-3;
    topt.seed = 4;
    train_lm(lm, docs, topt);

    // Controlled two-sentence probe: identical contexts, the probed position
    // holds the high-idf token in one sentence and the zero-idf token in the
    // other; both get replaced by the same substitute.
    const std::vector<int> x_high{1, 8, 5, 9, 10, 2};
    const std::vector<int> x_zero{1, 8, 4, 9, 10, 2};
    CHECK(similarity(x_high, x_high, lm, idf) == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<int> rep_high = x_high;
    rep_high[2] = 12;
    std::vector<int> rep_zero = x_zero;
    rep_zero[2] = 12;
    const double s_high = similarity(x_high, rep_high, lm, idf);
    const double s_zero = similarity(x_zero, rep_zero, lm, idf);
    CHECK(s_high >= -1.0);
    CHECK(s_high <= 1.0);
    CHECK(s_high < s_zero);
}

TEST_CASE("evaluate and aggregate") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(16));
    SyntheticCorpus sc = make_synthetic_corpus(SyntheticTask::Copy, 256, 3, 6, v, 31);
    Rng init(15);
    ModelConfig cfg;
    cfg.vocab_size = v.size();
    cfg.d_model = 32;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.ffn_width = 64;
    cfg.max_len = 16;
    NmtModel f(cfg);
    f.init_parameters(init);
    TrainOptions opt;
    opt.epochs = 18;
    opt.lr = 3e-3;
    opt.seed = 2;
    train_nmt(f, sc.corpus, opt);

    CausalLm lm(cfg);
    lm.init_parameters(init);
    TrainOptions lopt;
    lopt.epochs = 6;
    lopt.lr = 3e-3;
    lopt.seed = 6;
    train_lm(lm, sc.corpus.source_documents(), lopt);
    IdfTable idf = IdfTable::compute(sc.corpus.source_documents(), v.size());

    const auto& ex = sc.corpus.examples[0];
    MetricReport same = evaluate(ex.source, ex.source, ex.reference, f, lm, idf, v);
    CHECK_FALSE(same.success);
    CHECK(same.rdbleu == doctest::Approx(0.0));
    CHECK(same.ter == doctest::Approx(0.0));
    CHECK(same.similarity == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(same.bleu_clean == doctest::Approx(same.bleu_adv));

    // success definition: 19 < 20 counts, "decreased by more than half"
    MetricReport a;
    a.bleu_clean = 40.0;
    a.bleu_adv = 19.0;
    a.rdbleu_defined = true;
    a.success = a.bleu_adv < 0.5 * a.bleu_clean;
    CHECK(a.success);
    MetricReport b = a;
    b.bleu_adv = 21.0;
    b.success = b.bleu_adv < 0.5 * b.bleu_clean;
    CHECK_FALSE(b.success);

    CorpusSummary s = aggregate({a, b});
    CHECK(s.asr == doctest::Approx(50.0));
    CHECK(s.sentences == 2);

    // undefined-ratio sentences leave the means and the ASR denominator
    MetricReport undef;
    undef.bleu_clean = 0.0;
    undef.rdbleu_defined = false;
    undef.rdchrf_defined = false;
    CorpusSummary s2 = aggregate({a, b, undef});
    CHECK(s2.asr == doctest::Approx(50.0));
    CHECK(s2.undefined_rdbleu == 1);
}
