#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmtattack/attack.hpp"
#include "nmtattack/corpus.hpp"
#include "nmtattack/train.hpp"
#include "testutil.hpp"

using namespace nmtattack;

namespace {

struct Workbench {
    Vocabulary vocab;
    SyntheticCorpus corpus;
    NmtModel nmt;
    CausalLm lm;
    IdfTable idf;
};

ModelConfig bench_config(int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.d_model = 24;
    c.n_heads = 2;
    c.n_layers = 1;
    c.ffn_width = 48;
    c.max_len = 16;
    return c;
}

// Small trained cipher pair shared by the attack tests.
const Workbench& bench() {
    static Workbench w = [] {
        Workbench b;
        b.vocab = Vocabulary::from_tokens(synthetic_wordlist(20));
        b.corpus = make_synthetic_corpus(SyntheticTask::Cipher, 192, 4, 8, b.vocab, 77);
        Rng init(3);
        b.nmt = NmtModel(bench_config(b.vocab.size()));
        b.nmt.init_parameters(init);
        TrainOptions topt;
        topt.epochs = 14;
        topt.lr = 3e-3;
        topt.seed = 9;
        train_nmt(b.nmt, b.corpus.corpus, topt);
        b.lm = CausalLm(bench_config(b.vocab.size()));
        b.lm.init_parameters(init);
        TrainOptions lopt;
        lopt.epochs = 6;
        lopt.lr = 3e-3;
        lopt.seed = 11;
        train_lm(b.lm, b.corpus.corpus.source_documents(), lopt);
        b.idf = IdfTable::compute(b.corpus.corpus.source_documents(), b.vocab.size());
        return b;
    }();
    return w;
}

}  // namespace

TEST_CASE("init_distribution places the constant on original tokens") {
    Vocabulary v = Vocabulary::from_tokens({"aa", "bb", "cc", "dd"});  // ids 4..7, size 8
    const std::vector<int> x{1, 6, 7, 2};
    AdversarialDistribution d = init_distribution(x, 15.0, v);

    CHECK(d.logits.shape == Shape{8, 4});
    CHECK(d.logits.at(6, 1) == 15.0);
    CHECK(d.logits.at(7, 2) == 15.0);
    CHECK(d.logits.at(1, 0) == 15.0);  // BOS column
    CHECK(d.position_protected == std::vector<bool>{true, false, false, true});

    // masked special rows at content positions
    CHECK(d.logits.at(0, 1) == -1e9);
    CHECK(d.logits.at(3, 2) == -1e9);

    // saturated column softmax: e^15 / (e^15 + 3) over the 4 unmasked rows
    const auto pi = d.column_softmax(1);
    const double expected = std::exp(15.0) / (std::exp(15.0) + 3.0);
    CHECK(pi[6] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(pi[6] > 0.999999);

    CHECK(d.argmax_tokens() == x);
    CHECK_THROWS_AS(init_distribution(x, 0.0, v), ConfigError);
    CHECK_THROWS_AS(init_distribution(x, -3.0, v), ConfigError);
}

TEST_CASE("gumbel softmax with zero noise reduces to the column softmax") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(8));
    const std::vector<int> x{1, 5, 9, 2};
    AdversarialDistribution d = init_distribution(x, 2.0, v);
    Graph g;
    GumbelSample s = gumbel_softmax_sample_with_noise(
        g, d, 1.0, std::vector<double>(static_cast<std::size_t>(d.length() * d.vocab()), 0.0));
    const auto& z = g.value(s.z_rows);
    const int V = d.vocab();
    for (int j = 0; j < d.length(); ++j) {
        if (d.position_protected[static_cast<std::size_t>(j)]) {
            for (int r = 0; r < V; ++r)
                CHECK(z[static_cast<std::size_t>(j) * V + r] ==
                      doctest::Approx(r == x[static_cast<std::size_t>(j)] ? 1.0 : 0.0));
            continue;
        }
        const auto pi = d.column_softmax(j);
        for (int r = 0; r < V; ++r)
            CHECK(z[static_cast<std::size_t>(j) * V + r] == doctest::Approx(pi[r]).epsilon(1e-12));
    }
}

TEST_CASE("gumbel samples stay on the simplex") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(12));
    const std::vector<int> x{1, 5, 9, 11, 2};
    AdversarialDistribution d = init_distribution(x, 3.0, v);
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g;
        GumbelSample s = gumbel_softmax_sample(g, d, 0.7, rng);
        const auto& z = g.value(s.z_rows);
        const int V = d.vocab();
        for (int j = 0; j < d.length(); ++j) {
            double colsum = 0.0;
            for (int r = 0; r < V; ++r) {
                const double p = z[static_cast<std::size_t>(j) * V + r];
                CHECK(p >= 0.0);
                colsum += p;
            }
            CHECK(std::fabs(colsum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("low temperature concentrates the sample") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(12));
    const std::vector<int> x{1, 5, 9, 2};
    // shaped like the distributions the attack samples from: one dominant
    // entry per column with a clear margin, jittered
    AdversarialDistribution d = init_distribution(x, 15.0, v);
    Rng noise_rng(23);
    for (int r = 0; r < d.vocab(); ++r)
        for (int j = 0; j < d.length(); ++j)
            if (d.logits.at(r, j) > -1e8) d.logits.at(r, j) += noise_rng.uniform(-2.0, 2.0);

    Rng rng(5);
    int concentrated = 0, cells = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Graph g;
        GumbelSample s = gumbel_softmax_sample(g, d, 0.01, rng);
        const auto& z = g.value(s.z_rows);
        const int V = d.vocab();
        for (int j = 0; j < d.length(); ++j) {
            if (d.position_protected[static_cast<std::size_t>(j)]) continue;
            double mx = 0.0;
            for (int r = 0; r < V; ++r) mx = std::max(mx, z[static_cast<std::size_t>(j) * V + r]);
            ++cells;
            if (mx > 0.99) ++concentrated;
        }
    }
    CHECK(static_cast<double>(concentrated) / cells >= 0.99);
}

TEST_CASE("candidate sampling follows the column softmax law") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(8));
    const std::vector<int> x{1, 5, 9, 2};
    AdversarialDistribution d = init_distribution(x, 1.5, v);
    Rng spread(31);
    for (int r = 0; r < d.vocab(); ++r)
        for (int j = 0; j < d.length(); ++j)
            if (d.logits.at(r, j) > -1e8) d.logits.at(r, j) += spread.uniform(-0.5, 0.5);

    Rng rng(7);
    const int n = 20000;
    auto candidates = sample_candidates(d, n, rng);
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(d.length()),
                                         std::vector<int>(static_cast<std::size_t>(d.vocab()), 0));
    for (const auto& cand : candidates) {
        REQUIRE(cand.size() == x.size());
        for (int j = 0; j < d.length(); ++j)
            ++counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(cand[static_cast<std::size_t>(j)])];
    }
    for (int j = 0; j < d.length(); ++j) {
        if (d.position_protected[static_cast<std::size_t>(j)]) {
            CHECK(counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(x[static_cast<std::size_t>(j)])] == n);
            continue;
        }
        const auto pi = d.column_softmax(j);
        for (int r = 0; r < d.vocab(); ++r) {
            const double freq = static_cast<double>(counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]) / n;
            CHECK(std::fabs(freq - pi[r]) < 0.03);
        }
    }
}

TEST_CASE("saturated distribution samples are all the argmax sentence") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(12));
    const std::vector<int> x{1, 5, 9, 11, 2};
    AdversarialDistribution d = init_distribution(x, 30.0, v);
    Rng rng(3);
    for (const auto& cand : sample_candidates(d, 100, rng)) CHECK(cand == x);
}

TEST_CASE("candidates never contain specials at content positions") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(12));
    const std::vector<int> x{1, 5, 9, 11, 7, 2};
    AdversarialDistribution d = init_distribution(x, 0.5, v);  // near-uniform over content
    Rng rng(13);
    for (const auto& cand : sample_candidates(d, 500, rng)) {
        CHECK(cand.front() == Vocabulary::BOS);
        CHECK(cand.back() == Vocabulary::EOS);
        for (std::size_t i = 1; i + 1 < cand.size(); ++i) CHECK_FALSE(Vocabulary::is_special(cand[i]));
    }
}

TEST_CASE("adv_loss is exactly the negated translation loss") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[0];
    AdversarialDistribution d = init_distribution(ex.source, 4.0, b.vocab);
    Rng rng(19);
    Graph g;
    GumbelSample s = gumbel_softmax_sample(g, d, 1.0, rng);
    const double adv = g.scalar_value(adv_loss(g, s.z_rows, ex.reference, b.nmt));
    const double nmt = g.scalar_value(nmt_loss_soft(g, b.nmt, s.z_rows, ex.reference));
    CHECK(adv == doctest::Approx(-nmt).epsilon(1e-12));
}

TEST_CASE("sim_loss at the clean one-hots equals minus the idf mass") {
    const Workbench& b = bench();
    const auto& x = b.corpus.corpus.examples[1].source;
    AdversarialDistribution d = init_distribution(x, 5.0, b.vocab);
    Graph g;
    // exact one-hots: zero-noise sample at saturated init is close, but build
    // the exact matrix instead
    Tensor z({d.length(), d.vocab()});
    for (int j = 0; j < d.length(); ++j) z.at(j, x[static_cast<std::size_t>(j)]) = 1.0;
    Var zv = g.leaf(z);
    const double sim = g.scalar_value(sim_loss(g, zv, x, b.lm, b.idf));
    double idf_mass = 0.0;
    for (int id : x)
        if (!Vocabulary::is_special(id)) idf_mass += b.idf.weight(id);
    CHECK(sim == doctest::Approx(-idf_mass).epsilon(1e-9));

    // all-zero weights annihilate the loss
    IdfTable zero_idf = IdfTable::compute({{1, 2}}, b.vocab.size());
    bool all_zero = true;
    for (int id = 0; id < b.vocab.size(); ++id)
        if (zero_idf.weight(id) != 0.0) all_zero = false;
    if (!all_zero) {
        // construct genuinely zero table via documents containing every token
        std::vector<int> everything;
        for (int id = 0; id < b.vocab.size(); ++id) everything.push_back(id);
        zero_idf = IdfTable::compute({everything}, b.vocab.size());
    }
    Graph g2;
    Var zv2 = g2.leaf(z);
    CHECK(g2.scalar_value(sim_loss(g2, zv2, x, b.lm, zero_idf)) == doctest::Approx(0.0));
}

TEST_CASE("total objective composes the two losses") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[2];
    AdversarialDistribution d = init_distribution(ex.source, 3.0, b.vocab);

    // alpha = 0: pure adversarial, similarity branch never built
    Graph g;
    Rng rng(29);
    ObjectiveParts p0 = total_objective(g, d, ex.source, ex.reference, b.nmt, b.lm, b.idf,
                                        /*alpha=*/0.0, 1.0, 3, rng);
    CHECK(p0.sim_value == 0.0);
    CHECK(g.scalar_value(p0.total) == doctest::Approx(p0.adv_value).epsilon(1e-12));

    // batch = 1 with frozen noise equals adv + alpha * sim of that sample
    const double alpha = 2.5;
    Rng rng_a(41);
    Graph g1;
    ObjectiveParts p1 = total_objective(g1, d, ex.source, ex.reference, b.nmt, b.lm, b.idf, alpha,
                                        1.0, 1, rng_a);
    Rng rng_b(41);
    Graph g2;
    GumbelSample s = gumbel_softmax_sample(g2, d, 1.0, rng_b);
    const double adv = g2.scalar_value(adv_loss(g2, s.z_rows, ex.reference, b.nmt));
    const double sim = g2.scalar_value(sim_loss(g2, s.z_rows, ex.source, b.lm, b.idf));
    CHECK(g1.scalar_value(p1.total) == doctest::Approx(adv + alpha * sim).epsilon(1e-10));
}

TEST_CASE("batched objective has lower variance than single-sample") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[3];
    AdversarialDistribution d = init_distribution(ex.source, 2.0, b.vocab);
    Rng rng(57);
    auto variance_of = [&](int batch) {
        std::vector<double> vals;
        for (int trial = 0; trial < 60; ++trial) {
            Graph g;
            ObjectiveParts p =
                total_objective(g, d, ex.source, ex.reference, b.nmt, b.lm, b.idf, 0.0, 1.0, batch, rng);
            vals.push_back(g.scalar_value(p.total));
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        return var / static_cast<double>(vals.size());
    };
    CHECK(variance_of(5) < variance_of(1));
}

TEST_CASE("end-to-end gradient of the relaxed objective matches finite differences") {
    Rng setup(71);
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(8));  // |V| = 12
    ModelConfig cfg = bench_config(v.size());
    cfg.d_model = 16;
    NmtModel f(cfg);
    f.init_parameters(setup);
    CausalLm lm(cfg);
    lm.init_parameters(setup);
    std::vector<std::vector<int>> docs{{1, 5, 6, 2}, {1, 7, 8, 9, 2}, {1, 10, 11, 2}};
    IdfTable idf = IdfTable::compute(docs, v.size());

    const std::vector<int> x{1, 5, 8, 10, 2};
    const std::vector<int> y{1, 6, 9, 11, 2};
    AdversarialDistribution d = init_distribution(x, 2.0, v);

    const std::uint64_t frozen_seed = 1234;
    auto objective_value = [&](double alpha) {
        Rng rng(frozen_seed);
        Graph g;
        return g.scalar_value(
            total_objective(g, d, x, y, f, lm, idf, alpha, 1.0, 2, rng).total);
    };

    for (double alpha : {0.0, 1.7}) {
        d.logits.zero_grad();
        {
            Rng rng(frozen_seed);
            Graph g;
            g.backward(total_objective(g, d, x, y, f, lm, idf, alpha, 1.0, 2, rng).total);
        }
        const std::vector<double> analytic = d.logits.grad;
        const double h = 1e-5;
        double max_err = 0.0;
        for (std::size_t i = 0; i < d.logits.data.size(); ++i) {
            const double orig = d.logits.data[i];
            if (orig < -1e8) continue;  // masked entries: flat by construction
            d.logits.data[i] = orig + h;
            const double fp = objective_value(alpha);
            d.logits.data[i] = orig - h;
            const double fm = objective_value(alpha);
            d.logits.data[i] = orig;
            const double gn = (fp - fm) / (2.0 * h);
            max_err = std::max(max_err, std::fabs(analytic[i] - gn) / std::max(1.0, std::fabs(gn)));
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("adam first step moves by roughly lr times the gradient sign") {
    Tensor p({1}, {2.0});
    p.set_requires_grad(true);
    p.grad[0] = 0.37;
    Adam adam(0.3);
    adam.step({&p});
    CHECK(p.data[0] == doctest::Approx(2.0 - 0.3).epsilon(1e-6));

    Tensor q({1}, {-1.0});
    q.set_requires_grad(true);
    q.grad[0] = -5.2;
    Adam adam2(0.3);
    adam2.step({&q});
    CHECK(q.data[0] == doctest::Approx(-1.0 + 0.3).epsilon(1e-6));
}

TEST_CASE("optimize raises the translation loss on a trained model") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[4];
    AttackConfig cfg;
    cfg.alpha = 0.0;
    cfg.iterations = 40;
    cfg.seed = 5;
    AdversarialDistribution d = init_distribution(ex.source, cfg.init_value, b.vocab);
    Rng rng(cfg.seed);
    OptimizeTrace trace = optimize(d, cfg, ex.source, ex.reference, b.nmt, b.lm, b.idf, rng);
    REQUIRE(trace.nmt.size() == 40);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) {
        head += trace.nmt[static_cast<std::size_t>(i)];
        tail += trace.nmt[trace.nmt.size() - 1 - static_cast<std::size_t>(i)];
    }
    CHECK(tail > head);
    // stored both ways: L_f = -L_Adv
    for (std::size_t i = 0; i < trace.adv.size(); ++i)
        CHECK(trace.nmt[i] == doctest::Approx(-trace.adv[i]));

    // determinism of the trace
    AdversarialDistribution d2 = init_distribution(ex.source, cfg.init_value, b.vocab);
    Rng rng2(cfg.seed);
    OptimizeTrace trace2 = optimize(d2, cfg, ex.source, ex.reference, b.nmt, b.lm, b.idf, rng2);
    CHECK(trace.total == trace2.total);
    CHECK(d.logits.data == d2.logits.data);
}

TEST_CASE("select_index argmin and tie-breaks") {
    const std::vector<int> x{1, 5, 6, 7, 2};
    std::vector<std::vector<int>> cands{{1, 5, 6, 7, 2}, {1, 8, 6, 7, 2}, {1, 8, 9, 10, 2}};
    CHECK(select_index({30.0, 10.0, 50.0}, cands, x) == 1);
    // tie at the minimum: fewer changed tokens wins
    CHECK(select_index({10.0, 10.0, 10.0}, cands, x) == 0);
    CHECK(select_index({50.0, 10.0, 10.0}, cands, x) == 1);
    // full tie: earliest index
    CHECK(select_index({10.0, 10.0}, {cands[1], cands[1]}, x) == 0);
}

TEST_CASE("select_best translates identical candidates once") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[5];
    std::vector<std::vector<int>> cands{ex.source, ex.source, ex.source};
    SelectionResult sel = select_best(cands, ex.source, b.nmt, ex.reference);
    CHECK(sel.unique_translated == 1);
    CHECK(sel.best_index == 0);
    CHECK(sel.bleu_scores[0] == sel.bleu_scores[2]);
    CHECK_THROWS_AS(select_best({}, ex.source, b.nmt, ex.reference), ConfigError);
}

TEST_CASE("whitebox attack with huge alpha returns the clean sentence") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[6];
    AttackConfig cfg;
    cfg.alpha = 1e6;
    cfg.iterations = 20;
    cfg.n_samples = 40;
    cfg.seed = 21;
    AttackResult res = attack_whitebox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, b.vocab);
    CHECK(res.adversarial == ex.source);
    CHECK(res.adversarial.size() == ex.source.size());
    CHECK(res.queries == 40);
    CHECK(static_cast<int>(res.candidates.size()) == 40);
}

TEST_CASE("whitebox attack is deterministic given the seed") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[7];
    AttackConfig cfg;
    cfg.alpha = 1.0;
    cfg.iterations = 15;
    cfg.n_samples = 25;
    cfg.seed = 33;
    AttackResult r1 = attack_whitebox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, b.vocab);
    AttackResult r2 = attack_whitebox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, b.vocab);
    CHECK(r1.adversarial == r2.adversarial);
    CHECK(r1.candidate_bleu == r2.candidate_bleu);
    CHECK(r1.trace.total == r2.trace.total);
    CHECK(r1.adversarial.size() == ex.source.size());
}

TEST_CASE("blackbox attack with the reference as target matches whitebox") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[8];
    AttackConfig cfg;
    cfg.alpha = 1.0;
    cfg.iterations = 15;
    cfg.n_samples = 25;
    cfg.seed = 13;
    AttackResult white = attack_whitebox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, b.vocab);
    AttackResult black =
        attack_blackbox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, b.nmt, b.vocab);
    CHECK(black.adversarial == white.adversarial);
    CHECK(black.candidate_bleu == white.candidate_bleu);
    CHECK(black.queries == cfg.n_samples);

    // vocabulary mismatch is rejected
    ModelConfig other = bench_config(b.vocab.size() + 8);
    Rng rng(1);
    NmtModel stranger(other);
    stranger.init_parameters(rng);
    CHECK_THROWS_AS(
        attack_blackbox(ex.source, ex.reference, b.nmt, b.lm, b.idf, cfg, stranger, b.vocab),
        ConfigError);
}

TEST_CASE("knn baseline replaces exactly the requested positions") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[9];
    CHECK(knn_baseline(ex.source, ex.reference, b.nmt, 0, b.vocab) == ex.source);

    const int content = static_cast<int>(ex.source.size()) - 2;
    for (int n : {1, 2, content}) {
        std::vector<int> adv = knn_baseline(ex.source, ex.reference, b.nmt, n, b.vocab);
        REQUIRE(adv.size() == ex.source.size());
        CHECK(ter(ex.source, adv) == doctest::Approx(100.0 * n / content));
        for (std::size_t i = 1; i + 1 < adv.size(); ++i) CHECK_FALSE(Vocabulary::is_special(adv[i]));
    }
    CHECK_THROWS_AS(knn_baseline(ex.source, ex.reference, b.nmt, content + 1, b.vocab), ConfigError);
}

TEST_CASE("random replacement baseline hits the exact TER budget") {
    const Workbench& b = bench();
    const auto& ex = b.corpus.corpus.examples[10];
    Rng rng(99);
    const int content = static_cast<int>(ex.source.size()) - 2;
    std::vector<int> adv = random_replacement_baseline(ex.source, 2, b.vocab, rng);
    CHECK(ter(ex.source, adv) == doctest::Approx(100.0 * 2 / content));
    for (std::size_t i = 1; i + 1 < adv.size(); ++i) CHECK_FALSE(Vocabulary::is_special(adv[i]));
}

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AttackConfig{};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AttackConfig{};
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = AttackConfig{};
    cfg.n_samples = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
