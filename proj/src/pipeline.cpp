#include "nmtattack/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nmtattack/parallel.hpp"
#include "nmtattack/report.hpp"
#include "nmtattack/train.hpp"

namespace nmtattack {

namespace fs = std::filesystem;

namespace {

std::string join_path(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("failed while writing " + path);
}

}  // namespace

MakeCorpusResult cmd_make_corpus(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

    const SyntheticTask task = parse_task(cfg.corpus_task);
    Vocabulary vocab = Vocabulary::from_tokens(synthetic_wordlist(cfg.vocab_size - Vocabulary::N_SPECIAL));
    SyntheticCorpus sc = make_synthetic_corpus(task, cfg.n_train + cfg.n_test, cfg.len_min,
                                               cfg.len_max, vocab, cfg.seed);

    std::vector<std::string> train_src(sc.corpus.source_lines.begin(),
                                       sc.corpus.source_lines.begin() + cfg.n_train);
    std::vector<std::string> train_ref(sc.corpus.reference_lines.begin(),
                                       sc.corpus.reference_lines.begin() + cfg.n_train);
    std::vector<std::string> test_src(sc.corpus.source_lines.begin() + cfg.n_train,
                                      sc.corpus.source_lines.end());
    std::vector<std::string> test_ref(sc.corpus.reference_lines.begin() + cfg.n_train,
                                      sc.corpus.reference_lines.end());

    vocab.save(join_path(out_dir, corpus_files::kVocab));
    write_lines(join_path(out_dir, corpus_files::kTrainSrc), train_src);
    write_lines(join_path(out_dir, corpus_files::kTrainRef), train_ref);
    write_lines(join_path(out_dir, corpus_files::kTestSrc), test_src);
    write_lines(join_path(out_dir, corpus_files::kTestRef), test_ref);
    if (task == SyntheticTask::Cipher)
        save_permutation(join_path(out_dir, corpus_files::kPermutation), sc.permutation, vocab);

    return {cfg.n_train, cfg.n_test};
}

Workspace load_workspace(const RunConfig& cfg, const std::string& corpus_dir) {
    Workspace w;
    w.vocab = Vocabulary::load(join_path(corpus_dir, corpus_files::kVocab));
    const int max_len = std::min(cfg.nmt.max_len, cfg.lm.max_len);
    LoadedCorpus train = load_parallel_text(join_path(corpus_dir, corpus_files::kTrainSrc),
                                            join_path(corpus_dir, corpus_files::kTrainRef), w.vocab,
                                            max_len);
    LoadedCorpus test = load_parallel_text(join_path(corpus_dir, corpus_files::kTestSrc),
                                           join_path(corpus_dir, corpus_files::kTestRef), w.vocab,
                                           max_len);
    w.train = std::move(train.corpus);
    w.test = std::move(test.corpus);
    w.skipped_overlong = train.skipped_overlong + test.skipped_overlong;
    if (w.train.empty()) throw ConfigError("training corpus in " + corpus_dir + " is empty");
    w.idf = IdfTable::compute(w.train.source_documents(), w.vocab.size());
    return w;
}

namespace {

NmtModel load_nmt_for(const Workspace& w, const std::string& path) {
    NmtModel model = load_nmt_checkpoint(path);
    if (model.config.vocab_size != w.vocab.size())
        throw ConfigError("checkpoint " + path + " was trained with vocabulary size " +
                          std::to_string(model.config.vocab_size) + ", corpus has " +
                          std::to_string(w.vocab.size()));
    return model;
}

CausalLm load_lm_for(const Workspace& w, const std::string& path) {
    CausalLm model = load_lm_checkpoint(path);
    if (model.config.vocab_size != w.vocab.size())
        throw ConfigError("checkpoint " + path + " was trained with vocabulary size " +
                          std::to_string(model.config.vocab_size) + ", corpus has " +
                          std::to_string(w.vocab.size()));
    return model;
}

double holdout_bleu(const NmtModel& model, const Corpus& test) {
    if (test.empty()) return 0.0;
    double total = 0.0;
    for (const ParallelExample& ex : test.examples)
        total += bleu(translate(model, ex.source, model.config.max_len), ex.reference);
    return total / static_cast<double>(test.size());
}

double holdout_nll(const CausalLm& model, const Corpus& test) {
    if (test.empty()) return 0.0;
    double total = 0.0;
    for (const ParallelExample& ex : test.examples) total += lm_nll(model, ex.source);
    return total / static_cast<double>(test.size());
}

void write_curve_csv(const std::string& path, const RunConfig& cfg, const char* holdout_name,
                     const TrainResult& r) {
    std::ostringstream os;
    os << "# config_hash=" << cfg.hash() << "\n";
    os << "epoch,loss," << holdout_name << "\n";
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
        os << i << "," << r.loss_curve[i] << ",";
        if (i < r.holdout_curve.size()) os << r.holdout_curve[i];
        os << "\n";
    }
    write_text(path, os.str());
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& corpus_dir, const std::string& which,
                      const std::string& out_ckpt, const std::string& curve_csv,
                      const std::string& resume) {
    cfg.validate();
    if (which != "nmt" && which != "lm")
        throw ConfigError("train target must be 'nmt' or 'lm', got '" + which + "'");
    Workspace w = load_workspace(cfg, corpus_dir);

    TrainResult result;
    if (which == "nmt") {
        ModelConfig mc = cfg.nmt;
        mc.vocab_size = w.vocab.size();
        NmtModel model(mc);
        if (resume.empty()) {
            Rng init(Rng::split(cfg.seed, 0));
            model.init_parameters(init);
        } else {
            model = load_nmt_checkpoint(resume);
            if (!(model.config == mc))
                throw ConfigError("resume checkpoint " + resume + " does not match the configured model");
        }
        TrainOptions opt;
        opt.epochs = cfg.nmt_epochs;
        opt.lr = cfg.nmt_lr;
        opt.batch_size = cfg.batch_size;
        opt.seed = Rng::split(cfg.seed, 1);
        result.loss_curve = train_nmt(model, w.train, opt, [&](int, double) {
            result.holdout_curve.push_back(holdout_bleu(model, w.test));
        });
        save_checkpoint(out_ckpt, model);
        if (!curve_csv.empty()) write_curve_csv(curve_csv, cfg, "holdout_bleu", result);
    } else {
        ModelConfig mc = cfg.lm;
        mc.vocab_size = w.vocab.size();
        CausalLm model(mc);
        if (resume.empty()) {
            Rng init(Rng::split(cfg.seed, 2));
            model.init_parameters(init);
        } else {
            model = load_lm_checkpoint(resume);
            if (!(model.config == mc))
                throw ConfigError("resume checkpoint " + resume + " does not match the configured model");
        }
        TrainOptions opt;
        opt.epochs = cfg.lm_epochs;
        opt.lr = cfg.lm_lr;
        opt.batch_size = cfg.batch_size;
        opt.seed = Rng::split(cfg.seed, 3);
        result.loss_curve = train_lm(model, w.train.source_documents(), opt, [&](int, double) {
            result.holdout_curve.push_back(holdout_nll(model, w.test));
        });
        save_checkpoint(out_ckpt, model);
        if (!curve_csv.empty()) write_curve_csv(curve_csv, cfg, "holdout_nll", result);
    }
    return result;
}

namespace {

const Corpus& pick_split(const Workspace& w, const std::string& split) {
    if (split == "test") return w.test;
    if (split == "train") return w.train;
    throw ConfigError("unknown corpus split '" + split + "' (valid: train, test)");
}

int bounded_count(const Corpus& corpus, int limit) {
    const int n = static_cast<int>(corpus.size());
    return limit >= 0 ? std::min(limit, n) : n;
}

struct SentenceOutcome {
    AttackResult result;
    MetricReport report;
};

// Shared corpus loop for attack and transfer. The evaluation model is the
// one whose translations define success (the target in the black-box case).
std::vector<SentenceOutcome> run_corpus_attack(const RunConfig& cfg, const Workspace& w,
                                               const NmtModel& f_optimize,
                                               const NmtModel& f_evaluate, const CausalLm& lm,
                                               const Corpus& corpus, int count,
                                               const RunOptions& opt) {
    const bool blackbox = &f_optimize != &f_evaluate;
    std::vector<SentenceOutcome> outcomes(static_cast<std::size_t>(count));
    parallel_for(count, opt.threads, [&](int i) {
        const ParallelExample& ex = corpus.examples[static_cast<std::size_t>(i)];
        AttackConfig acfg = cfg.attack;
        acfg.seed = Rng::split(cfg.seed, static_cast<std::uint64_t>(i));
        AttackResult res =
            blackbox ? attack_blackbox(ex.source, ex.reference, f_optimize, lm, w.idf, acfg,
                                       f_evaluate, w.vocab)
                     : attack_whitebox(ex.source, ex.reference, f_optimize, lm, w.idf, acfg, w.vocab);
        MetricReport rep =
            evaluate(ex.source, res.adversarial, ex.reference, f_evaluate, lm, w.idf, w.vocab);
        outcomes[static_cast<std::size_t>(i)] = {std::move(res), std::move(rep)};
    });
    return outcomes;
}

CorpusSummary write_attack_outputs(const RunConfig& cfg, const Workspace& w,
                                   const std::vector<SentenceOutcome>& outcomes,
                                   const std::string& out_jsonl, bool with_queries) {
    const std::string config_hash = cfg.hash();
    std::ostringstream lines;
    std::vector<MetricReport> reports;
    reports.reserve(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        lines << attack_line_json(static_cast<int>(i), outcomes[i].result, outcomes[i].report,
                                  w.vocab, config_hash, cfg.seed)
                     .dump()
              << "\n";
        reports.push_back(outcomes[i].report);
    }
    write_text(out_jsonl, lines.str());

    CorpusSummary summary = aggregate(reports);
    nlohmann::ordered_json sj = summary_json(summary);
    sj["config_hash"] = config_hash;
    if (with_queries) {
        double mean_queries = 0.0;
        for (const SentenceOutcome& o : outcomes) mean_queries += o.result.queries;
        if (!outcomes.empty()) mean_queries /= static_cast<double>(outcomes.size());
        sj["mean_queries"] = mean_queries;
    }
    write_text(out_jsonl + ".summary.json", sj.dump(2) + "\n");
    return summary;
}

}  // namespace

CorpusSummary cmd_attack(const RunConfig& cfg, const std::string& nmt_ckpt,
                         const std::string& lm_ckpt, const std::string& corpus_dir,
                         const std::string& out_jsonl, const RunOptions& opt) {
    cfg.validate();
    Workspace w = load_workspace(cfg, corpus_dir);
    const NmtModel f = load_nmt_for(w, nmt_ckpt);
    const CausalLm lm = load_lm_for(w, lm_ckpt);
    const Corpus& corpus = pick_split(w, opt.split);
    const int count = bounded_count(corpus, opt.limit);
    auto outcomes = run_corpus_attack(cfg, w, f, f, lm, corpus, count, opt);
    return write_attack_outputs(cfg, w, outcomes, out_jsonl, /*with_queries=*/false);
}

CorpusSummary cmd_transfer(const RunConfig& cfg, const std::string& ref_ckpt,
                           const std::string& target_ckpt, const std::string& lm_ckpt,
                           const std::string& corpus_dir, const std::string& out_jsonl,
                           const RunOptions& opt) {
    cfg.validate();
    Workspace w = load_workspace(cfg, corpus_dir);
    const NmtModel f_ref = load_nmt_for(w, ref_ckpt);
    const NmtModel f_target = load_nmt_for(w, target_ckpt);
    const CausalLm lm = load_lm_for(w, lm_ckpt);
    const Corpus& corpus = pick_split(w, opt.split);
    const int count = bounded_count(corpus, opt.limit);
    auto outcomes = run_corpus_attack(cfg, w, f_ref, f_target, lm, corpus, count, opt);
    return write_attack_outputs(cfg, w, outcomes, out_jsonl, /*with_queries=*/true);
}

CorpusSummary cmd_baseline_knn(const RunConfig& cfg, const std::string& nmt_ckpt,
                               const std::string& lm_ckpt, const std::string& corpus_dir,
                               int n_replace, const std::string& out_jsonl, const RunOptions& opt) {
    cfg.validate();
    Workspace w = load_workspace(cfg, corpus_dir);
    const NmtModel f = load_nmt_for(w, nmt_ckpt);
    const CausalLm lm = load_lm_for(w, lm_ckpt);
    const Corpus& corpus = pick_split(w, opt.split);
    const int count = bounded_count(corpus, opt.limit);
    const std::string config_hash = cfg.hash();

    struct KnnOutcome {
        std::vector<int> adversarial;
        MetricReport report;
    };
    std::vector<KnnOutcome> outcomes(static_cast<std::size_t>(count));
    parallel_for(count, opt.threads, [&](int i) {
        const ParallelExample& ex = corpus.examples[static_cast<std::size_t>(i)];
        std::vector<int> adv = knn_baseline(ex.source, ex.reference, f, n_replace, w.vocab);
        MetricReport rep = evaluate(ex.source, adv, ex.reference, f, lm, w.idf, w.vocab);
        outcomes[static_cast<std::size_t>(i)] = {std::move(adv), std::move(rep)};
    });

    std::ostringstream lines;
    std::vector<MetricReport> reports;
    reports.reserve(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const ParallelExample& ex = corpus.examples[i];
        nlohmann::ordered_json j;
        j["index"] = static_cast<int>(i);
        j["original"] = w.vocab.decode(ex.source);
        j["adversarial"] = w.vocab.decode(outcomes[i].adversarial);
        j["metrics"] = metric_report_json(outcomes[i].report);
        j["n_replace"] = n_replace;
        j["config_hash"] = config_hash;
        j["seed"] = cfg.seed;
        lines << j.dump() << "\n";
        reports.push_back(outcomes[i].report);
    }
    write_text(out_jsonl, lines.str());

    CorpusSummary summary = aggregate(reports);
    nlohmann::ordered_json sj = summary_json(summary);
    sj["config_hash"] = config_hash;
    sj["n_replace"] = n_replace;
    write_text(out_jsonl + ".summary.json", sj.dump(2) + "\n");
    return summary;
}

std::vector<SweepRow> cmd_sweep_alpha(const RunConfig& cfg, const std::vector<double>& alphas,
                                      const std::string& nmt_ckpt, const std::string& lm_ckpt,
                                      const std::string& corpus_dir, const std::string& out_csv,
                                      const RunOptions& opt) {
    cfg.validate();
    if (alphas.empty()) throw ConfigError("sweep-alpha: the alpha list is empty");
    Workspace w = load_workspace(cfg, corpus_dir);
    const NmtModel f = load_nmt_for(w, nmt_ckpt);
    const CausalLm lm = load_lm_for(w, lm_ckpt);
    const Corpus& corpus = pick_split(w, opt.split);
    const int count = bounded_count(corpus, opt.limit);
    static constexpr double kThresholds[5] = {0.3, 0.4, 0.5, 0.6, 0.7};

    std::vector<SweepRow> rows;
    rows.reserve(alphas.size());
    for (double alpha : alphas) {
        RunConfig acfg = cfg;
        acfg.attack.alpha = alpha;
        auto outcomes = run_corpus_attack(acfg, w, f, f, lm, corpus, count, opt);
        SweepRow row;
        row.alpha = alpha;
        int defined = 0;
        int hits[5] = {0, 0, 0, 0, 0};
        for (const SentenceOutcome& o : outcomes) {
            row.mean_similarity += o.report.similarity;
            if (!o.report.rdbleu_defined) continue;
            ++defined;
            row.mean_rdbleu += o.report.rdbleu;
            for (int t = 0; t < 5; ++t)
                if (o.report.bleu_adv < kThresholds[t] * o.report.bleu_clean) ++hits[t];
        }
        if (!outcomes.empty()) row.mean_similarity /= static_cast<double>(outcomes.size());
        if (defined > 0) {
            row.mean_rdbleu /= defined;
            for (int t = 0; t < 5; ++t) row.asr_by_threshold[t] = 100.0 * hits[t] / defined;
        }
        rows.push_back(row);
    }

    std::ostringstream os;
    os << "# config_hash=" << cfg.hash() << "\n";
    os << "alpha,asr_0.3,asr_0.4,asr_0.5,asr_0.6,asr_0.7,mean_rdbleu,mean_similarity\n";
    for (const SweepRow& r : rows) {
        os << r.alpha;
        for (int t = 0; t < 5; ++t) os << "," << r.asr_by_threshold[t];
        os << "," << r.mean_rdbleu << "," << r.mean_similarity << "\n";
    }
    write_text(out_csv, os.str());
    return rows;
}

CorpusSummary cmd_report(const std::string& jsonl_path) {
    std::ifstream f(jsonl_path, std::ios::binary);
    if (!f) throw IoError("cannot read " + jsonl_path);
    std::vector<MetricReport> reports;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(jsonl_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        reports.push_back(metric_report_from_json(j.at("metrics")));
    }
    return aggregate(reports);
}

}  // namespace nmtattack
