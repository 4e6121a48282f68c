#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "nmtattack/pipeline.hpp"
#include "nmtattack/report.hpp"

using namespace nmtattack;

namespace {

std::vector<double> parse_alpha_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        if (!item.empty()) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("bad alpha value '" + item + "'");
            }
        }
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relaxed-optimization adversarial attacks against tiny NMT models"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    int limit = -1;
    int threads = 1;
    app.add_option("--config", config_path, "run configuration file (INI)");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "override the [run] seed");
    app.add_option("--limit", limit, "cap the number of sentences processed");
    app.add_option("--threads", threads, "worker threads for corpus runs")->check(CLI::PositiveNumber);

    std::string out_dir, corpus_dir, model_kind, out_path, curve_path, resume_path;
    std::string nmt_ckpt, lm_ckpt, ref_ckpt, target_ckpt, split = "test", alphas_text, in_path;
    int n_replace = 1;

    CLI::App* make_corpus = app.add_subcommand("make-corpus", "generate a synthetic parallel corpus");
    make_corpus->fallthrough();
    make_corpus->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train = app.add_subcommand("train", "train the translator or the language model");
    train->fallthrough();
    train->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train->add_option("--model", model_kind, "nmt or lm")->required();
    train->add_option("--out", out_path, "output checkpoint")->required();
    train->add_option("--curve", curve_path, "per-epoch CSV");
    train->add_option("--resume", resume_path, "checkpoint to continue from");

    CLI::App* attack = app.add_subcommand("attack", "white-box attack over a corpus");
    attack->fallthrough();
    attack->add_option("--nmt", nmt_ckpt, "translator checkpoint")->required();
    attack->add_option("--lm", lm_ckpt, "language model checkpoint")->required();
    attack->add_option("--corpus", corpus_dir, "corpus directory")->required();
    attack->add_option("--out", out_path, "JSONL results path")->required();
    attack->add_option("--split", split, "train or test (default test)");

    CLI::App* transfer = app.add_subcommand("transfer", "black-box attack via a reference model");
    transfer->fallthrough();
    transfer->add_option("--ref", ref_ckpt, "reference (gradient) checkpoint")->required();
    transfer->add_option("--target", target_ckpt, "target checkpoint")->required();
    transfer->add_option("--lm", lm_ckpt, "language model checkpoint")->required();
    transfer->add_option("--corpus", corpus_dir, "corpus directory")->required();
    transfer->add_option("--out", out_path, "JSONL results path")->required();
    transfer->add_option("--split", split, "train or test (default test)");

    CLI::App* sweep = app.add_subcommand("sweep-alpha", "attack the corpus across alpha values");
    sweep->fallthrough();
    sweep->add_option("--alphas", alphas_text, "comma-separated alpha values")->required();
    sweep->add_option("--nmt", nmt_ckpt, "translator checkpoint")->required();
    sweep->add_option("--lm", lm_ckpt, "language model checkpoint")->required();
    sweep->add_option("--corpus", corpus_dir, "corpus directory")->required();
    sweep->add_option("--out", out_path, "CSV output path")->required();
    sweep->add_option("--split", split, "train or test (default test)");

    CLI::App* knn = app.add_subcommand("baseline-knn", "gradient + nearest-embedding baseline");
    knn->fallthrough();
    knn->add_option("--nmt", nmt_ckpt, "translator checkpoint")->required();
    knn->add_option("--lm", lm_ckpt, "language model checkpoint")->required();
    knn->add_option("--corpus", corpus_dir, "corpus directory")->required();
    knn->add_option("--n-replace", n_replace, "tokens to replace per sentence")->required();
    knn->add_option("--out", out_path, "JSONL results path")->required();
    knn->add_option("--split", split, "train or test (default test)");

    CLI::App* report = app.add_subcommand("report", "re-aggregate a JSONL results file");
    report->fallthrough();
    report->add_option("--in", in_path, "JSONL results path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        RunOptions opt;
        opt.limit = limit;
        opt.threads = threads;
        opt.split = split;

        if (app.got_subcommand(make_corpus)) {
            MakeCorpusResult r = cmd_make_corpus(cfg, out_dir);
            std::cout << "wrote " << r.n_train << " train and " << r.n_test
                      << " test sentences to " << out_dir << "\n";
        } else if (app.got_subcommand(train)) {
            TrainResult r = cmd_train(cfg, corpus_dir, model_kind, out_path, curve_path, resume_path);
            std::cout << "trained " << model_kind << " for " << r.loss_curve.size() << " epochs";
            if (!r.loss_curve.empty()) {
                std::cout << ", final loss " << r.loss_curve.back();
                if (!r.holdout_curve.empty())
                    std::cout << ", final " << (model_kind == "nmt" ? "held-out BLEU " : "held-out NLL ")
                              << r.holdout_curve.back();
            }
            std::cout << "\ncheckpoint written to " << out_path << "\n";
        } else if (app.got_subcommand(attack)) {
            CorpusSummary s = cmd_attack(cfg, nmt_ckpt, lm_ckpt, corpus_dir, out_path, opt);
            std::cout << summary_table(s) << "results: " << out_path << "\n";
        } else if (app.got_subcommand(transfer)) {
            CorpusSummary s = cmd_transfer(cfg, ref_ckpt, target_ckpt, lm_ckpt, corpus_dir, out_path, opt);
            std::cout << summary_table(s) << "queries per sentence: " << cfg.attack.n_samples
                      << "\nresults: " << out_path << "\n";
        } else if (app.got_subcommand(sweep)) {
            auto rows = cmd_sweep_alpha(cfg, parse_alpha_list(alphas_text), nmt_ckpt, lm_ckpt,
                                        corpus_dir, out_path, opt);
            std::cout << "alpha  asr@0.5  rdbleu  similarity\n";
            for (const SweepRow& r : rows)
                std::cout << r.alpha << "  " << r.asr_by_threshold[2] << "  " << r.mean_rdbleu
                          << "  " << r.mean_similarity << "\n";
            std::cout << "sweep written to " << out_path << "\n";
        } else if (app.got_subcommand(knn)) {
            CorpusSummary s = cmd_baseline_knn(cfg, nmt_ckpt, lm_ckpt, corpus_dir, n_replace,
                                               out_path, opt);
            std::cout << summary_table(s) << "results: " << out_path << "\n";
        } else if (app.got_subcommand(report)) {
            CorpusSummary s = cmd_report(in_path);
            std::cout << summary_table(s) << summary_json(s).dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
