#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "nmtattack/checkpoint.hpp"
#include "nmtattack/config.hpp"
#include "nmtattack/corpus.hpp"
#include "nmtattack/metrics.hpp"

namespace nmtattack {

// File names inside a corpus directory.
namespace corpus_files {
inline constexpr const char* kTrainSrc = "train.src";
inline constexpr const char* kTrainRef = "train.ref";
inline constexpr const char* kTestSrc = "test.src";
inline constexpr const char* kTestRef = "test.ref";
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kPermutation = "permutation.txt";
}  // namespace corpus_files

struct MakeCorpusResult {
    int n_train = 0;
    int n_test = 0;
};

MakeCorpusResult cmd_make_corpus(const RunConfig& cfg, const std::string& out_dir);

struct Workspace {
    Vocabulary vocab;
    Corpus train;
    Corpus test;
    IdfTable idf;  // over training source sentences
    int skipped_overlong = 0;
};

Workspace load_workspace(const RunConfig& cfg, const std::string& corpus_dir);

struct TrainResult {
    std::vector<double> loss_curve;
    std::vector<double> holdout_curve;  // held-out BLEU (nmt) or NLL (lm) per epoch
};

// which is "nmt" or "lm". With a non-empty resume path, training continues
// from that checkpoint instead of a fresh initialization.
TrainResult cmd_train(const RunConfig& cfg, const std::string& corpus_dir, const std::string& which,
                      const std::string& out_ckpt, const std::string& curve_csv = "",
                      const std::string& resume = "");

struct RunOptions {
    int limit = -1;  // at most this many sentences (< 0: all)
    int threads = 1;
    std::string split = "test";  // which corpus side to attack
};

// Runs the white-box attack across the corpus: one JSONL line per sentence,
// a summary JSON next to the output, returns the aggregate.
CorpusSummary cmd_attack(const RunConfig& cfg, const std::string& nmt_ckpt,
                         const std::string& lm_ckpt, const std::string& corpus_dir,
                         const std::string& out_jsonl, const RunOptions& opt = {});

CorpusSummary cmd_transfer(const RunConfig& cfg, const std::string& ref_ckpt,
                           const std::string& target_ckpt, const std::string& lm_ckpt,
                           const std::string& corpus_dir, const std::string& out_jsonl,
                           const RunOptions& opt = {});

CorpusSummary cmd_baseline_knn(const RunConfig& cfg, const std::string& nmt_ckpt,
                               const std::string& lm_ckpt, const std::string& corpus_dir,
                               int n_replace, const std::string& out_jsonl,
                               const RunOptions& opt = {});

struct SweepRow {
    double alpha = 0.0;
    double asr_by_threshold[5] = {0, 0, 0, 0, 0};  // thresholds 0.3, 0.4, 0.5, 0.6, 0.7
    double mean_rdbleu = 0.0;
    double mean_similarity = 0.0;
};

std::vector<SweepRow> cmd_sweep_alpha(const RunConfig& cfg, const std::vector<double>& alphas,
                                      const std::string& nmt_ckpt, const std::string& lm_ckpt,
                                      const std::string& corpus_dir, const std::string& out_csv,
                                      const RunOptions& opt = {});

// Re-aggregates a JSONL results file.
CorpusSummary cmd_report(const std::string& jsonl_path);

}  // namespace nmtattack
