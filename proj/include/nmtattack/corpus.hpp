#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmtattack/rng.hpp"
#include "nmtattack/vocab.hpp"

namespace nmtattack {

// One source/reference pair, both wrapped in BOS/EOS.
struct ParallelExample {
    std::vector<int> source;
    std::vector<int> reference;
};

struct Corpus {
    std::vector<ParallelExample> examples;
    std::vector<std::string> source_lines;
    std::vector<std::string> reference_lines;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
    std::vector<std::vector<int>> source_documents() const;
};

enum class SyntheticTask { Copy, Cipher };

SyntheticTask parse_task(const std::string& name);
std::string task_name(SyntheticTask task);

// Word list for a synthetic vocabulary: deterministic pseudo-words built
// from syllables, n_content of them.
std::vector<std::string> synthetic_wordlist(int n_content);

struct SyntheticCorpus {
    Corpus corpus;
    // permutation[id] = translated id; identity on specials. Identity map for
    // the copy task.
    std::vector<int> permutation;
};

// Sentences draw content tokens from a Zipf-like law so idf weights spread
// out. Cipher targets map every source token through a fixed permutation of
// the content ids; copy targets equal the source.
SyntheticCorpus make_synthetic_corpus(SyntheticTask task, int n_sentences, int len_min, int len_max,
                                      const Vocabulary& vocab, std::uint64_t seed);

struct LoadedCorpus {
    Corpus corpus;
    int skipped_overlong = 0;
};

// Line i of each file becomes example i; lines longer than max_len - 2
// tokens are skipped and counted.
LoadedCorpus load_parallel_text(const std::string& src_path, const std::string& ref_path,
                                const Vocabulary& vocab, int max_len);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

void save_permutation(const std::string& path, const std::vector<int>& permutation,
                      const Vocabulary& vocab);
std::vector<int> load_permutation(const std::string& path, const Vocabulary& vocab);

}  // namespace nmtattack
