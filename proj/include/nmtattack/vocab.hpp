#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "nmtattack/errors.hpp"

namespace nmtattack {

// Lowercases, isolates ASCII punctuation as single-character tokens, and
// splits on whitespace. Bytes >= 0x80 pass through as word characters.
std::vector<std::string> tokenize_text(const std::string& text);

// Token <-> id map shared by the NMT model and the language model.
// Ids 0..3 are reserved: PAD, BOS, EOS, UNK.
class Vocabulary {
  public:
    static constexpr int PAD = 0;
    static constexpr int BOS = 1;
    static constexpr int EOS = 2;
    static constexpr int UNK = 3;
    static constexpr int N_SPECIAL = 4;

    Vocabulary() = default;

    // Frequency-then-lexicographic assignment over tokenized lines; at most
    // max_size ids total (including the four specials).
    static Vocabulary build(const std::vector<std::string>& lines, int max_size);

    // Content tokens in id order (id = position + 4).
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()) + N_SPECIAL; }
    int n_content() const { return static_cast<int>(tokens_.size()); }

    int id(const std::string& token) const;  // UNK when unknown
    const std::string& token(int id) const;
    static bool is_special(int id) { return id >= 0 && id < N_SPECIAL; }

    // tokenize + BOS/EOS wrapping
    std::vector<int> encode(const std::string& text) const;
    // drops specials, joins with single spaces
    std::string decode(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;

    void rebuild_index();
};

// Per-token inverse document frequency weights; specials are pinned to 0.
class IdfTable {
  public:
    IdfTable() = default;

    // w_i = ln((N + 1) / (df_i + 1)) over token-id documents.
    static IdfTable compute(const std::vector<std::vector<int>>& documents, int vocab_size);

    double weight(int id) const {
        if (id < 0 || id >= static_cast<int>(weights_.size()))
            throw IndexError("idf weight: id " + std::to_string(id) + " out of range");
        return weights_[static_cast<std::size_t>(id)];
    }
    long long document_count() const { return n_docs_; }
    int size() const { return static_cast<int>(weights_.size()); }

  private:
    std::vector<double> weights_;
    long long n_docs_ = 0;
};

}  // namespace nmtattack
