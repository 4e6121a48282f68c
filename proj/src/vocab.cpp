#include "nmtattack/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace nmtattack {

std::vector<std::string> tokenize_text(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (unsigned char ch : text) {
        if (ch < 0x80 && std::isspace(ch)) {
            flush();
        } else if (ch < 0x80 && std::ispunct(ch)) {
            flush();
            out.emplace_back(1, static_cast<char>(ch));
        } else {
            word.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
        }
    }
    flush();
    return out;
}

void Vocabulary::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i) + N_SPECIAL;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& lines, int max_size) {
    if (max_size <= N_SPECIAL)
        throw ConfigError("vocabulary max_size must exceed " + std::to_string(N_SPECIAL));
    std::map<std::string, long long> freq;
    for (const std::string& line : lines)
        for (const std::string& tok : tokenize_text(line)) ++freq[tok];
    std::vector<std::pair<std::string, long long>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    const std::size_t limit = static_cast<std::size_t>(max_size - N_SPECIAL);
    for (const auto& [tok, count] : entries) {
        (void)count;
        if (v.tokens_.size() >= limit) break;
        v.tokens_.push_back(tok);
    }
    v.rebuild_index();
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.rebuild_index();
    if (v.index_.size() != v.tokens_.size())
        throw FormatError("vocabulary contains duplicate tokens");
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    static const std::string specials[N_SPECIAL] = {"<pad>", "<bos>", "<eos>", "<unk>"};
    if (id >= 0 && id < N_SPECIAL) return specials[id];
    const int idx = id - N_SPECIAL;
    if (idx < 0 || idx >= static_cast<int>(tokens_.size()))
        throw IndexError("vocabulary: token id " + std::to_string(id) + " out of range (size " +
                         std::to_string(size()) + ")");
    return tokens_[static_cast<std::size_t>(idx)];
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> ids{BOS};
    for (const std::string& tok : tokenize_text(text)) ids.push_back(id(tok));
    ids.push_back(EOS);
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int t : ids) {
        if (is_special(t)) continue;
        if (!out.empty()) out.push_back(' ');
        out += token(t);
    }
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write vocabulary to " + path);
    for (const std::string& tok : tokens_) f << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read vocabulary from " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

IdfTable IdfTable::compute(const std::vector<std::vector<int>>& documents, int vocab_size) {
    if (documents.empty()) throw ConfigError("idf: document list is empty");
    IdfTable t;
    t.n_docs_ = static_cast<long long>(documents.size());
    std::vector<long long> df(static_cast<std::size_t>(vocab_size), 0);
    std::set<int> seen;
    for (const std::vector<int>& doc : documents) {
        seen.clear();
        for (int id : doc) {
            if (id < 0 || id >= vocab_size)
                throw IndexError("idf: token id " + std::to_string(id) + " out of range");
            if (seen.insert(id).second) ++df[static_cast<std::size_t>(id)];
        }
    }
    t.weights_.resize(static_cast<std::size_t>(vocab_size));
    for (int i = 0; i < vocab_size; ++i) {
        t.weights_[static_cast<std::size_t>(i)] =
            Vocabulary::is_special(i)
                ? 0.0
                : std::log(static_cast<double>(t.n_docs_ + 1) / static_cast<double>(df[static_cast<std::size_t>(i)] + 1));
    }
    return t;
}

}  // namespace nmtattack
