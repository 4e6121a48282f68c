#include "nmtattack/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nmtattack {

std::vector<std::vector<int>> Corpus::source_documents() const {
    std::vector<std::vector<int>> docs;
    docs.reserve(examples.size());
    for (const ParallelExample& ex : examples) docs.push_back(ex.source);
    return docs;
}

SyntheticTask parse_task(const std::string& name) {
    if (name == "copy") return SyntheticTask::Copy;
    if (name == "cipher") return SyntheticTask::Cipher;
    throw ConfigError("unknown corpus task '" + name + "' (valid: copy, cipher)");
}

std::string task_name(SyntheticTask task) {
    return task == SyntheticTask::Copy ? "copy" : "cipher";
}

std::vector<std::string> synthetic_wordlist(int n_content) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
    static const char* nuclei[] = {"a", "e", "i", "o", "u"};
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(n_content));
    for (int syllables = 1; static_cast<int>(words.size()) < n_content; ++syllables) {
        const long long combos = 1;
        (void)combos;
        // enumerate all words of `syllables` syllables in lexical order
        std::vector<int> idx(static_cast<std::size_t>(syllables) * 2, 0);
        const int n_on = static_cast<int>(std::size(onsets));
        const int n_nu = static_cast<int>(std::size(nuclei));
        while (static_cast<int>(words.size()) < n_content) {
            std::string w;
            for (int s = 0; s < syllables; ++s) {
                w += onsets[idx[static_cast<std::size_t>(2 * s)]];
                w += nuclei[idx[static_cast<std::size_t>(2 * s + 1)]];
            }
            words.push_back(w);
            // odometer increment
            int pos = 2 * syllables - 1;
            while (pos >= 0) {
                const int base = (pos % 2 == 0) ? n_on : n_nu;
                if (++idx[static_cast<std::size_t>(pos)] < base) break;
                idx[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;  // exhausted this syllable count
        }
    }
    return words;
}

SyntheticCorpus make_synthetic_corpus(SyntheticTask task, int n_sentences, int len_min, int len_max,
                                      const Vocabulary& vocab, std::uint64_t seed) {
    if (len_min < 1 || len_max < len_min)
        throw ConfigError("invalid sentence length range [" + std::to_string(len_min) + ", " +
                          std::to_string(len_max) + "]");
    if (vocab.n_content() < 2) throw ConfigError("synthetic corpus needs at least 2 content tokens");

    Rng rng(seed);
    const int n_content = vocab.n_content();

    SyntheticCorpus out;
    out.permutation.resize(static_cast<std::size_t>(vocab.size()));
    std::iota(out.permutation.begin(), out.permutation.end(), 0);
    if (task == SyntheticTask::Cipher) {
        // Fisher-Yates over content ids only
        for (int i = n_content - 1; i > 0; --i) {
            const int j = rng.uniform_int(i + 1);
            std::swap(out.permutation[static_cast<std::size_t>(Vocabulary::N_SPECIAL + i)],
                      out.permutation[static_cast<std::size_t>(Vocabulary::N_SPECIAL + j)]);
        }
    }

    // Mildly skewed token law: weight(rank) = 1 / (rank + 24)
    std::vector<double> cumulative(static_cast<std::size_t>(n_content));
    double total = 0.0;
    for (int r = 0; r < n_content; ++r) {
        total += 1.0 / (r + 24.0);
        cumulative[static_cast<std::size_t>(r)] = total;
    }

    auto draw_token = [&]() {
        const double u = rng.uniform() * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        const int rank = static_cast<int>(it - cumulative.begin());
        return Vocabulary::N_SPECIAL + std::min(rank, n_content - 1);
    };

    out.corpus.examples.reserve(static_cast<std::size_t>(n_sentences));
    for (int s = 0; s < n_sentences; ++s) {
        const int len = len_min + rng.uniform_int(len_max - len_min + 1);
        ParallelExample ex;
        ex.source.push_back(Vocabulary::BOS);
        for (int i = 0; i < len; ++i) ex.source.push_back(draw_token());
        ex.source.push_back(Vocabulary::EOS);
        ex.reference.reserve(ex.source.size());
        for (int id : ex.source) ex.reference.push_back(out.permutation[static_cast<std::size_t>(id)]);
        out.corpus.source_lines.push_back(vocab.decode(ex.source));
        out.corpus.reference_lines.push_back(vocab.decode(ex.reference));
        out.corpus.examples.push_back(std::move(ex));
    }
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const std::string& line : lines) f << line << '\n';
}

LoadedCorpus load_parallel_text(const std::string& src_path, const std::string& ref_path,
                                const Vocabulary& vocab, int max_len) {
    const std::vector<std::string> src = read_lines(src_path);
    const std::vector<std::string> ref = read_lines(ref_path);
    if (src.size() != ref.size())
        throw FormatError("parallel files disagree: " + std::to_string(src.size()) + " lines in " +
                          src_path + " vs " + std::to_string(ref.size()) + " in " + ref_path);
    LoadedCorpus out;
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::vector<int> s = vocab.encode(src[i]);
        std::vector<int> r = vocab.encode(ref[i]);
        if (static_cast<int>(s.size()) > max_len || static_cast<int>(r.size()) > max_len) {
            ++out.skipped_overlong;
            continue;
        }
        out.corpus.source_lines.push_back(src[i]);
        out.corpus.reference_lines.push_back(ref[i]);
        out.corpus.examples.push_back({std::move(s), std::move(r)});
    }
    return out;
}

void save_permutation(const std::string& path, const std::vector<int>& permutation,
                      const Vocabulary& vocab) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (int id = Vocabulary::N_SPECIAL; id < vocab.size(); ++id)
        f << vocab.token(id) << ' ' << vocab.token(permutation[static_cast<std::size_t>(id)]) << '\n';
}

std::vector<int> load_permutation(const std::string& path, const Vocabulary& vocab) {
    std::vector<int> perm(static_cast<std::size_t>(vocab.size()));
    std::iota(perm.begin(), perm.end(), 0);
    for (const std::string& line : read_lines(path)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string from, to;
        if (!(is >> from >> to)) throw FormatError("bad permutation line: '" + line + "'");
        perm[static_cast<std::size_t>(vocab.id(from))] = vocab.id(to);
    }
    return perm;
}

}  // namespace nmtattack
