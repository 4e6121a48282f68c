#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nmtattack/corpus.hpp"
#include "nmtattack/vocab.hpp"

using namespace nmtattack;

namespace {
std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "nmtattack_tok_test";
    std::filesystem::create_directories(dir);
    return dir;
}
}  // namespace

TEST_CASE("tokenize lowercases and isolates punctuation") {
    Vocabulary v = Vocabulary::from_tokens({"hello", ",", "world"});
    std::vector<int> ids = v.encode("Hello, world");
    REQUIRE(ids.size() == 5);
    CHECK(ids[0] == Vocabulary::BOS);
    CHECK(v.token(ids[1]) == "hello");
    CHECK(v.token(ids[2]) == ",");
    CHECK(v.token(ids[3]) == "world");
    CHECK(ids[4] == Vocabulary::EOS);

    CHECK(v.encode("") == std::vector<int>{Vocabulary::BOS, Vocabulary::EOS});
    CHECK(v.encode("xyzzy")[1] == Vocabulary::UNK);
}

TEST_CASE("tokenizer round trip and idempotence on corpus lines") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(60));
    SyntheticCorpus sc = make_synthetic_corpus(SyntheticTask::Copy, 100, 3, 10, v, 99);
    for (const std::string& line : sc.corpus.source_lines) {
        std::vector<int> ids = v.encode(line);
        const std::string detok = v.decode(ids);
        CHECK(detok == line);
        CHECK(v.encode(detok) == ids);
    }
}

TEST_CASE("vocabulary build is frequency-then-lexicographic") {
    std::vector<std::string> lines{"b a", "a c b", "c b"};
    // freq: a=2 b=3 c=2 -> order b, a, c
    Vocabulary v = Vocabulary::build(lines, 16);
    CHECK(v.id("b") == 4);
    CHECK(v.id("a") == 5);
    CHECK(v.id("c") == 6);

    Vocabulary v2 = Vocabulary::build(lines, 16);
    CHECK(v2.id("b") == v.id("b"));
    CHECK(v2.id("a") == v.id("a"));
}

TEST_CASE("idf formula and special handling") {
    // vocab ids: 4, 5, 6 content; 3 documents
    std::vector<std::vector<int>> docs{{1, 4, 5, 2}, {1, 4, 2}, {1, 4, 2}};
    IdfTable idf = IdfTable::compute(docs, 8);
    CHECK(idf.weight(4) == doctest::Approx(0.0));                    // in all N docs
    CHECK(idf.weight(5) == doctest::Approx(std::log(2.0)).epsilon(1e-9));  // 1 of 3 docs
    CHECK(idf.weight(6) == doctest::Approx(std::log(4.0)).epsilon(1e-9));  // absent
    CHECK(idf.weight(Vocabulary::BOS) == 0.0);
    CHECK(idf.weight(Vocabulary::UNK) == 0.0);
    CHECK_THROWS_AS(IdfTable::compute({}, 8), ConfigError);
}

TEST_CASE("idf monotonicity: rarer tokens weigh more") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(40));
    SyntheticCorpus sc = make_synthetic_corpus(SyntheticTask::Copy, 300, 4, 10, v, 5);
    IdfTable idf = IdfTable::compute(sc.corpus.source_documents(), v.size());
    std::vector<long long> df(static_cast<std::size_t>(v.size()), 0);
    for (const auto& ex : sc.corpus.examples) {
        std::vector<bool> seen(static_cast<std::size_t>(v.size()), false);
        for (int id : ex.source)
            if (!seen[static_cast<std::size_t>(id)]) {
                seen[static_cast<std::size_t>(id)] = true;
                ++df[static_cast<std::size_t>(id)];
            }
    }
    for (int a = Vocabulary::N_SPECIAL; a < v.size(); ++a)
        for (int b = a + 1; b < v.size(); ++b)
            if (df[static_cast<std::size_t>(a)] < df[static_cast<std::size_t>(b)])
                CHECK(idf.weight(a) > idf.weight(b));
}

TEST_CASE("synthetic corpus tasks") {
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(30));

    SyntheticCorpus copy = make_synthetic_corpus(SyntheticTask::Copy, 50, 3, 8, v, 7);
    for (const auto& ex : copy.corpus.examples) CHECK(ex.reference == ex.source);

    SyntheticCorpus cipher = make_synthetic_corpus(SyntheticTask::Cipher, 50, 3, 8, v, 7);
    for (const auto& ex : cipher.corpus.examples) {
        REQUIRE(ex.reference.size() == ex.source.size());
        for (std::size_t i = 0; i < ex.source.size(); ++i)
            CHECK(ex.reference[i] == cipher.permutation[static_cast<std::size_t>(ex.source[i])]);
    }

    SyntheticCorpus again = make_synthetic_corpus(SyntheticTask::Cipher, 50, 3, 8, v, 7);
    CHECK(again.permutation == cipher.permutation);
    REQUIRE(again.corpus.size() == cipher.corpus.size());
    for (std::size_t i = 0; i < again.corpus.size(); ++i) {
        CHECK(again.corpus.examples[i].source == cipher.corpus.examples[i].source);
        CHECK(again.corpus.examples[i].reference == cipher.corpus.examples[i].reference);
    }

    CHECK_THROWS_AS(make_synthetic_corpus(SyntheticTask::Copy, 5, 9, 3, v, 1), ConfigError);
    CHECK_THROWS_AS(parse_task("nonsense"), ConfigError);
}

TEST_CASE("parallel text loading") {
    auto dir = temp_dir();
    const auto src = (dir / "a.src").string();
    const auto ref = (dir / "a.ref").string();
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(30));

    write_lines(src, {"ba be", "bi bo", "bu da"});
    write_lines(ref, {"be ba", "bo bi", "da bu"});
    LoadedCorpus lc = load_parallel_text(src, ref, v, 32);
    CHECK(lc.corpus.size() == 3);
    CHECK(lc.skipped_overlong == 0);
    CHECK(lc.corpus.examples[0].source == v.encode("ba be"));

    write_lines(ref, {"be ba", "bo bi", "da bu", "extra"});
    CHECK_THROWS_AS(load_parallel_text(src, ref, v, 32), FormatError);

    write_lines(src, {"ba be", "ba ba ba ba ba ba ba ba ba ba"});
    write_lines(ref, {"be ba", "be be"});
    LoadedCorpus lc2 = load_parallel_text(src, ref, v, 8);
    CHECK(lc2.corpus.size() == 1);
    CHECK(lc2.skipped_overlong == 1);
}

TEST_CASE("vocabulary and permutation files round trip") {
    auto dir = temp_dir();
    Vocabulary v = Vocabulary::from_tokens(synthetic_wordlist(25));
    const auto vpath = (dir / "vocab.txt").string();
    v.save(vpath);
    Vocabulary v2 = Vocabulary::load(vpath);
    CHECK(v2.size() == v.size());
    for (int id = 4; id < v.size(); ++id) CHECK(v2.token(id) == v.token(id));

    SyntheticCorpus sc = make_synthetic_corpus(SyntheticTask::Cipher, 10, 3, 6, v, 3);
    const auto ppath = (dir / "perm.txt").string();
    save_permutation(ppath, sc.permutation, v);
    CHECK(load_permutation(ppath, v) == sc.permutation);
}
