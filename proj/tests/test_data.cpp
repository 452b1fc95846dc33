#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ss/data.hpp"
#include "ss/eval.hpp"

using namespace ss;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content) : path(name) {
        std::ofstream os(path);
        os << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("read_conll splits sentences on blank lines") {
    TempFile f("basic.conll", "the DT\ncat NN\n\nran VBD\n");
    auto sents = read_conll(f.path, 0, 1);
    REQUIRE(sents.size() == 2);
    CHECK(sents[0].tokens == std::vector<std::string>{"the", "cat"});
    CHECK(sents[0].labels == std::vector<std::string>{"DT", "NN"});
    CHECK(sents[1].tokens == std::vector<std::string>{"ran"});
}

TEST_CASE("read_conll edge cases") {
    TempFile empty("empty.conll", "");
    CHECK(read_conll(empty.path, 0, 1).empty());

    TempFile doc("doc.conll", "-DOCSTART- -X-\n\na B\nb I\n");
    CHECK(read_conll(doc.path, 0, 1).size() == 1);

    TempFile ragged("ragged.conll", "a B\nb\n");
    CHECK_THROWS_AS(read_conll(ragged.path, 0, 1), ParseError);
    try {
        read_conll(ragged.path, 0, 1);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
    }

    // label_column -1 selects the last column
    TempFile multi("multi.conll", "tok x y LBL\n");
    CHECK(read_conll(multi.path, 0, -1)[0].labels[0] == "LBL");
}

TEST_CASE("write_conll round trips") {
    std::vector<LabeledSentence> sents = {{{"a", "b"}, {"O", "B-X"}}, {{"c"}, {"O"}}};
    write_conll("wr.conll", sents);
    auto back = read_conll("wr.conll", 0, 1);
    REQUIRE(back.size() == 2);
    CHECK(back[0].tokens == sents[0].tokens);
    CHECK(back[0].labels == sents[0].labels);
    std::remove("wr.conll");
}

TEST_CASE("scheme conversion") {
    using V = std::vector<std::string>;
    CHECK(convert_scheme({"B-PER", "I-PER", "O"}, Scheme::BIO2, Scheme::BIOES) ==
          V{"B-PER", "E-PER", "O"});
    CHECK(convert_scheme({"B-LOC"}, Scheme::BIO2, Scheme::BIOES) == V{"S-LOC"});

    V well_formed = {"B-A", "I-A", "O", "B-B", "B-B", "I-B"};
    auto there = convert_scheme(well_formed, Scheme::BIO2, Scheme::BIOES);
    CHECK(convert_scheme(there, Scheme::BIOES, Scheme::BIO2) == well_formed);

    int repairs = 0;
    convert_scheme({"O", "I-X"}, Scheme::BIO2, Scheme::BIOES, &repairs);
    CHECK(repairs == 1);
}

TEST_CASE("scheme conversion preserves span sets") {
    std::vector<std::string> labels = {"B-A", "I-A", "I-A", "O", "B-B", "O", "B-A"};
    auto before = extract_spans(labels, Scheme::BIO2);
    auto bioes = convert_scheme(labels, Scheme::BIO2, Scheme::BIOES);
    auto after = extract_spans(bioes, Scheme::BIOES);
    CHECK(before == after);
}

TEST_CASE("position task generator") {
    TaskDataset base;
    base.task_id = "base";
    base.train = {{{"a", "b", "c", "d", "e"}, {"O", "O", "O", "O", "O"}}};
    base.dev = {{{"x"}, {"O"}}};
    auto pos = gen_position_task(base, 63);
    CHECK(pos.train[0].labels ==
          std::vector<std::string>{"0", "1", "2", "3", "4"});
    CHECK(pos.dev[0].labels == std::vector<std::string>{"0"});

    TaskDataset longs;
    longs.train = {{std::vector<std::string>(100, "w"), std::vector<std::string>(100, "O")}};
    auto capped = gen_position_task(longs, 63);
    for (size_t i = 63; i < 100; ++i) CHECK(capped.train[0].labels[i] == "63");

    CHECK_THROWS_AS(gen_position_task(base, 0), ConfigError);
}

TEST_CASE("position labels depend only on position") {
    TaskDataset base;
    base.train = {{{"aa", "bb"}, {"O", "O"}}, {{"zz", "qq"}, {"O", "O"}}};
    auto pos = gen_position_task(base, 63);
    CHECK(pos.train[0].labels == pos.train[1].labels);
}

TEST_CASE("pattern task generator") {
    auto [t1, t2] = gen_pattern_tasks(9, 60, 50, 0.5);
    CHECK(t1.train.size() == 50);
    CHECK(t1.dev.size() == 50);   // max(50, n/10)
    CHECK(t1.test.size() == 50);
    for (size_t i = 0; i < t1.train.size(); ++i) {
        CHECK(t1.train[i].tokens == t2.train[i].tokens);  // shared corpus
        CHECK(!t1.train[i].tokens.empty());
    }

    auto [r1, r2] = gen_pattern_tasks(9, 60, 50, 0.5);
    CHECK(r1.train[0].tokens == t1.train[0].tokens);
    CHECK(r1.train[0].labels == t1.train[0].labels);  // determinism

    auto [d1, d2] = gen_pattern_tasks(10, 60, 50, 0.5);
    CHECK(d1.train[0].tokens != t1.train[0].tokens);
}

TEST_CASE("relatedness one means identical span structure") {
    auto [t1, t2] = gen_pattern_tasks(11, 80, 60, 1.0);
    for (size_t i = 0; i < t1.train.size(); ++i) {
        auto s1 = extract_spans(t1.train[i].labels, Scheme::BIO2);
        auto s2 = extract_spans(t2.train[i].labels, Scheme::BIO2);
        REQUIRE(s1.size() == s2.size());
        for (size_t k = 0; k < s1.size(); ++k) {
            CHECK(s1[k].start == s2[k].start);  // identical up to type renaming
            CHECK(s1[k].end == s2[k].end);
        }
    }
}

TEST_CASE("vocab building") {
    std::vector<LabeledSentence> train = {{{"a", "a", "b", "a"}, {"O", "O", "O", "O"}}};
    auto v2 = build_vocab(train, 2);
    CHECK(v2.size() == 3);  // PAD, UNK, a
    CHECK(v2.lookup("a") >= 2);
    CHECK(v2.lookup("b") == Vocab::kUnk);

    auto v1 = build_vocab(train, 1);
    CHECK(v1.size() == 4);
    CHECK(v1.lookup("dev-only-token") == Vocab::kUnk);

    CHECK_THROWS_AS(build_vocab({}, 1), ConfigError);
}

TEST_CASE("vocab order is frequency then lexicographic") {
    std::vector<LabeledSentence> train = {
        {{"z", "z", "m", "a", "m"}, {"O", "O", "O", "O", "O"}}};
    auto v = build_vocab(train, 1);
    CHECK(v.items[2] == "m");  // ties between m(2) and z(2) resolve by name
    CHECK(v.items[3] == "z");
    CHECK(v.items[4] == "a");
}

TEST_CASE("sentence encoding") {
    std::vector<LabeledSentence> train = {{{"a", "b"}, {"X", "Y"}}};
    auto v = build_vocab(train, 1);
    auto ids = label_id_map({"X", "Y"});
    auto enc = encode_sentence(train[0], v, ids, nullptr, 0);
    CHECK(enc.tokens.size() == 2);
    CHECK(enc.labels == std::vector<int>{0, 1});

    CHECK_THROWS_AS(encode_sentence({{}, {}}, v, ids, nullptr, 0), InputError);
    CHECK_THROWS_AS(encode_sentence({{"a"}, {"Z"}}, v, ids, nullptr, 0), LabelError);

    auto cv = build_char_vocab(train);
    auto with_chars = encode_sentence(train[0], v, ids, &cv, 3);
    REQUIRE(with_chars.chars.size() == 2);
    CHECK(with_chars.chars[0].size() == 3);  // padded to the conv width
    CHECK(with_chars.chars[0][1] == Vocab::kPad);
}

TEST_CASE("scheme string conversions") {
    CHECK(scheme_from_string("BIO2") == Scheme::BIO2);
    CHECK(scheme_from_string("BIOES") == Scheme::BIOES);
    CHECK(scheme_to_string(Scheme::BIO1) == "BIO1");
    CHECK_THROWS_AS(scheme_from_string("nonsense"), ConfigError);
}
