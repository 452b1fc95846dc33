#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ss/eval.hpp"

using namespace ss;

TEST_CASE("token accuracy") {
    CHECK(token_accuracy({{1, 2, 3}}, {{1, 2, 3}}) == 1.0);
    CHECK(token_accuracy({{1, 2}, {3, 4}}, {{1, 2}, {3, 0}}) == 0.75);
    CHECK(token_accuracy({{1, 1}}, {{2, 2}}) == 0.0);
    CHECK_THROWS_AS(token_accuracy({{1}}, {{1, 2}}), AlignmentError);
}

TEST_CASE("extract spans") {
    auto bioes = extract_spans({"B-PER", "E-PER", "O", "S-LOC"}, Scheme::BIOES);
    CHECK(bioes == std::vector<Span>{{0, 1, "PER"}, {3, 3, "LOC"}});

    auto bio2 = extract_spans({"B-NP", "I-NP", "O", "B-VP"}, Scheme::BIO2);
    CHECK(bio2 == std::vector<Span>{{0, 1, "NP"}, {3, 3, "VP"}});

    CHECK(extract_spans({"O", "O", "O"}, Scheme::BIO2).empty());

    // BIO1: I- may open a span legally
    auto bio1 = extract_spans({"I-NP", "I-NP", "O"}, Scheme::BIO1);
    CHECK(bio1 == std::vector<Span>{{0, 1, "NP"}});

    int repairs = 0;
    auto rep = extract_spans({"O", "I-X", "I-X"}, Scheme::BIO2, &repairs);
    CHECK(rep == std::vector<Span>{{1, 2, "X"}});
    CHECK(repairs == 1);
}

TEST_CASE("span f1") {
    std::vector<Span> A = {{0, 1, "PER"}};
    std::vector<Span> B = {{3, 3, "LOC"}};
    auto prf = span_f1({{A[0]}}, {{A[0], B[0]}});
    CHECK(prf.precision == 1.0);
    CHECK(prf.recall == 0.5);
    CHECK(prf.f1 == doctest::Approx(2.0 / 3.0));

    auto perfect = span_f1({A, B}, {A, B});
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);

    auto degenerate = span_f1({A}, {{}});
    CHECK(degenerate.precision == 0.0);
    CHECK(degenerate.recall == 0.0);
    CHECK(degenerate.f1 == 0.0);
}

TEST_CASE("span f1 self-comparison is perfect for any span set") {
    std::vector<std::vector<Span>> x = {{{0, 2, "A"}, {4, 4, "B"}}, {}, {{1, 1, "A"}}};
    auto prf = span_f1(x, x);
    CHECK(prf.precision == 1.0);
    CHECK(prf.recall == 1.0);
    CHECK(prf.f1 == 1.0);
}

namespace {

ParamSpace tiny_space() {
    ParamSpace s;
    s.add_block("w", {2, 3}, true, 1);
    return s;
}

MaskMatrix mk(const std::string& task, uint32_t z, std::vector<uint8_t> bits) {
    MaskMatrix m;
    m.task_id = task;
    m.iteration = z;
    m.bits = std::move(bits);
    return m;
}

Candidate cand(const std::string& task, uint32_t z, std::vector<uint8_t> bits,
               double dev, const ParamSpace& s) {
    Candidate c;
    c.iteration = z;
    c.mask = mk(task, z, std::move(bits));
    c.dev_score = dev;
    c.sparsity_value = sparsity(c.mask, s);
    c.remaining = c.mask.kept();
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("analysis report") {
    auto s = tiny_space();
    CandidateLedger ledger;
    ledger.per_task["a"] = {cand("a", 1, {1, 1, 1, 1, 1, 1}, 0.5, s),
                            cand("a", 2, {1, 1, 1, 0, 1, 0}, 0.6, s)};
    ledger.per_task["b"] = {cand("b", 1, {1, 1, 1, 1, 1, 1}, 0.4, s),
                            cand("b", 2, {0, 1, 1, 1, 0, 1}, 0.45, s)};

    SUBCASE("hard-sharing selections give all-ones rows") {
        std::vector<MaskMatrix> sel = {mk("a", 1, {1, 1, 1, 1, 1, 1}),
                                       mk("b", 1, {1, 1, 1, 1, 1, 1})};
        analysis_report(ledger, sel, s, "report_hard");
        auto overlap = slurp("report_hard/overlap.csv");
        CHECK(overlap.find("1") != std::string::npos);
        auto sp = slurp("report_hard/sparsity.csv");
        CHECK(sp.find("remaining") != std::string::npos);  // convention in header
        std::filesystem::remove_all("report_hard");
    }

    SUBCASE("disjoint selections give zero pairwise overlap") {
        std::vector<MaskMatrix> sel = {mk("a", 2, {1, 1, 1, 0, 0, 0}),
                                       mk("b", 2, {0, 0, 0, 1, 1, 1})};
        analysis_report(ledger, sel, s, "report_disjoint");
        auto overlap = slurp("report_disjoint/overlap.csv");
        CHECK(overlap.find("0") != std::string::npos);
        std::filesystem::remove_all("report_disjoint");
    }

    SUBCASE("regeneration is byte-identical") {
        std::vector<MaskMatrix> sel = {mk("a", 2, {1, 1, 1, 0, 1, 0}),
                                       mk("b", 2, {0, 1, 1, 1, 0, 1})};
        analysis_report(ledger, sel, s, "report_a");
        analysis_report(ledger, sel, s, "report_b");
        for (const char* f : {"sparsity.csv", "overlap.csv", "curve.csv", "summary.txt"})
            CHECK(slurp(std::string("report_a/") + f) ==
                  slurp(std::string("report_b/") + f));
        std::filesystem::remove_all("report_a");
        std::filesystem::remove_all("report_b");
    }
}
