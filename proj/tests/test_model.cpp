#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ss/crf.hpp"
#include "ss/model.hpp"

using namespace ss;

namespace {

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.vocab_size = 12;
    mc.word_dim = 6;
    mc.hidden = 4;
    mc.layers = 2;
    mc.dropout = 0.0;
    return mc;
}

EncodedSentence sent(std::vector<int> toks, std::vector<int> labels) {
    EncodedSentence e;
    e.tokens = std::move(toks);
    e.labels = std::move(labels);
    return e;
}

MaskMatrix ones_mask(const ParamSpace& s) {
    MaskMatrix m;
    m.task_id = "t";
    m.iteration = 1;
    m.bits.assign(s.prunable_count(), 1);
    return m;
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed") {
    auto mc = tiny_config();
    Rng r1(9), r2(9), r3(10);
    BaseNetwork a(mc, r1), b(mc, r2), c(mc, r3);
    CHECK(a.snapshot_values() == b.snapshot_values());

    double max_diff = 0;
    auto va = a.snapshot_values(), vc = c.snapshot_values();
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i].size(); ++j)
            max_diff = std::max(max_diff, std::fabs(va[i][j] - vc[i][j]));
    CHECK(max_diff > 0);
}

TEST_CASE("parameter count matches the analytic formula") {
    ModelConfig mc;
    mc.vocab_size = 100;
    mc.word_dim = 50;
    mc.hidden = 50;
    mc.layers = 1;
    Rng rng(1);
    BaseNetwork net(mc, rng);
    // embeddings V*d; per direction: wx d*4h + wh h*4h + b 4h
    const size_t emb = 100 * 50;
    const size_t per_dir = 50 * 200 + 50 * 200 + 200;
    CHECK(net.space().total_count() == emb + 2 * per_dir);
    CHECK(net.space().prunable_count() == 2 * per_dir);  // embeddings excluded
}

TEST_CASE("initialization ranges") {
    auto mc = tiny_config();
    Rng rng(2);
    BaseNetwork net(mc, rng);
    const double bound = 1.0 / std::sqrt(double(mc.hidden));
    for (const auto& blk : net.space().blocks()) {
        auto p = net.param(blk.name);
        if (blk.name == "word_emb") {
            for (double v : p->data) CHECK(std::fabs(v) <= 0.1);
        } else if (blk.name.ends_with("_b")) {
            // forget-gate slice initialized to 1, everything else 0
            int h = mc.hidden;
            for (int j = 0; j < 4 * h; ++j)
                CHECK(p->data[size_t(j)] == ((j >= h && j < 2 * h) ? 1.0 : 0.0));
        } else {
            for (double v : p->data) CHECK(std::fabs(v) <= bound);
        }
    }
}

TEST_CASE("all-ones mask forward equals unmasked forward bit-exactly") {
    auto mc = tiny_config();
    Rng rng(3);
    BaseNetwork net(mc, rng);
    Rng hr(4);
    auto head = make_head("t", HeadKind::Softmax, net.output_dim(), 3, hr);
    auto s = sent({1, 5, 2, 7}, {0, 1, 2, 0});

    auto view = make_mask_view(net.space(), ones_mask(net.space()));
    Rng d1(0), d2(0);
    Tape t1, t2;
    auto masked = forward_scores(t1, net, head, &view, s, false, d1);
    auto plain = forward_scores(t2, net, head, nullptr, s, false, d2);
    CHECK(masked->data == plain->data);
}

TEST_CASE("masked-out weights are inert") {
    auto mc = tiny_config();
    Rng rng(5);
    BaseNetwork net(mc, rng);
    Rng hr(6);
    auto head = make_head("t", HeadKind::Softmax, net.output_dim(), 3, hr);
    auto s = sent({2, 3, 4}, {0, 1, 2});

    auto mask = ones_mask(net.space());
    mask.bits[17] = 0;  // some prunable coordinate
    auto view = make_mask_view(net.space(), mask);

    // locate the block and in-block offset of prunable coordinate 17
    const ParamBlock* blk = nullptr;
    for (const auto& b : net.space().blocks())
        if (b.prunable && 17 >= b.offset_prunable && 17 < b.offset_prunable + b.size)
            blk = &b;
    REQUIRE(blk);
    auto p = net.param(blk->name);
    const size_t off = 17 - blk->offset_prunable;

    Rng d(0);
    p->data[off] = 1e9;
    Tape t1;
    auto huge = forward_scores(t1, net, head, &view, s, false, d);
    p->data[off] = 0.0;
    Tape t2;
    auto zero = forward_scores(t2, net, head, &view, s, false, d);
    CHECK(huge->data == zero->data);
}

TEST_CASE("masked coordinates receive exactly zero gradient") {
    auto mc = tiny_config();
    Rng rng(7);
    BaseNetwork net(mc, rng);
    Rng hr(8);
    auto head = make_head("t", HeadKind::Softmax, net.output_dim(), 3, hr);
    auto s = sent({1, 2, 3, 4, 5}, {0, 1, 2, 1, 0});

    auto mask = ones_mask(net.space());
    Rng flip(99);
    for (auto& b : mask.bits)
        if (flip.uniform() < 0.4) b = 0;
    auto view = make_mask_view(net.space(), mask);

    net.zero_grads();
    head.zero_grads();
    Rng d(0);
    Tape t;
    auto scores = forward_scores(t, net, head, &view, s, true, d);
    t.backward(t.softmax_cross_entropy(scores, s.labels));

    for (const auto& blk : net.space().blocks()) {
        if (!blk.prunable) continue;
        auto p = net.param(blk.name);
        for (size_t i = 0; i < blk.size; ++i)
            if (!mask.bits[blk.offset_prunable + i]) CHECK(p->grad[i] == 0.0);
    }
}

TEST_CASE("eval-mode forward is deterministic") {
    auto mc = tiny_config();
    mc.dropout = 0.5;  // must be ignored in eval mode
    Rng rng(11);
    BaseNetwork net(mc, rng);
    Rng hr(12);
    auto head = make_head("t", HeadKind::Softmax, net.output_dim(), 4, hr);
    auto s = sent({3, 1, 9}, {0, 0, 0});
    Rng d1(1), d2(2);
    Tape t1, t2;
    CHECK(forward_scores(t1, net, head, nullptr, s, false, d1)->data ==
          forward_scores(t2, net, head, nullptr, s, false, d2)->data);

    CHECK_THROWS_AS(
        [&] {
            Tape t;
            Rng d(0);
            forward_scores(t, net, head, nullptr, sent({}, {}), false, d);
        }(),
        InputError);
}

TEST_CASE("predict") {
    auto mc = tiny_config();
    Rng rng(13);
    BaseNetwork net(mc, rng);

    Rng hr(14);
    auto k1 = make_head("t", HeadKind::Softmax, net.output_dim(), 1, hr);
    CHECK(predict(net, k1, nullptr, sent({1, 2, 3}, {0, 0, 0})) ==
          std::vector<int>{0, 0, 0});

    auto fav = make_head("t", HeadKind::Softmax, net.output_dim(), 4, hr);
    std::fill(fav.w->data.begin(), fav.w->data.end(), 0.0);
    std::fill(fav.b->data.begin(), fav.b->data.end(), 0.0);
    fav.b->data[2] = 5.0;  // bias favors label 2 everywhere
    CHECK(predict(net, fav, nullptr, sent({4, 5}, {0, 0})) == std::vector<int>{2, 2});
}

TEST_CASE("crf head decodes with viterbi") {
    auto mc = tiny_config();
    Rng rng(15);
    BaseNetwork net(mc, rng);
    Rng hr(16);
    auto head = make_head("t", HeadKind::Crf, net.output_dim(), 3, hr);
    for (auto& v : head.trans->data) v = hr.uniform(-1.0, 1.0);
    auto s = sent({1, 2, 3}, {0, 0, 0});

    Rng d(0);
    Tape t;
    auto em = forward_scores(t, net, head, nullptr, s, false, d);
    auto want = crf::viterbi(*em, *head.trans).first;
    CHECK(predict(net, head, nullptr, s) == want);

    // brute force over all 27 length-3 sequences
    double best = -1e300;
    std::vector<int> best_seq;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                std::vector<int> seq = {a, b, c};
                Tape ts;
                auto em2 = tensor(em->shape, em->data, true);
                double sc = crf::sequence_score(ts, em2, seq, head.trans)->value();
                if (sc > best) {
                    best = sc;
                    best_seq = seq;
                }
            }
    CHECK(want == best_seq);
}

TEST_CASE("full model gradient with both head kinds") {
    ModelConfig mc;
    mc.vocab_size = 8;
    mc.word_dim = 3;
    mc.hidden = 2;
    mc.layers = 1;
    mc.dropout = 0.0;
    Rng rng(17);
    BaseNetwork net(mc, rng);
    auto s = sent({1, 4, 2}, {0, 2, 1});

    Rng hr(18);
    for (HeadKind kind : {HeadKind::Softmax, HeadKind::Crf}) {
        auto head = make_head("t", kind, net.output_dim(), 3, hr);
        if (kind == HeadKind::Crf)
            for (auto& v : head.trans->data) v = hr.uniform(-0.5, 0.5);
        std::vector<TensorPtr> params = net.params();
        for (auto& p : head.params()) params.push_back(p);
        double err = sstest::gradcheck(params, [&](Tape& t) {
            Rng d(0);
            auto scores = forward_scores(t, net, head, nullptr, s, false, d);
            if (kind == HeadKind::Crf) return crf::nll_loss(t, scores, s.labels, head.trans);
            return t.softmax_cross_entropy(scores, s.labels);
        });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("char-cnn path is differentiable and counted") {
    ModelConfig mc;
    mc.vocab_size = 8;
    mc.word_dim = 3;
    mc.hidden = 2;
    mc.layers = 1;
    mc.dropout = 0.0;
    mc.char_cnn = true;
    mc.char_vocab_size = 6;
    mc.char_dim = 2;
    mc.conv_width = 2;
    mc.conv_out = 3;
    Rng rng(19);
    BaseNetwork net(mc, rng);
    CHECK(net.space().find("char_emb") != nullptr);
    CHECK(net.space().find("conv_w") != nullptr);
    CHECK(!net.space().find("char_emb")->prunable);
    CHECK(net.space().find("conv_w")->prunable);

    EncodedSentence s;
    s.tokens = {1, 3};
    s.labels = {0, 1};
    s.chars = {{2, 4}, {1, 2, 3}};
    Rng hr(20);
    auto head = make_head("t", HeadKind::Softmax, net.output_dim(), 2, hr);
    std::vector<TensorPtr> params = net.params();
    for (auto& p : head.params()) params.push_back(p);
    double err = sstest::gradcheck(params, [&](Tape& t) {
        Rng d(0);
        auto scores = forward_scores(t, net, head, nullptr, s, false, d);
        return t.softmax_cross_entropy(scores, s.labels);
    });
    CHECK(err < 1e-4);
}

TEST_CASE("checkpoint round trip reproduces forward outputs") {
    auto mc = tiny_config();
    Rng rng(21);
    BaseNetwork net(mc, rng);
    Rng hr(22);
    std::vector<TaskHead> heads = {make_head("a", HeadKind::Softmax, net.output_dim(), 3, hr),
                                   make_head("b", HeadKind::Crf, net.output_dim(), 2, hr)};
    auto s = sent({1, 2, 3}, {0, 1, 2});
    Rng d(0);
    Tape t;
    auto before = forward_scores(t, net, heads[0], nullptr, s, false, d)->data;

    auto ckpt = snapshot(net, heads, "test", "rngstate");
    save_checkpoint(ckpt, "ckpt_roundtrip.bin", "{\"echo\":1}");

    // scramble, then restore from disk
    for (auto& p : net.params())
        for (auto& v : p->data) v += 1.0;
    std::string echo;
    auto loaded = load_checkpoint("ckpt_roundtrip.bin", &echo);
    CHECK(echo == "{\"echo\":1}");
    CHECK(loaded.tag == "test");
    CHECK(loaded.rng_state == "rngstate");
    restore(loaded, net, heads);

    Tape t2;
    Rng d2(0);
    CHECK(forward_scores(t2, net, heads[0], nullptr, s, false, d2)->data == before);
    std::remove("ckpt_roundtrip.bin");

    CHECK_THROWS_AS(load_checkpoint("no_such_file.bin"), FormatError);
}
