#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ss/tensor.hpp"

using namespace ss;
using sstest::gradcheck;

namespace {

TensorPtr random_tensor(std::vector<int> shape, Rng& rng, bool grad = true) {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    return tensor(std::move(shape), std::move(data), grad);
}

}  // namespace

TEST_CASE("matmul values") {
    Tape t;
    auto eye = tensor({2, 2}, {1, 0, 0, 1});
    auto v = tensor({2, 1}, {3, 4});
    auto r = t.matmul(eye, v);
    CHECK(r->data == std::vector<double>{3, 4});

    auto a = tensor({1, 2}, {1, 2});
    auto z = tensor({2, 1}, {0, 0});
    CHECK(t.matmul(a, z)->data == std::vector<double>{0});

    CHECK_THROWS_AS(t.matmul(eye, tensor({3, 1}, {1, 2, 3})), DimError);
}

TEST_CASE("matmul gradient") {
    Rng rng(42);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    double err = gradcheck({a, b}, [&](Tape& t) { return t.sum(t.matmul(a, b)); });
    CHECK(err < 1e-6);
}

TEST_CASE("mask_mul semantics") {
    Tape t;
    auto x = tensor({1, 2}, {5.0, -2.0}, true);
    auto m = tensor({1, 2}, {1, 0});
    auto r = t.mask_mul(x, m);
    CHECK(r->data == std::vector<double>{5.0, 0.0});

    x->zero_grad();
    t.backward(t.sum(r));
    CHECK(x->grad == std::vector<double>{1.0, 0.0});
    CHECK(m->grad.empty());  // mask operand receives no gradient
}

TEST_CASE("mask_mul with all-ones mask is the identity") {
    Rng rng(7);
    auto x = random_tensor({3, 3}, rng);
    auto ones = tensor({3, 3}, std::vector<double>(9, 1.0));
    Tape t;
    auto masked = t.mask_mul(x, ones);
    CHECK(masked->data == x->data);
    x->zero_grad();
    t.backward(t.sum(masked));
    for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("pointwise values and gradients") {
    Tape t;
    auto z = tensor({1, 1}, {0.0}, true);
    auto th = t.tanh(z);
    CHECK(th->value() == 0.0);
    z->zero_grad();
    t.backward(th);
    CHECK(z->grad[0] == 1.0);

    Rng rng(3);
    auto x = random_tensor({1, 10}, rng);
    CHECK(gradcheck({x}, [&](Tape& tp) { return tp.sum(tp.sigmoid(x)); }) < 1e-6);
    CHECK(gradcheck({x}, [&](Tape& tp) { return tp.sum(tp.tanh(x)); }) < 1e-6);
    auto y = random_tensor({1, 10}, rng);
    CHECK(gradcheck({x, y}, [&](Tape& tp) { return tp.sum(tp.mul(x, y)); }) < 1e-6);
    CHECK(gradcheck({x, y}, [&](Tape& tp) { return tp.sum(tp.add(x, y)); }) < 1e-6);
    CHECK(gradcheck({x, y}, [&](Tape& tp) { return tp.sum(tp.sub(x, y)); }) < 1e-6);
}

TEST_CASE("relu value and subgradient") {
    Tape t;
    auto x = tensor({1, 3}, {-1.0, 0.5, 2.0}, true);
    auto r = t.relu(x);
    CHECK(r->data == std::vector<double>{0.0, 0.5, 2.0});
    x->zero_grad();
    t.backward(t.sum(r));
    CHECK(x->grad == std::vector<double>{0.0, 1.0, 1.0});
}

TEST_CASE("shape mismatch raises dimension errors") {
    Tape t;
    auto a = tensor({1, 2}, {1, 2}, true);
    auto b = tensor({1, 3}, {1, 2, 3}, true);
    CHECK_THROWS_AS(t.add(a, b), DimError);
    CHECK_THROWS_AS(t.mul(a, b), DimError);
}

TEST_CASE("softmax cross entropy values") {
    Tape t;
    auto logits = tensor({1, 4}, {0, 0, 0, 0}, true);
    CHECK(t.softmax_cross_entropy(logits, {2})->value() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto sat = tensor({1, 2}, {10, -10}, true);
    CHECK(t.softmax_cross_entropy(sat, {0})->value() < 1e-4);

    CHECK_THROWS_AS(t.softmax_cross_entropy(logits, {4}), LabelError);
}

TEST_CASE("softmax cross entropy gradient") {
    Rng rng(11);
    auto logits = random_tensor({5, 3}, rng);
    std::vector<int> targets = {0, 2, 1, 1, 0};
    double err = gradcheck(
        {logits}, [&](Tape& t) { return t.softmax_cross_entropy(logits, targets); });
    CHECK(err < 1e-6);
}

TEST_CASE("conv1d_maxpool degenerate and constant inputs") {
    Tape t;
    // width 1, kernel = identity: output is the character's own projection
    auto c = tensor({1, 3}, {0.5, -1.0, 2.0}, true);
    auto eye = tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
    auto bias = tensor({1, 3}, {0, 0, 0}, true);
    auto out = conv1d_maxpool(t, c, eye, bias, 1);
    CHECK(out->data == c->data);

    // constant rows: pooled output equals any single window's output
    Rng rng(5);
    auto kernel = random_tensor({6, 4}, rng);
    auto b2 = random_tensor({1, 4}, rng);
    auto row = random_tensor({1, 2}, rng, false);
    std::vector<double> rep;
    for (int i = 0; i < 5; ++i) rep.insert(rep.end(), row->data.begin(), row->data.end());
    auto cons = tensor({5, 2}, rep, true);
    Tape t2;
    auto pooled = conv1d_maxpool(t2, cons, kernel, b2, 3);
    Tape t3;
    auto one_window = conv1d_maxpool(t3, tensor({3, 2}, {rep[0], rep[1], rep[0], rep[1],
                                                         rep[0], rep[1]}, true),
                                     kernel, b2, 3);
    for (size_t i = 0; i < pooled->data.size(); ++i)
        CHECK(pooled->data[i] == doctest::Approx(one_window->data[i]).epsilon(1e-12));

    CHECK_THROWS_AS(conv1d_maxpool(t, tensor({1, 3}, {1, 2, 3}, true), kernel, b2, 3),
                    InputError);
}

TEST_CASE("conv1d_maxpool gradient") {
    Rng rng(17);
    auto chars = random_tensor({6, 5}, rng);
    auto kernel = random_tensor({15, 4}, rng);
    auto bias = random_tensor({1, 4}, rng);
    double err = gradcheck({chars, kernel, bias}, [&](Tape& t) {
        return t.sum(conv1d_maxpool(t, chars, kernel, bias, 3));
    });
    CHECK(err < 1e-5);
}

namespace {

LstmLayerParams make_lstm(int d_in, int h, Rng& rng) {
    LstmLayerParams p;
    p.hidden = h;
    for (auto* dir : {&p.fwd, &p.bwd}) {
        dir->wx = random_tensor({d_in, 4 * h}, rng);
        dir->wh = random_tensor({h, 4 * h}, rng);
        dir->b = random_tensor({1, 4 * h}, rng);
    }
    return p;
}

}  // namespace

TEST_CASE("birnn single step equals a hand-computed LSTM cell") {
    Rng rng(23);
    int d = 3, h = 2;
    auto p = make_lstm(d, h, rng);
    auto x = random_tensor({1, d}, rng);
    Tape t;
    auto out = birnn_layer(t, x, p);
    CHECK(out->rows() == 1);
    CHECK(out->cols() == 2 * h);

    // manual cell step from zero state, gate order i,f,g,o
    auto cell = [&](const LstmDirParams& dp) {
        std::vector<double> pre(size_t(4 * h), 0.0);
        for (int j = 0; j < 4 * h; ++j) {
            double s = dp.b->data[size_t(j)];
            for (int k = 0; k < d; ++k)
                s += x->data[size_t(k)] * dp.wx->data[size_t(k * 4 * h + j)];
            pre[size_t(j)] = s;
        }
        std::vector<double> out_h(static_cast<size_t>(h));
        for (int j = 0; j < h; ++j) {
            double i = 1.0 / (1.0 + std::exp(-pre[size_t(j)]));
            double g = std::tanh(pre[size_t(2 * h + j)]);
            double o = 1.0 / (1.0 + std::exp(-pre[size_t(3 * h + j)]));
            out_h[size_t(j)] = o * std::tanh(i * g);
        }
        return out_h;
    };
    auto fh = cell(p.fwd);
    auto bh = cell(p.bwd);
    for (int j = 0; j < h; ++j) {
        CHECK(out->data[size_t(j)] == doctest::Approx(fh[size_t(j)]).epsilon(1e-12));
        CHECK(out->data[size_t(h + j)] == doctest::Approx(bh[size_t(j)]).epsilon(1e-12));
    }
}

TEST_CASE("birnn all-zero parameters give all-zero states") {
    int d = 3, h = 2;
    LstmLayerParams p;
    p.hidden = h;
    for (auto* dir : {&p.fwd, &p.bwd}) {
        dir->wx = tensor({d, 4 * h}, std::vector<double>(size_t(d * 4 * h), 0.0), true);
        dir->wh = tensor({h, 4 * h}, std::vector<double>(size_t(h * 4 * h), 0.0), true);
        dir->b = tensor({1, 4 * h}, std::vector<double>(size_t(4 * h), 0.0), true);
    }
    Rng rng(29);
    auto x = random_tensor({4, d}, rng);
    Tape t;
    auto out = birnn_layer(t, x, p);
    for (double v : out->data) CHECK(v == 0.0);
}

TEST_CASE("birnn gradient") {
    Rng rng(31);
    auto p = make_lstm(3, 2, rng);
    auto x = random_tensor({4, 3}, rng);
    std::vector<TensorPtr> params = {x,        p.fwd.wx, p.fwd.wh, p.fwd.b,
                                     p.bwd.wx, p.bwd.wh, p.bwd.b};
    double err = gradcheck(
        params, [&](Tape& t) { return t.sum(birnn_layer(t, x, p)); });
    CHECK(err < 1e-4);
}

TEST_CASE("dropout") {
    Rng rng(37);
    auto x = tensor({1, 4}, {1, 2, 3, 4}, true);
    Tape t;
    CHECK(t.dropout(x, 0.0, true, rng) == x);   // rate 0: identity
    CHECK(t.dropout(x, 0.5, false, rng) == x);  // eval mode: identity
    CHECK_THROWS_AS(t.dropout(x, 1.0, true, rng), ConfigError);

    const int n = 100000;
    auto big = tensor({1, n}, std::vector<double>(size_t(n), 1.0), false);
    Tape t2;
    auto dropped = t2.dropout(big, 0.5, true, rng);
    int survivors = 0;
    for (double v : dropped->data) {
        if (v != 0.0) {
            CHECK(v == 2.0);  // inverted scaling
            ++survivors;
        }
    }
    CHECK(std::fabs(double(survivors) / n - 0.5) < 0.01);
}

TEST_CASE("lookup, slicing, pooling, gather gradients") {
    Rng rng(41);
    auto table = random_tensor({5, 3}, rng);
    std::vector<int> ids = {1, 4, 1, 0};  // repeated id exercises scatter-add
    CHECK(gradcheck({table}, [&](Tape& t) {
              return t.sum(t.rows_lookup(table, ids));
          }) < 1e-6);

    auto m = random_tensor({4, 5}, rng);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.max_over_rows(m)); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.logsumexp_over_rows(m)); }) <
          1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.gather_sum(m, {0, 7, 19}); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.transpose(m)); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.slice_rows(m, 1, 3)); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.slice_cols(m, 2, 5)); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) {
              return t.sum(t.concat_cols(t.row(m, 0), t.row(m, 2)));
          }) < 1e-6);
    auto v = random_tensor({1, 5}, rng);
    CHECK(gradcheck({m, v}, [&](Tape& t) { return t.sum(t.add_rowvec(m, v)); }) < 1e-6);
    auto cv = random_tensor({1, 4}, rng);
    CHECK(gradcheck({m, cv}, [&](Tape& t) { return t.sum(t.add_colvec(m, cv)); }) < 1e-6);
    CHECK(gradcheck({m}, [&](Tape& t) { return t.sum(t.scale(m, -2.5)); }) < 1e-6);
}

TEST_CASE("max_over_rows breaks ties toward the first row") {
    auto m = tensor({3, 2}, {1.0, 0.0, 1.0, 2.0, 0.5, 2.0}, true);
    Tape t;
    auto pooled = t.max_over_rows(m);
    CHECK(pooled->data == std::vector<double>{1.0, 2.0});
    m->zero_grad();
    t.backward(t.sum(pooled));
    // column 0 tie between rows 0 and 1 goes to row 0; column 1 tie rows 1,2 to row 1
    CHECK(m->grad == std::vector<double>{1, 0, 0, 1, 0, 0});
}

TEST_CASE("non-finite results raise numeric errors") {
    Tape t;
    auto big = tensor({1, 1}, {1e308}, true);
    CHECK_THROWS_AS(t.mul(t.scale(big, 10.0), big), NumericError);
}

TEST_CASE("backward is deterministic") {
    Rng rng(43);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 3}, rng);
    auto run = [&]() {
        Tape t;
        auto loss = t.sum(t.tanh(t.matmul(a, b)));
        a->zero_grad();
        b->zero_grad();
        t.backward(loss);
        auto g = a->grad;
        g.insert(g.end(), b->grad.begin(), b->grad.end());
        return g;
    };
    CHECK(run() == run());
}

TEST_CASE("untouched parameters keep zero gradients") {
    Rng rng(47);
    auto used = random_tensor({2, 2}, rng);
    auto unused = random_tensor({2, 2}, rng);
    used->zero_grad();
    unused->zero_grad();
    Tape t;
    t.backward(t.sum(t.tanh(used)));
    for (double g : unused->grad) CHECK(g == 0.0);
}
