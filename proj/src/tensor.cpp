#include "ss/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ss {

namespace {

size_t shape_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimError("negative dimension");
        n *= size_t(d);
    }
    return n;
}

void check_finite(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) throw NumericError("non-finite value in tensor");
    }
}

bool is_scalar(const TensorPtr& t) { return t->size() == 1; }

}  // namespace

TensorPtr tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->data.assign(shape_size(shape), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size()) throw DimError("data length != shape product");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    check_finite(*t);
    return t;
}

TensorPtr scalar(double v) { return tensor({1, 1}, {v}); }

TensorPtr Tape::make_out(std::vector<int> shape, bool requires_grad) {
    return tensor(std::move(shape), requires_grad);
}

void Tape::backward(const TensorPtr& loss, double seed) {
    if (loss->size() != 1) throw DimError("backward expects a scalar loss");
    if (!loss->requires_grad) return;
    loss->ensure_grad();
    loss->grad[0] += seed;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
    const int m = a->rows(), k = a->cols(), k2 = b->rows(), n = b->cols();
    if (k != k2)
        throw DimError("matmul inner dims: " + std::to_string(k) + " vs " + std::to_string(k2));
    auto out = make_out({m, n}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < m; ++i) {
        const double* arow = a->data.data() + size_t(i) * k;
        double* orow = out->data.data() + size_t(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b->data.data() + size_t(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    check_finite(*out);
    if (out->requires_grad) {
        record([a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0;
                        const double* grow = out->grad.data() + size_t(i) * n;
                        const double* brow = b->data.data() + size_t(p) * n;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        a->grad[size_t(i) * k + p] += s;
                    }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const double av = a->data[size_t(i) * k + p];
                        if (av == 0.0) continue;
                        const double* grow = out->grad.data() + size_t(i) * n;
                        double* brow = b->grad.data() + size_t(p) * n;
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
            }
        });
    }
    return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape && !is_scalar(a) && !is_scalar(b))
        throw DimError("add: shape mismatch");
    const bool sa = a->shape != b->shape && is_scalar(a);
    const bool sb = a->shape != b->shape && is_scalar(b);
    auto out = make_out(sa ? b->shape : a->shape, a->requires_grad || b->requires_grad);
    const size_t n = out->size();
    for (size_t i = 0; i < n; ++i)
        out->data[i] = (sa ? a->data[0] : a->data[i]) + (sb ? b->data[0] : b->data[i]);
    check_finite(*out);
    if (out->requires_grad) {
        record([a, b, out, sa, sb, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                if (sa)
                    for (size_t i = 0; i < n; ++i) a->grad[0] += out->grad[i];
                else
                    for (size_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                if (sb)
                    for (size_t i = 0; i < n; ++i) b->grad[0] += out->grad[i];
                else
                    for (size_t i = 0; i < n; ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr Tape::sub(const TensorPtr& a, const TensorPtr& b) {
    return add(a, scale(b, -1.0));
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape && !is_scalar(a) && !is_scalar(b))
        throw DimError("mul: shape mismatch");
    const bool sa = a->shape != b->shape && is_scalar(a);
    const bool sb = a->shape != b->shape && is_scalar(b);
    auto out = make_out(sa ? b->shape : a->shape, a->requires_grad || b->requires_grad);
    const size_t n = out->size();
    for (size_t i = 0; i < n; ++i)
        out->data[i] = (sa ? a->data[0] : a->data[i]) * (sb ? b->data[0] : b->data[i]);
    check_finite(*out);
    if (out->requires_grad) {
        record([a, b, out, sa, sb, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < n; ++i) {
                    const double bv = sb ? b->data[0] : b->data[i];
                    a->grad[sa ? 0 : i] += out->grad[i] * bv;
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < n; ++i) {
                    const double av = sa ? a->data[0] : a->data[i];
                    b->grad[sb ? 0 : i] += out->grad[i] * av;
                }
            }
        });
    }
    return out;
}

TensorPtr Tape::add_rowvec(const TensorPtr& m, const TensorPtr& v) {
    const int r = m->rows(), c = m->cols();
    if (v->rows() != 1 || v->cols() != c) throw DimError("add_rowvec: vector shape");
    auto out = make_out(m->shape, m->requires_grad || v->requires_grad);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out->data[size_t(i) * c + j] = m->data[size_t(i) * c + j] + v->data[j];
    check_finite(*out);
    if (out->requires_grad) {
        record([m, v, out, r, c] {
            if (m->requires_grad) {
                m->ensure_grad();
                for (size_t i = 0; i < size_t(r) * c; ++i) m->grad[i] += out->grad[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) v->grad[j] += out->grad[size_t(i) * c + j];
            }
        });
    }
    return out;
}

TensorPtr Tape::add_colvec(const TensorPtr& m, const TensorPtr& v) {
    const int r = m->rows(), c = m->cols();
    if (v->size() != size_t(r)) throw DimError("add_colvec: vector length");
    auto out = make_out(m->shape, m->requires_grad || v->requires_grad);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out->data[size_t(i) * c + j] = m->data[size_t(i) * c + j] + v->data[i];
    check_finite(*out);
    if (out->requires_grad) {
        record([m, v, out, r, c] {
            if (m->requires_grad) {
                m->ensure_grad();
                for (size_t i = 0; i < size_t(r) * c; ++i) m->grad[i] += out->grad[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) v->grad[i] += out->grad[size_t(i) * c + j];
            }
        });
    }
    return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
    auto out = make_out(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * c;
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out, c] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * c;
        });
    }
    return out;
}

TensorPtr Tape::tanh(const TensorPtr& a) {
    auto out = make_out(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) out->data[i] = std::tanh(a->data[i]);
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i) {
                const double y = out->data[i];
                a->grad[i] += out->grad[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

TensorPtr Tape::sigmoid(const TensorPtr& a) {
    auto out = make_out(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-a->data[i]));
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i) {
                const double y = out->data[i];
                a->grad[i] += out->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

TensorPtr Tape::relu(const TensorPtr& a) {
    auto out = make_out(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] > 0 ? a->data[i] : 0.0;
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i)
                if (a->data[i] > 0) a->grad[i] += out->grad[i];
        });
    }
    return out;
}

TensorPtr Tape::mask_mul(const TensorPtr& a, const TensorPtr& mask) {
    if (a->shape != mask->shape && a->size() != mask->size())
        throw DimError("mask_mul: shape mismatch");
    auto out = make_out(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * mask->data[i];
    check_finite(*out);
    if (out->requires_grad) {
        record([a, mask, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i)
                a->grad[i] += out->grad[i] * mask->data[i];
        });
    }
    return out;
}

TensorPtr Tape::transpose(const TensorPtr& a) {
    const int r = a->rows(), c = a->cols();
    auto out = make_out({c, r}, a->requires_grad);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out->data[size_t(j) * r + i] = a->data[size_t(i) * c + j];
    if (out->requires_grad) {
        record([a, out, r, c] {
            a->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    a->grad[size_t(i) * c + j] += out->grad[size_t(j) * r + i];
        });
    }
    return out;
}

TensorPtr Tape::row(const TensorPtr& a, int i) { return slice_rows(a, i, i + 1); }

TensorPtr Tape::slice_rows(const TensorPtr& a, int r0, int r1) {
    const int r = a->rows(), c = a->cols();
    if (r0 < 0 || r1 > r || r0 >= r1) throw DimError("slice_rows: bad range");
    auto out = make_out({r1 - r0, c}, a->requires_grad);
    std::copy(a->data.begin() + size_t(r0) * c, a->data.begin() + size_t(r1) * c,
              out->data.begin());
    if (out->requires_grad) {
        record([a, out, r0, c] {
            a->ensure_grad();
            for (size_t i = 0; i < out->size(); ++i)
                a->grad[size_t(r0) * c + i] += out->grad[i];
        });
    }
    return out;
}

TensorPtr Tape::slice_cols(const TensorPtr& a, int c0, int c1) {
    const int r = a->rows(), c = a->cols();
    if (c0 < 0 || c1 > c || c0 >= c1) throw DimError("slice_cols: bad range");
    const int w = c1 - c0;
    auto out = make_out({r, w}, a->requires_grad);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j)
            out->data[size_t(i) * w + j] = a->data[size_t(i) * c + c0 + j];
    if (out->requires_grad) {
        record([a, out, r, c, c0, w] {
            a->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < w; ++j)
                    a->grad[size_t(i) * c + c0 + j] += out->grad[size_t(i) * w + j];
        });
    }
    return out;
}

TensorPtr Tape::concat_cols(const TensorPtr& a, const TensorPtr& b) {
    const int r = a->rows(), ca = a->cols(), cb = b->cols();
    if (b->rows() != r) throw DimError("concat_cols: row mismatch");
    auto out = make_out({r, ca + cb}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < r; ++i) {
        std::copy(a->data.begin() + size_t(i) * ca, a->data.begin() + size_t(i + 1) * ca,
                  out->data.begin() + size_t(i) * (ca + cb));
        std::copy(b->data.begin() + size_t(i) * cb, b->data.begin() + size_t(i + 1) * cb,
                  out->data.begin() + size_t(i) * (ca + cb) + ca);
    }
    if (out->requires_grad) {
        record([a, b, out, r, ca, cb] {
            const int c = ca + cb;
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < ca; ++j)
                        a->grad[size_t(i) * ca + j] += out->grad[size_t(i) * c + j];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < cb; ++j)
                        b->grad[size_t(i) * cb + j] += out->grad[size_t(i) * c + ca + j];
            }
        });
    }
    return out;
}

TensorPtr Tape::stack_rows(const std::vector<TensorPtr>& rows) {
    if (rows.empty()) throw DimError("stack_rows: empty");
    const int c = rows[0]->cols();
    bool rg = false;
    for (const auto& rw : rows) {
        if (rw->rows() != 1 || rw->cols() != c) throw DimError("stack_rows: shape mismatch");
        rg = rg || rw->requires_grad;
    }
    auto out = make_out({int(rows.size()), c}, rg);
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i]->data.begin(), rows[i]->data.end(),
                  out->data.begin() + i * size_t(c));
    if (rg) {
        record([rows, out, c] {
            for (size_t i = 0; i < rows.size(); ++i) {
                if (!rows[i]->requires_grad) continue;
                rows[i]->ensure_grad();
                for (int j = 0; j < c; ++j)
                    rows[i]->grad[j] += out->grad[i * size_t(c) + j];
            }
        });
    }
    return out;
}

TensorPtr Tape::rows_lookup(const TensorPtr& table, const std::vector<int>& ids) {
    const int v = table->rows(), d = table->cols();
    if (ids.empty()) throw InputError("rows_lookup: empty id sequence");
    for (int id : ids)
        if (id < 0 || id >= v) throw LabelError("rows_lookup: id out of range");
    auto out = make_out({int(ids.size()), d}, table->requires_grad);
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table->data.begin() + size_t(ids[i]) * d,
                  table->data.begin() + size_t(ids[i] + 1) * d,
                  out->data.begin() + i * size_t(d));
    if (out->requires_grad) {
        record([table, out, ids, d] {
            table->ensure_grad();
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < d; ++j)
                    table->grad[size_t(ids[i]) * d + j] += out->grad[i * size_t(d) + j];
        });
    }
    return out;
}

TensorPtr Tape::im2col(const TensorPtr& a, int width) {
    const int n = a->rows(), d = a->cols();
    if (n < 1) throw InputError("im2col: empty sequence");
    if (width < 1 || n < width) throw InputError("im2col: sequence shorter than window");
    const int wins = n - width + 1, wd = width * d;
    auto out = make_out({wins, wd}, a->requires_grad);
    for (int i = 0; i < wins; ++i)
        std::copy(a->data.begin() + size_t(i) * d, a->data.begin() + size_t(i + width) * d,
                  out->data.begin() + size_t(i) * wd);
    if (out->requires_grad) {
        record([a, out, wins, wd, d] {
            a->ensure_grad();
            for (int i = 0; i < wins; ++i)
                for (int j = 0; j < wd; ++j)
                    a->grad[size_t(i) * d + j] += out->grad[size_t(i) * wd + j];
        });
    }
    return out;
}

TensorPtr Tape::max_over_rows(const TensorPtr& a) {
    const int r = a->rows(), c = a->cols();
    if (r < 1) throw InputError("max_over_rows: empty");
    auto out = make_out({1, c}, a->requires_grad);
    std::vector<int> arg(c, 0);
    for (int j = 0; j < c; ++j) {
        double best = a->data[j];
        for (int i = 1; i < r; ++i) {
            const double v = a->data[size_t(i) * c + j];
            if (v > best) {  // strict: first max wins ties
                best = v;
                arg[j] = i;
            }
        }
        out->data[j] = best;
    }
    if (out->requires_grad) {
        record([a, out, arg, c] {
            a->ensure_grad();
            for (int j = 0; j < c; ++j)
                a->grad[size_t(arg[j]) * c + j] += out->grad[j];
        });
    }
    return out;
}

TensorPtr Tape::logsumexp_over_rows(const TensorPtr& a) {
    const int r = a->rows(), c = a->cols();
    auto out = make_out({1, c}, a->requires_grad);
    for (int j = 0; j < c; ++j) {
        double m = a->data[j];
        for (int i = 1; i < r; ++i) m = std::max(m, a->data[size_t(i) * c + j]);
        double s = 0;
        for (int i = 0; i < r; ++i) s += std::exp(a->data[size_t(i) * c + j] - m);
        out->data[j] = m + std::log(s);
    }
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out, r, c] {
            a->ensure_grad();
            for (int j = 0; j < c; ++j)
                for (int i = 0; i < r; ++i)
                    a->grad[size_t(i) * c + j] +=
                        out->grad[j] * std::exp(a->data[size_t(i) * c + j] - out->data[j]);
        });
    }
    return out;
}

TensorPtr Tape::gather_sum(const TensorPtr& a, const std::vector<size_t>& idx) {
    for (size_t i : idx)
        if (i >= a->size()) throw DimError("gather_sum: index out of range");
    auto out = make_out({1, 1}, a->requires_grad);
    for (size_t i : idx) out->data[0] += a->data[i];
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out, idx] {
            a->ensure_grad();
            for (size_t i : idx) a->grad[i] += out->grad[0];
        });
    }
    return out;
}

TensorPtr Tape::sum(const TensorPtr& a) {
    auto out = make_out({1, 1}, a->requires_grad);
    for (double v : a->data) out->data[0] += v;
    check_finite(*out);
    if (out->requires_grad) {
        record([a, out] {
            a->ensure_grad();
            for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
        });
    }
    return out;
}

TensorPtr Tape::softmax_cross_entropy(const TensorPtr& logits,
                                      const std::vector<int>& targets) {
    const int L = logits->rows(), K = logits->cols();
    if (int(targets.size()) != L) throw DimError("softmax_cross_entropy: target length");
    for (int t : targets)
        if (t < 0 || t >= K) throw LabelError("softmax_cross_entropy: target out of range");
    auto out = make_out({1, 1}, logits->requires_grad);
    auto probs = std::make_shared<std::vector<double>>(size_t(L) * K);
    double loss = 0;
    for (int i = 0; i < L; ++i) {
        const double* lrow = logits->data.data() + size_t(i) * K;
        double m = lrow[0];
        for (int j = 1; j < K; ++j) m = std::max(m, lrow[j]);
        double s = 0;
        for (int j = 0; j < K; ++j) s += std::exp(lrow[j] - m);
        const double lse = m + std::log(s);
        for (int j = 0; j < K; ++j) (*probs)[size_t(i) * K + j] = std::exp(lrow[j] - lse);
        loss += lse - lrow[targets[i]];
    }
    out->data[0] = loss / L;
    check_finite(*out);
    if (out->requires_grad) {
        record([logits, out, probs, targets, L, K] {
            logits->ensure_grad();
            const double g = out->grad[0] / L;
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < K; ++j) {
                    double p = (*probs)[size_t(i) * K + j];
                    if (j == targets[i]) p -= 1.0;
                    logits->grad[size_t(i) * K + j] += g * p;
                }
        });
    }
    return out;
}

TensorPtr Tape::dropout(const TensorPtr& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    const double scale = 1.0 / (1.0 - rate);
    auto keep = std::make_shared<std::vector<double>>(x->size());
    auto out = make_out(x->shape, x->requires_grad);
    for (size_t i = 0; i < x->size(); ++i) {
        const double k = rng.uniform() >= rate ? scale : 0.0;
        (*keep)[i] = k;
        out->data[i] = x->data[i] * k;
    }
    check_finite(*out);
    if (out->requires_grad) {
        record([x, out, keep] {
            x->ensure_grad();
            for (size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i] * (*keep)[i];
        });
    }
    return out;
}

TensorPtr birnn_layer(Tape& t, const TensorPtr& inputs, const LstmLayerParams& p) {
    const int L = inputs->rows();
    const int h = p.hidden;
    if (L < 1) throw InputError("birnn_layer: empty input");
    auto run = [&](const LstmDirParams& d, bool reverse) {
        std::vector<TensorPtr> hs(L);
        TensorPtr hprev = tensor({1, h});
        TensorPtr cprev = tensor({1, h});
        for (int s = 0; s < L; ++s) {
            const int i = reverse ? L - 1 - s : s;
            auto xt = t.row(inputs, i);
            auto gates = t.add(t.add(t.matmul(xt, d.wx), t.matmul(hprev, d.wh)), d.b);
            auto ig = t.sigmoid(t.slice_cols(gates, 0, h));
            auto fg = t.sigmoid(t.slice_cols(gates, h, 2 * h));
            auto gg = t.tanh(t.slice_cols(gates, 2 * h, 3 * h));
            auto og = t.sigmoid(t.slice_cols(gates, 3 * h, 4 * h));
            auto c = t.add(t.mul(fg, cprev), t.mul(ig, gg));
            auto hh = t.mul(og, t.tanh(c));
            hs[i] = hh;
            hprev = hh;
            cprev = c;
        }
        return hs;
    };
    auto fwd = run(p.fwd, false);
    auto bwd = run(p.bwd, true);
    std::vector<TensorPtr> rows(L);
    for (int i = 0; i < L; ++i) rows[i] = t.concat_cols(fwd[i], bwd[i]);
    return t.stack_rows(rows);
}

TensorPtr conv1d_maxpool(Tape& t, const TensorPtr& chars, const TensorPtr& kernel,
                         const TensorPtr& bias, int width) {
    if (chars->rows() < 1) throw InputError("conv1d_maxpool: empty character sequence");
    auto windows = t.im2col(chars, width);
    auto conv = t.add_rowvec(t.matmul(windows, kernel), bias);
    return t.max_over_rows(conv);
}

}  // namespace ss
