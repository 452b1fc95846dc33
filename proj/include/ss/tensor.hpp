#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ss/errors.hpp"
#include "ss/rng.hpp"

namespace ss {

// Dense 2-d tensor, row-major doubles. Vectors are [1 x n]. Values are
// written once by the op that creates the tensor; only `grad` mutates
// afterwards (through backward accumulation).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    size_t size() const { return data.size(); }

    double value() const {
        if (data.size() != 1) throw DimError("Tensor::value on non-scalar");
        return data[0];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() {
        if (requires_grad) grad.assign(data.size(), 0.0);
    }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr tensor(std::vector<int> shape, std::vector<double> data,
                 bool requires_grad = false);
TensorPtr scalar(double v);

// Records forward ops in execution order; backward() replays them in
// reverse exactly once. A tape is confined to one thread. Parameters not
// touched by the forward pass keep their (zeroed) gradients untouched.
class Tape {
public:
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);  // same shape or scalar operand
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // same shape or scalar operand
    TensorPtr add_rowvec(const TensorPtr& m, const TensorPtr& v);  // [r x c] + [1 x c]
    TensorPtr add_colvec(const TensorPtr& m, const TensorPtr& v);  // [r x c] + v[0][i] per row
    TensorPtr scale(const TensorPtr& a, double c);

    TensorPtr tanh(const TensorPtr& a);
    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr relu(const TensorPtr& a);

    // Elementwise product where `mask` never receives gradient.
    TensorPtr mask_mul(const TensorPtr& a, const TensorPtr& mask);

    TensorPtr transpose(const TensorPtr& a);
    TensorPtr row(const TensorPtr& a, int i);
    TensorPtr slice_rows(const TensorPtr& a, int r0, int r1);
    TensorPtr slice_cols(const TensorPtr& a, int c0, int c1);
    TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
    TensorPtr stack_rows(const std::vector<TensorPtr>& rows);

    // Embedding lookup: out[i] = table[ids[i]], gradient scatter-adds rows.
    TensorPtr rows_lookup(const TensorPtr& table, const std::vector<int>& ids);

    // Valid sliding windows flattened per row: [n x d] -> [(n-w+1) x (w*d)].
    TensorPtr im2col(const TensorPtr& a, int width);

    // Column-wise max over rows, ties broken by the first (lowest) row index.
    TensorPtr max_over_rows(const TensorPtr& a);

    // out[j] = log sum_i exp(a[i][j]), log-sum-exp stabilized.
    TensorPtr logsumexp_over_rows(const TensorPtr& a);

    // Sum of entries at the given flat indices -> scalar.
    TensorPtr gather_sum(const TensorPtr& a, const std::vector<size_t>& idx);

    TensorPtr sum(const TensorPtr& a);

    // Mean over rows of -log softmax(logits)[target].
    TensorPtr softmax_cross_entropy(const TensorPtr& logits,
                                    const std::vector<int>& targets);

    // Inverted dropout: scales survivors by 1/(1-rate) at train time,
    // identity in eval mode or at rate 0.
    TensorPtr dropout(const TensorPtr& x, double rate, bool training, Rng& rng);

    void backward(const TensorPtr& loss, double seed = 1.0);

    size_t node_count() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;

    TensorPtr make_out(std::vector<int> shape, bool requires_grad);
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
};

struct LstmDirParams {
    TensorPtr wx;  // [d_in x 4h], gate order i,f,g,o
    TensorPtr wh;  // [h x 4h]
    TensorPtr b;   // [1 x 4h]
};

struct LstmLayerParams {
    LstmDirParams fwd, bwd;
    int hidden = 0;
};

// Bidirectional LSTM over inputs [L x d_in] -> [L x 2h], zero initial states.
TensorPtr birnn_layer(Tape& tape, const TensorPtr& inputs, const LstmLayerParams& p);

// 1-d convolution over character embeddings followed by max-over-time
// pooling. `chars` is [n x d_c] with n >= width (caller pads), kernel is
// [(width*d_c) x d_out], bias [1 x d_out]. Returns [1 x d_out].
TensorPtr conv1d_maxpool(Tape& tape, const TensorPtr& chars, const TensorPtr& kernel,
                         const TensorPtr& bias, int width);

}  // namespace ss
