#include "ss/crf.hpp"

#include <algorithm>

namespace ss::crf {

TensorPtr make_transitions(int num_tags) {
    return tensor({num_tags + 2, num_tags + 2}, true);
}

TensorPtr sequence_score(Tape& tape, const TensorPtr& emissions,
                         const std::vector<int>& tags, const TensorPtr& trans) {
    const int L = emissions->rows(), K = emissions->cols();
    if (int(tags.size()) != L || L < 1) throw DimError("sequence_score: tag length");
    for (int t : tags)
        if (t < 0 || t >= K) throw LabelError("sequence_score: invalid tag id");
    const int T = trans->cols();
    std::vector<size_t> em_idx, tr_idx;
    for (int i = 0; i < L; ++i) em_idx.push_back(size_t(i) * K + tags[i]);
    tr_idx.push_back(size_t(bos_tag(K)) * T + tags[0]);
    for (int i = 0; i + 1 < L; ++i) tr_idx.push_back(size_t(tags[i]) * T + tags[i + 1]);
    tr_idx.push_back(size_t(tags[L - 1]) * T + eos_tag(K));
    return tape.add(tape.gather_sum(emissions, em_idx), tape.gather_sum(trans, tr_idx));
}

TensorPtr log_partition(Tape& tape, const TensorPtr& emissions, const TensorPtr& trans) {
    const int L = emissions->rows(), K = emissions->cols();
    if (L < 1) throw DimError("log_partition: empty emissions");
    auto interior = tape.slice_cols(tape.slice_rows(trans, 0, K), 0, K);
    auto bos_row = tape.slice_cols(tape.row(trans, bos_tag(K)), 0, K);
    auto eos_col = tape.transpose(
        tape.slice_cols(tape.slice_rows(trans, 0, K), eos_tag(K), eos_tag(K) + 1));
    // alpha: [1 x K] log-scores of partial sequences ending in each tag
    auto alpha = tape.add(tape.row(emissions, 0), bos_row);
    for (int i = 1; i < L; ++i) {
        auto scores = tape.add_colvec(interior, alpha);  // [k x j]: alpha[k] + trans[k][j]
        alpha = tape.add(tape.logsumexp_over_rows(scores), tape.row(emissions, i));
    }
    auto terminal = tape.add(alpha, eos_col);
    return tape.logsumexp_over_rows(tape.transpose(terminal));
}

std::pair<std::vector<int>, double> viterbi(const Tensor& emissions, const Tensor& trans) {
    const int L = emissions.rows(), K = emissions.cols();
    if (L < 1) throw DimError("viterbi: empty emissions");
    const int T = trans.cols();
    std::vector<double> best(size_t(L) * K);
    std::vector<int> back(size_t(L) * K, -1);
    for (int j = 0; j < K; ++j)
        best[j] = emissions.data[j] + trans.data[size_t(bos_tag(K)) * T + j];
    for (int i = 1; i < L; ++i)
        for (int j = 0; j < K; ++j) {
            double b = best[size_t(i - 1) * K] + trans.data[j];
            int arg = 0;
            for (int k = 1; k < K; ++k) {
                const double s = best[size_t(i - 1) * K + k] + trans.data[size_t(k) * T + j];
                if (s > b) {  // strict: lowest tag id wins ties
                    b = s;
                    arg = k;
                }
            }
            best[size_t(i) * K + j] = b + emissions.data[size_t(i) * K + j];
            back[size_t(i) * K + j] = arg;
        }
    double total = best[size_t(L - 1) * K] + trans.data[eos_tag(K)];
    int last = 0;
    for (int j = 1; j < K; ++j) {
        const double s = best[size_t(L - 1) * K + j] + trans.data[size_t(j) * T + eos_tag(K)];
        if (s > total) {
            total = s;
            last = j;
        }
    }
    std::vector<int> path(L);
    path[L - 1] = last;
    for (int i = L - 1; i > 0; --i) path[i - 1] = back[size_t(i) * K + path[i]];
    return {path, total};
}

TensorPtr nll_loss(Tape& tape, const TensorPtr& emissions, const std::vector<int>& tags,
                   const TensorPtr& trans) {
    return tape.sub(log_partition(tape, emissions, trans),
                    sequence_score(tape, emissions, tags, trans));
}

}  // namespace ss::crf
