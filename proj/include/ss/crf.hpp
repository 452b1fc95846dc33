#pragma once

#include <utility>
#include <vector>

#include "ss/tensor.hpp"

namespace ss::crf {

// Transition matrix is [(K+2) x (K+2)] with two virtual tags appended:
// BOS = K (only ever a source), EOS = K+1 (only ever a destination).
inline int bos_tag(int num_tags) { return num_tags; }
inline int eos_tag(int num_tags) { return num_tags + 1; }

TensorPtr make_transitions(int num_tags);  // zero-initialized parameter

// Emission + transition score of one tag sequence, including BOS->tags[0]
// and tags.back()->EOS.
TensorPtr sequence_score(Tape& tape, const TensorPtr& emissions,
                         const std::vector<int>& tags, const TensorPtr& trans);

// log sum over all K^L sequences of exp(sequence_score), forward algorithm.
TensorPtr log_partition(Tape& tape, const TensorPtr& emissions, const TensorPtr& trans);

// Best sequence and its score. Ties broken by the lowest tag id.
std::pair<std::vector<int>, double> viterbi(const Tensor& emissions, const Tensor& trans);

// log_partition - sequence_score.
TensorPtr nll_loss(Tape& tape, const TensorPtr& emissions, const std::vector<int>& tags,
                   const TensorPtr& trans);

}  // namespace ss::crf
