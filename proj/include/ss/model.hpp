#pragma once

#include <string>
#include <vector>

#include "ss/data.hpp"
#include "ss/masks.hpp"
#include "ss/tensor.hpp"

namespace ss {

struct ModelConfig {
    int vocab_size = 0;
    int word_dim = 50;
    int hidden = 50;
    int layers = 1;
    double dropout = 0.5;
    bool char_cnn = false;
    int char_vocab_size = 0;
    int char_dim = 30;
    int conv_width = 3;
    int conv_out = 30;
};

// The shared encoder: word embedding (+ optional char CNN) feeding L
// bidirectional LSTM layers. Parameter blocks are owned here in the exact
// order the ParamSpace declares them.
class BaseNetwork {
public:
    BaseNetwork(const ModelConfig& cfg, Rng& init_rng);

    const ModelConfig& config() const { return cfg_; }
    const ParamSpace& space() const { return space_; }
    std::vector<TensorPtr>& params() { return params_; }
    const std::vector<TensorPtr>& params() const { return params_; }
    TensorPtr param(const std::string& name) const;
    int output_dim() const { return 2 * cfg_.hidden; }

    std::vector<double> flatten_prunable() const;
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& values);
    void zero_grads();

private:
    ModelConfig cfg_;
    ParamSpace space_;
    std::vector<TensorPtr> params_;  // aligned with space_.blocks()
};

enum class HeadKind { Softmax, Crf };

struct TaskHead {
    std::string task_id;
    HeadKind kind = HeadKind::Softmax;
    int num_labels = 0;
    TensorPtr w;      // [2h x K]
    TensorPtr b;      // [1 x K]
    TensorPtr trans;  // [(K+2) x (K+2)], CRF only

    std::vector<TensorPtr> params() const;
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& values);
    void zero_grads();
};

TaskHead make_head(const std::string& task_id, HeadKind kind, int input_dim,
                   int num_labels, Rng& rng);

// Per-block mask tensors (null for non-prunable blocks), built once per
// MaskMatrix and shared read-only across forward passes.
struct MaskView {
    std::vector<TensorPtr> block_masks;
};

MaskView make_mask_view(const ParamSpace& space, const MaskMatrix& mask);

// Per-token scores [L x K]. Masked encoder weights when `mask` non-null;
// dropout active only in train mode.
TensorPtr forward_scores(Tape& tape, const BaseNetwork& net, const TaskHead& head,
                         const MaskView* mask, const EncodedSentence& sentence,
                         bool training, Rng& dropout_rng);

// Argmax per token (softmax head) or Viterbi path (CRF head), eval mode.
std::vector<int> predict(const BaseNetwork& net, const TaskHead& head,
                         const MaskView* mask, const EncodedSentence& sentence);

struct Checkpoint {
    std::string tag;
    std::vector<std::pair<std::string, std::vector<double>>> blocks;
    std::string rng_state;
};

Checkpoint snapshot(const BaseNetwork& net, const std::vector<TaskHead>& heads,
                    const std::string& tag, const std::string& rng_state = "");
void restore(const Checkpoint& ckpt, BaseNetwork& net, std::vector<TaskHead>& heads);
void restore_encoder(const Checkpoint& ckpt, BaseNetwork& net);
void restore_head(const Checkpoint& ckpt, TaskHead& head);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path,
                     const std::string& config_echo = "");
Checkpoint load_checkpoint(const std::string& path, std::string* config_echo = nullptr);

}  // namespace ss
