#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ss/eval.hpp"
#include "ss/model.hpp"

namespace ss {

enum class MetricKind { TokenAccuracy, SpanF1 };

// Everything the trainer needs to know about one task: encoded splits,
// the label alphabet for decoding, and how to score predictions.
struct TaskSpec {
    std::string name;
    std::vector<EncodedSentence> train, dev, test;
    std::vector<std::string> label_alphabet;
    MetricKind metric = MetricKind::TokenAccuracy;
    Scheme scheme = Scheme::None;  // span extraction scheme when metric is SpanF1
    HeadKind head_kind = HeadKind::Softmax;
};

struct TrainerConfig {
    double lr = 0.1;
    int batch_size = 10;
    std::vector<double> lambdas;  // empty = all 1.0
    long steps = 1000;
    int eval_every = 100;
    int eval_max_sentences = 0;  // 0 = full dev split
    uint64_t seed = 0;
    double clip_norm = 5.0;  // 0 disables clipping
};

// Draws t with probability N_t / sum N_u.
int sample_task(const std::vector<size_t>& sizes, Rng& rng);

// Reporting aggregate sum lambda_t * loss_t.
double joint_loss(const std::vector<double>& losses, const std::vector<double>& lambdas);

// One SGD step on one mini-batch of task t. Encoder gradients are
// multiplied by the task mask before the update, so coordinates with mask
// bit 0 are bit-unchanged. Returns the mean batch loss.
double masked_update(BaseNetwork& net, TaskHead& head, const MaskMatrix* mask,
                     const MaskView* view,
                     const std::vector<const EncodedSentence*>& batch, double lr,
                     double clip_norm, double lambda, Rng& dropout_rng);

double evaluate_split(const BaseNetwork& net, const TaskHead& head, const MaskView* view,
                      const TaskSpec& spec, const std::vector<EncodedSentence>& split,
                      int max_sentences = 0);

struct TrainObserver {
    std::function<void(long step, int task)> after_update;
};

struct TrainResult {
    std::vector<double> best_dev;
    std::vector<Checkpoint> best_ckpt;  // encoder + that task's head, at best dev
    std::vector<double> final_dev;
    long steps_done = 0;
};

// The stochastic multi-task loop: proportional task sampling, masked SGD
// updates, periodic dev evaluation with per-task best checkpoints.
// `masks` null selects the dedicated mask-free hard-sharing path.
TrainResult train_parallel(BaseNetwork& net, std::vector<TaskHead>& heads,
                           const std::vector<MaskMatrix>* masks,
                           const std::vector<TaskSpec>& tasks, const TrainerConfig& cfg,
                           std::ostream* log = nullptr,
                           const TrainObserver* obs = nullptr);

// Fixed-task training used by IMP iterations; shares the update path.
double run_steps(BaseNetwork& net, TaskHead& head, const MaskMatrix* mask,
                 const MaskView* view, const std::vector<EncodedSentence>& train,
                 long steps, const TrainerConfig& cfg, Rng& sample_rng,
                 Rng& dropout_rng);

}  // namespace ss
