#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ss/imp.hpp"

namespace ss {

struct TaskConfig {
    std::string name;
    // file-backed task
    std::string train_path, dev_path, test_path;
    int token_column = 0;
    int label_column = -1;  // -1 = last column
    // generator-backed task
    std::string generator;  // "", "pattern", "position"
    int pattern_index = 1;
    int gen_vocab_size = 200;
    int gen_sentences = 2000;
    double relatedness = 0.5;
    std::string base_task;  // position generator reuses this task's tokens
    int max_position = 63;
    // common
    std::string scheme = "none";
    std::string convert_to;  // optional scheme conversion at load time
    std::string head = "softmax";     // softmax | crf
    std::string metric = "accuracy";  // accuracy | span_f1
};

struct ExperimentConfig {
    uint64_t seed = 1;
    std::string mode = "sparse";  // single | hard | hierarchical | sparse
    std::string output_dir = "out";
    ModelConfig model;
    int min_count = 1;
    std::string pretrained_embeddings;  // optional word2vec-style text file
    ImpConfig imp;
    TrainerConfig trainer;
    // epoch aliases, converted to optimizer steps against the mean train
    // split size once the data is built; 0 = use the step counts directly
    double imp_train_epochs = 0;
    double trainer_epochs = 0;
    std::vector<TaskConfig> tasks;
    std::map<std::string, int> hierarchy;  // task name -> supervision layer
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string dump_config(const ExperimentConfig& cfg);

struct BuiltTasks {
    Vocab vocab;
    std::optional<Vocab> char_vocab;
    std::vector<TaskDataset> raw;
    std::vector<TaskSpec> specs;
    int repairs = 0;  // scheme-conversion repairs across all tasks
};

BuiltTasks build_tasks(const ExperimentConfig& cfg);

// Optional ingestion hook: text file of "token v1 v2 ... vD" rows;
// matching vocabulary rows are overwritten, others keep random init.
// Returns the number of rows applied.
int load_pretrained_embeddings(BaseNetwork& net, const Vocab& vocab,
                               const std::string& path);

struct RunOutcome {
    // task -> {"dev": ..., "test": ...} in percent
    std::map<std::string, std::map<std::string, double>> per_task;
};

// Full pipeline for the configured sharing mode; writes the run ledger
// (config echo, checkpoints, candidate masks, selections, logs, metrics)
// under cfg.output_dir.
RunOutcome run_experiment(const ExperimentConfig& cfg);

// Stage-wise entry points operating on an existing output directory.
int stage_warmup(const ExperimentConfig& cfg);
int stage_generate_subnets(const ExperimentConfig& cfg);
int stage_select(const ExperimentConfig& cfg);
int stage_train(const ExperimentConfig& cfg);
int stage_evaluate(const ExperimentConfig& cfg);
int analyze_dir(const std::string& output_dir);

// Synthetic negative-transfer experiment (pattern task + position probe).
struct SynthConfig {
    int vocab_size = 200;
    int sentences = 1500;
    double relatedness = 0.5;
    int word_dim = 50;
    int hidden = 50;
    double dropout = 0.2;
    double lr = 0.3;
    int batch_size = 10;
    long train_steps = 1500;  // single-task budget; multi-task modes scale by task count
    int eval_every = 200;
    int eval_max_sentences = 120;
    long warmup_steps = 300;
    double alpha = 0.4;
    double min_sparsity = 0.4;
    long imp_steps = 1200;
    int max_position = 63;
};

struct SynthOutcome {
    // percent metrics: span F1 for the pattern task, accuracy for position
    double single_pattern = 0, single_position = 0;
    double hard_pattern = 0, hard_position = 0;
    double sparse_pattern = 0, sparse_position = 0;
};

SynthOutcome synthetic_negative_transfer_run(uint64_t seed, const SynthConfig& sc);

// Runs the experiment over `n_seeds` seeds (threaded), writes a delta
// report CSV + summary under out_dir. Returns 0 on success.
int cmd_negative_transfer(uint64_t base_seed, int n_seeds, const std::string& out_dir,
                          const SynthConfig& sc = {});

int cmd_synth_data(uint64_t seed, int vocab_size, int sentences, double relatedness,
                   const std::string& out_dir);

}  // namespace ss
