#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ss/errors.hpp"

namespace ss {

struct LabeledSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> labels;
};

enum class Scheme { BIO1, BIO2, BIOES, None };

Scheme scheme_from_string(const std::string& s);
std::string scheme_to_string(Scheme s);

struct TaskDataset {
    std::string task_id;
    std::vector<LabeledSentence> train, dev, test;
    std::vector<std::string> label_alphabet;  // sorted, deterministic

    size_t train_size() const { return train.size(); }
};

// Whitespace-separated columns, blank-line sentence separator,
// "-DOCSTART-" lines skipped.
std::vector<LabeledSentence> read_conll(const std::string& path, int token_column,
                                        int label_column);
void write_conll(const std::string& path, const std::vector<LabeledSentence>& sentences);

// Span-equivalent relabeling between tagging schemes. Malformed
// continuations (I-X with no open X span) are repaired as span starts;
// *repairs counts them when non-null.
std::vector<std::string> convert_scheme(const std::vector<std::string>& labels,
                                        Scheme from, Scheme to, int* repairs = nullptr);

// Rebuilds the sorted label alphabet from all splits.
void rebuild_alphabet(TaskDataset& ds);

// Position-prediction probe task: label of token i is min(i, max_position),
// tokens reused from the base dataset split-for-split.
TaskDataset gen_position_task(const TaskDataset& base, int max_position);

// Two token-tagging tasks over one shared corpus drawn from a latent
// Markov pattern source. `relatedness` is the fraction of latent states
// whose label assignment is shared between the two tasks; the rest are
// re-assigned independently per task. Labels are BIO2 over 3 entity types.
std::pair<TaskDataset, TaskDataset> gen_pattern_tasks(uint64_t seed, int vocab_size,
                                                      int n_sentences,
                                                      double relatedness);

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    std::vector<std::string> items;  // items[0]="<pad>", items[1]="<unk>"
    std::map<std::string, int> ids;

    int lookup(const std::string& tok) const {
        auto it = ids.find(tok);
        return it == ids.end() ? kUnk : it->second;
    }
    int size() const { return int(items.size()); }
};

// Train-split token->id map; frequency desc then lexicographic.
Vocab build_vocab(const std::vector<LabeledSentence>& train, int min_count);
Vocab build_char_vocab(const std::vector<LabeledSentence>& train);

struct EncodedSentence {
    std::vector<int> tokens;
    std::vector<int> labels;
    std::vector<std::vector<int>> chars;  // per token, present iff char features on
};

EncodedSentence encode_sentence(const LabeledSentence& s, const Vocab& vocab,
                                const std::map<std::string, int>& label_ids,
                                const Vocab* char_vocab, int min_char_len);

std::map<std::string, int> label_id_map(const std::vector<std::string>& alphabet);

}  // namespace ss
