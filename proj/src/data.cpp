#include "ss/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ss/eval.hpp"
#include "ss/rng.hpp"

namespace ss {

Scheme scheme_from_string(const std::string& s) {
    if (s == "BIO1" || s == "bio1") return Scheme::BIO1;
    if (s == "BIO2" || s == "bio2" || s == "BIO" || s == "bio") return Scheme::BIO2;
    if (s == "BIOES" || s == "bioes") return Scheme::BIOES;
    if (s == "none" || s.empty()) return Scheme::None;
    throw ConfigError("unknown tagging scheme: " + s);
}

std::string scheme_to_string(Scheme s) {
    switch (s) {
        case Scheme::BIO1: return "BIO1";
        case Scheme::BIO2: return "BIO2";
        case Scheme::BIOES: return "BIOES";
        default: return "none";
    }
}

std::vector<LabeledSentence> read_conll(const std::string& path, int token_column,
                                        int label_column) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open: " + path);
    std::vector<LabeledSentence> out;
    LabeledSentence cur;
    std::string line;
    long lineno = 0;
    auto flush = [&] {
        if (!cur.tokens.empty()) {
            out.push_back(std::move(cur));
            cur = LabeledSentence{};
        }
    };
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> cols;
        std::string col;
        while (ls >> col) cols.push_back(std::move(col));
        if (cols.empty()) {
            flush();
            continue;
        }
        if (cols[0] == "-DOCSTART-") continue;
        const int lcol = label_column < 0 ? int(cols.size()) - 1 : label_column;
        if (token_column >= int(cols.size()) || lcol >= int(cols.size()) ||
            token_column == lcol)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": row has too few columns");
        cur.tokens.push_back(cols[token_column]);
        cur.labels.push_back(cols[lcol]);
    }
    flush();
    return out;
}

void write_conll(const std::string& path, const std::vector<LabeledSentence>& sentences) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open for writing: " + path);
    for (const auto& s : sentences) {
        for (size_t i = 0; i < s.tokens.size(); ++i)
            os << s.tokens[i] << ' ' << s.labels[i] << '\n';
        os << '\n';
    }
}

std::vector<std::string> convert_scheme(const std::vector<std::string>& labels,
                                        Scheme from, Scheme to, int* repairs) {
    if (to != Scheme::BIO2 && to != Scheme::BIOES)
        throw ConfigError("convert_scheme: target must be BIO2 or BIOES");
    auto spans = extract_spans(labels, from, repairs);
    std::vector<std::string> out(labels.size(), "O");
    for (const auto& sp : spans) {
        if (to == Scheme::BIO2) {
            out[sp.start] = "B-" + sp.type;
            for (int i = sp.start + 1; i <= sp.end; ++i) out[i] = "I-" + sp.type;
        } else {
            if (sp.start == sp.end) {
                out[sp.start] = "S-" + sp.type;
            } else {
                out[sp.start] = "B-" + sp.type;
                for (int i = sp.start + 1; i < sp.end; ++i) out[i] = "I-" + sp.type;
                out[sp.end] = "E-" + sp.type;
            }
        }
    }
    return out;
}

void rebuild_alphabet(TaskDataset& ds) {
    std::set<std::string> seen;
    for (const auto* split : {&ds.train, &ds.dev, &ds.test})
        for (const auto& s : *split)
            for (const auto& l : s.labels) seen.insert(l);
    ds.label_alphabet.assign(seen.begin(), seen.end());
}

TaskDataset gen_position_task(const TaskDataset& base, int max_position) {
    if (max_position < 1) throw ConfigError("gen_position_task: max_position < 1");
    TaskDataset out;
    out.task_id = "position";
    auto relabel = [&](const std::vector<LabeledSentence>& in) {
        std::vector<LabeledSentence> r;
        for (const auto& s : in) {
            LabeledSentence ns;
            ns.tokens = s.tokens;
            for (size_t i = 0; i < s.tokens.size(); ++i)
                ns.labels.push_back(std::to_string(std::min<int>(int(i), max_position)));
            r.push_back(std::move(ns));
        }
        return r;
    };
    out.train = relabel(base.train);
    out.dev = relabel(base.dev);
    out.test = relabel(base.test);
    rebuild_alphabet(out);
    return out;
}

namespace {

constexpr int kStates = 8;
constexpr int kEntityTypes = 3;

std::vector<int> draw_assignment(Rng& rng) {
    std::vector<int> a(kStates);
    for (int s = 0; s < kStates; ++s)
        a[s] = rng.uniform() < 0.5 ? 0 : 1 + rng.uniform_int(kEntityTypes);
    return a;
}

std::vector<std::string> bio2_labels(const std::vector<int>& states,
                                     const std::vector<int>& assignment,
                                     const std::vector<std::string>& type_names) {
    std::vector<std::string> out(states.size(), "O");
    for (size_t i = 0; i < states.size(); ++i) {
        const int e = assignment[states[i]];
        if (e == 0) continue;
        const bool cont = i > 0 && states[i - 1] == states[i];
        out[i] = (cont ? "I-" : "B-") + type_names[e - 1];
    }
    return out;
}

}  // namespace

std::pair<TaskDataset, TaskDataset> gen_pattern_tasks(uint64_t seed, int vocab_size,
                                                      int n_sentences,
                                                      double relatedness) {
    if (vocab_size < kStates || n_sentences < 1)
        throw ConfigError("gen_pattern_tasks: parameters too small");
    if (relatedness < 0.0 || relatedness > 1.0)
        throw ConfigError("gen_pattern_tasks: relatedness outside [0,1]");

    Rng corpus_rng = Rng::substream(seed, "pattern/corpus");
    Rng shared_rng = Rng::substream(seed, "pattern/shared");
    Rng t1_rng = Rng::substream(seed, "pattern/task1");
    Rng t2_rng = Rng::substream(seed, "pattern/task2");

    const auto shared_assign = draw_assignment(shared_rng);
    const auto own1 = draw_assignment(t1_rng);
    const auto own2 = draw_assignment(t2_rng);
    const int n_shared = int(std::floor(relatedness * kStates + 0.5));
    std::vector<int> a1(kStates), a2(kStates);
    for (int s = 0; s < kStates; ++s) {
        a1[s] = s < n_shared ? shared_assign[s] : own1[s];
        a2[s] = s < n_shared ? shared_assign[s] : own2[s];
    }

    const std::vector<std::string> names1 = {"AA", "BB", "CC"};
    const std::vector<std::string> names2 = {"XX", "YY", "ZZ"};

    const int dev_n = std::max(50, n_sentences / 10);
    const int total = n_sentences + 2 * dev_n;
    const int group = std::max(1, vocab_size / kStates);

    std::vector<std::vector<int>> state_seqs(total);
    std::vector<std::vector<std::string>> token_seqs(total);
    for (int n = 0; n < total; ++n) {
        const int len = 6 + corpus_rng.uniform_int(10);
        int state = corpus_rng.uniform_int(kStates);
        for (int i = 0; i < len; ++i) {
            state_seqs[n].push_back(state);
            int tok;
            if (corpus_rng.uniform() < 0.85)
                tok = std::min(vocab_size - 1, state * group + corpus_rng.uniform_int(group));
            else
                tok = corpus_rng.uniform_int(vocab_size);
            token_seqs[n].push_back("w" + std::to_string(tok));
            if (corpus_rng.uniform() >= 0.5) state = corpus_rng.uniform_int(kStates);
        }
    }

    auto build = [&](const std::string& id, const std::vector<int>& assign,
                     const std::vector<std::string>& names) {
        TaskDataset ds;
        ds.task_id = id;
        for (int n = 0; n < total; ++n) {
            LabeledSentence s;
            s.tokens = token_seqs[n];
            s.labels = bio2_labels(state_seqs[n], assign, names);
            if (n < n_sentences)
                ds.train.push_back(std::move(s));
            else if (n < n_sentences + dev_n)
                ds.dev.push_back(std::move(s));
            else
                ds.test.push_back(std::move(s));
        }
        rebuild_alphabet(ds);
        return ds;
    };
    return {build("pattern1", a1, names1), build("pattern2", a2, names2)};
}

Vocab build_vocab(const std::vector<LabeledSentence>& train, int min_count) {
    if (train.empty()) throw ConfigError("build_vocab: empty corpus");
    std::map<std::string, long> counts;
    for (const auto& s : train)
        for (const auto& t : s.tokens) ++counts[t];
    std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab v;
    v.items = {"<pad>", "<unk>"};
    for (const auto& [tok, c] : items)
        if (c >= min_count) v.items.push_back(tok);
    for (size_t i = 0; i < v.items.size(); ++i) v.ids[v.items[i]] = int(i);
    return v;
}

Vocab build_char_vocab(const std::vector<LabeledSentence>& train) {
    std::set<char> chars;
    for (const auto& s : train)
        for (const auto& t : s.tokens)
            for (char c : t) chars.insert(c);
    Vocab v;
    v.items = {"<pad>", "<unk>"};
    for (char c : chars) v.items.push_back(std::string(1, c));
    for (size_t i = 0; i < v.items.size(); ++i) v.ids[v.items[i]] = int(i);
    return v;
}

std::map<std::string, int> label_id_map(const std::vector<std::string>& alphabet) {
    std::map<std::string, int> m;
    for (size_t i = 0; i < alphabet.size(); ++i) m[alphabet[i]] = int(i);
    return m;
}

EncodedSentence encode_sentence(const LabeledSentence& s, const Vocab& vocab,
                                const std::map<std::string, int>& label_ids,
                                const Vocab* char_vocab, int min_char_len) {
    if (s.tokens.empty()) throw InputError("encode_sentence: empty sentence");
    EncodedSentence e;
    for (const auto& t : s.tokens) e.tokens.push_back(vocab.lookup(t));
    for (const auto& l : s.labels) {
        auto it = label_ids.find(l);
        if (it == label_ids.end()) throw LabelError("label not in alphabet: " + l);
        e.labels.push_back(it->second);
    }
    if (char_vocab) {
        for (const auto& t : s.tokens) {
            std::vector<int> cs;
            for (char c : t) cs.push_back(char_vocab->lookup(std::string(1, c)));
            while (int(cs.size()) < min_char_len) cs.push_back(Vocab::kPad);
            e.chars.push_back(std::move(cs));
        }
    }
    return e;
}

}  // namespace ss
