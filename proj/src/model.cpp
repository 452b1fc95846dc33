#include "ss/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ss/crf.hpp"

namespace ss {

namespace {

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng) {
    for (auto& v : t.data) v = rng.uniform(lo, hi);
}

}  // namespace

BaseNetwork::BaseNetwork(const ModelConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg.vocab_size < 2 || cfg.word_dim < 1 || cfg.hidden < 1 || cfg.layers < 1)
        throw ConfigError("BaseNetwork: invalid model dimensions");
    if (cfg.char_cnn && (cfg.char_vocab_size < 2 || cfg.char_dim < 1 ||
                         cfg.conv_width < 1 || cfg.conv_out < 1))
        throw ConfigError("BaseNetwork: invalid char-CNN dimensions");

    space_.add_block("word_emb", {cfg.vocab_size, cfg.word_dim}, false, 0);
    if (cfg.char_cnn) {
        space_.add_block("char_emb", {cfg.char_vocab_size, cfg.char_dim}, false, 0);
        space_.add_block("conv_w", {cfg.conv_width * cfg.char_dim, cfg.conv_out}, true, 1);
        space_.add_block("conv_b", {1, cfg.conv_out}, true, 1);
    }
    const int h = cfg.hidden;
    for (int l = 1; l <= cfg.layers; ++l) {
        int d_in = l == 1 ? cfg.word_dim + (cfg.char_cnn ? cfg.conv_out : 0) : 2 * h;
        for (const char* dir : {"f", "b"}) {
            const std::string p = "lstm" + std::to_string(l) + "_" + dir + "_";
            space_.add_block(p + "wx", {d_in, 4 * h}, true, l);
            space_.add_block(p + "wh", {h, 4 * h}, true, l);
            space_.add_block(p + "b", {1, 4 * h}, true, l);
        }
    }

    const double r = 1.0 / std::sqrt(double(h));
    const double rc = cfg.char_cnn ? 1.0 / std::sqrt(double(cfg.conv_width * cfg.char_dim)) : 0;
    for (const auto& blk : space_.blocks()) {
        auto t = tensor(blk.shape, true);
        if (blk.name == "word_emb" || blk.name == "char_emb") {
            fill_uniform(*t, -0.1, 0.1, init_rng);
        } else if (blk.name.substr(0, 5) == "conv_") {
            if (blk.name == "conv_w") fill_uniform(*t, -rc, rc, init_rng);
            // conv_b stays zero
        } else if (blk.name.size() > 2 && blk.name.substr(blk.name.size() - 2) == "_b") {
            // gate biases zero, forget-gate slice at 1.0
            for (int j = h; j < 2 * h; ++j) t->data[j] = 1.0;
        } else {
            fill_uniform(*t, -r, r, init_rng);
        }
        params_.push_back(std::move(t));
    }
}

TensorPtr BaseNetwork::param(const std::string& name) const {
    for (size_t i = 0; i < space_.blocks().size(); ++i)
        if (space_.blocks()[i].name == name) return params_[i];
    throw StructuralError("no such parameter block: " + name);
}

std::vector<double> BaseNetwork::flatten_prunable() const {
    std::vector<double> out(space_.prunable_count());
    for (size_t i = 0; i < space_.blocks().size(); ++i) {
        const auto& blk = space_.blocks()[i];
        if (!blk.prunable) continue;
        std::copy(params_[i]->data.begin(), params_[i]->data.end(),
                  out.begin() + blk.offset_prunable);
    }
    return out;
}

std::vector<std::vector<double>> BaseNetwork::snapshot_values() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : params_) out.push_back(p->data);
    return out;
}

void BaseNetwork::restore_values(const std::vector<std::vector<double>>& values) {
    if (values.size() != params_.size())
        throw StructuralError("restore_values: block count mismatch");
    for (size_t i = 0; i < params_.size(); ++i) {
        if (values[i].size() != params_[i]->data.size())
            throw StructuralError("restore_values: block size mismatch");
        params_[i]->data = values[i];
    }
}

void BaseNetwork::zero_grads() {
    for (auto& p : params_) p->zero_grad();
}

std::vector<TensorPtr> TaskHead::params() const {
    std::vector<TensorPtr> out = {w, b};
    if (kind == HeadKind::Crf) out.push_back(trans);
    return out;
}

std::vector<std::vector<double>> TaskHead::snapshot_values() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : params()) out.push_back(p->data);
    return out;
}

void TaskHead::restore_values(const std::vector<std::vector<double>>& values) {
    auto ps = params();
    if (values.size() != ps.size())
        throw StructuralError("TaskHead::restore_values: block count mismatch");
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->data = values[i];
}

void TaskHead::zero_grads() {
    for (auto& p : params()) p->zero_grad();
}

TaskHead make_head(const std::string& task_id, HeadKind kind, int input_dim,
                   int num_labels, Rng& rng) {
    if (num_labels < 1 || input_dim < 1) throw ConfigError("make_head: invalid dims");
    TaskHead head;
    head.task_id = task_id;
    head.kind = kind;
    head.num_labels = num_labels;
    head.w = tensor({input_dim, num_labels}, true);
    head.b = tensor({1, num_labels}, true);
    const double r = 1.0 / std::sqrt(double(input_dim));
    fill_uniform(*head.w, -r, r, rng);
    if (kind == HeadKind::Crf) head.trans = crf::make_transitions(num_labels);
    return head;
}

MaskView make_mask_view(const ParamSpace& space, const MaskMatrix& mask) {
    if (mask.bits.size() != space.prunable_count())
        throw StructuralError("make_mask_view: mask does not match ParamSpace");
    MaskView view;
    for (const auto& blk : space.blocks()) {
        if (!blk.prunable) {
            view.block_masks.push_back(nullptr);
            continue;
        }
        auto t = tensor(blk.shape);
        for (size_t i = 0; i < blk.size; ++i)
            t->data[i] = mask.bits[blk.offset_prunable + i] ? 1.0 : 0.0;
        view.block_masks.push_back(std::move(t));
    }
    return view;
}

TensorPtr forward_scores(Tape& tape, const BaseNetwork& net, const TaskHead& head,
                         const MaskView* mask, const EncodedSentence& sentence,
                         bool training, Rng& dropout_rng) {
    if (sentence.tokens.empty()) throw InputError("forward_scores: empty sentence");
    const auto& cfg = net.config();
    const auto& blocks = net.space().blocks();
    if (mask && mask->block_masks.size() != blocks.size())
        throw StructuralError("forward_scores: mask view does not match network");

    auto eff = [&](const std::string& name) -> TensorPtr {
        for (size_t i = 0; i < blocks.size(); ++i)
            if (blocks[i].name == name) {
                auto p = net.params()[i];
                if (mask && mask->block_masks[i])
                    return tape.mask_mul(p, mask->block_masks[i]);
                return p;
            }
        throw StructuralError("forward_scores: missing block " + name);
    };

    auto x = tape.rows_lookup(net.param("word_emb"), sentence.tokens);
    if (cfg.char_cnn) {
        if (sentence.chars.size() != sentence.tokens.size())
            throw InputError("forward_scores: char features missing");
        auto char_emb = net.param("char_emb");
        auto conv_w = eff("conv_w");
        auto conv_b = eff("conv_b");
        std::vector<TensorPtr> feats;
        for (const auto& cs : sentence.chars) {
            auto ce = tape.rows_lookup(char_emb, cs);
            feats.push_back(conv1d_maxpool(tape, ce, conv_w, conv_b, cfg.conv_width));
        }
        x = tape.concat_cols(x, tape.stack_rows(feats));
    }
    x = tape.dropout(x, cfg.dropout, training, dropout_rng);

    for (int l = 1; l <= cfg.layers; ++l) {
        const std::string p = "lstm" + std::to_string(l) + "_";
        LstmLayerParams lp;
        lp.hidden = cfg.hidden;
        lp.fwd = {eff(p + "f_wx"), eff(p + "f_wh"), eff(p + "f_b")};
        lp.bwd = {eff(p + "b_wx"), eff(p + "b_wh"), eff(p + "b_b")};
        x = birnn_layer(tape, x, lp);
    }
    x = tape.dropout(x, cfg.dropout, training, dropout_rng);
    return tape.add_rowvec(tape.matmul(x, head.w), head.b);
}

std::vector<int> predict(const BaseNetwork& net, const TaskHead& head,
                         const MaskView* mask, const EncodedSentence& sentence) {
    Tape tape;
    Rng dummy(0);
    auto scores = forward_scores(tape, net, head, mask, sentence, false, dummy);
    const int L = scores->rows(), K = scores->cols();
    if (head.kind == HeadKind::Crf) return crf::viterbi(*scores, *head.trans).first;
    std::vector<int> out(L, 0);
    for (int i = 0; i < L; ++i) {
        int best = 0;
        for (int j = 1; j < K; ++j)
            if (scores->data[size_t(i) * K + j] > scores->data[size_t(i) * K + best])
                best = j;
        out[i] = best;
    }
    return out;
}

Checkpoint snapshot(const BaseNetwork& net, const std::vector<TaskHead>& heads,
                    const std::string& tag, const std::string& rng_state) {
    Checkpoint c;
    c.tag = tag;
    c.rng_state = rng_state;
    const auto& blocks = net.space().blocks();
    for (size_t i = 0; i < blocks.size(); ++i)
        c.blocks.emplace_back(blocks[i].name, net.params()[i]->data);
    for (const auto& h : heads) {
        c.blocks.emplace_back("head:" + h.task_id + ":w", h.w->data);
        c.blocks.emplace_back("head:" + h.task_id + ":b", h.b->data);
        if (h.kind == HeadKind::Crf)
            c.blocks.emplace_back("head:" + h.task_id + ":trans", h.trans->data);
    }
    return c;
}

namespace {

const std::vector<double>* find_block(const Checkpoint& c, const std::string& name) {
    for (const auto& [n, v] : c.blocks)
        if (n == name) return &v;
    return nullptr;
}

void assign_block(const Checkpoint& c, const std::string& name, TensorPtr t) {
    const auto* v = find_block(c, name);
    if (!v) throw StructuralError("checkpoint missing block: " + name);
    if (v->size() != t->data.size())
        throw StructuralError("checkpoint block size mismatch: " + name);
    t->data = *v;
}

}  // namespace

void restore_encoder(const Checkpoint& ckpt, BaseNetwork& net) {
    const auto& blocks = net.space().blocks();
    for (size_t i = 0; i < blocks.size(); ++i)
        assign_block(ckpt, blocks[i].name, net.params()[i]);
}

void restore_head(const Checkpoint& ckpt, TaskHead& head) {
    assign_block(ckpt, "head:" + head.task_id + ":w", head.w);
    assign_block(ckpt, "head:" + head.task_id + ":b", head.b);
    if (head.kind == HeadKind::Crf)
        assign_block(ckpt, "head:" + head.task_id + ":trans", head.trans);
}

void restore(const Checkpoint& ckpt, BaseNetwork& net, std::vector<TaskHead>& heads) {
    restore_encoder(ckpt, net);
    for (auto& h : heads) restore_head(ckpt, h);
}

namespace {

constexpr char kCkptMagic[4] = {'S', 'S', 'C', 'K'};
constexpr uint16_t kCkptVersion = 1;

void write_str(std::ofstream& os, const std::string& s) {
    uint32_t n = uint32_t(s.size());
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(s.data(), n);
}

std::string read_str(std::ifstream& is) {
    uint32_t n = 0;
    if (!is.read(reinterpret_cast<char*>(&n), 4)) throw FormatError("checkpoint truncated");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw FormatError("checkpoint truncated");
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path,
                     const std::string& config_echo) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path);
    os.write(kCkptMagic, 4);
    os.write(reinterpret_cast<const char*>(&kCkptVersion), 2);
    write_str(os, ckpt.tag);
    write_str(os, config_echo);
    write_str(os, ckpt.rng_state);
    uint32_t nb = uint32_t(ckpt.blocks.size());
    os.write(reinterpret_cast<const char*>(&nb), 4);
    for (const auto& [name, data] : ckpt.blocks) {
        write_str(os, name);
        uint64_t n = data.size();
        os.write(reinterpret_cast<const char*>(&n), 8);
        os.write(reinterpret_cast<const char*>(data.data()),
                 std::streamsize(n * sizeof(double)));
    }
}

Checkpoint load_checkpoint(const std::string& path, std::string* config_echo) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError("bad checkpoint magic: " + path);
    uint16_t ver = 0;
    is.read(reinterpret_cast<char*>(&ver), 2);
    if (ver != kCkptVersion) throw FormatError("unsupported checkpoint version");
    Checkpoint c;
    c.tag = read_str(is);
    const std::string echo = read_str(is);
    if (config_echo) *config_echo = echo;
    c.rng_state = read_str(is);
    uint32_t nb = 0;
    if (!is.read(reinterpret_cast<char*>(&nb), 4)) throw FormatError("checkpoint truncated");
    for (uint32_t i = 0; i < nb; ++i) {
        std::string name = read_str(is);
        uint64_t n = 0;
        if (!is.read(reinterpret_cast<char*>(&n), 8)) throw FormatError("checkpoint truncated");
        std::vector<double> data(n);
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     std::streamsize(n * sizeof(double))))
            throw FormatError("checkpoint truncated");
        c.blocks.emplace_back(std::move(name), std::move(data));
    }
    return c;
}

}  // namespace ss
