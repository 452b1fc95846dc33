#include "ss/trainer.hpp"

#include <cmath>

#include "ss/crf.hpp"
#include "json.hpp"

namespace ss {

int sample_task(const std::vector<size_t>& sizes, Rng& rng) {
    if (sizes.empty()) throw ConfigError("sample_task: no tasks");
    double total = 0;
    for (size_t n : sizes) {
        if (n < 1) throw ConfigError("sample_task: empty dataset");
        total += double(n);
    }
    const double u = rng.uniform() * total;
    double acc = 0;
    for (size_t t = 0; t < sizes.size(); ++t) {
        acc += double(sizes[t]);
        if (u < acc) return int(t);
    }
    return int(sizes.size()) - 1;
}

double joint_loss(const std::vector<double>& losses, const std::vector<double>& lambdas) {
    if (losses.size() != lambdas.size()) throw ConfigError("joint_loss: length mismatch");
    double s = 0;
    for (size_t i = 0; i < losses.size(); ++i) s += lambdas[i] * losses[i];
    return s;
}

namespace {

TensorPtr sentence_loss(Tape& tape, BaseNetwork& net, const TaskHead& head,
                        const MaskView* view, const EncodedSentence& s, bool training,
                        Rng& dropout_rng) {
    auto scores = forward_scores(tape, net, head, view, s, training, dropout_rng);
    if (head.kind == HeadKind::Crf) {
        auto nll = crf::nll_loss(tape, scores, s.labels, head.trans);
        return tape.scale(nll, 1.0 / double(s.labels.size()));  // per-token scale
    }
    return tape.softmax_cross_entropy(scores, s.labels);
}

void clip_and_step(BaseNetwork& net, TaskHead& head, const MaskMatrix* mask,
                   double lr, double clip_norm) {
    const auto& blocks = net.space().blocks();
    // zero out gradients of pruned coordinates before looking at the norm
    if (mask) {
        for (size_t i = 0; i < blocks.size(); ++i) {
            const auto& blk = blocks[i];
            if (!blk.prunable) continue;
            auto& g = net.params()[i]->grad;
            for (size_t j = 0; j < blk.size; ++j)
                g[j] *= mask->bits[blk.offset_prunable + j] ? 1.0 : 0.0;
        }
    }
    double scale = 1.0;
    if (clip_norm > 0) {
        double sq = 0;
        for (const auto& p : net.params())
            for (double g : p->grad) sq += g * g;
        for (const auto& p : head.params())
            for (double g : p->grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) scale = clip_norm / norm;
    }
    for (auto& p : net.params())
        for (size_t j = 0; j < p->data.size(); ++j) p->data[j] -= lr * scale * p->grad[j];
    for (auto& p : head.params())
        for (size_t j = 0; j < p->data.size(); ++j) p->data[j] -= lr * scale * p->grad[j];
}

}  // namespace

double masked_update(BaseNetwork& net, TaskHead& head, const MaskMatrix* mask,
                     const MaskView* view,
                     const std::vector<const EncodedSentence*>& batch, double lr,
                     double clip_norm, double lambda, Rng& dropout_rng) {
    if (batch.empty()) throw ConfigError("masked_update: empty batch");
    net.zero_grads();
    head.zero_grads();
    // Encoder gradients are staged per sentence: masking routes them through
    // an extra accumulator node, so summing whole-sentence subtotals (rather
    // than interleaving timestep contributions across sentences) is the only
    // order both the masked and mask-free paths produce bit-identically.
    auto& nparams = net.params();
    std::vector<std::vector<double>> acc(nparams.size());
    for (size_t i = 0; i < nparams.size(); ++i)
        acc[i].assign(nparams[i]->data.size(), 0.0);
    double loss_sum = 0;
    try {
        for (const auto* s : batch) {
            for (auto& p : nparams) p->zero_grad();
            Tape tape;
            auto loss = sentence_loss(tape, net, head, view, *s, true, dropout_rng);
            loss_sum += loss->value();
            tape.backward(loss, lambda / double(batch.size()));
            for (size_t i = 0; i < nparams.size(); ++i)
                for (size_t j = 0; j < acc[i].size(); ++j)
                    acc[i][j] += nparams[i]->grad[j];
        }
        for (size_t i = 0; i < nparams.size(); ++i) nparams[i]->grad = acc[i];
    } catch (const NumericError& e) {
        throw DivergenceError(std::string("non-finite loss for task ") + head.task_id +
                              ": " + e.what());
    }
    if (!std::isfinite(loss_sum))
        throw DivergenceError("non-finite loss for task " + head.task_id);
    clip_and_step(net, head, mask, lr, clip_norm);
    return loss_sum / double(batch.size());
}

double evaluate_split(const BaseNetwork& net, const TaskHead& head, const MaskView* view,
                      const TaskSpec& spec, const std::vector<EncodedSentence>& split,
                      int max_sentences) {
    const size_t n = max_sentences > 0
                         ? std::min(split.size(), size_t(max_sentences))
                         : split.size();
    if (n == 0) return 0.0;
    if (spec.metric == MetricKind::TokenAccuracy) {
        std::vector<std::vector<int>> pred, gold;
        for (size_t i = 0; i < n; ++i) {
            pred.push_back(predict(net, head, view, split[i]));
            gold.push_back(split[i].labels);
        }
        return token_accuracy(pred, gold);
    }
    std::vector<std::vector<Span>> pred, gold;
    auto decode = [&](const std::vector<int>& ids) {
        std::vector<std::string> labels;
        for (int id : ids) labels.push_back(spec.label_alphabet.at(size_t(id)));
        return extract_spans(labels, spec.scheme);
    };
    for (size_t i = 0; i < n; ++i) {
        pred.push_back(decode(predict(net, head, view, split[i])));
        gold.push_back(decode(split[i].labels));
    }
    return span_f1(pred, gold).f1;
}

double run_steps(BaseNetwork& net, TaskHead& head, const MaskMatrix* mask,
                 const MaskView* view, const std::vector<EncodedSentence>& train,
                 long steps, const TrainerConfig& cfg, Rng& sample_rng,
                 Rng& dropout_rng) {
    if (train.empty()) throw ConfigError("run_steps: empty training split");
    double last = 0;
    for (long s = 0; s < steps; ++s) {
        std::vector<const EncodedSentence*> batch;
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(&train[size_t(sample_rng.uniform_int(int(train.size())))]);
        last = masked_update(net, head, mask, view, batch, cfg.lr, cfg.clip_norm, 1.0,
                             dropout_rng);
    }
    return last;
}

TrainResult train_parallel(BaseNetwork& net, std::vector<TaskHead>& heads,
                           const std::vector<MaskMatrix>* masks,
                           const std::vector<TaskSpec>& tasks, const TrainerConfig& cfg,
                           std::ostream* log, const TrainObserver* obs) {
    const size_t T = tasks.size();
    if (T == 0) throw ConfigError("train_parallel: no tasks");
    if (heads.size() != T) throw ConfigError("train_parallel: head/task count mismatch");
    if (masks && masks->size() != T)
        throw ConfigError("train_parallel: mask/task count mismatch");
    std::vector<double> lambdas = cfg.lambdas;
    if (lambdas.empty()) lambdas.assign(T, 1.0);
    if (lambdas.size() != T) throw ConfigError("train_parallel: lambda count mismatch");
    for (double l : lambdas)
        if (l <= 0) throw ConfigError("train_parallel: lambda must be positive");
    if (cfg.batch_size < 1) throw ConfigError("train_parallel: batch size < 1");

    std::vector<MaskView> views;
    if (masks)
        for (const auto& m : *masks) views.push_back(make_mask_view(net.space(), m));

    std::vector<size_t> sizes;
    for (const auto& t : tasks) {
        if (t.train.empty()) throw ConfigError("train_parallel: empty train split");
        sizes.push_back(t.train.size());
    }

    Rng sample_rng = Rng::substream(cfg.seed, "train/sample");
    Rng dropout_rng = Rng::substream(cfg.seed, "train/dropout");

    TrainResult res;
    res.best_dev.assign(T, -1.0);
    res.best_ckpt.resize(T);
    res.final_dev.assign(T, 0.0);
    std::vector<double> running_loss(T, 0.0);
    std::vector<long> task_updates(T, 0);

    auto eval_all = [&](long step) {
        for (size_t t = 0; t < T; ++t) {
            const MaskView* v = masks ? &views[t] : nullptr;
            const double dev = evaluate_split(net, heads[t], v, tasks[t], tasks[t].dev,
                                              cfg.eval_max_sentences);
            res.final_dev[t] = dev;
            if (dev > res.best_dev[t]) {
                res.best_dev[t] = dev;
                res.best_ckpt[t] = snapshot(net, {heads[t]}, "best:" + tasks[t].name);
            }
            if (log) {
                nlohmann::json rec = {
                    {"step", step},
                    {"task", tasks[t].name},
                    {"dev_metric", dev},
                    {"train_loss",
                     task_updates[t] ? running_loss[t] / double(task_updates[t]) : 0.0}};
                (*log) << rec.dump() << '\n';
            }
            running_loss[t] = 0;
            task_updates[t] = 0;
        }
    };

    for (long step = 1; step <= cfg.steps; ++step) {
        const int t = sample_task(sizes, sample_rng);
        std::vector<const EncodedSentence*> batch;
        const auto& train = tasks[size_t(t)].train;
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(&train[size_t(sample_rng.uniform_int(int(train.size())))]);
        const MaskMatrix* m = masks ? &(*masks)[size_t(t)] : nullptr;
        const MaskView* v = masks ? &views[size_t(t)] : nullptr;
        const double loss = masked_update(net, heads[size_t(t)], m, v, batch, cfg.lr,
                                          cfg.clip_norm, lambdas[size_t(t)], dropout_rng);
        running_loss[size_t(t)] += loss;
        ++task_updates[size_t(t)];
        if (obs && obs->after_update) obs->after_update(step, t);
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0) eval_all(step);
        res.steps_done = step;
    }
    // eval_every < 0 disables evaluation entirely (warmup runs)
    if (cfg.eval_every == 0 ||
        (cfg.eval_every > 0 && (cfg.steps == 0 || cfg.steps % cfg.eval_every != 0)))
        eval_all(cfg.steps);
    return res;
}

}  // namespace ss
