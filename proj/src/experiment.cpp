#include "ss/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ss {

namespace {

json task_to_json(const TaskConfig& t) {
    json j;
    j["name"] = t.name;
    j["train"] = t.train_path;
    j["dev"] = t.dev_path;
    j["test"] = t.test_path;
    j["token_column"] = t.token_column;
    j["label_column"] = t.label_column;
    j["generator"] = t.generator;
    j["pattern_index"] = t.pattern_index;
    j["gen_vocab_size"] = t.gen_vocab_size;
    j["gen_sentences"] = t.gen_sentences;
    j["relatedness"] = t.relatedness;
    j["base_task"] = t.base_task;
    j["max_position"] = t.max_position;
    j["scheme"] = t.scheme;
    j["convert_to"] = t.convert_to;
    j["head"] = t.head;
    j["metric"] = t.metric;
    return j;
}

TaskConfig task_from_json(const json& j) {
    TaskConfig t;
    t.name = j.at("name").get<std::string>();
    t.train_path = j.value("train", "");
    t.dev_path = j.value("dev", "");
    t.test_path = j.value("test", "");
    t.token_column = j.value("token_column", 0);
    t.label_column = j.value("label_column", -1);
    t.generator = j.value("generator", "");
    t.pattern_index = j.value("pattern_index", 1);
    t.gen_vocab_size = j.value("gen_vocab_size", 200);
    t.gen_sentences = j.value("gen_sentences", 2000);
    t.relatedness = j.value("relatedness", 0.5);
    t.base_task = j.value("base_task", "");
    t.max_position = j.value("max_position", 63);
    t.scheme = j.value("scheme", "none");
    t.convert_to = j.value("convert_to", "");
    t.head = j.value("head", "softmax");
    t.metric = j.value("metric", "accuracy");
    return t;
}

}  // namespace

std::string dump_config(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["mode"] = cfg.mode;
    j["output_dir"] = cfg.output_dir;
    j["min_count"] = cfg.min_count;
    j["pretrained_embeddings"] = cfg.pretrained_embeddings;
    j["model"] = {{"word_dim", cfg.model.word_dim},
                  {"hidden", cfg.model.hidden},
                  {"layers", cfg.model.layers},
                  {"dropout", cfg.model.dropout},
                  {"char_cnn", cfg.model.char_cnn},
                  {"char_dim", cfg.model.char_dim},
                  {"conv_width", cfg.model.conv_width},
                  {"conv_out", cfg.model.conv_out}};
    j["imp"] = {{"alpha", cfg.imp.alpha},
                {"min_sparsity", cfg.imp.min_sparsity},
                {"train_steps", cfg.imp.train_steps},
                {"warmup_steps", cfg.imp.warmup_steps},
                {"concurrent_tasks", cfg.imp.concurrent_tasks},
                {"train_epochs", cfg.imp_train_epochs}};
    j["trainer"] = {{"lr", cfg.trainer.lr},
                    {"batch_size", cfg.trainer.batch_size},
                    {"lambdas", cfg.trainer.lambdas},
                    {"steps", cfg.trainer.steps},
                    {"eval_every", cfg.trainer.eval_every},
                    {"eval_max_sentences", cfg.trainer.eval_max_sentences},
                    {"clip_norm", cfg.trainer.clip_norm},
                    {"epochs", cfg.trainer_epochs}};
    j["tasks"] = json::array();
    for (const auto& t : cfg.tasks) j["tasks"].push_back(task_to_json(t));
    j["hierarchy"] = cfg.hierarchy;
    return j.dump(2);
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.seed = j.value("seed", uint64_t(1));
        cfg.mode = j.value("mode", "sparse");
        cfg.output_dir = j.value("output_dir", "out");
        cfg.min_count = j.value("min_count", 1);
        cfg.pretrained_embeddings = j.value("pretrained_embeddings", "");
        if (j.contains("model")) {
            const auto& m = j["model"];
            cfg.model.word_dim = m.value("word_dim", 50);
            cfg.model.hidden = m.value("hidden", 50);
            cfg.model.layers = m.value("layers", 1);
            cfg.model.dropout = m.value("dropout", 0.5);
            cfg.model.char_cnn = m.value("char_cnn", false);
            cfg.model.char_dim = m.value("char_dim", 30);
            cfg.model.conv_width = m.value("conv_width", 3);
            cfg.model.conv_out = m.value("conv_out", 30);
        }
        if (j.contains("imp")) {
            const auto& m = j["imp"];
            cfg.imp.alpha = m.value("alpha", 0.1);
            cfg.imp.min_sparsity = m.value("min_sparsity", 0.5);
            cfg.imp.train_steps = m.value("train_steps", long(100));
            cfg.imp.warmup_steps = m.value("warmup_steps", long(0));
            cfg.imp.concurrent_tasks = m.value("concurrent_tasks", false);
            cfg.imp_train_epochs = m.value("train_epochs", 0.0);
        }
        if (j.contains("trainer")) {
            const auto& m = j["trainer"];
            cfg.trainer.lr = m.value("lr", 0.1);
            cfg.trainer.batch_size = m.value("batch_size", 10);
            cfg.trainer.lambdas = m.value("lambdas", std::vector<double>{});
            cfg.trainer.steps = m.value("steps", long(1000));
            cfg.trainer.eval_every = m.value("eval_every", 100);
            cfg.trainer.eval_max_sentences = m.value("eval_max_sentences", 0);
            cfg.trainer.clip_norm = m.value("clip_norm", 5.0);
            cfg.trainer_epochs = m.value("epochs", 0.0);
        }
        for (const auto& t : j.value("tasks", json::array()))
            cfg.tasks.push_back(task_from_json(t));
        cfg.hierarchy = j.value("hierarchy", std::map<std::string, int>{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }
    if (const char* env = std::getenv("SS_OUTPUT_DIR")) cfg.output_dir = env;
    if (const char* env = std::getenv("SS_SEED")) cfg.seed = std::stoull(env);
    if (cfg.mode != "single" && cfg.mode != "hard" && cfg.mode != "hierarchical" &&
        cfg.mode != "sparse")
        throw ConfigError("unknown sharing mode: " + cfg.mode);
    if (cfg.tasks.empty()) throw ConfigError("config declares no tasks");
    if (cfg.mode == "hierarchical")
        for (const auto& t : cfg.tasks)
            if (!cfg.hierarchy.count(t.name))
                throw ConfigError("hierarchical mode: no layer for task " + t.name);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

namespace {

MetricKind metric_from_string(const std::string& s) {
    if (s == "accuracy" || s == "acc") return MetricKind::TokenAccuracy;
    if (s == "span_f1" || s == "f1") return MetricKind::SpanF1;
    throw ConfigError("unknown metric: " + s);
}

HeadKind head_from_string(const std::string& s) {
    if (s == "softmax") return HeadKind::Softmax;
    if (s == "crf") return HeadKind::Crf;
    throw ConfigError("unknown head kind: " + s);
}

void convert_dataset(TaskDataset& ds, Scheme from, Scheme to, int* repairs) {
    for (auto* split : {&ds.train, &ds.dev, &ds.test})
        for (auto& s : *split) s.labels = convert_scheme(s.labels, from, to, repairs);
    rebuild_alphabet(ds);
}

}  // namespace

BuiltTasks build_tasks(const ExperimentConfig& cfg) {
    BuiltTasks out;
    out.raw.resize(cfg.tasks.size());
    std::vector<std::string> schemes(cfg.tasks.size());

    // pattern pairs are generated once per parameter set
    std::map<std::string, std::pair<TaskDataset, TaskDataset>> pattern_cache;

    for (size_t i = 0; i < cfg.tasks.size(); ++i) {
        const auto& t = cfg.tasks[i];
        if (t.generator.empty()) {
            if (t.train_path.empty()) throw ConfigError("task " + t.name + ": no data");
            TaskDataset ds;
            ds.task_id = t.name;
            ds.train = read_conll(t.train_path, t.token_column, t.label_column);
            if (!t.dev_path.empty())
                ds.dev = read_conll(t.dev_path, t.token_column, t.label_column);
            if (!t.test_path.empty())
                ds.test = read_conll(t.test_path, t.token_column, t.label_column);
            if (ds.dev.empty() && !ds.train.empty()) {
                // hold out a tail slice when the corpus ships no dev split
                const size_t k = std::max<size_t>(1, ds.train.size() / 10);
                ds.dev.assign(ds.train.end() - long(k), ds.train.end());
                ds.train.resize(ds.train.size() - k);
            }
            rebuild_alphabet(ds);
            schemes[i] = t.scheme;
            if (!t.convert_to.empty()) {
                convert_dataset(ds, scheme_from_string(t.scheme),
                                scheme_from_string(t.convert_to), &out.repairs);
                schemes[i] = t.convert_to;
            }
            out.raw[i] = std::move(ds);
        } else if (t.generator == "pattern") {
            std::ostringstream key;
            key << t.gen_vocab_size << '/' << t.gen_sentences << '/' << t.relatedness;
            auto it = pattern_cache.find(key.str());
            if (it == pattern_cache.end()) {
                const uint64_t gseed = mix64(cfg.seed ^ fnv1a64("gen/pattern"));
                it = pattern_cache
                         .emplace(key.str(),
                                  gen_pattern_tasks(gseed, t.gen_vocab_size,
                                                    t.gen_sentences, t.relatedness))
                         .first;
            }
            out.raw[i] = t.pattern_index == 2 ? it->second.second : it->second.first;
            out.raw[i].task_id = t.name;
            schemes[i] = "BIO2";
        } else if (t.generator != "position") {
            throw ConfigError("unknown generator: " + t.generator);
        }
    }
    for (size_t i = 0; i < cfg.tasks.size(); ++i) {
        const auto& t = cfg.tasks[i];
        if (t.generator != "position") continue;
        const TaskDataset* base = nullptr;
        for (size_t k = 0; k < cfg.tasks.size(); ++k)
            if (cfg.tasks[k].name == t.base_task && cfg.tasks[k].generator != "position")
                base = &out.raw[k];
        if (!base) throw ConfigError("position task " + t.name + ": bad base_task");
        out.raw[i] = gen_position_task(*base, t.max_position);
        out.raw[i].task_id = t.name;
        schemes[i] = "none";
    }

    std::vector<LabeledSentence> all_train;
    for (const auto& ds : out.raw)
        all_train.insert(all_train.end(), ds.train.begin(), ds.train.end());
    out.vocab = build_vocab(all_train, cfg.min_count);
    if (cfg.model.char_cnn) out.char_vocab = build_char_vocab(all_train);

    for (size_t i = 0; i < cfg.tasks.size(); ++i) {
        const auto& t = cfg.tasks[i];
        const auto& ds = out.raw[i];
        TaskSpec spec;
        spec.name = t.name;
        spec.label_alphabet = ds.label_alphabet;
        spec.metric = metric_from_string(t.metric);
        spec.scheme = scheme_from_string(schemes[i]);
        spec.head_kind = head_from_string(t.head);
        if (spec.metric == MetricKind::SpanF1 && spec.scheme == Scheme::None)
            throw ConfigError("task " + t.name + ": span_f1 needs a tagging scheme");
        const auto ids = label_id_map(ds.label_alphabet);
        const Vocab* cv = out.char_vocab ? &*out.char_vocab : nullptr;
        auto enc = [&](const std::vector<LabeledSentence>& split,
                       std::vector<EncodedSentence>& dst) {
            for (const auto& s : split)
                dst.push_back(encode_sentence(s, out.vocab, ids, cv, cfg.model.conv_width));
        };
        enc(ds.train, spec.train);
        enc(ds.dev, spec.dev);
        enc(ds.test, spec.test);
        out.specs.push_back(std::move(spec));
    }
    return out;
}

int load_pretrained_embeddings(BaseNetwork& net, const Vocab& vocab,
                               const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open embedding file: " + path);
    auto table = net.param("word_emb");
    const int d = net.config().word_dim;
    std::string line;
    int applied = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        auto it = vocab.ids.find(tok);
        if (it == vocab.ids.end()) continue;
        std::vector<double> vec;
        double v;
        while (ls >> v) vec.push_back(v);
        if (int(vec.size()) != d)
            throw FormatError("embedding row dimension mismatch for token " + tok);
        std::copy(vec.begin(), vec.end(),
                  table->data.begin() + size_t(it->second) * d);
        ++applied;
    }
    return applied;
}

namespace {

struct Workspace {
    ExperimentConfig cfg;
    BuiltTasks bt;
    ModelConfig mc;
    TrainerConfig tc;
    ImpConfig ic;
};

Workspace make_workspace(const ExperimentConfig& cfg) {
    Workspace w;
    w.cfg = cfg;
    w.bt = build_tasks(cfg);
    w.mc = cfg.model;
    w.mc.vocab_size = w.bt.vocab.size();
    if (w.bt.char_vocab) w.mc.char_vocab_size = w.bt.char_vocab->size();
    w.tc = cfg.trainer;
    w.tc.seed = cfg.seed;
    w.ic = cfg.imp;
    w.ic.seed = cfg.seed;
    if (cfg.imp_train_epochs > 0 || cfg.trainer_epochs > 0) {
        size_t total = 0;
        for (const auto& spec : w.bt.specs) total += spec.train.size();
        const double mean = double(total) / double(w.bt.specs.size());
        const double per_epoch = std::max(1.0, mean / double(w.tc.batch_size));
        if (cfg.imp_train_epochs > 0)
            w.ic.train_steps = std::max<long>(1, long(cfg.imp_train_epochs * per_epoch));
        if (cfg.trainer_epochs > 0)
            w.tc.steps = std::max<long>(1, long(cfg.trainer_epochs * per_epoch));
    }
    return w;
}

BaseNetwork make_net(const Workspace& w) {
    Rng init = Rng::substream(w.cfg.seed, "init");
    BaseNetwork net(w.mc, init);
    if (!w.cfg.pretrained_embeddings.empty())
        load_pretrained_embeddings(net, w.bt.vocab, w.cfg.pretrained_embeddings);
    return net;
}

std::vector<TaskHead> make_heads(const Workspace& w, const BaseNetwork& net) {
    std::vector<TaskHead> heads;
    for (const auto& spec : w.bt.specs) {
        Rng hr = Rng::substream(w.cfg.seed, "init/head/" + spec.name);
        heads.push_back(make_head(spec.name, spec.head_kind, net.output_dim(),
                                  int(spec.label_alphabet.size()), hr));
    }
    return heads;
}

std::vector<MaskMatrix> hierarchy_masks_for(const Workspace& w, const ParamSpace& space) {
    std::vector<int> layers;
    for (const auto& spec : w.bt.specs) {
        auto it = w.cfg.hierarchy.find(spec.name);
        if (it == w.cfg.hierarchy.end())
            throw ConfigError("no hierarchy layer for task " + spec.name);
        layers.push_back(it->second);
    }
    auto masks = hierarchical_masks(space, layers);
    for (size_t t = 0; t < masks.size(); ++t) masks[t].task_id = w.bt.specs[t].name;
    return masks;
}

void write_selections(const Workspace& w, const std::vector<MaskMatrix>& selected,
                      const ParamSpace& space) {
    fs::create_directories(w.cfg.output_dir + "/selected");
    json sel;
    for (const auto& m : selected) {
        save_mask(m, space, w.cfg.output_dir + "/selected/" + m.task_id + ".mask");
        sel[m.task_id] = {{"iteration", m.iteration},
                          {"remaining", m.kept()},
                          {"sparsity", sparsity(m, space)}};
    }
    std::ofstream os(w.cfg.output_dir + "/selections.json");
    os << sel.dump(2) << '\n';
}

std::vector<MaskMatrix> read_selections(const Workspace& w, const ParamSpace& space) {
    std::vector<MaskMatrix> masks;
    for (const auto& spec : w.bt.specs) {
        const std::string path = w.cfg.output_dir + "/selected/" + spec.name + ".mask";
        if (!fs::exists(path)) throw IntegrityError("missing selected mask: " + path);
        masks.push_back(load_mask(path, space));
    }
    return masks;
}

double test_metric(BaseNetwork& net, TaskHead& head, const Checkpoint& best,
                   const MaskView* view, const TaskSpec& spec) {
    restore_encoder(best, net);
    restore_head(best, head);
    return evaluate_split(net, head, view, spec, spec.test);
}

void write_metrics(const Workspace& w, const RunOutcome& out) {
    json j;
    j["mode"] = w.cfg.mode;
    j["seed"] = w.cfg.seed;
    j["tasks"] = out.per_task;
    std::ofstream os(w.cfg.output_dir + "/final_metrics.json");
    os << j.dump(2) << '\n';
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(cfg.output_dir + "/config.json");
        os << dump_config(cfg) << '\n';
    }
    std::ofstream log(cfg.output_dir + "/train_log.jsonl");
    RunOutcome out;

    if (cfg.mode == "single") {
        for (size_t t = 0; t < w.bt.specs.size(); ++t) {
            BaseNetwork net = make_net(w);
            auto heads = make_heads(w, net);
            std::vector<TaskHead> one = {heads[t]};
            std::vector<TaskSpec> spec = {w.bt.specs[t]};
            auto res = train_parallel(net, one, nullptr, spec, w.tc, &log);
            save_checkpoint(res.best_ckpt[0],
                            cfg.output_dir + "/best_" + spec[0].name + ".ckpt",
                            dump_config(cfg));
            out.per_task[spec[0].name]["dev"] = 100.0 * res.best_dev[0];
            out.per_task[spec[0].name]["test"] =
                100.0 * test_metric(net, one[0], res.best_ckpt[0], nullptr, spec[0]);
        }
        write_metrics(w, out);
        return out;
    }

    BaseNetwork net = make_net(w);
    auto heads = make_heads(w, net);
    save_checkpoint(snapshot(net, heads, "theta0"), cfg.output_dir + "/theta0.ckpt",
                    dump_config(cfg));

    std::vector<MaskMatrix> masks;
    bool use_masks = false;

    if (cfg.mode == "hierarchical") {
        masks = hierarchy_masks_for(w, net.space());
        use_masks = true;
    } else if (cfg.mode == "sparse") {
        auto warm = multi_task_warmup(net, heads, w.bt.specs, w.ic.warmup_steps, w.tc);
        save_checkpoint(warm, cfg.output_dir + "/warmup.ckpt", dump_config(cfg));
        auto ledger = generate_subnets(net, heads, w.bt.specs, w.ic, w.tc, warm);
        save_ledger(ledger, net.space(), cfg.output_dir + "/ledger");
        for (const auto& spec : w.bt.specs) {
            auto& cands = ledger.per_task.at(spec.name);
            masks.push_back(select_subnet(cands).mask);
        }
        write_selections(w, masks, net.space());
        analysis_report(ledger, masks, net.space(), cfg.output_dir + "/analysis");
        restore(warm, net, heads);  // parallel training starts from theta^(w)
        use_masks = true;
    }

    auto res = train_parallel(net, heads, use_masks ? &masks : nullptr, w.bt.specs,
                              w.tc, &log);
    std::vector<MaskView> views;
    if (use_masks)
        for (const auto& m : masks) views.push_back(make_mask_view(net.space(), m));
    for (size_t t = 0; t < w.bt.specs.size(); ++t) {
        save_checkpoint(res.best_ckpt[t],
                        cfg.output_dir + "/best_" + w.bt.specs[t].name + ".ckpt",
                        dump_config(cfg));
        const MaskView* v = use_masks ? &views[t] : nullptr;
        out.per_task[w.bt.specs[t].name]["dev"] = 100.0 * res.best_dev[t];
        out.per_task[w.bt.specs[t].name]["test"] =
            100.0 * test_metric(net, heads[t], res.best_ckpt[t], v, w.bt.specs[t]);
    }
    write_metrics(w, out);
    return out;
}

int stage_warmup(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    fs::create_directories(cfg.output_dir);
    BaseNetwork net = make_net(w);
    auto heads = make_heads(w, net);
    save_checkpoint(snapshot(net, heads, "theta0"), cfg.output_dir + "/theta0.ckpt",
                    dump_config(cfg));
    auto warm = multi_task_warmup(net, heads, w.bt.specs, w.ic.warmup_steps, w.tc);
    save_checkpoint(warm, cfg.output_dir + "/warmup.ckpt", dump_config(cfg));
    return 0;
}

int stage_generate_subnets(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    const std::string warm_path = cfg.output_dir + "/warmup.ckpt";
    if (!fs::exists(warm_path)) throw IntegrityError("missing checkpoint: " + warm_path);
    BaseNetwork net = make_net(w);
    auto heads = make_heads(w, net);
    auto warm = load_checkpoint(warm_path);
    auto ledger = generate_subnets(net, heads, w.bt.specs, w.ic, w.tc, warm);
    save_ledger(ledger, net.space(), cfg.output_dir + "/ledger");
    return 0;
}

int stage_select(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    Rng scratch(0);
    BaseNetwork net(w.mc, scratch);
    auto ledger = load_ledger(cfg.output_dir + "/ledger", net.space());
    std::vector<MaskMatrix> masks;
    for (const auto& spec : w.bt.specs) {
        auto it = ledger.per_task.find(spec.name);
        if (it == ledger.per_task.end())
            throw IntegrityError("ledger has no candidates for task " + spec.name);
        masks.push_back(select_subnet(it->second).mask);
    }
    write_selections(w, masks, net.space());
    return 0;
}

int stage_train(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    const std::string warm_path = cfg.output_dir + "/warmup.ckpt";
    if (!fs::exists(warm_path)) throw IntegrityError("missing checkpoint: " + warm_path);
    BaseNetwork net = make_net(w);
    auto heads = make_heads(w, net);
    auto warm = load_checkpoint(warm_path);
    restore(warm, net, heads);
    auto masks = read_selections(w, net.space());
    std::ofstream log(cfg.output_dir + "/train_log.jsonl");
    auto res = train_parallel(net, heads, &masks, w.bt.specs, w.tc, &log);
    for (size_t t = 0; t < w.bt.specs.size(); ++t)
        save_checkpoint(res.best_ckpt[t],
                        cfg.output_dir + "/best_" + w.bt.specs[t].name + ".ckpt",
                        dump_config(cfg));
    return 0;
}

int stage_evaluate(const ExperimentConfig& cfg) {
    Workspace w = make_workspace(cfg);
    Rng scratch(0);
    BaseNetwork net(w.mc, scratch);
    auto heads = make_heads(w, net);
    std::vector<MaskMatrix> masks;
    const bool use_masks = cfg.mode == "sparse" || cfg.mode == "hierarchical";
    if (use_masks) masks = read_selections(w, net.space());
    RunOutcome out;
    for (size_t t = 0; t < w.bt.specs.size(); ++t) {
        const std::string path =
            cfg.output_dir + "/best_" + w.bt.specs[t].name + ".ckpt";
        if (!fs::exists(path)) throw IntegrityError("missing checkpoint: " + path);
        auto ckpt = load_checkpoint(path);
        MaskView view;
        if (use_masks) view = make_mask_view(net.space(), masks[t]);
        out.per_task[w.bt.specs[t].name]["test"] =
            100.0 * test_metric(net, heads[t], ckpt, use_masks ? &view : nullptr,
                                w.bt.specs[t]);
    }
    write_metrics(w, out);
    return 0;
}

int analyze_dir(const std::string& output_dir) {
    const std::string cfg_path = output_dir + "/config.json";
    if (!fs::exists(cfg_path)) throw IntegrityError("missing config echo: " + cfg_path);
    ExperimentConfig cfg = load_config(cfg_path);
    cfg.output_dir = output_dir;
    Workspace w = make_workspace(cfg);
    Rng scratch(0);
    BaseNetwork net(w.mc, scratch);
    CandidateLedger ledger;
    std::vector<MaskMatrix> selected;
    try {
        ledger = load_ledger(output_dir + "/ledger", net.space());
        selected = read_selections(w, net.space());
    } catch (const FormatError& e) {
        throw IntegrityError(std::string("corrupt ledger artifact: ") + e.what());
    }
    analysis_report(ledger, selected, net.space(), output_dir + "/analysis");
    return 0;
}

SynthOutcome synthetic_negative_transfer_run(uint64_t seed, const SynthConfig& sc) {
    auto pair = gen_pattern_tasks(seed, sc.vocab_size, sc.sentences, sc.relatedness);
    TaskDataset pattern = std::move(pair.first);
    pattern.task_id = "pattern";
    TaskDataset position = gen_position_task(pattern, sc.max_position);

    Vocab vocab = build_vocab(pattern.train, 1);
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.word_dim = sc.word_dim;
    mc.hidden = sc.hidden;
    mc.layers = 1;
    mc.dropout = sc.dropout;

    auto make_spec = [&](const TaskDataset& ds, MetricKind metric, Scheme scheme) {
        TaskSpec spec;
        spec.name = ds.task_id;
        spec.label_alphabet = ds.label_alphabet;
        spec.metric = metric;
        spec.scheme = scheme;
        spec.head_kind = HeadKind::Softmax;
        const auto ids = label_id_map(ds.label_alphabet);
        for (const auto& s : ds.train)
            spec.train.push_back(encode_sentence(s, vocab, ids, nullptr, 0));
        for (const auto& s : ds.dev)
            spec.dev.push_back(encode_sentence(s, vocab, ids, nullptr, 0));
        for (const auto& s : ds.test)
            spec.test.push_back(encode_sentence(s, vocab, ids, nullptr, 0));
        return spec;
    };
    std::vector<TaskSpec> specs = {
        make_spec(pattern, MetricKind::SpanF1, Scheme::BIO2),
        make_spec(position, MetricKind::TokenAccuracy, Scheme::None)};

    TrainerConfig tc;
    tc.lr = sc.lr;
    tc.batch_size = sc.batch_size;
    tc.steps = sc.train_steps;
    tc.eval_every = sc.eval_every;
    tc.eval_max_sentences = sc.eval_max_sentences;
    tc.seed = seed;

    auto fresh = [&]() {
        Rng init = Rng::substream(seed, "init");
        return BaseNetwork(mc, init);
    };
    auto fresh_heads = [&](const BaseNetwork& net) {
        std::vector<TaskHead> heads;
        for (const auto& spec : specs) {
            Rng hr = Rng::substream(seed, "init/head/" + spec.name);
            heads.push_back(make_head(spec.name, spec.head_kind, net.output_dim(),
                                      int(spec.label_alphabet.size()), hr));
        }
        return heads;
    };

    SynthOutcome out;
    // single-task baselines
    for (size_t t = 0; t < specs.size(); ++t) {
        BaseNetwork net = fresh();
        auto heads = fresh_heads(net);
        std::vector<TaskHead> one = {heads[t]};
        std::vector<TaskSpec> spec = {specs[t]};
        auto res = train_parallel(net, one, nullptr, spec, tc);
        const double m = 100.0 * test_metric(net, one[0], res.best_ckpt[0], nullptr, spec[0]);
        (t == 0 ? out.single_pattern : out.single_position) = m;
    }
    // multi-task modes see twice the data stream, so they get twice the
    // steps; per-task update counts then match the single-task baselines
    TrainerConfig mtc = tc;
    mtc.steps = tc.steps * long(specs.size());

    // hard sharing
    {
        BaseNetwork net = fresh();
        auto heads = fresh_heads(net);
        auto res = train_parallel(net, heads, nullptr, specs, mtc);
        out.hard_pattern =
            100.0 * test_metric(net, heads[0], res.best_ckpt[0], nullptr, specs[0]);
        out.hard_position =
            100.0 * test_metric(net, heads[1], res.best_ckpt[1], nullptr, specs[1]);
    }
    // sparse sharing
    {
        BaseNetwork net = fresh();
        auto heads = fresh_heads(net);
        ImpConfig ic;
        ic.alpha = sc.alpha;
        ic.min_sparsity = sc.min_sparsity;
        ic.train_steps = sc.imp_steps;
        ic.seed = seed;
        auto warm = multi_task_warmup(net, heads, specs, sc.warmup_steps, tc);
        auto ledger = generate_subnets(net, heads, specs, ic, tc, warm);
        std::vector<MaskMatrix> masks;
        for (const auto& spec : specs)
            masks.push_back(select_subnet(ledger.per_task.at(spec.name)).mask);
        restore(warm, net, heads);
        auto res = train_parallel(net, heads, &masks, specs, mtc);
        std::vector<MaskView> views;
        for (const auto& m : masks) views.push_back(make_mask_view(net.space(), m));
        out.sparse_pattern =
            100.0 * test_metric(net, heads[0], res.best_ckpt[0], &views[0], specs[0]);
        out.sparse_position =
            100.0 * test_metric(net, heads[1], res.best_ckpt[1], &views[1], specs[1]);
    }
    return out;
}

int cmd_negative_transfer(uint64_t base_seed, int n_seeds, const std::string& out_dir,
                          const SynthConfig& sc) {
    if (n_seeds < 1) throw ConfigError("negative-transfer: need at least one seed");
    fs::create_directories(out_dir);
    const size_t ns = size_t(n_seeds);
    std::vector<SynthOutcome> results(ns);
    std::vector<std::thread> workers;
    for (int s = 0; s < n_seeds; ++s)
        workers.emplace_back([&, s] {
            results[size_t(s)] = synthetic_negative_transfer_run(base_seed + uint64_t(s), sc);
        });
    for (auto& w : workers) w.join();

    std::ofstream csv(out_dir + "/negative_transfer.csv");
    csv.precision(10);
    csv << "seed,mode,task,metric,delta\n";
    SynthOutcome mean;
    for (int s = 0; s < n_seeds; ++s) {
        const auto& r = results[size_t(s)];
        const uint64_t sd = base_seed + uint64_t(s);
        csv << sd << ",single,pattern," << r.single_pattern << ",0\n";
        csv << sd << ",single,position," << r.single_position << ",0\n";
        csv << sd << ",hard,pattern," << r.hard_pattern << ','
            << r.hard_pattern - r.single_pattern << '\n';
        csv << sd << ",hard,position," << r.hard_position << ','
            << r.hard_position - r.single_position << '\n';
        csv << sd << ",sparse,pattern," << r.sparse_pattern << ','
            << r.sparse_pattern - r.single_pattern << '\n';
        csv << sd << ",sparse,position," << r.sparse_position << ','
            << r.sparse_position - r.single_position << '\n';
        mean.single_pattern += r.single_pattern / n_seeds;
        mean.single_position += r.single_position / n_seeds;
        mean.hard_pattern += r.hard_pattern / n_seeds;
        mean.hard_position += r.hard_position / n_seeds;
        mean.sparse_pattern += r.sparse_pattern / n_seeds;
        mean.sparse_position += r.sparse_position / n_seeds;
    }
    std::ofstream sm(out_dir + "/summary.txt");
    auto line = [&](const char* name, double pat, double pos) {
        sm << name << ": pattern F1 " << pat << " (delta " << pat - mean.single_pattern
           << "), position acc " << pos << " (delta " << pos - mean.single_position
           << ")\n";
    };
    sm.precision(5);
    sm << "Synthetic negative-transfer experiment over " << n_seeds << " seeds\n";
    line("single", mean.single_pattern, mean.single_position);
    line("hard  ", mean.hard_pattern, mean.hard_position);
    line("sparse", mean.sparse_pattern, mean.sparse_position);
    std::ifstream echo(out_dir + "/summary.txt");
    std::cout << echo.rdbuf();
    return 0;
}

int cmd_synth_data(uint64_t seed, int vocab_size, int sentences, double relatedness,
                   const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto pair = gen_pattern_tasks(seed, vocab_size, sentences, relatedness);
    auto pos = gen_position_task(pair.first, 63);
    auto dump = [&](const TaskDataset& ds, const std::string& name) {
        write_conll(out_dir + "/" + name + "_train.conll", ds.train);
        write_conll(out_dir + "/" + name + "_dev.conll", ds.dev);
        write_conll(out_dir + "/" + name + "_test.conll", ds.test);
    };
    dump(pair.first, "pattern1");
    dump(pair.second, "pattern2");
    dump(pos, "position");
    return 0;
}

}  // namespace ss
