#include "ss/imp.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace ss {

Checkpoint multi_task_warmup(BaseNetwork& net, std::vector<TaskHead>& heads,
                             const std::vector<TaskSpec>& tasks, long warmup_steps,
                             const TrainerConfig& tcfg) {
    if (tasks.empty()) throw ConfigError("multi_task_warmup: no tasks");
    if (warmup_steps < 0) throw ConfigError("multi_task_warmup: negative step count");
    if (warmup_steps > 0) {
        TrainerConfig tc = tcfg;
        tc.steps = warmup_steps;
        tc.eval_every = -1;
        tc.seed = mix64(tcfg.seed ^ fnv1a64("warmup"));
        train_parallel(net, heads, nullptr, tasks, tc);
    }
    return snapshot(net, heads, "warmup");
}

MaskMatrix prune_step(const std::vector<double>& prunable_theta,
                      const MaskMatrix& current, double alpha) {
    if (prunable_theta.size() != current.bits.size())
        throw StructuralError("prune_step: theta/mask length mismatch");
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("prune_step: alpha outside (0,1)");
    std::vector<size_t> kept;
    for (size_t i = 0; i < current.bits.size(); ++i)
        if (current.bits[i]) kept.push_back(i);
    if (kept.empty()) throw ProgressStallError("prune_step: no kept bits remain");
    const size_t n = size_t(std::floor(alpha * double(kept.size())));
    if (n == 0)
        throw ProgressStallError("prune_step: floor(alpha*remaining) = 0, cannot make progress");
    std::nth_element(kept.begin(), kept.begin() + long(n) - 1, kept.end(),
                     [&](size_t a, size_t b) {
                         const double ma = std::fabs(prunable_theta[a]);
                         const double mb = std::fabs(prunable_theta[b]);
                         if (ma != mb) return ma < mb;
                         return a < b;  // ties: lowest flat index pruned first
                     });
    MaskMatrix next = current;
    next.iteration = current.iteration + 1;
    for (size_t i = 0; i < n; ++i) next.bits[kept[i]] = 0;
    return next;
}

namespace {

TaskHead clone_head(const TaskHead& h) {
    TaskHead c = h;
    c.w = tensor(h.w->shape, h.w->data, true);
    c.b = tensor(h.b->shape, h.b->data, true);
    if (h.kind == HeadKind::Crf) c.trans = tensor(h.trans->shape, h.trans->data, true);
    return c;
}

std::vector<Candidate> imp_for_task(const BaseNetwork& proto, const TaskHead& proto_head,
                                    const TaskSpec& spec, const ImpConfig& cfg,
                                    const TrainerConfig& tcfg, const Checkpoint& warm) {
    Rng scratch(0);
    BaseNetwork net(proto.config(), scratch);
    restore_encoder(warm, net);
    TaskHead head = clone_head(proto_head);
    restore_head(warm, head);

    std::vector<Candidate> out;
    MaskMatrix mask;
    mask.task_id = spec.name;
    mask.iteration = 1;
    mask.bits.assign(net.space().prunable_count(), 1);

    for (uint32_t z = 1;; ++z) {
        // loop-top stop: the mask produced by the last prune is not trained
        // or recorded once it reaches the sparsity floor
        if (sparsity(mask, net.space()) <= cfg.min_sparsity) break;
        restore_encoder(warm, net);
        restore_head(warm, head);
        auto view = make_mask_view(net.space(), mask);
        // substreams keyed by iteration only: tasks with identical data and
        // seed walk identical trajectories
        Rng sample = Rng::substream(cfg.seed, "imp/z" + std::to_string(z) + "/sample");
        Rng dropout = Rng::substream(cfg.seed, "imp/z" + std::to_string(z) + "/dropout");
        run_steps(net, head, &mask, &view, spec.train, cfg.train_steps, tcfg, sample,
                  dropout);
        const double dev =
            evaluate_split(net, head, &view, spec, spec.dev, tcfg.eval_max_sentences);

        Candidate c;
        c.iteration = z;
        c.mask = mask;
        c.dev_score = dev;
        c.sparsity_value = sparsity(mask, net.space());
        c.remaining = mask.kept();
        out.push_back(std::move(c));

        mask = prune_step(net.flatten_prunable(), mask, cfg.alpha);
    }
    return out;
}

}  // namespace

CandidateLedger generate_subnets(BaseNetwork& net, std::vector<TaskHead>& heads,
                                 const std::vector<TaskSpec>& tasks,
                                 const ImpConfig& cfg, const TrainerConfig& tcfg,
                                 const Checkpoint& warm) {
    if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0)
        throw ConfigError("generate_subnets: alpha outside (0,1)");
    if (cfg.min_sparsity <= 0.0 || cfg.min_sparsity >= 1.0)
        throw ConfigError("generate_subnets: minimal sparsity outside (0,1)");
    if (cfg.train_steps < 1) throw ConfigError("generate_subnets: train_steps < 1");
    if (tasks.size() != heads.size())
        throw ConfigError("generate_subnets: task/head count mismatch");

    CandidateLedger ledger;
    if (cfg.concurrent_tasks && tasks.size() > 1) {
        std::vector<std::vector<Candidate>> results(tasks.size());
        std::vector<std::thread> workers;
        for (size_t t = 0; t < tasks.size(); ++t)
            workers.emplace_back([&, t] {
                results[t] = imp_for_task(net, heads[t], tasks[t], cfg, tcfg, warm);
            });
        for (auto& w : workers) w.join();
        for (size_t t = 0; t < tasks.size(); ++t)
            ledger.per_task[tasks[t].name] = std::move(results[t]);
    } else {
        for (size_t t = 0; t < tasks.size(); ++t)
            ledger.per_task[tasks[t].name] =
                imp_for_task(net, heads[t], tasks[t], cfg, tcfg, warm);
    }
    return ledger;
}

const Candidate& select_subnet(const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw SelectionError("select_subnet: no candidates");
    const double best_score =
        std::max_element(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) {
                             return a.dev_score < b.dev_score;
                         })
            ->dev_score;
    const Candidate* pick = nullptr;
    for (const auto& c : candidates) {
        if (c.dev_score < best_score - 1e-9) continue;
        if (!pick || c.sparsity_value < pick->sparsity_value) pick = &c;
    }
    return *pick;
}

void save_ledger(const CandidateLedger& ledger, const ParamSpace& space,
                 const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir + "/masks");
    std::ofstream os(dir + "/metrics.csv");
    if (!os) throw IntegrityError("cannot write ledger metrics: " + dir);
    os.precision(17);
    os << "task,z,remaining_count,sparsity,dev_score\n";
    for (const auto& [task, cands] : ledger.per_task)
        for (const auto& c : cands) {
            os << task << ',' << c.iteration << ',' << c.remaining << ','
               << c.sparsity_value << ',' << c.dev_score << '\n';
            save_mask(c.mask, space,
                      dir + "/masks/" + task + "_z" + std::to_string(c.iteration) + ".mask");
        }
}

CandidateLedger load_ledger(const std::string& dir, const ParamSpace& space) {
    std::ifstream is(dir + "/metrics.csv");
    if (!is) throw IntegrityError("ledger metrics.csv missing in " + dir);
    CandidateLedger ledger;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string task, z, rem, sp, dev;
        if (!std::getline(ls, task, ',') || !std::getline(ls, z, ',') ||
            !std::getline(ls, rem, ',') || !std::getline(ls, sp, ',') ||
            !std::getline(ls, dev))
            throw IntegrityError("malformed ledger metrics row: " + line);
        Candidate c;
        c.iteration = uint32_t(std::stoul(z));
        c.remaining = std::stoull(rem);
        c.sparsity_value = std::stod(sp);
        c.dev_score = std::stod(dev);
        const std::string mask_path =
            dir + "/masks/" + task + "_z" + z + ".mask";
        try {
            c.mask = load_mask(mask_path, space);
        } catch (const FormatError& e) {
            throw IntegrityError(std::string("ledger mask unreadable: ") + e.what());
        }
        ledger.per_task[task].push_back(std::move(c));
    }
    for (auto& [task, cands] : ledger.per_task)
        std::sort(cands.begin(), cands.end(),
                  [](const Candidate& a, const Candidate& b) {
                      return a.iteration < b.iteration;
                  });
    return ledger;
}

}  // namespace ss
