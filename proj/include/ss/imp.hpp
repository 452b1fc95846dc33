#pragma once

#include "ss/ledger.hpp"
#include "ss/trainer.hpp"

namespace ss {

struct ImpConfig {
    double alpha = 0.1;         // fraction of remaining weights pruned per iteration
    double min_sparsity = 0.5;  // remaining-fraction floor that stops the loop
    long train_steps = 100;     // k steps per iteration
    long warmup_steps = 0;      // w multi-task warmup steps
    uint64_t seed = 0;
    bool concurrent_tasks = false;
};

// w steps of the unmasked multi-task loop from theta^(0); w=0 returns the
// initial parameters unchanged.
Checkpoint multi_task_warmup(BaseNetwork& net, std::vector<TaskHead>& heads,
                             const std::vector<TaskSpec>& tasks, long warmup_steps,
                             const TrainerConfig& tcfg);

// Flips to 0 the floor(alpha * remaining) kept bits with the smallest
// trained magnitudes, globally across all prunable blocks. Magnitude ties
// break toward the lowest flat index.
MaskMatrix prune_step(const std::vector<double>& prunable_theta,
                      const MaskMatrix& current, double alpha);

// Per-task iterative magnitude pruning with resets to the warmup
// checkpoint; records every intermediate mask with its dev score.
CandidateLedger generate_subnets(BaseNetwork& net, std::vector<TaskHead>& heads,
                                 const std::vector<TaskSpec>& tasks,
                                 const ImpConfig& cfg, const TrainerConfig& tcfg,
                                 const Checkpoint& warm);

// Best dev score; among candidates within 1e-9 of the best, the lowest
// sparsity (most pruned) wins.
const Candidate& select_subnet(const std::vector<Candidate>& candidates);

}  // namespace ss
