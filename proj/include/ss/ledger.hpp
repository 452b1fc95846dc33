#pragma once

#include <map>
#include <string>
#include <vector>

#include "ss/masks.hpp"

namespace ss {

// One recorded pruning iteration: the mask that was trained, its dev
// score, and its sparsity at recording time.
struct Candidate {
    uint32_t iteration = 0;
    MaskMatrix mask;
    double dev_score = 0.0;
    double sparsity_value = 1.0;
    size_t remaining = 0;  // kept prunable bits
};

struct CandidateLedger {
    std::map<std::string, std::vector<Candidate>> per_task;
};

// Directory layout: masks/<task>_z<it>.mask + metrics.csv
// (task, z, remaining_count, sparsity, dev_score).
void save_ledger(const CandidateLedger& ledger, const ParamSpace& space,
                 const std::string& dir);
CandidateLedger load_ledger(const std::string& dir, const ParamSpace& space);

}  // namespace ss
