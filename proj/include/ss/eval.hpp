#pragma once

#include <string>
#include <vector>

#include "ss/data.hpp"
#include "ss/ledger.hpp"

namespace ss {

struct Span {
    int start = 0;
    int end = 0;  // inclusive
    std::string type;

    bool operator==(const Span&) const = default;
    bool operator<(const Span& o) const {
        if (start != o.start) return start < o.start;
        if (end != o.end) return end < o.end;
        return type < o.type;
    }
};

// Matching positions / total over the corpus.
double token_accuracy(const std::vector<std::vector<int>>& pred,
                      const std::vector<std::vector<int>>& gold);

// Spans per scheme semantics; malformed continuations repaired as span
// starts (counted into *repairs when non-null).
std::vector<Span> extract_spans(const std::vector<std::string>& labels, Scheme scheme,
                                int* repairs = nullptr);

struct PRF {
    double precision = 0, recall = 0, f1 = 0;
    size_t tp = 0, fp = 0, fn = 0;
};

// Exact-match micro F1 over per-sentence span sets.
PRF span_f1(const std::vector<std::vector<Span>>& pred,
            const std::vector<std::vector<Span>>& gold);

// Sparsity table, pairwise and T-way overlap ratios, and per-iteration
// OR/score curves; written as CSV plus a plain-text summary.
void analysis_report(const CandidateLedger& ledger,
                     const std::vector<MaskMatrix>& selected, const ParamSpace& space,
                     const std::string& out_dir);

}  // namespace ss
