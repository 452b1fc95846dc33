#include "ss/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ss {

double token_accuracy(const std::vector<std::vector<int>>& pred,
                      const std::vector<std::vector<int>>& gold) {
    if (pred.size() != gold.size())
        throw AlignmentError("token_accuracy: corpus size mismatch");
    size_t match = 0, total = 0;
    for (size_t s = 0; s < pred.size(); ++s) {
        if (pred[s].size() != gold[s].size())
            throw AlignmentError("token_accuracy: sentence length mismatch");
        for (size_t i = 0; i < pred[s].size(); ++i) {
            match += pred[s][i] == gold[s][i] ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : double(match) / double(total);
}

namespace {

struct Tag {
    char prefix = 'O';
    std::string type;
};

Tag parse_tag(const std::string& label) {
    if (label.size() >= 3 && label[1] == '-' &&
        (label[0] == 'B' || label[0] == 'I' || label[0] == 'E' || label[0] == 'S'))
        return {label[0], label.substr(2)};
    return {'O', ""};
}

}  // namespace

std::vector<Span> extract_spans(const std::vector<std::string>& labels, Scheme scheme,
                                int* repairs) {
    if (scheme == Scheme::None) throw ConfigError("extract_spans: scheme is none");
    std::vector<Span> out;
    int rep = 0;
    int open_start = -1;
    std::string open_type;
    auto close = [&](int end) {
        if (open_start >= 0) out.push_back({open_start, end, open_type});
        open_start = -1;
        open_type.clear();
    };
    for (int i = 0; i < int(labels.size()); ++i) {
        const Tag t = parse_tag(labels[i]);
        switch (scheme) {
            case Scheme::BIO2:
                if (t.prefix == 'B') {
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else if (t.prefix == 'I') {
                    if (open_start >= 0 && open_type == t.type) break;
                    ++rep;  // I-X with no open X span: treat as B-X
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else {
                    close(i - 1);
                }
                break;
            case Scheme::BIO1:
                if (t.prefix == 'I') {
                    if (open_start >= 0 && open_type == t.type) break;
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else if (t.prefix == 'B') {
                    // legal only as a separator after a same-type span
                    if (!(open_start >= 0 && open_type == t.type)) ++rep;
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else {
                    close(i - 1);
                }
                break;
            case Scheme::BIOES:
                if (t.prefix == 'B') {
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else if (t.prefix == 'I') {
                    if (open_start >= 0 && open_type == t.type) break;
                    ++rep;
                    close(i - 1);
                    open_start = i;
                    open_type = t.type;
                } else if (t.prefix == 'E') {
                    if (open_start >= 0 && open_type == t.type) {
                        close(i);
                    } else {
                        ++rep;
                        close(i - 1);
                        out.push_back({i, i, t.type});
                    }
                } else if (t.prefix == 'S') {
                    close(i - 1);
                    out.push_back({i, i, t.type});
                } else {
                    close(i - 1);
                }
                break;
            default:
                break;
        }
    }
    close(int(labels.size()) - 1);
    if (repairs) *repairs += rep;
    return out;
}

PRF span_f1(const std::vector<std::vector<Span>>& pred,
            const std::vector<std::vector<Span>>& gold) {
    if (pred.size() != gold.size()) throw AlignmentError("span_f1: corpus size mismatch");
    PRF r;
    for (size_t s = 0; s < pred.size(); ++s) {
        std::set<Span> p(pred[s].begin(), pred[s].end());
        std::set<Span> g(gold[s].begin(), gold[s].end());
        for (const auto& sp : p)
            g.count(sp) ? ++r.tp : ++r.fp;
        for (const auto& sp : g)
            if (!p.count(sp)) ++r.fn;
    }
    r.precision = r.tp + r.fp == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fp);
    r.recall = r.tp + r.fn == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fn);
    r.f1 = r.precision + r.recall == 0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

void analysis_report(const CandidateLedger& ledger,
                     const std::vector<MaskMatrix>& selected, const ParamSpace& space,
                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream os(out_dir + "/sparsity.csv");
        os << std::setprecision(12);
        os << "task,iteration,remaining_count,sparsity_remaining_fraction,dev_score\n";
        for (const auto& m : selected)
            os << m.task_id << ',' << m.iteration << ',' << m.kept() << ','
               << sparsity(m, space) << ",\n";
        for (const auto& [task, cands] : ledger.per_task)
            for (const auto& c : cands)
                os << task << ',' << c.iteration << ',' << c.remaining << ','
                   << c.sparsity_value << ',' << c.dev_score << '\n';
    }

    std::ofstream ov(out_dir + "/overlap.csv");
    ov << std::setprecision(12) << "tasks,overlap_ratio\n";
    if (selected.size() >= 2) {
        for (size_t i = 0; i < selected.size(); ++i)
            for (size_t j = i + 1; j < selected.size(); ++j)
                ov << selected[i].task_id << '+' << selected[j].task_id << ','
                   << overlap_ratio({selected[i], selected[j]}) << '\n';
        std::string all;
        for (const auto& m : selected) all += (all.empty() ? "" : "+") + m.task_id;
        ov << all << ',' << overlap_ratio(selected) << '\n';
    }

    {
        std::ofstream cv(out_dir + "/curve.csv");
        cv << std::setprecision(12)
           << "iteration,overlap_ratio,mean_sparsity,mean_dev_score\n";
        size_t max_z = 0;
        for (const auto& [task, cands] : ledger.per_task)
            for (const auto& c : cands) max_z = std::max(max_z, size_t(c.iteration));
        for (size_t z = 1; z <= max_z; ++z) {
            std::vector<MaskMatrix> at_z;
            double sp = 0, sc = 0;
            for (const auto& [task, cands] : ledger.per_task)
                for (const auto& c : cands)
                    if (c.iteration == z) {
                        at_z.push_back(c.mask);
                        sp += c.sparsity_value;
                        sc += c.dev_score;
                    }
            if (at_z.size() != ledger.per_task.size() || at_z.empty()) continue;
            const double orr = at_z.size() >= 2 ? overlap_ratio(at_z) : 1.0;
            cv << z << ',' << orr << ',' << sp / double(at_z.size()) << ','
               << sc / double(at_z.size()) << '\n';
        }
    }

    std::ofstream sm(out_dir + "/summary.txt");
    sm << std::setprecision(6);
    sm << "Subnet analysis (sparsity = remaining-parameter fraction; higher = denser)\n";
    sm << "ParamSpace: " << space.total_count() << " encoder parameters, "
       << space.prunable_count() << " prunable\n\n";
    for (const auto& m : selected)
        sm << "selected " << m.task_id << ": iteration " << m.iteration << ", "
           << m.kept() << '/' << space.prunable_count()
           << " prunable kept, sparsity " << sparsity(m, space) << '\n';
    if (selected.size() >= 2)
        sm << "\noverall overlap ratio: " << overlap_ratio(selected) << '\n';
    for (const auto& [task, cands] : ledger.per_task) {
        sm << "\n" << task << " candidates:\n";
        for (const auto& c : cands)
            sm << "  z=" << c.iteration << " remaining=" << c.remaining
               << " sparsity=" << c.sparsity_value << " dev=" << c.dev_score << '\n';
    }
}

}  // namespace ss
