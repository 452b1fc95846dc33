#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ss/tensor.hpp"

namespace sstest {

// Central finite-difference gradient check. `forward` must rebuild the
// whole graph from the current parameter values and return the scalar
// loss; it is called repeatedly with perturbed parameters.
inline double gradcheck(const std::vector<ss::TensorPtr>& params,
                        const std::function<ss::TensorPtr(ss::Tape&)>& forward,
                        double h = 1e-5) {
    ss::Tape tape;
    auto loss = forward(tape);
    for (auto& p : params) p->zero_grad();
    tape.backward(loss);

    double max_rel = 0.0;
    for (auto& p : params) {
        for (size_t i = 0; i < p->data.size(); ++i) {
            const double orig = p->data[i];
            p->data[i] = orig + h;
            ss::Tape t1;
            const double up = forward(t1)->value();
            p->data[i] = orig - h;
            ss::Tape t2;
            const double down = forward(t2)->value();
            p->data[i] = orig;
            const double fd = (up - down) / (2 * h);
            const double an = p->grad[i];
            // the 1e-6 floor keeps central-difference cancellation noise
            // (~1e-11 absolute) from dominating near-zero gradients
            const double rel = std::fabs(an - fd) /
                               (std::max(std::fabs(an), std::fabs(fd)) + 1e-6);
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

}  // namespace sstest
