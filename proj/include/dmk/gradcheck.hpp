#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dmk/tape.hpp"

namespace dmk {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string parameter;
    std::size_t entry = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central finite differences against an externally supplied analytic
// gradient. `loss` evaluates the scalar loss at the current parameters and
// must be side-effect free; `compute_gradients` fills every parameter's grad.
inline GradCheckResult gradient_check(const std::function<double()>& loss,
                                      const std::function<void()>& compute_gradients,
                                      const std::vector<Parameter*>& params,
                                      double probe_eps = 1e-5) {
    zero_grads(params);
    compute_gradients();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad);

    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double saved = p.value[i];
            p.value[i] = saved + probe_eps;
            double up = loss();
            p.value[i] = saved - probe_eps;
            double down = loss();
            p.value[i] = saved;
            double numeric = (up - down) / (2.0 * probe_eps);
            double a = analytic[k][i];
            double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.parameter = p.name;
                result.entry = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

// Convenience form: the loss is defined once as a tape-building function and
// both routes (analytic backward, finite-difference probes) derive from it.
inline GradCheckResult gradient_check(const std::function<Var(Tape&)>& build_loss,
                                      const std::vector<Parameter*>& params,
                                      double probe_eps = 1e-5) {
    auto loss = [&]() {
        Tape t;
        return build_loss(t).value().item();
    };
    auto grads = [&]() {
        Tape t;
        Var l = build_loss(t);
        t.backward(l);
    };
    return gradient_check(loss, grads, params, probe_eps);
}

}  // namespace dmk
