#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmk/tape.hpp"

namespace dmk {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. step() applies and then clears the gradients
// accumulated on the tracked parameters.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        slots_.reserve(params_.size());
        for (Parameter* p : params_)
            slots_.push_back({Tensor::zeros(p->value.shape()), Tensor::zeros(p->value.shape())});
    }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Parameter& p = *params_[k];
            if (!p.grad.all_finite())
                throw std::runtime_error("adam: non-finite gradient for parameter '" + p.name +
                                         "'");
            Tensor& m = slots_[k].m;
            Tensor& v = slots_[k].v;
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                double g = p.grad[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                double m_hat = m[i] / bc1;
                double v_hat = v[i] / bc2;
                p.value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            }
            p.zero_grad();
        }
    }

    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        Tensor m, v;
    };

    std::vector<Parameter*> params_;
    std::vector<Slot> slots_;
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace dmk
