#pragma once

#include <cstdint>
#include <vector>

#include "frames/model/bert.hpp"

namespace frames::model {

struct AdamWOptions {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Linear decay from the base rate to zero over `total_steps`, with an
// optional linear warmup. `step` is the number of updates already taken.
double linear_schedule(double base_lr, std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps = 0);

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::vector<Parameter>& params, double max_norm);

// Decoupled weight decay Adam with per-parameter moment buffers. Parameters
// flagged with decay=false skip weight decay.
class AdamW {
public:
    AdamW(const std::vector<Parameter>& params, AdamWOptions options);

    // One update using the current gradients and learning rate `lr`.
    void step(std::vector<Parameter>& params, double lr);

    std::int64_t steps_taken() const noexcept { return t_; }
    const AdamWOptions& options() const noexcept { return options_; }

private:
    AdamWOptions options_;
    std::vector<std::vector<float>> m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace frames::model
