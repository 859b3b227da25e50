#include "frames/model/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "frames/error.hpp"
#include "frames/kernels.hpp"

namespace frames::model {

double linear_schedule(double base_lr, std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps) {
    if (total_steps <= 0) return 0.0;
    if (step < warmup_steps) {
        return base_lr * static_cast<double>(step) / static_cast<double>(std::max<std::int64_t>(1, warmup_steps));
    }
    const double remaining = static_cast<double>(total_steps - step) /
                             static_cast<double>(std::max<std::int64_t>(1, total_steps - warmup_steps));
    return base_lr * std::max(0.0, remaining);
}

double clip_grad_norm(std::vector<Parameter>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (float g : p.grad) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    const double coef = max_norm / (norm + 1e-6);
    if (coef < 1.0) {
        const auto& ks = kernels::active();
        for (auto& p : params) ks.scale(static_cast<float>(coef), p.grad.data(), p.grad.size());
    }
    return norm;
}

AdamW::AdamW(const std::vector<Parameter>& params, AdamWOptions options) : options_(options) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0f);
        v_.emplace_back(p.size(), 0.0f);
    }
}

void AdamW::step(std::vector<Parameter>& params, double lr) {
    if (params.size() != m_.size()) throw DataError("optimizer state does not match the parameter list");
    ++t_;
    kernels::AdamWStep s;
    s.lr = static_cast<float>(lr);
    s.beta1 = static_cast<float>(options_.beta1);
    s.beta2 = static_cast<float>(options_.beta2);
    s.eps = static_cast<float>(options_.eps);
    s.bias_correction1 = static_cast<float>(1.0 - std::pow(options_.beta1, static_cast<double>(t_)));
    s.bias_correction2 = static_cast<float>(1.0 - std::pow(options_.beta2, static_cast<double>(t_)));
    const auto& ks = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        s.weight_decay = p.decay ? static_cast<float>(options_.weight_decay) : 0.0f;
        ks.adamw(p.value.data(), p.grad.data(), m_[i].data(), v_[i].data(), p.size(), s);
    }
}

}  // namespace frames::model
