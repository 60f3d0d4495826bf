#include "softroi/optim.hpp"

#include <cmath>
#include <numbers>

namespace softroi {

OptimizerState make_optimizer_state(const EncoderParams& params) {
    OptimizerState s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    s.step = 0;
    return s;
}

void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state, double lr,
                const AdamWConfig& config) {
    config.validate();
    auto p_refs = params.tensors();
    auto g_refs = grads.tensors();
    auto m_refs = state.m.tensors();
    auto v_refs = state.v.tensors();
    if (p_refs.size() != g_refs.size()) throw InvalidInput("gradient struct does not match parameters");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < p_refs.size(); ++i) {
        if (!p_refs[i].trainable) continue;
        const Eigen::Index n = p_refs[i].rows * p_refs[i].cols;
        Eigen::Map<Vector> p(p_refs[i].data, n);
        Eigen::Map<const Vector> grad(g_refs[i].data, n);
        Eigen::Map<Vector> m(m_refs[i].data, n);
        Eigen::Map<Vector> v(v_refs[i].data, n);
        if (!grad.allFinite()) throw InvalidInput("non-finite gradient for parameter '" + p_refs[i].name + "'");

        // Decoupled weight decay, independent of the adaptive step.
        p *= (1.0 - lr * config.weight_decay);
        m = config.beta1 * m + (1.0 - config.beta1) * grad;
        v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.eps);
    }
}

double one_cycle_lr(long step, long total_steps, double max_lr) {
    if (total_steps < 1) throw InvalidInput("schedule needs at least one step");
    if (step < 0 || step >= total_steps)
        throw InvalidInput("schedule step " + std::to_string(step) + " outside [0, " +
                           std::to_string(total_steps) + ")");
    const double start_lr = max_lr / 25.0;
    const double end_lr = max_lr / 1e4;
    const long warmup = static_cast<long>(0.3 * static_cast<double>(total_steps));
    if (step < warmup)
        return start_lr + (max_lr - start_lr) * static_cast<double>(step) / static_cast<double>(warmup);
    const long anneal = total_steps - 1 - warmup;
    if (anneal <= 0) return max_lr;
    const double t = static_cast<double>(step - warmup) / static_cast<double>(anneal);
    return end_lr + (max_lr - end_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace softroi
