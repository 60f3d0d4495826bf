#pragma once

#include "softroi/encoder.hpp"

namespace softroi {

struct AdamWConfig {
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;

    void validate() const {
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw InvalidInput("adamw betas must lie in (0, 1)");
    }
};

// First/second moment accumulators, one pair per parameter tensor.
struct OptimizerState {
    EncoderParams m;
    EncoderParams v;
    long step = 0;
};

OptimizerState make_optimizer_state(const EncoderParams& params);

// One decoupled-weight-decay Adam update. Frozen tensors are untouched.
// Throws on any non-finite gradient, naming the offending tensor.
void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state, double lr,
                const AdamWConfig& config);

// One-cycle schedule: linear warm-up from max_lr/25 over the first 30% of
// steps, then cosine anneal down to max_lr/1e4; the peak is exactly max_lr.
double one_cycle_lr(long step, long total_steps, double max_lr);

}  // namespace softroi
