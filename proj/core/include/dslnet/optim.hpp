#pragma once

#include "dslnet/nn.hpp"

namespace dslnet {

struct ScheduleSpec {
    double lr_max = 1e-3;
    double lr_min = 0.0;
    std::int64_t total_steps = 1;

    void validate() const {
        if (!(lr_max > 0.0)) throw ConfigError("ScheduleSpec: lr_max must be > 0");
        if (lr_min < 0.0 || lr_min > lr_max)
            throw ConfigError("ScheduleSpec: need 0 <= lr_min <= lr_max");
        if (total_steps <= 0) throw ConfigError("ScheduleSpec: total_steps must be > 0");
    }
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi step/total)). Throws on
// step outside [0, total_steps].
double cosine_lr(const ScheduleSpec& spec, std::int64_t step);

// One AdamW step over every parameter in the store: moments with bias
// correction, decoupled weight decay. Gradients must already be populated.
void adamw_step(nn::ParamStore& store, double lr, const AdamWConfig& cfg);

}  // namespace dslnet
