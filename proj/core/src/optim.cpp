#include "dslnet/optim.hpp"

#include <cmath>

namespace dslnet {

double cosine_lr(const ScheduleSpec& spec, std::int64_t step) {
    spec.validate();
    if (step < 0 || step > spec.total_steps)
        throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(spec.total_steps) + "]");
    double frac = (double)step / (double)spec.total_steps;
    return spec.lr_min + 0.5 * (spec.lr_max - spec.lr_min) * (1.0 + std::cos(M_PI * frac));
}

void adamw_step(nn::ParamStore& store, double lr, const AdamWConfig& cfg) {
    store.step_count += 1;
    double t = (double)store.step_count;
    double bc1 = 1.0 - std::pow(cfg.beta1, t);
    double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, p] : store.params()) {
        auto& st = store.opt_state().at(name);
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            double g = p->grad[i];
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = st.m[i] / bc1;
            double vhat = st.v[i] / bc2;
            p->value[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                                 cfg.weight_decay * p->value[i]);
        }
    }
}

}  // namespace dslnet
