#include "dslnet/grad_check.hpp"

#include <cmath>

#include "dslnet/autodiff.hpp"

namespace dslnet {

GradCheckReport grad_check(const std::function<nn::Var()>& f, nn::ParamStore& store,
                           double eps, double /*tol*/) {
    using nn::Var;
    Var out1 = f();
    if (out1->value.numel() != 1)
        throw ShapeError("grad_check: f must return a scalar");
    Var out2 = f();
    if (out1->value[0] != out2->value[0])
        throw NonDeterministicFunction("grad_check: forward passes disagree: " +
                                       std::to_string(out1->value[0]) + " vs " +
                                       std::to_string(out2->value[0]));

    store.zero_grad();
    ad::backward(out2);

    GradCheckReport report;
    for (auto& [name, p] : store.params()) {
        GradCheckEntry entry;
        entry.name = name;
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            double saved = p->value[i];
            p->value[i] = saved + eps;
            double fp = f()->value[0];
            p->value[i] = saved - eps;
            double fm = f()->value[0];
            p->value[i] = saved;
            double fd = (fp - fm) / (2.0 * eps);
            double adg = p->grad[i];
            double abs_err = std::fabs(fd - adg);
            double rel = abs_err / std::max({1.0e-6, std::fabs(fd), std::fabs(adg)});
            entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

}  // namespace dslnet
