#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dslnet/nn.hpp"

namespace dslnet {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0.0;
    bool passed(double tol) const { return max_rel_err < tol; }
};

struct NonDeterministicFunction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Central-difference check of d f / d theta against the reverse-mode gradient
// for every element of every parameter in the store. f must rebuild its graph
// from the current parameter values on each call and return a scalar Var.
// Throws NonDeterministicFunction if two identical forward passes disagree.
GradCheckReport grad_check(const std::function<nn::Var()>& f, nn::ParamStore& store,
                           double eps = 1e-5, double tol = 1e-6);

}  // namespace dslnet
