#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dcan/tape.hpp"

namespace dcan {

// Builds a scalar on `tape` from leaves created for each input tensor.
using ScalarProgram = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
};

// Compares tape gradients with central differences for every element of every
// input. Error per element is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
// Throws NumericError when any evaluation is non-finite.
GradCheckResult gradient_check(const ScalarProgram& f, std::span<const Tensor> inputs, double h = 1e-5);

// Single-input form; returns the max relative error.
double fd_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h = 1e-5);

}  // namespace dcan
