#include "dcan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dcan/errors.hpp"

namespace dcan {

namespace {

double evaluate(const ScalarProgram& f, std::span<const Tensor> inputs) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
    const Var out = f(tape, leaves);
    if (out.value().size() != 1) throw ContractError("gradient_check: program output is not scalar");
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite objective");
    return v;
}

}  // namespace

GradCheckResult gradient_check(const ScalarProgram& f, std::span<const Tensor> inputs, double h) {
    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
        const Var out = f(tape, leaves);
        const Gradients g = tape.grad(out);
        for (Var v : leaves) analytic.push_back(g.of(v));
    }

    GradCheckResult result;
    std::vector<Tensor> probe(inputs.begin(), inputs.end());
    for (std::size_t k = 0; k < probe.size(); ++k) {
        for (std::size_t i = 0; i < probe[k].size(); ++i) {
            const double x0 = probe[k][i];
            probe[k][i] = x0 + h;
            const double fp = evaluate(f, probe);
            probe[k][i] = x0 - h;
            const double fm = evaluate(f, probe);
            probe[k][i] = x0;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = analytic[k][i];
            const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
            if (err > result.max_rel_error) result = {err, k, i};
        }
    }
    return result;
}

double fd_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h) {
    const ScalarProgram program = [&f](Tape& tape, std::span<const Var> in) { return f(tape, in[0]); };
    const Tensor inputs[] = {x};
    return gradient_check(program, inputs, h).max_rel_error;
}

}  // namespace dcan
