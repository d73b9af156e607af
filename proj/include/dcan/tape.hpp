#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcan/tensor.hpp"

namespace dcan {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// What a primitive's backward rule sees: its own output and incoming gradient,
// parent values, and accumulators for the parents that need a gradient.
class BackwardContext {
public:
    const Tensor& out() const;
    const Tensor& out_grad() const;
    const Tensor& input(std::size_t i) const;
    bool needs(std::size_t i) const;
    // Gradient accumulator of parent i; zero-initialized on first use.
    Tensor& grad(std::size_t i) const;

private:
    friend class Tape;
    BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}
    Tape& tape_;
    std::size_t node_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

// Result of a reverse sweep.
class Gradients {
public:
    // dOutput/dv. Zero tensor when v does not influence the output.
    const Tensor& of(Var v) const;

private:
    friend class Tape;
    std::vector<std::optional<Tensor>> grads_;
    std::vector<Shape> shapes_;
    mutable std::map<std::size_t, Tensor> zeros_;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so parents always
// precede children and the backward sweep is a single reverse pass.
// A tape is single-threaded; independent tapes share nothing.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value);
    Var constant(Tensor value);

    // Appends a primitive result. Throws NumericError if value is not finite.
    Var record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward);

    const Tensor& value(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Operation names in evaluation order ("leaf", "const", "matmul", ...).
    std::vector<std::string> trace() const;

    // Reverse sweep from a scalar output (one element). Throws ContractError otherwise.
    Gradients grad(Var output);

private:
    friend class BackwardContext;
    friend class Var;

    struct Node {
        std::string op;
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
    };

    void check_owner(Var v) const;

    std::vector<Node> nodes_;
    std::vector<std::optional<Tensor>>* sweep_ = nullptr;
};

}  // namespace dcan
