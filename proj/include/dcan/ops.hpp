#pragma once

#include <cstddef>
#include <span>

#include "dcan/tape.hpp"

// Differentiable primitives. All operands must live on the same tape.
//
// Broadcasting (add/sub/mul): the second operand may match the first exactly,
// be a single element, a row vector ([n] or [1 x n]) against [m x n], or a
// column vector [m x 1] against [m x n].
namespace dcan {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

// [m x k] * [k x n]
Var matmul(Var a, Var b);
// [b x m x k] * [b x k x n]
Var bmm(Var a, Var b);
// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(Var a);

// Softmax over the last axis, max-subtracted.
Var softmax(Var a);
Var sigmoid(Var a);
Var relu(Var a);

// Scalar reductions.
Var sum(Var a);
Var mean(Var a);
// Sum of squares, i.e. the squared L2 norm.
Var squared_norm(Var a);

// Row-wise cosine similarity of [B x d] operands -> [B x 1] ([d] -> [1]).
// A zero-norm row yields similarity 0 with zero gradient.
Var cosine_similarity(Var a, Var b);

// Structural ops.
Var reshape(Var a, Shape shape);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
// Interleaves n operands of shape [B x d] into [B*n x d]; row b*n+j comes from parts[j].
Var interleave_rows(std::span<const Var> parts);
// Mean over consecutive groups of `group` rows: [B*group x d] -> [B x d].
Var group_mean_rows(Var a, std::size_t group);

// Value-only softmax on a vector, used outside tapes.
Tensor softmax_values(const Tensor& x);

}  // namespace dcan
