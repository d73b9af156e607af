#include "dcan/bacl.hpp"

#include <cmath>

#include "dcan/errors.hpp"
#include "dcan/ops.hpp"

namespace dcan {

Retrieval attend_dictionary(Var x, const Tensor& rows, Var query, Var key) {
    if (x.value().rank() != 2 || rows.rank() != 2 || rows.cols() != x.value().cols()) {
        throw DimensionError("dictionary attention: query " + shape_string(x.shape()) + " vs rows " +
                             shape_string(rows.shape()));
    }
    Tape& tape = *x.tape();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(rows.cols()));
    const Var dict = tape.constant(rows);
    const Var q = matmul(x, query);
    const Var k = matmul(dict, key);
    const Var alpha = softmax(scale(matmul(q, transpose(k)), inv_sqrt_d));
    return {matmul(alpha, dict), alpha};
}

Retrieval retrieve_confounder(Var x, const ConfounderDictionary& dict, const BaclWeights<Var>& w) {
    return attend_dictionary(x, dict.active_rows(), w.query, w.key);
}

Var backdoor_adjust(Var x, const ConfounderDictionary& dict, const BaclWeights<Var>& w) {
    const Retrieval r = retrieve_confounder(x, dict, w);
    return add(x, mul(r.context, w.gamma));
}

}  // namespace dcan
