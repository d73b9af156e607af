#pragma once

#include "dcan/dict.hpp"
#include "dcan/tape.hpp"

namespace dcan {

// Learnable part of back-door adjustment for one modality. Row-vector
// convention throughout: queries are x * query, keys are c * key.
template <class T>
struct BaclWeights {
    T query;  // [d x d]
    T key;    // [d x d]
    T gamma;  // [1]

    template <class F>
    void visit(F&& f) {
        f("query", query);
        f("key", key);
        f("gamma", gamma);
    }
    template <class F>
    void visit(F&& f) const {
        f("query", query);
        f("key", key);
        f("gamma", gamma);
    }
};

struct Retrieval {
    Var context;  // [B x d], sum_i alpha_i c_i
    Var weights;  // [B x K], alpha
};

// Scaled dot-product attention of queries x [B x d] over constant dictionary
// rows [K x d]: alpha = softmax((x Wq)(c Wk)^T / sqrt(d)), context = alpha C.
Retrieval attend_dictionary(Var x, const Tensor& rows, Var query, Var key);

// Attention over the initialized rows of `dict`. Throws EmptyDictionaryError
// when no row has been written.
Retrieval retrieve_confounder(Var x, const ConfounderDictionary& dict, const BaclWeights<Var>& w);

// F = x + gamma * R_back. Dictionary rows enter the tape as constants.
Var backdoor_adjust(Var x, const ConfounderDictionary& dict, const BaclWeights<Var>& w);

}  // namespace dcan
