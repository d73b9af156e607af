#pragma once

#include "dcan/bacl.hpp"
#include "dcan/kmeans.hpp"
#include "dcan/tape.hpp"

namespace dcan {

// Learnable part of front-door adjustment for one modality.
template <class T>
struct FaclWeights {
    T query_g;  // global-input expectation
    T key_g;
    T query_d;  // mediator expectation
    T key_d;
    T out_g;    // fusion of the two expectations
    T out_d;

    template <class F>
    void visit(F&& f) {
        f("query_g", query_g);
        f("key_g", key_g);
        f("query_d", query_d);
        f("key_d", key_d);
        f("out_g", out_g);
        f("out_d", out_d);
    }
    template <class F>
    void visit(F&& f) const {
        f("query_g", query_g);
        f("key_g", key_g);
        f("query_d", query_d);
        f("key_d", key_d);
        f("out_g", out_g);
        f("out_d", out_d);
    }
};

// E[d | F]: attention of F [B x d] over the mediator dictionary.
Retrieval mediator_expectation(Var f, const Tensor& mediator, const FaclWeights<Var>& w);

// E[x']: attention of F over the global dictionary.
Retrieval global_expectation(Var f, const Tensor& global, const FaclWeights<Var>& w);

// U = E[x'] out_g + E[d|F] out_d, plus F itself when `residual` is set.
Var frontdoor_adjust(Var f, const FrontDoorDictionaries& dicts, const FaclWeights<Var>& w, bool residual = false);

}  // namespace dcan
