#include "dcan/facl.hpp"

#include "dcan/errors.hpp"
#include "dcan/ops.hpp"

namespace dcan {

Retrieval mediator_expectation(Var f, const Tensor& mediator, const FaclWeights<Var>& w) {
    if (mediator.empty()) throw ConfigError("mediator dictionary is empty");
    return attend_dictionary(f, mediator, w.query_d, w.key_d);
}

Retrieval global_expectation(Var f, const Tensor& global, const FaclWeights<Var>& w) {
    if (global.empty()) throw ConfigError("global dictionary is empty");
    return attend_dictionary(f, global, w.query_g, w.key_g);
}

Var frontdoor_adjust(Var f, const FrontDoorDictionaries& dicts, const FaclWeights<Var>& w, bool residual) {
    const Retrieval g = global_expectation(f, dicts.global, w);
    const Retrieval d = mediator_expectation(f, dicts.mediator, w);
    Var u = add(matmul(g.context, w.out_g), matmul(d.context, w.out_d));
    if (residual) u = add(u, f);
    return u;
}

}  // namespace dcan
