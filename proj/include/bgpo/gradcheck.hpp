#pragma once

#include <functional>

#include "bgpo/mlp.hpp"
#include "bgpo/types.hpp"

namespace bgpo {

using ScalarFn = std::function<double(const ParamVector&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
ParamVector central_difference(const ScalarFn& f, const ParamVector& x, double h = 1e-5);

/// Central differences taken in MLP weight space: each W(i,j) / b(i) of the
/// leading `spec.num_params()` entries is perturbed in MlpWeights and packed
/// back with `pack`; the trailing entries are perturbed directly. The result
/// is indexed in the canonical flatten() order.
using WeightPacker = std::function<ParamVector(const MlpWeights&)>;
ParamVector central_difference_weights(const ScalarFn& f, const MlpSpec& spec,
                                       const ParamVector& x, const WeightPacker& pack,
                                       double h = 1e-5);

/// Column-major variant of flatten(); only used as a negative control.
ParamVector flatten_column_major(const MlpWeights& weights);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const ParamVector& a, const ParamVector& b, double floor = 1e-8);

}  // namespace bgpo
