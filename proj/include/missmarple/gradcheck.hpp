#ifndef MISSMARPLE_GRADCHECK_HPP
#define MISSMARPLE_GRADCHECK_HPP

#include <string>
#include <vector>

#include "missmarple/network.hpp"

namespace mm {

struct GradCheckResult {
    double max_rel_error = 0.0;     // worst |analytic - numeric| / scale
    std::string worst_param;        // parameter holding the worst entry
    size_t worst_index = 0;
    size_t checked = 0;             // number of entries compared
};

// Compares backprop gradients of the mean-BCE objective against central
// finite differences. Gradients live in float storage, so differences use
// the realized f32 perturbation and errors are normalized by the largest
// gradient magnitude observed (pointwise division would amplify noise on
// near-zero entries far beyond what float can resolve).
//
// `max_entries_per_param` caps the entries probed per parameter (probed from
// a deterministic stride so coverage spans the tensor); 0 means all entries.
GradCheckResult gradient_check(Network& net, const Tensor& batch,
                               const std::vector<float>& labels,
                               size_t max_entries_per_param = 0);

} // namespace mm
#endif
