#ifndef MISSMARPLE_OPTIMIZER_HPP
#define MISSMARPLE_OPTIMIZER_HPP

#include <vector>

#include "missmarple/network.hpp"

namespace mm {

// RMSprop with per-parameter squared-gradient caches.
//   cache = rho * cache + (1 - rho) * g^2
//   w    -= lr * g / (sqrt(cache) + eps)
class RmsProp {
public:
    explicit RmsProp(float lr = 1e-4f, float rho = 0.9f, float eps = 1e-7f)
        : lr_(lr), rho_(rho), eps_(eps) {}

    void step(std::vector<Param*>& params);

    float learning_rate() const { return lr_; }

private:
    float lr_, rho_, eps_;
    // keyed positionally; caches are created lazily on first step
    std::vector<std::vector<float>> caches_;
    std::vector<Param*> bound_;
};

struct StepResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// One optimization step on a batch: forward (training mode), BCE loss,
// backprop, RMSprop update. Throws runtime_error naming the first tensor
// that went non-finite if the step destabilizes.
StepResult train_step(Network& net, RmsProp& opt, const Tensor& batch,
                      const std::vector<float>& labels, Rng& rng);

} // namespace mm
#endif
