#include "missmarple/optimizer.hpp"

#include <cmath>

#include "missmarple/error.hpp"

namespace mm {

void RmsProp::step(std::vector<Param*>& params) {
    if (bound_.empty()) {
        bound_ = params;
        caches_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i)
            caches_[i].assign(params[i]->value.size(), 0.0f);
    } else if (bound_.size() != params.size()) {
        throw runtime_error("optimizer bound to a different parameter set");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Param* p = params[i];
        if (!p->trainable) continue;
        auto& cache = caches_[i];
        float* w = p->value.data();
        const float* g = p->grad.data();
        for (size_t j = 0; j < p->value.size(); ++j) {
            cache[j] = rho_ * cache[j] + (1.0f - rho_) * g[j] * g[j];
            w[j] -= lr_ * g[j] / (std::sqrt(cache[j]) + eps_);
        }
    }
}

StepResult train_step(Network& net, RmsProp& opt, const Tensor& batch,
                      const std::vector<float>& labels, Rng& rng) {
    net.zero_grads();
    Tensor probs = net.forward(batch, /*training=*/true, &rng);
    if (auto bad = probs.first_non_finite())
        throw runtime_error("non-finite activation in network output at index " +
                            std::to_string(*bad));
    Tensor grad_probs;
    StepResult r;
    r.loss = bce_loss(probs, labels, &grad_probs);
    r.accuracy = binary_accuracy(probs, labels);
    if (!std::isfinite(r.loss)) throw runtime_error("non-finite training loss");
    net.backward(grad_probs);
    auto params = net.params();
    for (Param* p : params)
        if (p->trainable)
            if (auto bad = p->grad.first_non_finite())
                throw runtime_error("non-finite gradient in '" + p->name + "' at index " +
                                    std::to_string(*bad));
    opt.step(params);
    for (Param* p : params)
        if (auto bad = p->value.first_non_finite())
            throw runtime_error("non-finite weight in '" + p->name + "' at index " +
                                std::to_string(*bad));
    return r;
}

} // namespace mm
