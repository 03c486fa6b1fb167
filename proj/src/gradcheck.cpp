#include "missmarple/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "missmarple/error.hpp"

namespace mm {

namespace {

double objective(Network& net, const Tensor& batch, const std::vector<float>& labels) {
    // Deterministic pass: no dropout (training=false would switch batchnorm to
    // running stats, so instead require eval-equivalent layers). The check runs
    // in training mode but without an RNG; dropout layers reject that, so
    // networks under check must be dropout-free or have rate 0.
    Tensor probs = net.forward(batch, /*training=*/true, nullptr);
    return bce_loss(probs, labels, nullptr);
}

} // namespace

GradCheckResult gradient_check(Network& net, const Tensor& batch,
                               const std::vector<float>& labels,
                               size_t max_entries_per_param) {
    net.zero_grads();
    Tensor probs = net.forward(batch, /*training=*/true, nullptr);
    Tensor grad_probs;
    bce_loss(probs, labels, &grad_probs);
    net.backward(grad_probs);

    auto params = net.params();
    // Copy out the analytic gradients before we start nudging weights.
    std::vector<std::vector<float>> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad.values());

    double scale = 0.0;
    for (const auto& g : analytic)
        for (float v : g) scale = std::max(scale, std::abs(static_cast<double>(v)));
    if (scale == 0.0) scale = 1.0;

    GradCheckResult result;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        if (!p->trainable) continue;
        size_t n = p->value.size();
        size_t step = 1;
        if (max_entries_per_param > 0 && n > max_entries_per_param)
            step = n / max_entries_per_param;
        for (size_t j = 0; j < n; j += step) {
            float saved = p->value[j];
            // Activations are stored in f32, so the objective carries ~1e-7
            // of rounding noise; a probe step near 1e-2 keeps the noise term
            // (noise / 2h) small, and Richardson extrapolation over steps h
            // and h/2 cancels the O(h^2) truncation term that normalization
            // layers would otherwise push past the tolerance.
            double h = 1e-2 * std::max(std::abs(static_cast<double>(saved)), 1.0);
            auto central = [&](double step_h) {
                float plus = static_cast<float>(saved + step_h);
                float minus = static_cast<float>(saved - step_h);
                // use the perturbation float storage actually realised
                double realized = static_cast<double>(plus) - static_cast<double>(minus);
                if (realized == 0.0) return std::numeric_limits<double>::quiet_NaN();
                p->value[j] = plus;
                double f_plus = objective(net, batch, labels);
                p->value[j] = minus;
                double f_minus = objective(net, batch, labels);
                p->value[j] = saved;
                return (f_plus - f_minus) / realized;
            };
            double d_h = central(h);
            double d_half = central(h / 2);
            if (std::isnan(d_h) || std::isnan(d_half)) continue;
            double numeric = (4.0 * d_half - d_h) / 3.0;
            double err = std::abs(static_cast<double>(analytic[pi][j]) - numeric) / scale;
            ++result.checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = p->name;
                result.worst_index = j;
            }
        }
    }
    if (result.checked == 0) throw validation_error("gradient check probed no parameters");
    return result;
}

} // namespace mm
