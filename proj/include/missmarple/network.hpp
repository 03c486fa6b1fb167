#ifndef MISSMARPLE_NETWORK_HPP
#define MISSMARPLE_NETWORK_HPP

#include <memory>
#include <string>
#include <vector>

#include "missmarple/layer_spec.hpp"
#include "missmarple/rng.hpp"
#include "missmarple/tensor.hpp"

namespace mm {

// Named parameter with its gradient buffer. Batchnorm running statistics are
// carried as non-trainable params so they serialize with everything else;
// the optimizer and the gradient check only touch trainable entries.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    void zero_grad() { grad.fill(0.0f); }
};

// One compiled layer. forward() caches whatever backward() needs; backward()
// consumes the most recent forward() call and accumulates parameter
// gradients. Inputs carry a leading batch dimension: [B,H,W,C] or [B,F].
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual LayerKind kind() const = 0;
    virtual Tensor forward(const Tensor& x, bool training, Rng* rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual void init_params(Rng& rng) { (void)rng; }
    // Shape without the batch dimension.
    virtual std::vector<int> output_shape(const std::vector<int>& in) const = 0;

protected:
    std::string name_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::vector<int>& input_shape);

// Sequential stack of layers compiled against a fixed input shape. The whole
// shape trace is computed at construction, so incompatible layer lists are
// rejected before any data flows.
class Network {
public:
    Network(std::vector<int> input_shape, const std::vector<LayerSpec>& specs);
    // Direct construction from prebuilt layers (composition and test hooks).
    Network(std::vector<int> input_shape, std::vector<std::unique_ptr<Layer>> layers);

    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<std::vector<int>>& shape_trace() const { return shape_trace_; }

    size_t layer_count() const { return layers_.size(); }
    Layer& layer(size_t i) { return *layers_[i]; }
    const Layer& layer(size_t i) const { return *layers_[i]; }

    Tensor forward(const Tensor& x, bool training = false, Rng* rng = nullptr);
    // Propagates loss gradient back through the stack; fills param grads.
    Tensor backward(const Tensor& grad_out);

    std::vector<Param*> params();
    Param* find_param(const std::string& name);
    void zero_grads();
    void init_params(Rng& rng);

    // Total scalar count over trainable parameters.
    size_t trainable_param_count();

private:
    void compute_trace();

    std::vector<int> input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::vector<int>> shape_trace_;
};

// Binary cross-entropy over sigmoid outputs [B,1] with labels in {0,1}.
// Probabilities are clamped to [1e-7, 1-1e-7]; if grad_probs is non-null it
// receives dLoss/dprob (zero where the clamp binds).
double bce_loss(const Tensor& probs, const std::vector<float>& labels, Tensor* grad_probs = nullptr);

// Fraction of samples with (prob > 0.5) matching the label.
double binary_accuracy(const Tensor& probs, const std::vector<float>& labels);

} // namespace mm

#endif
