#ifndef MISSMARPLE_MODEL_HPP
#define MISSMARPLE_MODEL_HPP

#include <string>
#include <vector>

#include "missmarple/config.hpp"
#include "missmarple/network.hpp"
#include "missmarple/weights.hpp"

namespace mm {

// Architecture knobs. The twin networks share one config; everything here
// round-trips through a key=value file stored alongside weights.
struct ModelConfig {
    int patch_size = 64;
    int channels = 3;
    std::vector<int> conv_filters = {32, 32, 64, 64};
    int kernel = 3;
    Padding padding = Padding::Same;
    int pool_window = 2;
    int pool_stride = 2;
    int hidden_units = 256;
    // Hidden dense defaults to relu; flip for a sigmoid-sigmoid head.
    Activation hidden_activation = Activation::Relu;
    float dropout_conv = 0.1f;
    float dropout_dense = 0.5f;
    float bn_momentum = 0.99f;
    float bn_eps = 1e-3f;

    KvFile to_kv() const;
    static ModelConfig from_kv(const KvFile& kv);
    void validate() const;
};

// A named layer list plus, for the transfer twin, the donor binding.
struct ModelSpec {
    std::string name;                  // "MM-V", "MM-A", or "MM-V-A"
    std::vector<int> input_shape;      // [patch, patch, channels]
    std::vector<LayerSpec> layers;
    std::string donor_layer;           // e.g. "V_conv2d_3" (MM-V-A only)
};

// Village twin: conv/pool x4 -> batchnorm -> dropout -> flatten -> dense ->
// dropout -> dense(1, sigmoid). Convs are named V_conv2d_1..4.
ModelSpec make_mmv_spec(const ModelConfig& config);

// Actual-case twin without the transfer branch (structural mirror of MM-V
// with A_-prefixed names).
ModelSpec make_mma_spec(const ModelConfig& config);

// Actual-case twin with the frozen transfer branch: the third conv is a
// junction running the frozen donor kernel (no bias, no activation) beside
// the trainable A_conv2d_3 over the same pooled input, concatenated
// donor-first. Five convs in total.
ModelSpec make_mmva_spec(const ModelConfig& config);

// Number of convolutions in the spec (a junction counts as two).
int conv_layer_count(const ModelSpec& spec);

struct BuiltModel {
    ModelSpec spec;
    Network net;
};

// Compile + glorot-initialize MM-V.
BuiltModel build_mmv(const ModelConfig& config, Rng& rng);

// Compile MM-V-A and bind the frozen donor kernel from `donor` (which must
// hold "<donor_layer>/kernel" with input channels matching the junction
// input). Trainable parameters are freshly initialized.
BuiltModel build_mmva(const ModelConfig& config, const WeightStore& donor, Rng& rng);

// Layer-by-layer text summary (kind, name, output shape, parameter counts)
// with the conv/total layer counts made explicit.
std::string model_summary(const ModelSpec& spec);

} // namespace mm
#endif
