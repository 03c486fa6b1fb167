#include "missmarple/model.hpp"

#include <sstream>

#include "missmarple/error.hpp"

namespace mm {

KvFile ModelConfig::to_kv() const {
    KvFile kv;
    kv.set_int("patch_size", patch_size);
    kv.set_int("channels", channels);
    std::string filters;
    for (size_t i = 0; i < conv_filters.size(); ++i) {
        if (i) filters += ",";
        filters += std::to_string(conv_filters[i]);
    }
    kv.set("filters", filters);
    kv.set_int("kernel", kernel);
    kv.set("padding", to_string(padding));
    kv.set_int("pool_window", pool_window);
    kv.set_int("pool_stride", pool_stride);
    kv.set_int("hidden_units", hidden_units);
    kv.set("hidden_activation", to_string(hidden_activation));
    kv.set_float("dropout_conv", dropout_conv);
    kv.set_float("dropout_dense", dropout_dense);
    kv.set_float("bn_momentum", bn_momentum);
    kv.set_float("bn_eps", bn_eps);
    return kv;
}

ModelConfig ModelConfig::from_kv(const KvFile& kv) {
    ModelConfig c;
    c.patch_size = static_cast<int>(kv.get_int("patch_size", c.patch_size));
    c.channels = static_cast<int>(kv.get_int("channels", c.channels));
    c.conv_filters = kv.get_int_list("filters", c.conv_filters);
    c.kernel = static_cast<int>(kv.get_int("kernel", c.kernel));
    c.padding = padding_from_string(kv.get_string("padding", to_string(c.padding)));
    c.pool_window = static_cast<int>(kv.get_int("pool_window", c.pool_window));
    c.pool_stride = static_cast<int>(kv.get_int("pool_stride", c.pool_stride));
    c.hidden_units = static_cast<int>(kv.get_int("hidden_units", c.hidden_units));
    c.hidden_activation =
        activation_from_string(kv.get_string("hidden_activation", to_string(c.hidden_activation)));
    c.dropout_conv = static_cast<float>(kv.get_float("dropout_conv", c.dropout_conv));
    c.dropout_dense = static_cast<float>(kv.get_float("dropout_dense", c.dropout_dense));
    c.bn_momentum = static_cast<float>(kv.get_float("bn_momentum", c.bn_momentum));
    c.bn_eps = static_cast<float>(kv.get_float("bn_eps", c.bn_eps));
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    if (patch_size < 8) throw validation_error("model config: patch_size must be >= 8");
    if (channels < 1) throw validation_error("model config: channels must be >= 1");
    if (conv_filters.size() != 4)
        throw validation_error("model config: exactly 4 conv filter counts required, got " +
                               std::to_string(conv_filters.size()));
    for (int f : conv_filters)
        if (f < 1) throw validation_error("model config: conv filters must be >= 1");
    if (kernel < 1) throw validation_error("model config: kernel must be >= 1");
    if (pool_window < 2) throw validation_error("model config: pool_window must be >= 2");
    if (pool_stride < 1) throw validation_error("model config: pool_stride must be >= 1");
    if (hidden_units < 1) throw validation_error("model config: hidden_units must be >= 1");
    if (!(dropout_conv >= 0.0f && dropout_conv < 1.0f) ||
        !(dropout_dense >= 0.0f && dropout_dense < 1.0f))
        throw validation_error("model config: dropout rates must be in [0,1)");
}

namespace {

// Shared tail after the conv stack.
void append_head(std::vector<LayerSpec>& layers, const ModelConfig& c, const std::string& prefix) {
    layers.push_back(LayerSpec::batchnorm(prefix + "_batchnorm", c.bn_momentum, c.bn_eps));
    layers.push_back(LayerSpec::dropout(c.dropout_conv));
    layers.push_back(LayerSpec::flatten());
    layers.push_back(LayerSpec::dense(prefix + "_dense_1", c.hidden_units, c.hidden_activation));
    layers.push_back(LayerSpec::dropout(c.dropout_dense));
    layers.push_back(LayerSpec::dense(prefix + "_dense_2", 1, Activation::Sigmoid));
}

ModelSpec make_plain_spec(const ModelConfig& c, const std::string& model_name,
                          const std::string& prefix) {
    c.validate();
    ModelSpec spec;
    spec.name = model_name;
    spec.input_shape = {c.patch_size, c.patch_size, c.channels};
    for (size_t i = 0; i < c.conv_filters.size(); ++i) {
        spec.layers.push_back(LayerSpec::conv2d(prefix + "_conv2d_" + std::to_string(i + 1),
                                                c.conv_filters[i], c.kernel, Activation::Relu,
                                                c.padding));
        spec.layers.push_back(LayerSpec::maxpool2d(c.pool_window, c.pool_stride));
    }
    append_head(spec.layers, c, prefix);
    return spec;
}

void check_spec(const ModelSpec& spec) {
    // Full shape walk: rejects configs that collapse the spatial dims.
    std::vector<int> shape = spec.input_shape;
    for (const auto& l : spec.layers) shape = l.output_shape(shape);
    if (shape != std::vector<int>{1})
        throw validation_error("model '" + spec.name + "': head output shape " + shape_to_string(shape) +
                               ", expected [1]");
}

} // namespace

ModelSpec make_mmv_spec(const ModelConfig& config) {
    ModelSpec spec = make_plain_spec(config, "MM-V", "V");
    check_spec(spec);
    return spec;
}

ModelSpec make_mma_spec(const ModelConfig& config) {
    ModelSpec spec = make_plain_spec(config, "MM-A", "A");
    check_spec(spec);
    return spec;
}

ModelSpec make_mmva_spec(const ModelConfig& config) {
    config.validate();
    ModelSpec spec;
    spec.name = "MM-V-A";
    spec.input_shape = {config.patch_size, config.patch_size, config.channels};
    spec.donor_layer = "V_conv2d_3";
    const auto& f = config.conv_filters;
    spec.layers.push_back(LayerSpec::conv2d("A_conv2d_1", f[0], config.kernel, Activation::Relu,
                                            config.padding));
    spec.layers.push_back(LayerSpec::maxpool2d(config.pool_window, config.pool_stride));
    spec.layers.push_back(LayerSpec::conv2d("A_conv2d_2", f[1], config.kernel, Activation::Relu,
                                            config.padding));
    spec.layers.push_back(LayerSpec::maxpool2d(config.pool_window, config.pool_stride));
    // Feature-transfer junction over the pooled conv-2 output: frozen donor
    // beside the trainable third conv, concatenated donor-first.
    spec.layers.push_back(LayerSpec::concat_input("A_conv2d_3", f[2], config.kernel,
                                                  Activation::Relu, spec.donor_layer,
                                                  /*donor_filters=*/f[2],
                                                  /*donor_kernel=*/config.kernel));
    spec.layers.push_back(LayerSpec::maxpool2d(config.pool_window, config.pool_stride));
    spec.layers.push_back(LayerSpec::conv2d("A_conv2d_4", f[3], config.kernel, Activation::Relu,
                                            config.padding));
    spec.layers.push_back(LayerSpec::maxpool2d(config.pool_window, config.pool_stride));
    append_head(spec.layers, config, "A");
    check_spec(spec);
    return spec;
}

int conv_layer_count(const ModelSpec& spec) {
    int n = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::Conv2d) ++n;
        if (l.kind == LayerKind::ConcatInput) n += 2;
    }
    return n;
}

BuiltModel build_mmv(const ModelConfig& config, Rng& rng) {
    ModelSpec spec = make_mmv_spec(config);
    Network net(spec.input_shape, spec.layers);
    net.init_params(rng);
    return {std::move(spec), std::move(net)};
}

BuiltModel build_mmva(const ModelConfig& config, const WeightStore& donor, Rng& rng) {
    ModelSpec spec = make_mmva_spec(config);
    const std::string kernel_name = spec.donor_layer + "/kernel";
    const Tensor* dk = donor.find(kernel_name);
    if (!dk)
        throw validation_error("donor weights are missing '" + kernel_name + "'");
    Network net(spec.input_shape, spec.layers);
    net.init_params(rng);
    Param* frozen = net.find_param(kernel_name);
    if (!frozen) throw runtime_error("junction did not expose '" + kernel_name + "'");
    if (dk->shape() != frozen->value.shape())
        throw validation_error("donor kernel '" + kernel_name + "' has shape " + dk->shape_str() +
                               ", junction expects " + frozen->value.shape_str());
    frozen->value = *dk;
    return {std::move(spec), std::move(net)};
}

std::string model_summary(const ModelSpec& spec) {
    std::ostringstream os;
    os << "model " << spec.name << "  input " << shape_to_string(spec.input_shape) << "\n";
    std::vector<int> shape = spec.input_shape;
    size_t trainable = 0, frozen = 0;
    for (const auto& l : spec.layers) {
        int in_c = shape.size() == 3 ? shape[2] : (shape.size() == 1 ? shape[0] : 0);
        shape = l.output_shape(shape);
        size_t layer_train = 0, layer_frozen = 0;
        switch (l.kind) {
            case LayerKind::Conv2d:
                layer_train = static_cast<size_t>(l.kernel) * l.kernel * in_c * l.filters +
                              (l.use_bias ? l.filters : 0);
                if (!l.trainable) std::swap(layer_train, layer_frozen);
                break;
            case LayerKind::ConcatInput:
                layer_train = static_cast<size_t>(l.kernel) * l.kernel * in_c * l.filters +
                              (l.use_bias ? l.filters : 0);
                layer_frozen = static_cast<size_t>(l.donor_kernel) * l.donor_kernel * in_c *
                               l.donor_filters;
                break;
            case LayerKind::Dense:
                layer_train = static_cast<size_t>(in_c) * l.units + l.units;
                break;
            case LayerKind::BatchNorm:
                layer_train = 2u * static_cast<size_t>(shape.back());
                break;
            default:
                break;
        }
        trainable += layer_train;
        frozen += layer_frozen;
        os << "  " << to_string(l.kind);
        if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::Dense ||
            l.kind == LayerKind::BatchNorm || l.kind == LayerKind::ConcatInput)
            os << " " << l.name;
        if (l.kind == LayerKind::ConcatInput) os << " (+ frozen " << l.donor_name << ")";
        os << " -> " << shape_to_string(shape);
        if (layer_train > 0) os << "  params " << layer_train;
        if (layer_frozen > 0) os << "  frozen " << layer_frozen;
        os << "\n";
    }
    os << "layers: " << spec.layers.size() << "  convolutions: " << conv_layer_count(spec)
       << "  trainable params: " << trainable << "  frozen params: " << frozen << "\n";
    return os.str();
}

} // namespace mm
