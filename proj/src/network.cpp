#include "missmarple/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "missmarple/error.hpp"

namespace mm {

namespace {

float activate(Activation act, float v) {
    switch (act) {
        case Activation::Relu: return v > 0.0f ? v : 0.0f;
        case Activation::Sigmoid: return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
        case Activation::None: return v;
    }
    return v;
}

// Derivative of the activation expressed through the cached output value.
double activation_deriv_from_output(Activation act, float y) {
    switch (act) {
        case Activation::Relu: return y > 0.0f ? 1.0 : 0.0;
        case Activation::Sigmoid: return static_cast<double>(y) * (1.0 - static_cast<double>(y));
        case Activation::None: return 1.0;
    }
    return 1.0;
}

void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    for (auto& v : t.values()) v = (rng.uniform() * 2.0f - 1.0f) * limit;
}

struct ConvGeom {
    int in_h = 0, in_w = 0, in_c = 0;
    int out_h = 0, out_w = 0, out_c = 0;
    int kernel = 0, stride = 1;
    int pad_top = 0, pad_left = 0;
};

ConvGeom conv_geometry(const std::string& name, const std::vector<int>& in, int kernel,
                       int stride, Padding padding, int out_c) {
    if (in.size() != 3)
        throw validation_error("layer '" + name + "': expected [H,W,C] input, got " + shape_to_string(in));
    ConvGeom g;
    g.in_h = in[0];
    g.in_w = in[1];
    g.in_c = in[2];
    g.kernel = kernel;
    g.stride = stride;
    g.out_c = out_c;
    if (padding == Padding::Valid) {
        if (g.in_h < kernel || g.in_w < kernel)
            throw validation_error("layer '" + name + "': input " + shape_to_string(in) +
                                   " smaller than kernel " + std::to_string(kernel));
        g.out_h = (g.in_h - kernel) / stride + 1;
        g.out_w = (g.in_w - kernel) / stride + 1;
        g.pad_top = 0;
        g.pad_left = 0;
    } else {
        g.out_h = (g.in_h + stride - 1) / stride;
        g.out_w = (g.in_w + stride - 1) / stride;
        int pad_h = std::max(0, (g.out_h - 1) * stride + kernel - g.in_h);
        int pad_w = std::max(0, (g.out_w - 1) * stride + kernel - g.in_w);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    }
    return g;
}

class Conv2dLayer : public Layer {
public:
    Conv2dLayer(const LayerSpec& spec, const std::vector<int>& input_shape)
        : Layer(spec.name), act_(spec.activation), padding_(spec.padding),
          use_bias_(spec.use_bias) {
        geom_ = conv_geometry(spec.name, input_shape, spec.kernel, spec.stride, spec.padding, spec.filters);
        kernel_.name = name_ + "/kernel";
        kernel_.value = Tensor({spec.kernel, spec.kernel, geom_.in_c, spec.filters});
        kernel_.grad = Tensor(kernel_.value.shape());
        kernel_.trainable = spec.trainable;
        if (use_bias_) {
            bias_.name = name_ + "/bias";
            bias_.value = Tensor({spec.filters});
            bias_.grad = Tensor({spec.filters});
            bias_.trainable = spec.trainable;
        }
    }

    LayerKind kind() const override { return LayerKind::Conv2d; }

    std::vector<int> output_shape(const std::vector<int>& in) const override {
        auto g = conv_geometry(name_, in, geom_.kernel, geom_.stride, padding_, geom_.out_c);
        return {g.out_h, g.out_w, g.out_c};
    }

    std::vector<Param*> params() override {
        std::vector<Param*> p{&kernel_};
        if (use_bias_) p.push_back(&bias_);
        return p;
    }

    void init_params(Rng& rng) override {
        int k = geom_.kernel;
        glorot_uniform(kernel_.value, k * k * geom_.in_c, k * k * geom_.out_c, rng);
        if (use_bias_) bias_.value.fill(0.0f);
    }

    Tensor forward(const Tensor& x, bool, Rng*) override {
        check_input(x);
        const int B = x.dim(0);
        Tensor out({B, geom_.out_h, geom_.out_w, geom_.out_c});
        const int K = geom_.kernel, S = geom_.stride;
        const int IC = geom_.in_c, OC = geom_.out_c;
        const float* kw = kernel_.value.data();
        std::vector<double> acc(static_cast<size_t>(OC));
        for (int b = 0; b < B; ++b) {
            const float* in_b = x.data() + static_cast<size_t>(b) * geom_.in_h * geom_.in_w * IC;
            float* out_b = out.data() + static_cast<size_t>(b) * geom_.out_h * geom_.out_w * OC;
            for (int oy = 0; oy < geom_.out_h; ++oy) {
                for (int ox = 0; ox < geom_.out_w; ++ox) {
                    if (use_bias_) {
                        const float* bv = bias_.value.data();
                        for (int n = 0; n < OC; ++n) acc[n] = bv[n];
                    } else {
                        std::fill(acc.begin(), acc.end(), 0.0);
                    }
                    for (int ky = 0; ky < K; ++ky) {
                        int yi = oy * S + ky - geom_.pad_top;
                        if (yi < 0 || yi >= geom_.in_h) continue;
                        for (int kx = 0; kx < K; ++kx) {
                            int xi = ox * S + kx - geom_.pad_left;
                            if (xi < 0 || xi >= geom_.in_w) continue;
                            const float* px = in_b + (static_cast<size_t>(yi) * geom_.in_w + xi) * IC;
                            const float* kp = kw + (static_cast<size_t>(ky) * K + kx) * IC * OC;
                            for (int c = 0; c < IC; ++c) {
                                double v = px[c];
                                const float* kr = kp + static_cast<size_t>(c) * OC;
                                for (int n = 0; n < OC; ++n) acc[n] += v * kr[n];
                            }
                        }
                    }
                    float* po = out_b + (static_cast<size_t>(oy) * geom_.out_w + ox) * OC;
                    for (int n = 0; n < OC; ++n) po[n] = activate(act_, static_cast<float>(acc[n]));
                }
            }
        }
        input_ = x;
        output_ = out;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        const int B = input_.dim(0);
        const int K = geom_.kernel, S = geom_.stride;
        const int IC = geom_.in_c, OC = geom_.out_c;
        Tensor dx(input_.shape());
        const bool train_params = kernel_.trainable;
        std::vector<double> dkernel(kernel_.value.size(), 0.0);
        std::vector<double> dbias(use_bias_ ? static_cast<size_t>(OC) : 0, 0.0);
        std::vector<double> din(static_cast<size_t>(geom_.in_h) * geom_.in_w * IC);
        std::vector<double> dpre(static_cast<size_t>(OC));
        const float* kw = kernel_.value.data();
        for (int b = 0; b < B; ++b) {
            const float* in_b = input_.data() + static_cast<size_t>(b) * geom_.in_h * geom_.in_w * IC;
            const float* y_b = output_.data() + static_cast<size_t>(b) * geom_.out_h * geom_.out_w * OC;
            const float* g_b = grad_out.data() + static_cast<size_t>(b) * geom_.out_h * geom_.out_w * OC;
            std::fill(din.begin(), din.end(), 0.0);
            for (int oy = 0; oy < geom_.out_h; ++oy) {
                for (int ox = 0; ox < geom_.out_w; ++ox) {
                    size_t o = (static_cast<size_t>(oy) * geom_.out_w + ox) * OC;
                    for (int n = 0; n < OC; ++n)
                        dpre[n] = g_b[o + n] * activation_deriv_from_output(act_, y_b[o + n]);
                    if (use_bias_ && train_params)
                        for (int n = 0; n < OC; ++n) dbias[n] += dpre[n];
                    for (int ky = 0; ky < K; ++ky) {
                        int yi = oy * S + ky - geom_.pad_top;
                        if (yi < 0 || yi >= geom_.in_h) continue;
                        for (int kx = 0; kx < K; ++kx) {
                            int xi = ox * S + kx - geom_.pad_left;
                            if (xi < 0 || xi >= geom_.in_w) continue;
                            const float* px = in_b + (static_cast<size_t>(yi) * geom_.in_w + xi) * IC;
                            double* pd = din.data() + (static_cast<size_t>(yi) * geom_.in_w + xi) * IC;
                            const float* kp = kw + (static_cast<size_t>(ky) * K + kx) * IC * OC;
                            double* kd = dkernel.data() + (static_cast<size_t>(ky) * K + kx) * IC * OC;
                            for (int c = 0; c < IC; ++c) {
                                double v = px[c];
                                const float* kr = kp + static_cast<size_t>(c) * OC;
                                double* krd = kd + static_cast<size_t>(c) * OC;
                                double s = 0.0;
                                if (train_params) {
                                    for (int n = 0; n < OC; ++n) {
                                        double g = dpre[n];
                                        krd[n] += v * g;
                                        s += kr[n] * g;
                                    }
                                } else {
                                    for (int n = 0; n < OC; ++n) s += kr[n] * dpre[n];
                                }
                                pd[c] += s;
                            }
                        }
                    }
                }
            }
            float* dx_b = dx.data() + static_cast<size_t>(b) * geom_.in_h * geom_.in_w * IC;
            for (size_t i = 0; i < din.size(); ++i) dx_b[i] = static_cast<float>(din[i]);
        }
        if (train_params) {
            float* kg = kernel_.grad.data();
            for (size_t i = 0; i < dkernel.size(); ++i) kg[i] += static_cast<float>(dkernel[i]);
            if (use_bias_) {
                float* bg = bias_.grad.data();
                for (int n = 0; n < OC; ++n) bg[n] += static_cast<float>(dbias[n]);
            }
        }
        return dx;
    }

private:
    void check_input(const Tensor& x) const {
        if (x.rank() != 4 || x.dim(1) != geom_.in_h || x.dim(2) != geom_.in_w || x.dim(3) != geom_.in_c)
            throw validation_error("layer '" + name_ + "': input " + x.shape_str() +
                                   " does not match expected [B," + std::to_string(geom_.in_h) + "," +
                                   std::to_string(geom_.in_w) + "," + std::to_string(geom_.in_c) + "]");
    }

    Activation act_;
    Padding padding_;
    bool use_bias_;
    ConvGeom geom_;
    Param kernel_;
    Param bias_;
    Tensor input_;
    Tensor output_;
};

class MaxPool2dLayer : public Layer {
public:
    MaxPool2dLayer(const LayerSpec& spec, const std::vector<int>& input_shape)
        : Layer(spec.name), window_(spec.window), stride_(spec.stride) {
        if (input_shape.size() != 3)
            throw validation_error("layer '" + name_ + "': expected [H,W,C] input, got " +
                                   shape_to_string(input_shape));
        in_h_ = input_shape[0];
        in_w_ = input_shape[1];
        channels_ = input_shape[2];
        if (in_h_ < window_ || in_w_ < window_)
            throw validation_error("layer '" + name_ + "': maxpool window " + std::to_string(window_) +
                                   " larger than input " + shape_to_string(input_shape));
        out_h_ = (in_h_ - window_) / stride_ + 1;
        out_w_ = (in_w_ - window_) / stride_ + 1;
    }

    LayerKind kind() const override { return LayerKind::MaxPool2d; }

    std::vector<int> output_shape(const std::vector<int>& in) const override {
        LayerSpec s = LayerSpec::maxpool2d(window_, stride_);
        s.name = name_;
        return s.output_shape(in);
    }

    Tensor forward(const Tensor& x, bool, Rng*) override {
        const int B = x.dim(0);
        Tensor out({B, out_h_, out_w_, channels_});
        argmax_.assign(out.size(), 0);
        for (int b = 0; b < B; ++b) {
            const float* in_b = x.data() + static_cast<size_t>(b) * in_h_ * in_w_ * channels_;
            for (int oy = 0; oy < out_h_; ++oy) {
                for (int ox = 0; ox < out_w_; ++ox) {
                    for (int c = 0; c < channels_; ++c) {
                        float best = -std::numeric_limits<float>::infinity();
                        size_t best_idx = 0;
                        for (int wy = 0; wy < window_; ++wy) {
                            for (int wx = 0; wx < window_; ++wx) {
                                size_t idx = (static_cast<size_t>(oy * stride_ + wy) * in_w_ +
                                              (ox * stride_ + wx)) * channels_ + c;
                                float v = in_b[idx];
                                if (v > best) {
                                    best = v;
                                    best_idx = idx;
                                }
                            }
                        }
                        size_t o = ((static_cast<size_t>(b) * out_h_ + oy) * out_w_ + ox) * channels_ + c;
                        out[o] = best;
                        argmax_[o] = static_cast<size_t>(b) * in_h_ * in_w_ * channels_ + best_idx;
                    }
                }
            }
        }
        in_batch_ = B;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor dx({in_batch_, in_h_, in_w_, channels_});
        for (size_t o = 0; o < grad_out.size(); ++o) dx[argmax_[o]] += grad_out[o];
        return dx;
    }

private:
    int window_, stride_;
    int in_h_ = 0, in_w_ = 0, channels_ = 0, out_h_ = 0, out_w_ = 0;
    int in_batch_ = 0;
    std::vector<size_t> argmax_;
};

class BatchNormLayer : public Layer {
public:
    BatchNormLayer(const LayerSpec& spec, const std::vector<int>& input_shape)
        : Layer(spec.name), momentum_(spec.bn_momentum), eps_(spec.bn_eps) {
        channels_ = input_shape.back();
        gamma_ = make_param(name_ + "/gamma", 1.0f, true);
        beta_ = make_param(name_ + "/beta", 0.0f, true);
        running_mean_ = make_param(name_ + "/running_mean", 0.0f, false);
        running_var_ = make_param(name_ + "/running_var", 1.0f, false);
    }

    LayerKind kind() const override { return LayerKind::BatchNorm; }

    std::vector<int> output_shape(const std::vector<int>& in) const override { return in; }

    std::vector<Param*> params() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }

    Tensor forward(const Tensor& x, bool training, Rng*) override {
        const int C = channels_;
        const size_t rows = x.size() / static_cast<size_t>(C);
        Tensor out(x.shape());
        xhat_ = Tensor(x.shape());
        inv_std_.assign(static_cast<size_t>(C), 0.0);
        mean_.assign(static_cast<size_t>(C), 0.0);
        trained_mode_ = training;
        if (training) {
            std::vector<double> var(static_cast<size_t>(C), 0.0);
            const float* px = x.data();
            for (size_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c) mean_[c] += px[r * C + c];
            for (int c = 0; c < C; ++c) mean_[c] /= static_cast<double>(rows);
            for (size_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c) {
                    double d = px[r * C + c] - mean_[c];
                    var[c] += d * d;
                }
            for (int c = 0; c < C; ++c) var[c] /= static_cast<double>(rows);
            for (int c = 0; c < C; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + eps_);
            // exponential moving averages, batch statistics folded in
            for (int c = 0; c < C; ++c) {
                running_mean_.value[c] = static_cast<float>(momentum_ * running_mean_.value[c] +
                                                            (1.0 - momentum_) * mean_[c]);
                running_var_.value[c] = static_cast<float>(momentum_ * running_var_.value[c] +
                                                           (1.0 - momentum_) * var[c]);
            }
        } else {
            for (int c = 0; c < C; ++c) {
                mean_[c] = running_mean_.value[c];
                inv_std_[c] = 1.0 / std::sqrt(static_cast<double>(running_var_.value[c]) + eps_);
            }
        }
        const float* px = x.data();
        float* ph = xhat_.data();
        float* po = out.data();
        for (size_t r = 0; r < rows; ++r) {
            for (int c = 0; c < C; ++c) {
                double h = (px[r * C + c] - mean_[c]) * inv_std_[c];
                ph[r * C + c] = static_cast<float>(h);
                po[r * C + c] = static_cast<float>(gamma_.value[c] * h + beta_.value[c]);
            }
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        const int C = channels_;
        const size_t rows = grad_out.size() / static_cast<size_t>(C);
        Tensor dx(grad_out.shape());
        std::vector<double> sum_dy(static_cast<size_t>(C), 0.0);
        std::vector<double> sum_dy_xhat(static_cast<size_t>(C), 0.0);
        const float* g = grad_out.data();
        const float* h = xhat_.data();
        for (size_t r = 0; r < rows; ++r)
            for (int c = 0; c < C; ++c) {
                sum_dy[c] += g[r * C + c];
                sum_dy_xhat[c] += static_cast<double>(g[r * C + c]) * h[r * C + c];
            }
        for (int c = 0; c < C; ++c) {
            gamma_.grad[c] += static_cast<float>(sum_dy_xhat[c]);
            beta_.grad[c] += static_cast<float>(sum_dy[c]);
        }
        float* pdx = dx.data();
        if (trained_mode_) {
            double n = static_cast<double>(rows);
            for (size_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c) {
                    double dxhat = static_cast<double>(g[r * C + c]) * gamma_.value[c];
                    double term = n * dxhat - gamma_.value[c] * sum_dy[c] -
                                  static_cast<double>(h[r * C + c]) * gamma_.value[c] * sum_dy_xhat[c];
                    pdx[r * C + c] = static_cast<float>(inv_std_[c] / n * term);
                }
        } else {
            for (size_t r = 0; r < rows; ++r)
                for (int c = 0; c < C; ++c)
                    pdx[r * C + c] = static_cast<float>(static_cast<double>(g[r * C + c]) *
                                                        gamma_.value[c] * inv_std_[c]);
        }
        return dx;
    }

private:
    Param make_param(std::string pname, float fill, bool trainable) {
        Param p;
        p.name = std::move(pname);
        p.value = Tensor({channels_}, fill);
        p.grad = Tensor({channels_});
        p.trainable = trainable;
        return p;
    }

    float momentum_, eps_;
    int channels_ = 0;
    bool trained_mode_ = false;
    Param gamma_, beta_, running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> inv_std_;
    std::vector<double> mean_;
};

class DropoutLayer : public Layer {
public:
    DropoutLayer(const LayerSpec& spec) : Layer(spec.name), rate_(spec.rate) {}

    LayerKind kind() const override { return LayerKind::Dropout; }
    std::vector<int> output_shape(const std::vector<int>& in) const override { return in; }

    Tensor forward(const Tensor& x, bool training, Rng* rng) override {
        if (!training || rate_ <= 0.0f) {
            mask_.clear();
            return x;
        }
        if (!rng)
            throw runtime_error("layer '" + name_ + "': dropout in training mode requires an RNG");
        float scale = 1.0f / (1.0f - rate_);
        mask_.resize(x.size());
        Tensor out(x.shape());
        for (size_t i = 0; i < x.size(); ++i) {
            mask_[i] = rng->uniform() >= rate_ ? scale : 0.0f;
            out[i] = x[i] * mask_[i];
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (mask_.empty()) return grad_out;
        Tensor dx(grad_out.shape());
        for (size_t i = 0; i < grad_out.size(); ++i) dx[i] = grad_out[i] * mask_[i];
        return dx;
    }

private:
    float rate_;
    std::vector<float> mask_;
};

class FlattenLayer : public Layer {
public:
    FlattenLayer(const LayerSpec& spec) : Layer(spec.name) {}

    LayerKind kind() const override { return LayerKind::Flatten; }

    std::vector<int> output_shape(const std::vector<int>& in) const override {
        int n = 1;
        for (int d : in) n *= d;
        return {n};
    }

    Tensor forward(const Tensor& x, bool, Rng*) override {
        in_shape_ = x.shape();
        int features = 1;
        for (int i = 1; i < x.rank(); ++i) features *= x.dim(i);
        Tensor out({x.dim(0), features});
        out.values() = x.values();
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor dx(in_shape_);
        dx.values() = grad_out.values();
        return dx;
    }

private:
    std::vector<int> in_shape_;
};

class DenseLayer : public Layer {
public:
    DenseLayer(const LayerSpec& spec, const std::vector<int>& input_shape)
        : Layer(spec.name), act_(spec.activation), units_(spec.units) {
        if (input_shape.size() != 1)
            throw validation_error("layer '" + name_ + "': dense expects flat input, got " +
                                   shape_to_string(input_shape));
        features_ = input_shape[0];
        kernel_.name = name_ + "/kernel";
        kernel_.value = Tensor({features_, units_});
        kernel_.grad = Tensor(kernel_.value.shape());
        kernel_.trainable = spec.trainable;
        bias_.name = name_ + "/bias";
        bias_.value = Tensor({units_});
        bias_.grad = Tensor({units_});
        bias_.trainable = spec.trainable;
    }

    LayerKind kind() const override { return LayerKind::Dense; }

    std::vector<int> output_shape(const std::vector<int>& in) const override {
        if (in.size() != 1)
            throw validation_error("layer '" + name_ + "': dense expects flat input, got " + shape_to_string(in));
        if (in[0] != features_)
            throw validation_error("layer '" + name_ + "': input " + shape_to_string(in) +
                                   " does not match kernel " + kernel_.value.shape_str());
        return {units_};
    }

    std::vector<Param*> params() override { return {&kernel_, &bias_}; }

    void init_params(Rng& rng) override {
        glorot_uniform(kernel_.value, features_, units_, rng);
        bias_.value.fill(0.0f);
    }

    Tensor forward(const Tensor& x, bool, Rng*) override {
        if (x.rank() != 2 || x.dim(1) != features_)
            throw validation_error("layer '" + name_ + "': input " + x.shape_str() +
                                   " does not match expected [B," + std::to_string(features_) + "]");
        const int B = x.dim(0);
        Tensor out({B, units_});
        const float* w = kernel_.value.data();
        for (int b = 0; b < B; ++b) {
            const float* px = x.data() + static_cast<size_t>(b) * features_;
            float* po = out.data() + static_cast<size_t>(b) * units_;
            for (int u = 0; u < units_; ++u) {
                double acc = bias_.value[u];
                for (int f = 0; f < features_; ++f) acc += static_cast<double>(px[f]) * w[static_cast<size_t>(f) * units_ + u];
                po[u] = activate(act_, static_cast<float>(acc));
            }
        }
        input_ = x;
        output_ = out;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        const int B = input_.dim(0);
        Tensor dx(input_.shape());
        std::vector<double> dw(kernel_.value.size(), 0.0);
        std::vector<double> db(static_cast<size_t>(units_), 0.0);
        std::vector<double> dpre(static_cast<size_t>(units_));
        const float* w = kernel_.value.data();
        for (int b = 0; b < B; ++b) {
            const float* px = input_.data() + static_cast<size_t>(b) * features_;
            const float* py = output_.data() + static_cast<size_t>(b) * units_;
            const float* pg = grad_out.data() + static_cast<size_t>(b) * units_;
            float* pdx = dx.data() + static_cast<size_t>(b) * features_;
            for (int u = 0; u < units_; ++u) {
                dpre[u] = pg[u] * activation_deriv_from_output(act_, py[u]);
                db[u] += dpre[u];
            }
            for (int f = 0; f < features_; ++f) {
                double v = px[f];
                const float* wr = w + static_cast<size_t>(f) * units_;
                double* dwr = dw.data() + static_cast<size_t>(f) * units_;
                double s = 0.0;
                for (int u = 0; u < units_; ++u) {
                    dwr[u] += v * dpre[u];
                    s += wr[u] * dpre[u];
                }
                pdx[f] = static_cast<float>(s);
            }
        }
        if (kernel_.trainable) {
            float* kg = kernel_.grad.data();
            for (size_t i = 0; i < dw.size(); ++i) kg[i] += static_cast<float>(dw[i]);
            float* bg = bias_.grad.data();
            for (int u = 0; u < units_; ++u) bg[u] += static_cast<float>(db[u]);
        }
        return dx;
    }

private:
    Activation act_;
    int units_, features_ = 0;
    Param kernel_, bias_;
    Tensor input_, output_;
};

// Feature-transfer junction: a frozen donor conv (no bias, no activation) and
// a trainable conv consume the same input; outputs concatenate donor-first
// along the channel axis.
class ConcatInputLayer : public Layer {
public:
    ConcatInputLayer(const LayerSpec& spec, const std::vector<int>& input_shape)
        : Layer(spec.name) {
        LayerSpec branch = LayerSpec::conv2d(spec.name, spec.filters, spec.kernel, spec.activation,
                                             spec.padding, spec.stride, spec.use_bias, true);
        LayerSpec donor = LayerSpec::conv2d(spec.donor_name, spec.donor_filters, spec.donor_kernel,
                                            Activation::None, spec.padding, spec.stride,
                                            /*use_bias=*/false, /*trainable=*/false);
        donor_ = std::make_unique<Conv2dLayer>(donor, input_shape);
        branch_ = std::make_unique<Conv2dLayer>(branch, input_shape);
        donor_channels_ = spec.donor_filters;
        branch_channels_ = spec.filters;
        auto a = donor_->output_shape(input_shape);
        auto b = branch_->output_shape(input_shape);
        if (a[0] != b[0] || a[1] != b[1])
            throw validation_error("layer '" + name_ + "': donor output " + shape_to_string(a) +
                                   " and branch output " + shape_to_string(b) + " differ spatially");
    }

    LayerKind kind() const override { return LayerKind::ConcatInput; }

    std::vector<int> output_shape(const std::vector<int>& in) const override {
        auto s = branch_->output_shape(in);
        s[2] = donor_channels_ + branch_channels_;
        return s;
    }

    std::vector<Param*> params() override {
        auto p = donor_->params();
        auto q = branch_->params();
        p.insert(p.end(), q.begin(), q.end());
        return p;
    }

    void init_params(Rng& rng) override {
        // Donor values come from the transferred weights; zero until loaded.
        branch_->init_params(rng);
    }

    Tensor forward(const Tensor& x, bool training, Rng* rng) override {
        Tensor a = donor_->forward(x, training, rng);
        Tensor b = branch_->forward(x, training, rng);
        const int B = a.dim(0), H = a.dim(1), W = a.dim(2);
        const int CA = donor_channels_, CB = branch_channels_;
        Tensor out({B, H, W, CA + CB});
        const size_t cells = static_cast<size_t>(B) * H * W;
        for (size_t i = 0; i < cells; ++i) {
            std::memcpy(out.data() + i * (CA + CB), a.data() + i * CA, sizeof(float) * CA);
            std::memcpy(out.data() + i * (CA + CB) + CA, b.data() + i * CB, sizeof(float) * CB);
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        const int B = grad_out.dim(0), H = grad_out.dim(1), W = grad_out.dim(2);
        const int CA = donor_channels_, CB = branch_channels_;
        Tensor ga({B, H, W, CA});
        Tensor gb({B, H, W, CB});
        const size_t cells = static_cast<size_t>(B) * H * W;
        for (size_t i = 0; i < cells; ++i) {
            std::memcpy(ga.data() + i * CA, grad_out.data() + i * (CA + CB), sizeof(float) * CA);
            std::memcpy(gb.data() + i * CB, grad_out.data() + i * (CA + CB) + CA, sizeof(float) * CB);
        }
        Tensor da = donor_->backward(ga);
        Tensor db = branch_->backward(gb);
        for (size_t i = 0; i < da.size(); ++i) da[i] += db[i];
        return da;
    }

private:
    std::unique_ptr<Conv2dLayer> donor_;
    std::unique_ptr<Conv2dLayer> branch_;
    int donor_channels_ = 0, branch_channels_ = 0;
};

} // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const std::vector<int>& input_shape) {
    spec.validate();
    switch (spec.kind) {
        case LayerKind::Conv2d: return std::make_unique<Conv2dLayer>(spec, input_shape);
        case LayerKind::MaxPool2d: return std::make_unique<MaxPool2dLayer>(spec, input_shape);
        case LayerKind::BatchNorm: return std::make_unique<BatchNormLayer>(spec, input_shape);
        case LayerKind::Dropout: return std::make_unique<DropoutLayer>(spec);
        case LayerKind::Flatten: return std::make_unique<FlattenLayer>(spec);
        case LayerKind::Dense: return std::make_unique<DenseLayer>(spec, input_shape);
        case LayerKind::ConcatInput: return std::make_unique<ConcatInputLayer>(spec, input_shape);
    }
    throw validation_error("unknown layer kind");
}

Network::Network(std::vector<int> input_shape, const std::vector<LayerSpec>& specs)
    : input_shape_(std::move(input_shape)) {
    std::vector<int> shape = input_shape_;
    for (const auto& spec : specs) {
        layers_.push_back(make_layer(spec, shape));
        shape = spec.output_shape(shape);
    }
    compute_trace();
}

Network::Network(std::vector<int> input_shape, std::vector<std::unique_ptr<Layer>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    compute_trace();
}

void Network::compute_trace() {
    shape_trace_.clear();
    std::vector<int> shape = input_shape_;
    shape_trace_.push_back(shape);
    for (const auto& l : layers_) {
        shape = l->output_shape(shape);
        shape_trace_.push_back(shape);
    }
}

Tensor Network::forward(const Tensor& x, bool training, Rng* rng) {
    if (x.rank() != static_cast<int>(input_shape_.size()) + 1)
        throw validation_error("network input " + x.shape_str() + " must be batched " +
                               shape_to_string(input_shape_));
    for (size_t i = 0; i < input_shape_.size(); ++i)
        if (x.dim(static_cast<int>(i) + 1) != input_shape_[i])
            throw validation_error("network input " + x.shape_str() + " does not match " +
                                   shape_to_string(input_shape_));
    Tensor v = x;
    for (auto& l : layers_) v = l->forward(v, training, rng);
    return v;
}

Tensor Network::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& l : layers_)
        for (Param* p : l->params()) out.push_back(p);
    return out;
}

Param* Network::find_param(const std::string& name) {
    for (Param* p : params())
        if (p->name == name) return p;
    return nullptr;
}

void Network::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

void Network::init_params(Rng& rng) {
    for (auto& l : layers_) l->init_params(rng);
}

size_t Network::trainable_param_count() {
    size_t n = 0;
    for (Param* p : params())
        if (p->trainable) n += p->value.size();
    return n;
}

double bce_loss(const Tensor& probs, const std::vector<float>& labels, Tensor* grad_probs) {
    if (probs.rank() != 2 || probs.dim(1) != 1)
        throw validation_error("bce_loss expects [B,1] probabilities, got " + probs.shape_str());
    const size_t B = static_cast<size_t>(probs.dim(0));
    if (labels.size() != B)
        throw validation_error("bce_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                               std::to_string(B));
    constexpr double kEps = 1e-7;
    double total = 0.0;
    if (grad_probs) *grad_probs = Tensor(probs.shape());
    for (size_t i = 0; i < B; ++i) {
        double y = labels[i];
        double p = probs[i];
        bool clamped = p < kEps || p > 1.0 - kEps;
        double pc = std::min(std::max(p, kEps), 1.0 - kEps);
        total += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        if (grad_probs)
            (*grad_probs)[i] = clamped ? 0.0f
                                       : static_cast<float>((pc - y) / (pc * (1.0 - pc)) / static_cast<double>(B));
    }
    return total / static_cast<double>(B);
}

double binary_accuracy(const Tensor& probs, const std::vector<float>& labels) {
    const size_t B = static_cast<size_t>(probs.dim(0));
    size_t hits = 0;
    for (size_t i = 0; i < B; ++i) {
        int pred = probs[i] > 0.5f ? 1 : 0;
        int truth = labels[i] > 0.5f ? 1 : 0;
        if (pred == truth) ++hits;
    }
    return B == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(B);
}

} // namespace mm
