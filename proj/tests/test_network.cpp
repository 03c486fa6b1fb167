#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "missmarple/error.hpp"
#include "missmarple/network.hpp"
#include "missmarple/optimizer.hpp"
#include "missmarple/weights.hpp"

#include "helpers.hpp"

using namespace mm;

namespace {

// Wraps a [H,W,C] tensor as a [1,H,W,C] batch.
Tensor batch_of_one(const Tensor& t) {
    Tensor out({1, t.dim(0), t.dim(1), t.dim(2)});
    out.values() = t.values();
    return out;
}

Tensor unbatch(const Tensor& t) {
    std::vector<int> shape(t.shape().begin() + 1, t.shape().end());
    Tensor out(shape);
    out.values() = t.values();
    return out;
}

} // namespace

TEST_CASE("conv2d with a centered delta kernel is the identity map") {
    Rng rng(1);
    Tensor input = mmtest::random_tensor({6, 6, 2}, rng);
    auto spec = LayerSpec::conv2d("c", 2, 3, Activation::None, Padding::Same);
    auto layer = make_layer(spec, {6, 6, 2});
    auto params = layer->params();
    REQUIRE(params.size() == 2);
    params[0]->value.fill(0.0f);
    params[1]->value.fill(0.0f);
    // kernel[1][1][c][c] = 1 passes each channel straight through
    params[0]->value.at4(1, 1, 0, 0) = 1.0f;
    params[0]->value.at4(1, 1, 1, 1) = 1.0f;

    Tensor out = layer->forward(batch_of_one(input), false, nullptr);
    CHECK(unbatch(out) == input);
}

TEST_CASE("conv2d matches the reference convolution (same padding, relu)") {
    Rng rng(2);
    for (int trial = 0; trial < 8; ++trial) {
        Tensor input = mmtest::random_tensor({5, 7, 3}, rng);
        auto spec = LayerSpec::conv2d("c", 4, 3, Activation::Relu, Padding::Same);
        auto layer = make_layer(spec, {5, 7, 3});
        layer->init_params(rng);
        auto params = layer->params();
        Tensor& kernel = params[0]->value;
        for (auto& v : params[1]->value.values()) v = rng.uniform() - 0.5f;

        Tensor expect = mmtest::conv2d_reference(
            input, kernel, params[1]->value.values(), /*relu=*/true, /*same=*/true);
        Tensor got = unbatch(layer->forward(batch_of_one(input), false, nullptr));
        REQUIRE(got.shape() == expect.shape());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-5));
    }
}

TEST_CASE("conv2d matches the reference convolution (valid padding, no bias)") {
    Rng rng(3);
    Tensor input = mmtest::random_tensor({6, 6, 2}, rng);
    auto spec = LayerSpec::conv2d("c", 3, 3, Activation::None, Padding::Valid, 1, /*use_bias=*/false);
    auto layer = make_layer(spec, {6, 6, 2});
    layer->init_params(rng);
    Tensor& kernel = layer->params()[0]->value;

    Tensor expect = mmtest::conv2d_reference(input, kernel, {}, false, false);
    Tensor got = unbatch(layer->forward(batch_of_one(input), false, nullptr));
    REQUIRE(got.shape() == std::vector<int>{4, 4, 3});
    for (size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("maxpool2d picks block maxima") {
    Tensor input({1, 4, 4, 1});
    float vals[16] = {1, 2, 5, 4,
                      3, 0, 1, 2,
                      9, 1, 0, 7,
                      2, 8, 3, 1};
    for (int i = 0; i < 16; ++i) input[static_cast<size_t>(i)] = vals[i];

    auto layer = make_layer(LayerSpec::maxpool2d(2, 2), {4, 4, 1});
    Tensor out = layer->forward(input, false, nullptr);
    REQUIRE(out.shape() == std::vector<int>{1, 2, 2, 1});
    CHECK(out[0] == 3.0f);
    CHECK(out[1] == 5.0f);
    CHECK(out[2] == 9.0f);
    CHECK(out[3] == 7.0f);
}

TEST_CASE("maxpool2d backward routes gradient to the argmax only") {
    Tensor input({1, 2, 2, 1});
    input[0] = 1.0f; input[1] = 4.0f; input[2] = 2.0f; input[3] = 3.0f;
    auto layer = make_layer(LayerSpec::maxpool2d(2, 2), {2, 2, 1});
    layer->forward(input, true, nullptr);
    Tensor gout({1, 1, 1, 1});
    gout[0] = 5.0f;
    Tensor gin = layer->backward(gout);
    CHECK(gin[0] == 0.0f);
    CHECK(gin[1] == 5.0f);
    CHECK(gin[2] == 0.0f);
    CHECK(gin[3] == 0.0f);
}

TEST_CASE("dense layer computes xW + b with activation") {
    auto layer = make_layer(LayerSpec::dense("d", 2, Activation::None), {3});
    auto params = layer->params();
    REQUIRE(params[0]->value.shape() == std::vector<int>{3, 2});
    float w[6] = {1, 2, 3, 4, 5, 6};  // rows = inputs, cols = units
    for (int i = 0; i < 6; ++i) params[0]->value[static_cast<size_t>(i)] = w[i];
    params[1]->value[0] = 0.5f;
    params[1]->value[1] = -0.5f;

    Tensor x({1, 3});
    x[0] = 1.0f; x[1] = 0.0f; x[2] = 2.0f;
    Tensor out = layer->forward(x, false, nullptr);
    CHECK(out[0] == doctest::Approx(1 * 1 + 0 * 3 + 2 * 5 + 0.5));
    CHECK(out[1] == doctest::Approx(1 * 2 + 0 * 4 + 2 * 6 - 0.5));
}

TEST_CASE("batchnorm training output has zero mean and unit variance per channel") {
    Rng rng(5);
    Tensor input = mmtest::random_tensor({4, 3, 3, 2}, rng, 0.0f, 10.0f);
    auto layer = make_layer(LayerSpec::batchnorm("bn", 0.99f, 1e-3f), {3, 3, 2});
    Tensor out = layer->forward(input, true, nullptr);

    const int C = 2;
    const int rows = 4 * 3 * 3;
    for (int c = 0; c < C; ++c) {
        double mean = 0, var = 0;
        for (int i = 0; i < rows; ++i) mean += out[static_cast<size_t>(i) * C + c];
        mean /= rows;
        for (int i = 0; i < rows; ++i) {
            double d = out[static_cast<size_t>(i) * C + c] - mean;
            var += d * d;
        }
        var /= rows;
        CHECK(std::abs(mean) < 1e-5);
        // eps shrinks the normalized variance slightly below 1
        CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("batchnorm inference uses running statistics") {
    auto layer = make_layer(LayerSpec::batchnorm("bn", 0.5f, 1e-3f), {1, 1, 1});
    // before any training batch: running mean 0, var 1 -> near identity
    Tensor x({1, 1, 1, 1});
    x[0] = 2.0f;
    Tensor eval0 = layer->forward(x, false, nullptr);
    CHECK(eval0[0] == doctest::Approx(2.0f / std::sqrt(1.0f + 1e-3f)));

    // one training batch with mean 3, biased variance 4 over values {1,5}
    Tensor b({2, 1, 1, 1});
    b[0] = 1.0f;
    b[1] = 5.0f;
    layer->forward(b, true, nullptr);
    // momentum 0.5: running mean 1.5, running var 0.5*1 + 0.5*4 = 2.5
    Tensor eval1 = layer->forward(x, false, nullptr);
    CHECK(eval1[0] == doctest::Approx((2.0f - 1.5f) / std::sqrt(2.5f + 1e-3f)).epsilon(1e-4));
}

TEST_CASE("dropout scales the kept entries and is identity at inference") {
    Rng rng(6);
    Tensor x({1, 1000});
    x.fill(1.0f);
    auto layer = make_layer(LayerSpec::dropout(0.25f), {1000});

    Tensor eval = layer->forward(x, false, nullptr);
    CHECK(eval == x);

    Tensor train = layer->forward(x, true, &rng);
    int zeros = 0;
    for (size_t i = 0; i < train.size(); ++i) {
        if (train[i] == 0.0f)
            ++zeros;
        else
            CHECK(train[i] == doctest::Approx(1.0f / 0.75f));
    }
    CHECK(zeros > 150);
    CHECK(zeros < 350);
}

TEST_CASE("dropout in training without an rng is an error") {
    Tensor x({1, 4}, 1.0f);
    auto layer = make_layer(LayerSpec::dropout(0.5f), {4});
    CHECK_THROWS_AS(layer->forward(x, true, nullptr), std::exception);
}

TEST_CASE("network rejects inputs that do not match its compiled shape") {
    Network net({8, 8, 3}, std::vector<LayerSpec>{LayerSpec::conv2d("c", 4, 3)});
    Tensor wrong({1, 8, 8, 1});
    CHECK_THROWS_AS(net.forward(wrong), Error);
    Tensor unbatched({8, 8, 3});
    CHECK_THROWS_AS(net.forward(unbatched), Error);
}

TEST_CASE("network shape trace covers every layer") {
    std::vector<LayerSpec> specs{
        LayerSpec::conv2d("c1", 4, 3),
        LayerSpec::maxpool2d(2, 2),
        LayerSpec::flatten(),
        LayerSpec::dense("d", 1, Activation::Sigmoid),
    };
    Network net({8, 8, 3}, specs);
    const auto& trace = net.shape_trace();
    REQUIRE(trace.size() == 5);  // input + one per layer
    CHECK(trace[0] == std::vector<int>{8, 8, 3});
    CHECK(trace[1] == std::vector<int>{8, 8, 4});
    CHECK(trace[2] == std::vector<int>{4, 4, 4});
    CHECK(trace[3] == std::vector<int>{64});
    CHECK(trace[4] == std::vector<int>{1});
}

TEST_CASE("incompatible layer stacks are rejected at construction") {
    std::vector<LayerSpec> specs{
        LayerSpec::dense("d", 4, Activation::Relu),  // dense on [H,W,C]
    };
    CHECK_THROWS_AS(Network({8, 8, 3}, specs), Error);
}

TEST_CASE("bce loss and gradient on a known example") {
    Tensor probs({2, 1});
    probs[0] = 0.9f;
    probs[1] = 0.2f;
    std::vector<float> labels{1.0f, 0.0f};
    Tensor grad;
    double loss = bce_loss(probs, labels, &grad);
    double expect = -(std::log(0.9) + std::log(0.8)) / 2.0;
    CHECK(loss == doctest::Approx(expect).epsilon(1e-6));
    // dL/dp = (p - y) / (p (1-p)) / B
    CHECK(grad[0] == doctest::Approx((0.9 - 1.0) / (0.9 * 0.1) / 2.0).epsilon(1e-5));
    CHECK(grad[1] == doctest::Approx((0.2 - 0.0) / (0.2 * 0.8) / 2.0).epsilon(1e-5));
}

TEST_CASE("bce loss clamps extreme probabilities instead of exploding") {
    Tensor probs({2, 1});
    probs[0] = 0.0f;
    probs[1] = 1.0f;
    std::vector<float> labels{1.0f, 0.0f};
    Tensor grad;
    double loss = bce_loss(probs, labels, &grad);
    CHECK(std::isfinite(loss));
    double expect = -std::log(1e-7);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-4));
    CHECK(std::isfinite(grad[0]));
    CHECK(std::isfinite(grad[1]));
}

TEST_CASE("bce loss validates its input shape") {
    Tensor probs({2, 2});
    std::vector<float> labels{1.0f, 0.0f};
    CHECK_THROWS_AS(bce_loss(probs, labels), Error);
    Tensor ok({3, 1});
    CHECK_THROWS_AS(bce_loss(ok, labels), Error);  // label count mismatch
}

TEST_CASE("binary accuracy thresholds at 0.5") {
    Tensor probs({4, 1});
    probs[0] = 0.9f;   // predicted 1
    probs[1] = 0.4f;   // predicted 0
    probs[2] = 0.5f;   // predicted 0 (strictly greater counts as fake)
    probs[3] = 0.51f;  // predicted 1
    std::vector<float> labels{1, 0, 0, 0};
    CHECK(binary_accuracy(probs, labels) == doctest::Approx(0.75));
}

TEST_CASE("rmsprop first step matches the closed form") {
    Param p;
    p.name = "w";
    p.value = Tensor({2});
    p.grad = Tensor({2});
    p.value[0] = 1.0f;
    p.value[1] = -2.0f;
    p.grad[0] = 0.3f;
    p.grad[1] = -0.7f;

    const float lr = 0.01f, rho = 0.9f, eps = 1e-7f;
    RmsProp opt(lr, rho, eps);
    std::vector<Param*> params{&p};
    opt.step(params);

    for (int i = 0; i < 2; ++i) {
        float g = i == 0 ? 0.3f : -0.7f;
        float cache = (1.0f - rho) * g * g;
        float expect = (i == 0 ? 1.0f : -2.0f) - lr * g / (std::sqrt(cache) + eps);
        CHECK(p.value[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("rmsprop second step accumulates the cache") {
    Param p;
    p.name = "w";
    p.value = Tensor({1});
    p.grad = Tensor({1});
    p.value[0] = 0.0f;

    const float lr = 0.1f, rho = 0.5f, eps = 1e-7f;
    RmsProp opt(lr, rho, eps);
    std::vector<Param*> params{&p};

    p.grad[0] = 1.0f;
    opt.step(params);
    float cache1 = 0.5f * 1.0f;
    float w1 = 0.0f - lr * 1.0f / (std::sqrt(cache1) + eps);
    CHECK(p.value[0] == doctest::Approx(w1).epsilon(1e-6));

    p.grad[0] = 2.0f;
    opt.step(params);
    float cache2 = 0.5f * cache1 + 0.5f * 4.0f;
    float w2 = w1 - lr * 2.0f / (std::sqrt(cache2) + eps);
    CHECK(p.value[0] == doctest::Approx(w2).epsilon(1e-6));
}

TEST_CASE("rmsprop skips non-trainable parameters") {
    Param frozen;
    frozen.name = "frozen";
    frozen.value = Tensor({1}, 3.0f);
    frozen.grad = Tensor({1}, 100.0f);
    frozen.trainable = false;
    RmsProp opt(0.1f);
    std::vector<Param*> params{&frozen};
    opt.step(params);
    CHECK(frozen.value[0] == 3.0f);
}

TEST_CASE("train_step lowers loss on a separable toy batch") {
    std::vector<LayerSpec> specs{
        LayerSpec::conv2d("c1", 4, 3),
        LayerSpec::maxpool2d(2, 2),
        LayerSpec::flatten(),
        LayerSpec::dense("out", 1, Activation::Sigmoid),
    };
    Network net({8, 8, 1}, specs);
    Rng rng(11);
    net.init_params(rng);

    Tensor batch({8, 8, 8, 1});
    std::vector<float> labels(8);
    for (int b = 0; b < 8; ++b) {
        float v = b % 2 == 0 ? 0.9f : 0.1f;
        labels[static_cast<size_t>(b)] = b % 2 == 0 ? 1.0f : 0.0f;
        for (int i = 0; i < 64; ++i) batch[static_cast<size_t>(b) * 64 + i] = v;
    }

    RmsProp opt(0.01f);
    StepResult first = train_step(net, opt, batch, labels, rng);
    StepResult last{};
    for (int i = 0; i < 30; ++i) last = train_step(net, opt, batch, labels, rng);
    CHECK(last.loss < first.loss);
    CHECK(last.accuracy == doctest::Approx(1.0));
}

TEST_CASE("frozen conv parameters are bit-identical after training steps") {
    std::vector<LayerSpec> specs{
        LayerSpec::conv2d("frozen", 2, 3, Activation::None, Padding::Same, 1,
                          /*use_bias=*/false, /*trainable=*/false),
        LayerSpec::conv2d("live", 2, 3),
        LayerSpec::flatten(),
        LayerSpec::dense("out", 1, Activation::Sigmoid),
    };
    Network net({6, 6, 1}, specs);
    Rng rng(12);
    net.init_params(rng);

    Tensor before = net.find_param("frozen/kernel")->value;
    Tensor live_before = net.find_param("live/kernel")->value;

    Tensor batch = mmtest::random_tensor({4, 6, 6, 1}, rng, 0.0f, 1.0f);
    std::vector<float> labels{1, 0, 1, 0};
    RmsProp opt(0.01f);
    for (int i = 0; i < 5; ++i) train_step(net, opt, batch, labels, rng);

    CHECK(net.find_param("frozen/kernel")->value == before);
    CHECK(!(net.find_param("live/kernel")->value == live_before));
}

TEST_CASE("identically seeded training is bit-reproducible") {
    auto build_and_train = [](uint64_t seed) {
        std::vector<LayerSpec> specs{
            LayerSpec::conv2d("c1", 4, 3),
            LayerSpec::maxpool2d(2, 2),
            LayerSpec::batchnorm("bn"),
            LayerSpec::dropout(0.1f),
            LayerSpec::flatten(),
            LayerSpec::dense("out", 1, Activation::Sigmoid),
        };
        Network net({8, 8, 1}, specs);
        Rng rng(seed);
        net.init_params(rng);
        Tensor batch = mmtest::random_tensor({4, 8, 8, 1}, rng, 0.0f, 1.0f);
        std::vector<float> labels{1, 0, 0, 1};
        RmsProp opt(0.001f);
        for (int i = 0; i < 3; ++i) train_step(net, opt, batch, labels, rng);
        return WeightStore::from_network(net);
    };

    CHECK(build_and_train(77) == build_and_train(77));
    CHECK(!(build_and_train(77) == build_and_train(78)));
}

TEST_CASE("trainable parameter count counts only trainable entries") {
    std::vector<LayerSpec> specs{
        LayerSpec::conv2d("c1", 4, 3),  // 3*3*1*4 + 4 = 40
        LayerSpec::batchnorm("bn"),     // gamma+beta = 8 trainable (running stats excluded)
        LayerSpec::flatten(),
        LayerSpec::dense("out", 1, Activation::Sigmoid),  // 8*8*4 + 1 = 257
    };
    Network net({8, 8, 1}, specs);
    CHECK(net.trainable_param_count() == 40 + 8 + 257);
}
