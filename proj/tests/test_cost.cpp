#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "missmarple/cost.hpp"
#include "missmarple/error.hpp"
#include "missmarple/rng.hpp"

using namespace mm;

TEST_CASE("single conv multiplication count fixture") {
    ConvCostSpec spec;
    spec.n = 32;
    spec.m = 3;
    spec.dk = 3;
    spec.dp = 62;
    CHECK(conv_multiplications(spec) == 3321216);
}

TEST_CASE("non-square outputs multiply rows by cols") {
    ConvCostSpec spec;
    spec.n = 4;
    spec.m = 2;
    spec.dk = 3;
    spec.dp = 0;
    spec.dp_rows = 5;
    spec.dp_cols = 7;
    CHECK(conv_multiplications(spec) == 4 * 2 * 9 * 35);
}

TEST_CASE("published comparison fixtures") {
    Comparison a = compare(11540352, 36507450);
    CHECK(a.difference == 24967098);
    CHECK(format_float(a.percent_faster, 4) == "68.3890");

    Comparison b = compare(11540352, 1296937728);
    CHECK(b.difference == 1285397376);
    CHECK(format_float(b.percent_faster, 4) == "99.1102");
}

TEST_CASE("comparison is symmetric in magnitude and validates inputs") {
    Comparison ab = compare(100, 400);
    CHECK(ab.difference == 300);
    CHECK(ab.percent_faster == doctest::Approx(75.0));
    Comparison ba = compare(400, 100);
    CHECK(ba.difference == 300);
    CHECK(ba.percent_faster == doctest::Approx(75.0));
    Comparison same = compare(5, 5);
    CHECK(same.difference == 0);
    CHECK(same.percent_faster == doctest::Approx(0.0));

    CHECK_THROWS_AS(compare(0, 5), Error);
    CHECK_THROWS_AS(compare(5, -1), Error);
}

TEST_CASE("cost properties hold over random specs") {
    Rng rng(50);
    for (int trial = 0; trial < 1500; ++trial) {
        ConvCostSpec s;
        s.n = 1 + rng.uniform_int(24);
        s.m = 1 + rng.uniform_int(24);
        s.dk = 1 + rng.uniform_int(7);
        s.dp = 1 + rng.uniform_int(40);

        int64_t base = conv_multiplications(s);
        // identity: every factor 1 -> exactly one multiplication
        ConvCostSpec unit;
        REQUIRE(conv_multiplications(unit) == 1);

        // multiplicativity in the channel counts
        ConvCostSpec dn = s;
        dn.n *= 2;
        REQUIRE(conv_multiplications(dn) == 2 * base);
        ConvCostSpec dm = s;
        dm.m *= 3;
        REQUIRE(conv_multiplications(dm) == 3 * base);

        // quadratic in kernel and output side
        ConvCostSpec dk = s;
        dk.dk *= 2;
        REQUIRE(conv_multiplications(dk) == 4 * base);
        ConvCostSpec dp = s;
        dp.dp *= 2;
        REQUIRE(conv_multiplications(dp) == 4 * base);

        // channel symmetry
        ConvCostSpec swapped = s;
        std::swap(swapped.n, swapped.m);
        REQUIRE(conv_multiplications(swapped) == base);

        // square output equals the equivalent rows x cols spelling
        ConvCostSpec rect = s;
        rect.dp = 0;
        rect.dp_rows = s.dp;
        rect.dp_cols = s.dp;
        REQUIRE(conv_multiplications(rect) == base);
    }
}

TEST_CASE("spec validation rejects nonpositive factors") {
    ConvCostSpec zero;
    zero.n = 0;
    CHECK_THROWS_AS(conv_multiplications(zero), Error);
    ConvCostSpec rect;
    rect.dp = 0;
    rect.dp_rows = 3;
    rect.dp_cols = 0;
    CHECK_THROWS_AS(conv_multiplications(rect), Error);
}

TEST_CASE("village model cost itemizes each conv against hand sums") {
    CostReport report = model_cost(make_mmv_spec(ModelConfig{}));
    CHECK(report.model == "MM-V");

    // hand-computed per layer: N*M*Dk^2*Dp^2
    // conv1: 32*3*9*64^2; conv2: 32*32*9*32^2; conv3: 64*32*9*16^2; conv4: 64*64*9*8^2
    int64_t c1 = 32LL * 3 * 9 * 64 * 64;
    int64_t c2 = 32LL * 32 * 9 * 32 * 32;
    int64_t c3 = 64LL * 32 * 9 * 16 * 16;
    int64_t c4 = 64LL * 64 * 9 * 8 * 8;
    int64_t expect = c1 + c2 + c3 + c4;
    CHECK(report.total == expect);
    CHECK(report.frozen_total == 0);

    int64_t sum = 0;
    int convs = 0, pools = 0;
    for (const auto& line : report.lines) {
        sum += line.count;
        if (line.kind == "conv2d") ++convs;
        if (line.kind == "maxpool2d") {
            ++pools;
            CHECK(line.count == 0);
        }
    }
    CHECK(sum == report.total);
    CHECK(convs == 4);
    CHECK(pools == 4);
}

TEST_CASE("transfer model cost itemizes the frozen branch separately") {
    CostReport report = model_cost(make_mmva_spec(ModelConfig{}));
    int64_t c1 = 32LL * 3 * 9 * 64 * 64;
    int64_t c2 = 32LL * 32 * 9 * 32 * 32;
    int64_t donor = 64LL * 32 * 9 * 16 * 16;
    int64_t branch = 64LL * 32 * 9 * 16 * 16;
    int64_t c4 = 64LL * 128 * 9 * 8 * 8;  // concatenated input doubles M
    CHECK(report.total == c1 + c2 + donor + branch + c4);
    CHECK(report.frozen_total == donor);

    int convs = 0;
    for (const auto& line : report.lines)
        if (line.kind == "conv2d") ++convs;
    CHECK(convs == 5);
}

TEST_CASE("rendered report re-checks line sums") {
    CostReport report = model_cost(make_mmv_spec(ModelConfig{}));
    std::string text = render_cost_report({report}, {});
    CHECK(text.find("MM-V") != std::string::npos);
    CHECK(text.find(std::to_string(report.total)) != std::string::npos);

    CostReport tampered = report;
    tampered.total += 1;
    CHECK_THROWS_AS(render_cost_report({tampered}, {}), Error);
}

TEST_CASE("rendered comparisons carry the 4-decimal percent") {
    Comparison c = compare(kPublishedTwinTotal, kBaselineConv8Total);
    c.label = "twin vs baseline";
    std::string text = render_cost_report({}, {c});
    CHECK(text.find("68.3890") != std::string::npos);
    CHECK(text.find("24967098") != std::string::npos);
}
