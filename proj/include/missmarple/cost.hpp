#ifndef MISSMARPLE_COST_HPP
#define MISSMARPLE_COST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "missmarple/model.hpp"

namespace mm {

// Multiplication count of one convolution: N out-channels, M in-channels,
// D_k kernel side, D_p output side. Non-square outputs use rows x cols in
// place of D_p^2.
struct ConvCostSpec {
    int64_t n = 1;
    int64_t m = 1;
    int64_t dk = 1;
    int64_t dp = 1;
    int64_t dp_rows = 0;  // optional non-square override
    int64_t dp_cols = 0;
};

int64_t conv_multiplications(const ConvCostSpec& spec);

struct CostLine {
    std::string layer;
    std::string kind;
    int64_t count = 0;
};

struct CostReport {
    std::string model;
    std::vector<CostLine> lines;
    int64_t total = 0;       // == sum of lines (checked on emission)
    int64_t frozen_total = 0;  // portion contributed by frozen donor convs
};

// Sums conv multiplication counts over a model's layers (maxpool counts as
// zero, dense layers are out of scope). The frozen junction branch is
// itemized on its own line so totals with and without it are both visible.
CostReport model_cost(const ModelSpec& spec);

struct Comparison {
    std::string label;
    int64_t ours = 0;
    int64_t theirs = 0;
    int64_t difference = 0;     // |theirs - ours|
    double percent_faster = 0;  // 100 * difference / max(ours, theirs)
};

Comparison compare(int64_t ours, int64_t theirs);

// Text report: per-layer lines, per-model totals, combined twin total, and
// any comparisons (percent printed to 4 decimal places).
std::string render_cost_report(const std::vector<CostReport>& models,
                               const std::vector<Comparison>& comparisons);

// The published twin total used by the comparison preset, and the two
// baseline totals it is compared against (an 8-conv 128x128 model and a
// 52-conv 256x256 model).
constexpr int64_t kPublishedTwinTotal = 11540352;
constexpr int64_t kBaselineConv8Total = 36507450;
constexpr int64_t kBaselineConv52Total = 1296937728;

} // namespace mm

#endif
