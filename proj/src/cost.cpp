#include "missmarple/cost.hpp"

#include <sstream>

#include "missmarple/config.hpp"
#include "missmarple/error.hpp"

namespace mm {

int64_t conv_multiplications(const ConvCostSpec& spec) {
    int64_t rows = spec.dp_rows > 0 ? spec.dp_rows : spec.dp;
    int64_t cols = spec.dp_cols > 0 ? spec.dp_cols : spec.dp;
    if (spec.n < 1 || spec.m < 1 || spec.dk < 1 || rows < 1 || cols < 1)
        throw validation_error("conv cost parameters must be strictly positive");
    return spec.n * spec.m * spec.dk * spec.dk * rows * cols;
}

CostReport model_cost(const ModelSpec& spec) {
    CostReport report;
    report.model = spec.name;
    std::vector<int> shape = spec.input_shape;
    for (const auto& l : spec.layers) {
        int in_c = shape.size() == 3 ? shape[2] : 0;
        std::vector<int> out = l.output_shape(shape);
        switch (l.kind) {
            case LayerKind::Conv2d: {
                ConvCostSpec c{l.filters, in_c, l.kernel, 0, out[0], out[1]};
                report.lines.push_back({l.name, "conv2d", conv_multiplications(c)});
                break;
            }
            case LayerKind::ConcatInput: {
                ConvCostSpec donor{l.donor_filters, in_c, l.donor_kernel, 0, out[0], out[1]};
                int64_t donor_count = conv_multiplications(donor);
                report.lines.push_back({l.donor_name + " (frozen)", "conv2d", donor_count});
                report.frozen_total += donor_count;
                ConvCostSpec branch{l.filters, in_c, l.kernel, 0, out[0], out[1]};
                report.lines.push_back({l.name, "conv2d", conv_multiplications(branch)});
                break;
            }
            case LayerKind::MaxPool2d:
                report.lines.push_back({l.name, "maxpool2d", 0});
                break;
            default:
                break;  // dense/batchnorm/dropout/flatten are out of scope
        }
        shape = out;
    }
    for (const auto& line : report.lines) report.total += line.count;
    return report;
}

Comparison compare(int64_t ours, int64_t theirs) {
    if (ours <= 0 || theirs <= 0)
        throw validation_error("comparison totals must be positive");
    Comparison c;
    c.ours = ours;
    c.theirs = theirs;
    c.difference = theirs > ours ? theirs - ours : ours - theirs;
    int64_t larger = theirs > ours ? theirs : ours;
    c.percent_faster = 100.0 * static_cast<double>(c.difference) / static_cast<double>(larger);
    return c;
}

std::string render_cost_report(const std::vector<CostReport>& models,
                               const std::vector<Comparison>& comparisons) {
    std::ostringstream os;
    int64_t combined = 0;
    for (const auto& report : models) {
        int64_t check = 0;
        for (const auto& line : report.lines) check += line.count;
        if (check != report.total)
            throw runtime_error("cost report total for " + report.model +
                                " does not match its lines");
        os << "model " << report.model << "\n";
        for (const auto& line : report.lines)
            os << "  " << line.kind << "  " << line.layer << "  " << line.count << "\n";
        os << "  total " << report.total;
        if (report.frozen_total > 0)
            os << "  (frozen branch " << report.frozen_total << ", without it "
               << report.total - report.frozen_total << ")";
        os << "\n";
        combined += report.total;
    }
    if (models.size() > 1) os << "combined total " << combined << "\n";
    for (const auto& c : comparisons) {
        os << "compare " << (c.label.empty() ? "baseline" : c.label) << ": ours " << c.ours
           << " vs " << c.theirs << "  difference " << c.difference << "  "
           << format_float(c.percent_faster, 4) << "% faster\n";
    }
    return os.str();
}

} // namespace mm
