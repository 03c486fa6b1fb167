#ifndef MISSMARPLE_METRICS_HPP
#define MISSMARPLE_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace mm {

// Confusion-matrix metric suite. Degenerate denominators leave a metric
// unset (std::nullopt) — "undefined" is distinct from 0.
struct EvalReport {
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> accuracy;
    std::optional<double> recall;     // TP / (TP + FN)
    std::optional<double> precision;  // TP / (TP + FP)
    std::optional<double> f1;         // harmonic mean of precision and recall
    std::optional<double> mcc;        // with the square root in the denominator
    double threshold = 0.0;           // image-level T the counts were taken at

    int64_t positives() const { return tp + fn; }
    int64_t negatives() const { return tn + fp; }
};

EvalReport compute_metrics(int64_t tp, int64_t tn, int64_t fp, int64_t fn);

// "0.9178" or "undefined".
std::string format_metric(const std::optional<double>& m, int decimals = 4);

} // namespace mm

#endif
