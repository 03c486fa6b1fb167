#include "missmarple/metrics.hpp"

#include <cmath>

#include "missmarple/config.hpp"
#include "missmarple/error.hpp"

namespace mm {

EvalReport compute_metrics(int64_t tp, int64_t tn, int64_t fp, int64_t fn) {
    if (tp < 0 || tn < 0 || fp < 0 || fn < 0)
        throw validation_error("confusion-matrix counts must be nonnegative");
    EvalReport r;
    r.tp = tp;
    r.tn = tn;
    r.fp = fp;
    r.fn = fn;
    const int64_t p = tp + fn, n = tn + fp;
    if (p + n == 0) throw validation_error("confusion matrix is empty (P + N = 0)");

    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(p + n);
    if (p > 0) r.recall = static_cast<double>(tp) / static_cast<double>(p);
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (r.precision && r.recall && (*r.precision + *r.recall) > 0.0)
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    const double d1 = static_cast<double>(tp + fp), d2 = static_cast<double>(tp + fn);
    const double d3 = static_cast<double>(tn + fp), d4 = static_cast<double>(tn + fn);
    if (d1 > 0 && d2 > 0 && d3 > 0 && d4 > 0)
        r.mcc = (static_cast<double>(tp) * static_cast<double>(tn) -
                 static_cast<double>(fp) * static_cast<double>(fn)) /
                std::sqrt(d1 * d2 * d3 * d4);
    return r;
}

std::string format_metric(const std::optional<double>& m, int decimals) {
    return m ? format_float(*m, decimals) : "undefined";
}

} // namespace mm
