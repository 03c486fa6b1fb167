#ifndef MISSMARPLE_EVALUATOR_HPP
#define MISSMARPLE_EVALUATOR_HPP

#include <cstdint>
#include <vector>

#include "missmarple/image.hpp"
#include "missmarple/metrics.hpp"
#include "missmarple/network.hpp"

namespace mm {

struct WindowScore {
    int row = 0;
    int col = 0;
    float score = 0.0f;  // sigmoid output; > 0.5 counts as fake
};

// Every stride-aligned, fully-inside window of one image with its score.
struct PredictionMap {
    int image_height = 0;
    int image_width = 0;
    int patch_size = 0;
    int stride = 0;
    std::vector<WindowScore> windows;

    size_t fake_count(double cutoff = 0.5) const;
};

struct ImageVerdict {
    uint32_t image_id = 0;
    int patches = 0;
    int fake_patches = 0;
    double fake_fraction = 0.0;
    double threshold = 0.0;
    bool spliced = false;  // fake_fraction >= threshold
};

// Slides patch windows over the image, scoring each with the network's
// sigmoid output (inference mode, batched internally).
PredictionMap score_windows(Network& net, const Image& image, int patch_size, int stride);

ImageVerdict verdict_from_map(const PredictionMap& map, double threshold, uint32_t image_id);

ImageVerdict classify_image(Network& net, const Image& image, double threshold, int stride,
                            uint32_t image_id = 0);

// Grid value maximizing image-level accuracy over (fraction, is-spliced)
// pairs; ties resolve to the smallest grid value.
double search_threshold(const std::vector<double>& fake_fractions,
                        const std::vector<bool>& spliced_truth,
                        const std::vector<double>& grid);

std::vector<double> default_threshold_grid();  // 0.01 .. 0.99 step 0.01

} // namespace mm

#endif
