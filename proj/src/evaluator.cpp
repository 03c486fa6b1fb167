#include "missmarple/evaluator.hpp"

#include <algorithm>

#include "missmarple/error.hpp"

namespace mm {

size_t PredictionMap::fake_count(double cutoff) const {
    size_t n = 0;
    for (const auto& w : windows)
        if (w.score > cutoff) ++n;
    return n;
}

PredictionMap score_windows(Network& net, const Image& image, int patch_size, int stride) {
    if (image.channels != 3)
        throw validation_error("window scoring expects RGB, got " +
                               std::to_string(image.channels) + " channels");
    if (image.width < patch_size || image.height < patch_size)
        throw validation_error("image " + std::to_string(image.width) + "x" +
                               std::to_string(image.height) + " is smaller than a " +
                               std::to_string(patch_size) + "-pixel patch");
    if (stride < 1) throw validation_error("stride must be >= 1");

    PredictionMap map;
    map.image_height = image.height;
    map.image_width = image.width;
    map.patch_size = patch_size;
    map.stride = stride;
    for (int row = 0; row + patch_size <= image.height; row += stride)
        for (int col = 0; col + patch_size <= image.width; col += stride)
            map.windows.push_back({row, col, 0.0f});

    constexpr size_t kChunk = 64;
    const size_t pixel_count = static_cast<size_t>(patch_size) * patch_size * 3;
    for (size_t start = 0; start < map.windows.size(); start += kChunk) {
        size_t count = std::min(kChunk, map.windows.size() - start);
        Tensor batch({static_cast<int>(count), patch_size, patch_size, 3});
        for (size_t i = 0; i < count; ++i) {
            const auto& w = map.windows[start + i];
            float* dst = batch.data() + i * pixel_count;
            for (int r = 0; r < patch_size; ++r)
                for (int c = 0; c < patch_size; ++c)
                    for (int ch = 0; ch < 3; ++ch)
                        *dst++ = static_cast<float>(image.at(w.row + r, w.col + c, ch)) / 255.0f;
        }
        Tensor probs = net.forward(batch, /*training=*/false, nullptr);
        for (size_t i = 0; i < count; ++i)
            map.windows[start + i].score = probs[i];
    }
    return map;
}

ImageVerdict verdict_from_map(const PredictionMap& map, double threshold, uint32_t image_id) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw validation_error("image threshold must be in [0,1]");
    ImageVerdict v;
    v.image_id = image_id;
    v.patches = static_cast<int>(map.windows.size());
    v.fake_patches = static_cast<int>(map.fake_count());
    v.fake_fraction = v.patches == 0 ? 0.0
                                     : static_cast<double>(v.fake_patches) /
                                           static_cast<double>(v.patches);
    v.threshold = threshold;
    v.spliced = v.fake_fraction >= threshold;
    return v;
}

ImageVerdict classify_image(Network& net, const Image& image, double threshold, int stride,
                            uint32_t image_id) {
    PredictionMap map = score_windows(net, image, net.input_shape()[0], stride);
    return verdict_from_map(map, threshold, image_id);
}

double search_threshold(const std::vector<double>& fake_fractions,
                        const std::vector<bool>& spliced_truth,
                        const std::vector<double>& grid) {
    if (grid.empty()) throw validation_error("threshold grid is empty");
    if (fake_fractions.size() != spliced_truth.size())
        throw validation_error("fraction/truth counts differ");
    if (fake_fractions.empty()) throw validation_error("no validation images for threshold search");
    for (double t : grid)
        if (!(t >= 0.0 && t <= 1.0))
            throw validation_error("threshold grid values must lie in [0,1]");

    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    double best_t = sorted.front();
    size_t best_hits = 0;
    bool first = true;
    for (double t : sorted) {
        size_t hits = 0;
        for (size_t i = 0; i < fake_fractions.size(); ++i) {
            bool verdict = fake_fractions[i] >= t;
            if (verdict == spliced_truth[i]) ++hits;
        }
        if (first || hits > best_hits) {  // ties keep the smallest t
            best_hits = hits;
            best_t = t;
            first = false;
        }
    }
    return best_t;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

} // namespace mm
