#ifndef MISSMARPLE_LOCALIZER_HPP
#define MISSMARPLE_LOCALIZER_HPP

#include <optional>

#include "missmarple/evaluator.hpp"
#include "missmarple/image.hpp"

namespace mm {

// Pixel rectangle, inclusive-exclusive.
struct BBox {
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;

    bool operator==(const BBox&) const = default;
    int height() const { return bottom - top; }
    int width() const { return right - left; }
    long long area() const { return static_cast<long long>(height()) * width(); }
};

// Intersection-over-union of two boxes (0 when disjoint).
double iou(const BBox& a, const BBox& b);

// Union box over all windows scoring above the cutoff; nullopt when none do.
std::optional<BBox> bounding_box(const PredictionMap& map, double cutoff = 0.5);

// Copy of the image with a 3-pixel red frame drawn just inside the box.
Image render_overlay(const Image& image, const BBox& box);
// No box: plain copy.
Image render_overlay(const Image& image, const std::optional<BBox>& box);

} // namespace mm

#endif
