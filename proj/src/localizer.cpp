#include "missmarple/localizer.hpp"

#include <algorithm>

#include "missmarple/error.hpp"

namespace mm {

double iou(const BBox& a, const BBox& b) {
    int top = std::max(a.top, b.top);
    int left = std::max(a.left, b.left);
    int bottom = std::min(a.bottom, b.bottom);
    int right = std::min(a.right, b.right);
    if (bottom <= top || right <= left) return 0.0;
    double inter = static_cast<double>(bottom - top) * (right - left);
    double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

std::optional<BBox> bounding_box(const PredictionMap& map, double cutoff) {
    if (!(cutoff >= 0.0 && cutoff <= 1.0))
        throw validation_error("localization cutoff must be in [0,1]");
    bool any = false;
    BBox box;
    for (const auto& w : map.windows) {
        if (!(w.score > cutoff)) continue;
        if (!any) {
            box = {w.row, w.col, w.row + map.patch_size, w.col + map.patch_size};
            any = true;
        } else {
            box.top = std::min(box.top, w.row);
            box.left = std::min(box.left, w.col);
            box.bottom = std::max(box.bottom, w.row + map.patch_size);
            box.right = std::max(box.right, w.col + map.patch_size);
        }
    }
    if (!any) return std::nullopt;
    return box;
}

Image render_overlay(const Image& image, const std::optional<BBox>& box) {
    return box ? render_overlay(image, *box) : image;
}

Image render_overlay(const Image& image, const BBox& box) {
    if (image.channels != 3)
        throw validation_error("overlay rendering expects an RGB image");
    if (box.top < 0 || box.left < 0 || box.bottom > image.height || box.right > image.width ||
        box.top >= box.bottom || box.left >= box.right)
        throw validation_error("box out of bounds for " + std::to_string(image.width) + "x" +
                               std::to_string(image.height) + " image");
    Image out = image;
    constexpr int kThickness = 3;
    auto paint = [&out](int r, int c) {
        out.at(r, c, 0) = 255;
        out.at(r, c, 1) = 0;
        out.at(r, c, 2) = 0;
    };
    for (int r = box.top; r < box.bottom; ++r)
        for (int c = box.left; c < box.right; ++c) {
            bool frame = r < box.top + kThickness || r >= box.bottom - kThickness ||
                         c < box.left + kThickness || c >= box.right - kThickness;
            if (frame) paint(r, c);
        }
    return out;
}

} // namespace mm
