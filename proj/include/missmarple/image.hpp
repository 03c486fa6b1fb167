#ifndef MISSMARPLE_IMAGE_HPP
#define MISSMARPLE_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mm {

// 8-bit raster, interleaved row-major. channels is 3 (RGB) or 1 (mask).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c),
          pixels(static_cast<size_t>(w) * h * c, fill) {}

    uint8_t& at(int row, int col, int c) {
        return pixels[(static_cast<size_t>(row) * width + col) * channels + c];
    }
    uint8_t at(int row, int col, int c) const {
        return pixels[(static_cast<size_t>(row) * width + col) * channels + c];
    }

    bool operator==(const Image& other) const = default;
};

// Binary netpbm: P6 for RGB, P5 for single-channel. Writers emit a canonical
// header so identical images are identical files.
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path);

} // namespace mm

#endif
