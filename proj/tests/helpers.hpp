#ifndef MISSMARPLE_TESTS_HELPERS_HPP
#define MISSMARPLE_TESTS_HELPERS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "missmarple/rng.hpp"
#include "missmarple/tensor.hpp"

namespace mmtest {

// Scratch directory under the test working directory, wiped on construction
// and removed on destruction so reruns start clean.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name)
        : path_(std::filesystem::current_path() / ("scratch_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline mm::Tensor random_tensor(std::vector<int> shape, mm::Rng& rng, float lo = -1.0f,
                                float hi = 1.0f) {
    mm::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
    return t;
}

// Reference convolution written independently of the layer implementation:
// plain quadruple loop, same-padding offsets computed directly from the
// kernel size (stride 1). input [H,W,C] indexed via flat vectors.
inline mm::Tensor conv2d_reference(const mm::Tensor& input, const mm::Tensor& kernel,
                                   const std::vector<float>& bias, bool relu, bool same_padding) {
    const int H = input.dim(0), W = input.dim(1), C = input.dim(2);
    const int K = kernel.dim(0), OC = kernel.dim(3);
    int out_h = same_padding ? H : H - K + 1;
    int out_w = same_padding ? W : W - K + 1;
    int pad = same_padding ? (K - 1) / 2 : 0;
    mm::Tensor out({out_h, out_w, OC});
    for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox)
            for (int n = 0; n < OC; ++n) {
                double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(n)];
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        int iy = oy + ky - pad;
                        int ix = ox + kx - pad;
                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                        for (int c = 0; c < C; ++c)
                            acc += static_cast<double>(input.at3(iy, ix, c)) *
                                   kernel.at4(ky, kx, c, n);
                    }
                float v = static_cast<float>(acc);
                out.at3(oy, ox, n) = relu && v < 0.0f ? 0.0f : v;
            }
    return out;
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline bool file_bytes_equal(const std::string& a, const std::string& b) {
    if (!std::filesystem::exists(a) || !std::filesystem::exists(b)) return false;
    return read_file_bytes(a) == read_file_bytes(b);
}

} // namespace mmtest

#endif
