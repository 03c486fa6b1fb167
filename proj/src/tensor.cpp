#include "missmarple/tensor.hpp"

#include <cmath>
#include <sstream>

#include "missmarple/error.hpp"

namespace mm {

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0)
            throw validation_error("tensor shape has non-positive dimension " + shape_to_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

void Tensor::fill(float v) {
    for (auto& x : data_) x = v;
}

std::optional<std::size_t> Tensor::first_non_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) return i;
    }
    return std::nullopt;
}

} // namespace mm
