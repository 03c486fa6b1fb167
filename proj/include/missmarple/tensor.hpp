#ifndef MISSMARPLE_TENSOR_HPP
#define MISSMARPLE_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mm {

std::string shape_to_string(const std::vector<int>& shape);

// Dense n-dimensional float array, row-major. All layer values flow through
// this type; reductions elsewhere accumulate in double and store back to
// float.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, float fill);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float v) { return Tensor(std::move(shape), v); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // Row-major index helpers for the common layouts [H,W,C] and [B,H,W,C].
    float& at3(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    float at3(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    float& at4(int b, int i, int j, int k) {
        return data_[((static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j) * shape_[3] + k];
    }
    float at4(int b, int i, int j, int k) const {
        return data_[((static_cast<size_t>(b) * shape_[1] + i) * shape_[2] + j) * shape_[3] + k];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const { return shape_to_string(shape_); }

    void fill(float v);
    // Index of the first NaN/Inf value, if any.
    std::optional<std::size_t> first_non_finite() const;
    bool all_finite() const { return !first_non_finite().has_value(); }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

std::size_t shape_product(const std::vector<int>& shape);

} // namespace mm

#endif
