#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcdm {

using real = double;

/// Dense row-major tensor. Shapes follow [N, H, W, C] for images/latents
/// and [N, D] for vectors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<real> data);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, real value);
    static Tensor from_scalar(real value);

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const;
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    real& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    real operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    real& at(std::initializer_list<int> idx);
    real at(std::initializer_list<int> idx) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    Tensor reshaped(std::vector<int> shape) const;

    bool all_finite() const;
    real min() const;
    real max() const;
    real mean() const;

    std::string shape_str() const;

private:
    std::int64_t flat_index(std::initializer_list<int> idx) const;

    std::vector<int> shape_;
    std::vector<real> data_;
};

std::string shape_to_string(const std::vector<int>& shape);
std::int64_t shape_numel(const std::vector<int>& shape);

}  // namespace dcdm
