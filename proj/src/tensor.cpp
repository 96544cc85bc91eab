#include "dcdm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace dcdm {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), real(0)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
        throw std::invalid_argument("tensor data size does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, real value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::from_scalar(real value) { return Tensor({1}, {value}); }

int Tensor::dim(int i) const {
    if (i < 0 || i >= rank()) throw std::out_of_range("tensor dim index out of range");
    return shape_[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) throw std::invalid_argument("index rank mismatch");
    std::int64_t flat = 0;
    int i = 0;
    for (int v : idx) {
        if (v < 0 || v >= shape_[static_cast<std::size_t>(i)]) throw std::out_of_range("tensor index out of range");
        flat = flat * shape_[static_cast<std::size_t>(i)] + v;
        ++i;
    }
    return flat;
}

real& Tensor::at(std::initializer_list<int> idx) { return data_[static_cast<std::size_t>(flat_index(idx))]; }
real Tensor::at(std::initializer_list<int> idx) const { return data_[static_cast<std::size_t>(flat_index(idx))]; }

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_numel(shape) != size())
        throw std::invalid_argument("reshape from " + shape_str() + " to " + shape_to_string(shape) + " changes element count");
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

real Tensor::min() const {
    if (data_.empty()) throw std::runtime_error("min of empty tensor");
    return *std::min_element(data_.begin(), data_.end());
}

real Tensor::max() const {
    if (data_.empty()) throw std::runtime_error("max of empty tensor");
    return *std::max_element(data_.begin(), data_.end());
}

real Tensor::mean() const {
    if (data_.empty()) throw std::runtime_error("mean of empty tensor");
    real s = std::accumulate(data_.begin(), data_.end(), real(0));
    return s / static_cast<real>(data_.size());
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace dcdm
