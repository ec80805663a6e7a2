#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "surromesh/errors.hpp"

namespace surromesh {

// Dense row-major tensor of 64-bit floats. Value semantics; shape is fixed
// after construction. All training and evaluation runs in double precision.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t flat_index(std::initializer_list<std::size_t> idx) const;
    double& at(std::initializer_list<std::size_t> idx) { return data_[flat_index(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const { return data_[flat_index(idx)]; }

    bool all_finite() const;
    void fill(double value);

    // Marks the tensor as a trainable leaf when registered on a Tape.
    bool requires_grad = false;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Throws DimensionError naming both shapes when they differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace surromesh
