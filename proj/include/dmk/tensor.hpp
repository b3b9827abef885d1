#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmk {

// Shape-tagged dense array of doubles, row-major.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (shape_.empty())
            throw std::invalid_argument("Tensor: shape must have at least one dimension");
        std::size_t n = 1;
        for (std::size_t d : shape_) {
            if (d == 0)
                throw std::invalid_argument("Tensor: zero-sized dimension in shape " +
                                            shape_string(shape_));
            n *= d;
        }
        if (n != values_.size())
            throw std::invalid_argument("Tensor: shape " + shape_string(shape_) + " expects " +
                                        std::to_string(n) + " values, got " +
                                        std::to_string(values_.size()));
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> shape, double fill) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return Tensor(std::move(shape), std::vector<double>(n, fill));
    }

    static Tensor vector(std::vector<double> values) {
        std::size_t n = values.size();
        return Tensor({n}, std::move(values));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // Rank-2 access, row-major.
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    double item() const {
        if (values_.size() != 1)
            throw std::logic_error("Tensor::item: tensor has " + std::to_string(values_.size()) +
                                   " elements, expected 1");
        return values_[0];
    }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_string() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

}  // namespace dmk
