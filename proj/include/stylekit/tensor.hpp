#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylekit/rng.hpp"

namespace stylekit {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// Dense row-major tensor of doubles. Everything in the toolkit runs in
// float64 so numeric tolerances in the tests stay tight.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        v_.assign(count(shape_), 0.0);
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

    static Tensor full(Shape s, double x) {
        Tensor t(std::move(s));
        for (auto& e : t.v_) e = x;
        return t;
    }

    static Tensor from(Shape s, std::vector<double> data) {
        Tensor t;
        t.shape_ = std::move(s);
        if (static_cast<std::size_t>(count(t.shape_)) != data.size())
            throw std::invalid_argument("Tensor::from: data size does not match shape " +
                                        shape_str(t.shape_));
        t.v_ = std::move(data);
        return t;
    }

    static Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
        Tensor t(std::move(s));
        for (auto& e : t.v_) e = rng.gaussian() * scale;
        return t;
    }

    static Tensor scalar(double x) { return full({1}, x); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](int i) { return v_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }

    // 2-D (rows, cols)
    double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * shape_[1] + c]; }
    double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * shape_[1] + c]; }

    // 3-D (channels, height, width)
    double& at(int c, int h, int w) {
        return v_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    double at(int c, int h, int w) const {
        return v_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }

    Tensor reshaped(Shape s) const {
        if (count(s) != size())
            throw std::invalid_argument("reshape: element count mismatch " + shape_str(shape_) +
                                        " -> " + shape_str(s));
        Tensor t = *this;
        t.shape_ = std::move(s);
        return t;
    }

    bool all_finite() const {
        for (double e : v_)
            if (!std::isfinite(e)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static int count(const Shape& s) {
        int n = 1;
        for (int d : s) n *= d;
        return n;
    }

private:
    Shape shape_;
    std::vector<double> v_;
};

inline double sq_norm(const Tensor& t) {
    double s = 0.0;
    for (int i = 0; i < t.size(); ++i) s += t[i] * t[i];
    return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    assert(a.size() == b.size());
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline bool bit_identical(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data(), b.data(),
                       static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

inline std::uint64_t tensor_hash(const Tensor& t, std::uint64_t h = 14695981039346656037ull) {
    return fnv1a64(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double), h);
}

}  // namespace stylekit
