// tensor.h
// Dense row-major tensor with value semantics. Training runs the float
// instantiation, gradient verification runs double.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pcgl/common.h"

namespace pcgl::substrate {

using Shape = std::vector<int>;

inline std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
    Tensor(Shape s, T fill) : shape(std::move(s)), data(numel_of(shape), fill) {}

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // Row-major accessors for the ranks used in this codebase.
    T& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    T& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    T& at(int i, int j, int k, int l) {
        return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data[((static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <typename T>
void check_shape(const Tensor<T>& t, const Shape& want, const char* what) {
    PCGL_CHECK(t.shape == want, what << ": shape mismatch, got " << shape_str(t.shape)
                                     << ", want " << shape_str(want));
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    PCGL_CHECK(a.same_shape(b), "tensor add: shape mismatch " << shape_str(a.shape) << " vs "
                                                              << shape_str(b.shape));
    Tensor<T> out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
    PCGL_CHECK(x.same_shape(y), "axpy: shape mismatch");
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] += alpha * x[i];
}

template <typename To, typename From>
Tensor<To> cast_tensor(const Tensor<From>& t) {
    Tensor<To> out(t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) out[i] = static_cast<To>(t[i]);
    return out;
}

}  // namespace pcgl::substrate
