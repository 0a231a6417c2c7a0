// Copyright 2026 EFGN Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace efgn {

/// Dense row-major tensor. Feature maps are [B, C, H, W]; the volumetric
/// stage uses [B, F, D, H, W]. No views, no strides: every op produces a
/// fresh tensor, which keeps aliasing out of the autodiff tape.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape)) {}
    Tensor(std::vector<int> s, T fill) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape)) {
            throw std::invalid_argument("tensor data does not match shape");
        }
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s), T(0)); }
    static Tensor full(std::vector<int> s, T v) { return Tensor(std::move(s), v); }

    std::size_t numel() const { return data.size(); }
    bool empty() const { return data.empty() && shape.empty(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // [C, H, W]
    T& at3(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const T& at3(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    // [B, C, H, W]
    T& at4(int b, int c, int y, int x) {
        return data[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    const T& at4(int b, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    // [B, F, D, H, W]
    T& at5(int b, int f, int d, int y, int x) {
        return data[(((static_cast<std::size_t>(b) * shape[1] + f) * shape[2] + d) * shape[3] + y) *
                        shape[4] + x];
    }
    const T& at5(int b, int f, int d, int y, int x) const {
        return data[(((static_cast<std::size_t>(b) * shape[1] + f) * shape[2] + d) * shape[3] + y) *
                        shape[4] + x];
    }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << ", ";
            os << shape[i];
        }
        os << ']';
        return os.str();
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace efgn
