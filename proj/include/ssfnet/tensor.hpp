#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ssfnet {

/// Four-dimensional extent in NHWC order. Vectors are [1,1,1,C], scalars [1,1,1,1].
struct Shape {
    int n = 1;
    int h = 1;
    int w = 1;
    int c = 1;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * h * w * c;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense row-major NHWC array of doubles with value semantics.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.numel(), fill) {}
    Tensor(Shape s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t index(int n, int h, int w, int c) const {
        return ((static_cast<std::size_t>(n) * shape.h + h) * shape.w + w) * shape.c + c;
    }
    double& at(int n, int h, int w, int c) { return data[index(n, h, w, c)]; }
    double at(int n, int h, int w, int c) const { return data[index(n, h, w, c)]; }

    std::span<double> span() { return data; }
    std::span<const double> span() const { return data; }

    static Tensor zeros(Shape s) { return Tensor(s, 0.0); }
    static Tensor ones(Shape s) { return Tensor(s, 1.0); }
    static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }
    static Tensor randn(Shape s, std::mt19937_64& rng, double stddev = 1.0);
    static Tensor uniform(Shape s, std::mt19937_64& rng, double lo, double hi);

    /// Copy of sample n as a batch-of-one tensor.
    Tensor sample(int n) const;
    /// Copy of channel range [c0, c0 + count).
    Tensor channels(int c0, int count) const;

    double sum() const;
    double max_abs() const;
    bool all_finite() const;
    bool operator==(const Tensor&) const = default;
};

/// Stacks batch-of-one tensors along N; all shapes must agree apart from n.
Tensor stack_batch(std::span<const Tensor> items);

}  // namespace ssfnet
