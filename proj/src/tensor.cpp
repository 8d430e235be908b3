#include "ssfnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "ssfnet/error.hpp"

namespace ssfnet {

std::string Shape::str() const {
    return "[" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(c) + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.numel()) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape.str());
    }
}

Tensor Tensor::randn(Shape s, std::mt19937_64& rng, double stddev) {
    Tensor t(s);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

Tensor Tensor::uniform(Shape s, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(s);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

Tensor Tensor::sample(int n) const {
    Shape s = shape;
    s.n = 1;
    Tensor out(s);
    const std::size_t stride = s.numel();
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(n * stride), stride, out.data.begin());
    return out;
}

Tensor Tensor::channels(int c0, int count) const {
    if (c0 < 0 || count < 0 || c0 + count > shape.c) throw ShapeError("channel range out of bounds");
    Shape s = shape;
    s.c = count;
    Tensor out(s);
    const std::size_t pixels = static_cast<std::size_t>(shape.n) * shape.h * shape.w;
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < count; ++c) out.data[p * count + c] = data[p * shape.c + c0 + c];
    }
    return out;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("stack_batch: no items");
    Shape s = items.front().shape;
    int total = 0;
    for (const auto& t : items) {
        Shape ts = t.shape;
        if (ts.h != s.h || ts.w != s.w || ts.c != s.c) throw ShapeError("stack_batch: shape mismatch");
        total += ts.n;
    }
    s.n = total;
    Tensor out(s);
    auto it = out.data.begin();
    for (const auto& t : items) it = std::copy(t.data.begin(), t.data.end(), it);
    return out;
}

}  // namespace ssfnet
