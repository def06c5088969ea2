#include "intrakd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "intrakd/errors.hpp"

namespace intrakd {

namespace {

std::size_t checked_volume(const std::vector<std::size_t>& dims) {
    if (dims.empty() || dims.size() > Tensor::kMaxRank) {
        throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(dims.size()));
    }
    std::size_t n = 1;
    for (auto d : dims) {
        if (d == 0) throw ShapeError("tensor extents must be >= 1");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(checked_volume(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (checked_volume(dims_) != data_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match extents " +
                         shape_string());
    }
}

Tensor Tensor::vector(std::span<const double> values) {
    return Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= dims_.size()) throw ShapeError("axis out of range for tensor " + shape_string());
    return dims_[axis];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) { return axpy(1.0, other); }

Tensor& Tensor::operator-=(const Tensor& other) { return axpy(-1.0, other); }

Tensor& Tensor::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor& Tensor::axpy(double s, const Tensor& other) {
    if (!same_shape(other)) {
        throw ShapeError("shape mismatch " + shape_string() + " vs " + other.shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
    return *this;
}

bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ &&
           (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0);
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
}

Tensor operator*(double s, Tensor t) {
    t *= s;
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

ClassMap::ClassMap(std::size_t h, std::size_t w, std::vector<std::uint8_t> labels)
    : h_(h), w_(w), labels_(std::move(labels)) {
    if (labels_.size() != h * w) throw ShapeError("class map data length does not match extents");
}

std::uint8_t ClassMap::max_label() const noexcept {
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

}  // namespace intrakd
