#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace intrakd {

/// Dense row-major array of doubles with up to four extents.
///
/// Images and feature maps use the layout height x width x channels, kernels
/// use kh x kw x cin x cout. There is no batch axis; batches are processed one
/// sample at a time.
class Tensor {
public:
    static constexpr std::size_t kMaxRank = 4;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> data);

    static Tensor zeros(std::initializer_list<std::size_t> dims) { return Tensor(std::vector<std::size_t>(dims)); }
    static Tensor full(std::initializer_list<std::size_t> dims, double v) { return Tensor(std::vector<std::size_t>(dims), v); }
    /// Rank-1 tensor holding a copy of `values`.
    static Tensor vector(std::span<const double> values);

    std::size_t rank() const noexcept { return dims_.size(); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Unchecked multi-index accessors; the index count must equal rank().
    double& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * dims_[1] + j) * dims_[2] + k]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * dims_[1] + j) * dims_[2] + k]; }
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }

    void fill(double v);
    bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
    bool all_finite() const noexcept;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s);
    /// this += s * other
    Tensor& axpy(double s, const Tensor& other);

    /// Bitwise comparison of extents and every value.
    friend bool operator==(const Tensor& a, const Tensor& b);

    std::string shape_string() const;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

Tensor operator*(double s, Tensor t);

double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Value/gradient pair with matching extents.
struct GradPair {
    Tensor value;
    Tensor grad;

    explicit GradPair(Tensor v) : value(std::move(v)), grad(value.dims()) {}
};

/// Per-pixel class indices (h x w), class 0 is background.
class ClassMap {
public:
    ClassMap() = default;
    ClassMap(std::size_t h, std::size_t w, std::uint8_t fill = 0) : h_(h), w_(w), labels_(h * w, fill) {}
    ClassMap(std::size_t h, std::size_t w, std::vector<std::uint8_t> labels);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t size() const noexcept { return labels_.size(); }

    std::uint8_t& at(std::size_t i, std::size_t j) { return labels_[i * w_ + j]; }
    std::uint8_t at(std::size_t i, std::size_t j) const { return labels_[i * w_ + j]; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    std::span<std::uint8_t> labels() noexcept { return labels_; }

    /// Largest label present (0 for an empty map).
    std::uint8_t max_label() const noexcept;

    friend bool operator==(const ClassMap&, const ClassMap&) = default;

private:
    std::size_t h_ = 0;
    std::size_t w_ = 0;
    std::vector<std::uint8_t> labels_;
};

}  // namespace intrakd
