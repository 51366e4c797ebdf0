#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stv {

/// Raised when a caller violates an operation's preconditions.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major 2D raster of finite doubles. Index (x, y) maps to y * width + x.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
    GrayImage(std::size_t width, std::size_t height, std::vector<double> values);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
    double at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const GrayImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    double mean() const;
    bool is_constant() const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> values_;
};

// Elementwise helpers used across the transform and the tests.
double max_abs_diff(const GrayImage& a, const GrayImage& b);
double dot(const GrayImage& a, const GrayImage& b);
double l2_norm(const GrayImage& a);

GrayImage flip_horizontal(const GrayImage& img);
GrayImage flip_vertical(const GrayImage& img);
/// Counter-clockwise quarter turn; output is height x width.
GrayImage rotate90(const GrayImage& img);
/// Shift content by (dx, dy), filling vacated pixels with `fill`.
GrayImage shift(const GrayImage& img, int dx, int dy, double fill = 0.0);

void require_same_shape(const GrayImage& a, const GrayImage& b, const std::string& what);

}  // namespace stv
