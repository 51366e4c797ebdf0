#include "stv/image.hpp"

#include <algorithm>
#include <cmath>

namespace stv {

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : GrayImage(width, height, std::vector<double>(width * height, fill)) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width == 0 || height == 0) {
        throw ContractError("GrayImage: width and height must be at least 1");
    }
    if (values_.size() != width * height) {
        throw ContractError("GrayImage: value count " + std::to_string(values_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw ContractError("GrayImage: non-finite pixel value");
    }
}

double GrayImage::mean() const {
    double sum = 0.0;
    for (double v : values_) sum += v;
    return values_.empty() ? 0.0 : sum / static_cast<double>(values_.size());
}

bool GrayImage::is_constant() const {
    return std::all_of(values_.begin(), values_.end(),
                       [first = values_.empty() ? 0.0 : values_.front()](double v) { return v == first; });
}

void require_same_shape(const GrayImage& a, const GrayImage& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw ContractError(what + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                            std::to_string(b.height()) + ")");
    }
}

double max_abs_diff(const GrayImage& a, const GrayImage& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double dot(const GrayImage& a, const GrayImage& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const GrayImage& a) { return std::sqrt(dot(a, a)); }

GrayImage flip_horizontal(const GrayImage& img) {
    GrayImage out(img.width(), img.height());
    const std::size_t w = img.width();
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(w - 1 - x, y) = img.at(x, y);
    return out;
}

GrayImage flip_vertical(const GrayImage& img) {
    GrayImage out(img.width(), img.height());
    const std::size_t h = img.height();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < img.width(); ++x) out.at(x, h - 1 - y) = img.at(x, y);
    return out;
}

GrayImage rotate90(const GrayImage& img) {
    const std::size_t w = img.width();
    const std::size_t h = img.height();
    GrayImage out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(y, w - 1 - x) = img.at(x, y);
    return out;
}

GrayImage shift(const GrayImage& img, int dx, int dy, double fill) {
    GrayImage out(img.width(), img.height(), fill);
    const auto w = static_cast<long>(img.width());
    const auto h = static_cast<long>(img.height());
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const long sx = x - dx;
            const long sy = y - dy;
            if (sx >= 0 && sx < w && sy >= 0 && sy < h)
                out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) =
                    img.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
        }
    }
    return out;
}

}  // namespace stv
