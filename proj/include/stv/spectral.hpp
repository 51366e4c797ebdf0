#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stv/image.hpp"
#include "stv/tvflow.hpp"

namespace stv {

/// Spectral components phi_1..phi_n of a TV flow plus the finite-horizon
/// residual. Components are index-aligned with scales t_k = k * dt.
struct SpectralStack {
    std::vector<GrayImage> components;
    GrayImage residual;
    double dt = 0.0;
    double source_mean = 0.0;

    std::size_t size() const noexcept { return components.size(); }
    std::size_t width() const noexcept { return residual.width(); }
    std::size_t height() const noexcept { return residual.height(); }
    /// Scale of component k (1-based).
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
    /// Throws ContractError unless all images share the residual's shape.
    void validate() const;
};

struct Spectrum {
    std::vector<double> values;  // S_1..S_n
    double residual_term = 0.0;  // <f, f_r>

    double total() const;  // sum S_k + residual_term
};

struct TransferFunction {
    std::vector<double> gains;
    double residual_gain = 1.0;
};

/// phi_k = k (u_{k+1} - 2 u_k + u_{k-1}) for k = 1..n and
/// f_r = (n + 1) u_n - n u_{n+1}; sum phi_k + f_r telescopes to u_0.
SpectralStack stv_transform(const ScaleSpace& space);

/// tv_flow followed by stv_transform.
SpectralStack decompose(const GrayImage& f, const FlowConfig& config);

GrayImage reconstruct(const SpectralStack& stack);

/// S_k = <f, phi_k>, residual_term = <f, f_r>.
Spectrum spectrum(const GrayImage& f, const SpectralStack& stack);

/// sum H_k phi_k + residual_gain * f_r
GrayImage stv_filter(const SpectralStack& stack, const TransferFunction& h);

/// Per-pixel scale signatures, stored pixel-major: pixel i owns the
/// contiguous run [i * length, (i + 1) * length).
class SignatureField {
public:
    SignatureField() = default;
    SignatureField(std::size_t width, std::size_t height, std::size_t length);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t length() const noexcept { return length_; }
    std::size_t pixels() const noexcept { return width_ * height_; }

    std::span<double> at(std::size_t x, std::size_t y) { return pixel(y * width_ + x); }
    std::span<const double> at(std::size_t x, std::size_t y) const { return pixel(y * width_ + x); }
    std::span<double> pixel(std::size_t i) { return {data_.data() + i * length_, length_}; }
    std::span<const double> pixel(std::size_t i) const { return {data_.data() + i * length_, length_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool enhanced = false;
    double p_enh = 0.0;  // exponent applied when enhanced

    friend bool operator==(const SignatureField&, const SignatureField&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t length_ = 0;
    std::vector<double> data_;
};

SignatureField extract_signatures(const SpectralStack& stack);

/// Multiplies each pixel vector by its L1 norm raised to p_enh.
SignatureField enhance_signatures(const SignatureField& field, double p_enh = 1.0);

/// Enhancement of a single raw vector, used when signatures are stored raw.
void enhance_in_place(std::span<double> signature, double p_enh);

}  // namespace stv
