#include "stv/spectral.hpp"

#include <cmath>
#include <string>

namespace stv {

void SpectralStack::validate() const {
    for (const GrayImage& c : components)
        if (!c.same_shape(residual)) throw ContractError("SpectralStack: component shape differs from residual");
}

double Spectrum::total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s + residual_term;
}

SpectralStack stv_transform(const ScaleSpace& space) {
    const std::size_t n = space.config.n_components;
    if (space.frames.size() != n + 2)
        throw ContractError("stv_transform: expected " + std::to_string(n + 2) + " frames, got " +
                            std::to_string(space.frames.size()));
    const GrayImage& f = space.frames.front();
    for (const GrayImage& u : space.frames) require_same_shape(f, u, "stv_transform");

    const std::size_t px = f.size();
    SpectralStack stack;
    stack.dt = space.config.dt;
    stack.source_mean = f.mean();
    stack.components.reserve(n);
    // Work with first differences d_k = u_{k+1} - u_k: they are small next to u,
    // which keeps the telescoping sum accurate for large offsets.
    std::vector<double> d_prev(px), d_next(px);
    for (std::size_t i = 0; i < px; ++i) d_prev[i] = space.frames[1][i] - space.frames[0][i];
    for (std::size_t k = 1; k <= n; ++k) {
        const GrayImage& u = space.frames[k];
        const GrayImage& next = space.frames[k + 1];
        GrayImage phi(f.width(), f.height());
        const double kk = static_cast<double>(k);
        for (std::size_t i = 0; i < px; ++i) {
            d_next[i] = next[i] - u[i];
            phi[i] = kk * (d_next[i] - d_prev[i]);
        }
        stack.components.push_back(std::move(phi));
        d_prev.swap(d_next);
    }
    // (n + 1) u_n - n u_{n+1} = u_n - n (u_{n+1} - u_n)
    stack.residual = GrayImage(f.width(), f.height());
    const GrayImage& un = space.frames[n];
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < px; ++i) stack.residual[i] = un[i] - nn * d_prev[i];
    return stack;
}

SpectralStack decompose(const GrayImage& f, const FlowConfig& config) {
    return stv_transform(tv_flow(f, config));
}

GrayImage reconstruct(const SpectralStack& stack) {
    TransferFunction identity{std::vector<double>(stack.size(), 1.0), 1.0};
    return stv_filter(stack, identity);
}

Spectrum spectrum(const GrayImage& f, const SpectralStack& stack) {
    stack.validate();
    require_same_shape(f, stack.residual, "spectrum");
    Spectrum s;
    s.values.reserve(stack.size());
    for (const GrayImage& phi : stack.components) s.values.push_back(dot(f, phi));
    s.residual_term = dot(f, stack.residual);
    return s;
}

GrayImage stv_filter(const SpectralStack& stack, const TransferFunction& h) {
    stack.validate();
    if (h.gains.size() != stack.size())
        throw ContractError("stv_filter: " + std::to_string(h.gains.size()) + " gains for " +
                            std::to_string(stack.size()) + " components");
    for (double g : h.gains)
        if (!std::isfinite(g)) throw ContractError("stv_filter: gains must be finite");
    if (!std::isfinite(h.residual_gain)) throw ContractError("stv_filter: residual gain must be finite");

    // Components are summed first, ascending in k; the residual carries the
    // large offset and is added last.
    GrayImage out(stack.width(), stack.height());
    for (std::size_t k = 0; k < stack.size(); ++k) {
        const double g = h.gains[k];
        if (g == 0.0) continue;
        const GrayImage& phi = stack.components[k];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * phi[i];
    }
    if (h.residual_gain != 0.0)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += h.residual_gain * stack.residual[i];
    return out;
}

SignatureField::SignatureField(std::size_t width, std::size_t height, std::size_t length)
    : width_(width), height_(height), length_(length), data_(width * height * length, 0.0) {}

SignatureField extract_signatures(const SpectralStack& stack) {
    stack.validate();
    const std::size_t n = stack.size();
    SignatureField field(stack.width(), stack.height(), n);
    for (std::size_t k = 0; k < n; ++k) {
        const GrayImage& phi = stack.components[k];
        for (std::size_t i = 0; i < phi.size(); ++i) field.pixel(i)[k] = phi[i];
    }
    return field;
}

void enhance_in_place(std::span<double> signature, double p_enh) {
    if (!(p_enh >= 0.0) || !std::isfinite(p_enh)) throw ContractError("enhance: p_enh must be >= 0");
    double l1 = 0.0;
    for (double v : signature) l1 += std::fabs(v);
    const double scale = p_enh == 1.0 ? l1 : std::pow(l1, p_enh);
    for (double& v : signature) v *= scale;
}

SignatureField enhance_signatures(const SignatureField& field, double p_enh) {
    if (field.enhanced) throw ContractError("enhance_signatures: field is already enhanced");
    SignatureField out = field;
    for (std::size_t i = 0; i < out.pixels(); ++i) enhance_in_place(out.pixel(i), p_enh);
    out.enhanced = true;
    out.p_enh = p_enh;
    return out;
}

}  // namespace stv
