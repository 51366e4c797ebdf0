#pragma once

#include <cstddef>
#include <vector>

#include "stv/image.hpp"

namespace stv {

enum class Boundary { neumann, periodic };

/// Time discretization of the TV gradient flow and its inner solver budget.
struct FlowConfig {
    double dt = 0.25;
    std::size_t n_components = 120;
    double inner_tol = 1e-6;
    std::size_t inner_max_iter = 500;
    Boundary boundary = Boundary::neumann;

    std::size_t steps() const noexcept { return n_components + 1; }
    void validate() const;
};

/// Discrete isotropic total variation.
///
/// Each pixel contributes the mean of |grad u| over its four one-sided
/// difference stencils (forward/backward in x, forward/backward in y). Across
/// a Neumann border the difference is zero. The average makes the energy exactly
/// invariant under flips and quarter turns of the grid; on a single row or
/// column it reduces to sum |u[i+1] - u[i]|.
double tv_energy(const GrayImage& img, Boundary boundary = Boundary::neumann);

/// Dual variable of the proximal problem: one 2-vector field per stencil.
/// Kept between flow steps as a warm start.
struct TvDual {
    std::vector<double> q;  // 8 planes: (qx, qy) for each of the 4 stencils
    bool empty() const noexcept { return q.empty(); }
};

struct ProxResult {
    GrayImage image;
    double gap = 0.0;             // duality gap of the returned iterate
    std::size_t iterations = 0;   // inner iterations spent
    bool converged = true;        // false: best iterate returned after max_iter
};

/// argmin_u |u - f|^2 / (2 tau) + tv_energy(u), solved to duality gap
/// <= tol * (|f|^2 + 1). Single-row/column inputs use an exact direct solver.
ProxResult rof_prox(const GrayImage& f, double tau, double tol, std::size_t max_iter,
                    Boundary boundary = Boundary::neumann);

/// Same as rof_prox, warm-started from and updating `dual`.
ProxResult rof_prox(const GrayImage& f, double tau, double tol, std::size_t max_iter,
                    Boundary boundary, TvDual& dual);

/// Trajectory u_0 = f, u_{k+1} = prox(u_k, dt) for k = 0..n_components.
struct ScaleSpace {
    FlowConfig config;
    std::vector<GrayImage> frames;          // n_components + 2 frames
    std::vector<std::size_t> iterations;    // inner iterations per step
    std::size_t unconverged_steps = 0;

    bool has_warnings() const noexcept { return unconverged_steps > 0; }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * config.dt; }
};

ScaleSpace tv_flow(const GrayImage& f, const FlowConfig& config);

namespace detail {
/// Exact minimizer of 0.5 |u - f|^2 + lambda * sum |u[i+1] - u[i]| (taut string).
void tv1d_denoise(const double* input, double* output, std::size_t n, double lambda);
}  // namespace detail

}  // namespace stv
