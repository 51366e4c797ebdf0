#include "stv/tvflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace stv {

void FlowConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("FlowConfig: dt must be positive");
    if (n_components < 3) throw ContractError("FlowConfig: n_components must be >= 3");
    if (!(inner_tol > 0.0)) throw ContractError("FlowConfig: inner_tol must be positive");
    if (inner_max_iter < 1) throw ContractError("FlowConfig: inner_max_iter must be >= 1");
}

namespace {

constexpr int kStencils = 4;
constexpr std::size_t kPlanes = 2 * kStencils;
constexpr std::size_t kCheckInterval = 5;
// Squared operator norm bound of K = (1/4)[grad_0; ...; grad_3]: 4 * 8 / 16.
constexpr double kLipschitz = 2.0;

// Stencil s: bit 0 selects backward x, bit 1 selects backward y.
// Stencils s and 3 - s are point reflections of each other; every flip or
// quarter turn of the grid maps the pair {0,3} onto {0,3} or {1,2}. Summing
// over stencils as (v0 + v3) + (v1 + v2) therefore gives bit-identical results
// on transformed inputs.
constexpr bool backward_x(int s) { return (s & 1) != 0; }
constexpr bool backward_y(int s) { return (s & 2) != 0; }

// Difference operators on a w x h grid. Forward differences across a Neumann
// border are zero; periodic grids wrap. A backward difference at pixel i equals
// the forward difference at its left (upper) neighbour, so four stencils need
// only the two forward planes.
class Stencil {
public:
    Stencil(std::size_t w, std::size_t h, Boundary b)
        : w_(w), h_(h), n_(w * h), wrap_x_(b == Boundary::periodic && w > 1),
          wrap_y_(b == Boundary::periodic && h > 1) {}

    std::size_t size() const noexcept { return n_; }

    // dx[i] = u(x+1) - u(x), dy[i] = u(y+1) - u(y)
    void forward(const double* u, double* dx, double* dy) const {
        for (std::size_t y = 0; y < h_; ++y) {
            const double* row = u + y * w_;
            double* out = dx + y * w_;
            for (std::size_t x = 0; x + 1 < w_; ++x) out[x] = row[x + 1] - row[x];
            out[w_ - 1] = wrap_x_ ? row[0] - row[w_ - 1] : 0.0;
        }
        for (std::size_t y = 0; y + 1 < h_; ++y) {
            const double* row = u + y * w_;
            const double* next = row + w_;
            double* out = dy + y * w_;
            for (std::size_t x = 0; x < w_; ++x) out[x] = next[x] - row[x];
        }
        double* out = dy + (h_ - 1) * w_;
        const double* row = u + (h_ - 1) * w_;
        for (std::size_t x = 0; x < w_; ++x) out[x] = wrap_y_ ? u[x] - row[x] : 0.0;
    }

    // Shift forward planes to backward planes: bx[i] = dx[left(i)], by[i] = dy[up(i)].
    void backward(const double* dx, const double* dy, double* bx, double* by) const {
        for (std::size_t y = 0; y < h_; ++y) {
            const double* in = dx + y * w_;
            double* out = bx + y * w_;
            out[0] = wrap_x_ ? in[w_ - 1] : 0.0;
            for (std::size_t x = 1; x < w_; ++x) out[x] = in[x - 1];
        }
        for (std::size_t x = 0; x < w_; ++x) by[x] = wrap_y_ ? dy[(h_ - 1) * w_ + x] : 0.0;
        for (std::size_t i = w_; i < n_; ++i) by[i] = dy[i - w_];
    }

    // Adjoint of the forward x difference applied to p, for pixel row `row`.
    // (D^T p)(x) = p(x-1) - p(x). p vanishes wherever the difference is
    // structurally zero, so no masking of p(x) is needed.
    double adj_fx(const double* p, std::size_t x, std::size_t base) const {
        const double a = x > 0 ? p[base + x - 1] : (wrap_x_ ? p[base + w_ - 1] : 0.0);
        return a - p[base + x];
    }
    // Adjoint of the backward x difference: p(x) - p(x+1).
    double adj_bx(const double* p, std::size_t x, std::size_t base) const {
        const double b = x + 1 < w_ ? p[base + x + 1] : (wrap_x_ ? p[base] : 0.0);
        return p[base + x] - b;
    }
    double adj_fy(const double* p, std::size_t x, std::size_t y) const {
        const double a = y > 0 ? p[(y - 1) * w_ + x] : (wrap_y_ ? p[(h_ - 1) * w_ + x] : 0.0);
        return a - p[y * w_ + x];
    }
    double adj_by(const double* p, std::size_t x, std::size_t y) const {
        const double b = y + 1 < h_ ? p[(y + 1) * w_ + x] : (wrap_y_ ? p[x] : 0.0);
        return p[y * w_ + x] - b;
    }

    std::size_t width() const noexcept { return w_; }
    std::size_t height() const noexcept { return h_; }

private:
    std::size_t w_, h_, n_;
    bool wrap_x_, wrap_y_;
};

// Scratch planes for one solve.
struct Workspace {
    explicit Workspace(std::size_t n) : dx(n), dy(n), bx(n), by(n) {}
    std::vector<double> dx, dy, bx, by;

    const double* gx(int s) const { return backward_x(s) ? bx.data() : dx.data(); }
    const double* gy(int s) const { return backward_y(s) ? by.data() : dy.data(); }

    void gradients(const Stencil& st, const double* u) {
        st.forward(u, dx.data(), dy.data());
        st.backward(dx.data(), dy.data(), bx.data(), by.data());
    }
};

double pair_sum(const double v[4]) { return (v[0] + v[3]) + (v[1] + v[2]); }

double energy_from_gradients(const Workspace& ws, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v[4];
        for (int s = 0; s < kStencils; ++s) {
            const double gx = ws.gx(s)[i];
            const double gy = ws.gy(s)[i];
            v[s] = std::sqrt(gx * gx + gy * gy);
        }
        total += 0.25 * pair_sum(v);
    }
    return total;
}

void interior_row(const double* const* p, const double* __restrict f, double coef, std::size_t begin,
                  std::size_t end, std::size_t w, double* __restrict u) {
    const double* __restrict p0 = p[0];
    const double* __restrict p1 = p[1];
    const double* __restrict p2 = p[2];
    const double* __restrict p3 = p[3];
    const double* __restrict p4 = p[4];
    const double* __restrict p5 = p[5];
    const double* __restrict p6 = p[6];
    const double* __restrict p7 = p[7];
    for (std::size_t i = begin; i < end; ++i) {
        const double c0 = (p0[i - 1] - p0[i]) + (p1[i - w] - p1[i]);
        const double c1 = (p2[i] - p2[i + 1]) + (p3[i - w] - p3[i]);
        const double c2 = (p4[i - 1] - p4[i]) + (p5[i] - p5[i + w]);
        const double c3 = (p6[i] - p6[i + 1]) + (p7[i] - p7[i + w]);
        u[i] = f[i] - coef * ((c0 + c3) + (c1 + c2));
    }
}

// u = f - tau * K^T q
void primal_from_dual(const Stencil& st, const double* f, const std::vector<double>& q, double tau,
                      double* u) {
    const std::size_t n = st.size();
    const std::size_t w = st.width();
    const std::size_t h = st.height();
    const double coef = 0.25 * tau;
    const double* p[kPlanes];
    for (std::size_t j = 0; j < kPlanes; ++j) p[j] = &q[j * n];
    auto generic = [&](std::size_t x, std::size_t y) {
        const std::size_t base = y * w;
        double c[kStencils];
        c[0] = st.adj_fx(p[0], x, base) + st.adj_fy(p[1], x, y);
        c[1] = st.adj_bx(p[2], x, base) + st.adj_fy(p[3], x, y);
        c[2] = st.adj_fx(p[4], x, base) + st.adj_by(p[5], x, y);
        c[3] = st.adj_bx(p[6], x, base) + st.adj_by(p[7], x, y);
        u[base + x] = f[base + x] - coef * pair_sum(c);
    };
    for (std::size_t y = 0; y < h; ++y) {
        if (y == 0 || y + 1 == h || w < 3) {
            for (std::size_t x = 0; x < w; ++x) generic(x, y);
            continue;
        }
        generic(0, y);
        const std::size_t base = y * w;
        interior_row(p, f, coef, base + 1, base + w - 1, w, u);
        generic(w - 1, y);
    }
}

// One accelerated dual step on a plane pair: q = P(y + alpha * g), with P the
// projection onto the unit disc, then y = q + beta (q - q_prev) in place.
// d receives the per-pixel terms of <y - q, q - q_prev> for the restart test.
void project_step(double* __restrict yx, double* __restrict yy, const double* __restrict gx,
                  const double* __restrict gy, const double* __restrict px, const double* __restrict py,
                  double alpha, double beta, double* __restrict qx, double* __restrict qy,
                  double* __restrict d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = yx[i] + alpha * gx[i];
        const double ay = yy[i] + alpha * gy[i];
        const double norm = std::sqrt(ax * ax + ay * ay);
        const double inv = 1.0 / (norm > 1.0 ? norm : 1.0);
        const double nx = ax * inv;
        const double ny = ay * inv;
        d[i] = (yx[i] - nx) * (nx - px[i]) + (yy[i] - ny) * (ny - py[i]);
        qx[i] = nx;
        qy[i] = ny;
        yx[i] = nx + beta * (nx - px[i]);
        yy[i] = ny + beta * (ny - py[i]);
    }
}

// Sum in four fixed lanes, independent of vectorization.
double lane_sum(const double* v, std::size_t n) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (std::size_t l = 0; l < 4; ++l) lane[l] += v[i + l];
    for (; i < n; ++i) lane[0] += v[i];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

// J(u) - <K u, q>; every pixel term is nonnegative for feasible q.
double duality_gap(const Workspace& ws, const std::vector<double>& q, std::size_t n) {
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double t[kStencils];
        for (int s = 0; s < kStencils; ++s) {
            const double gx = ws.gx(s)[i];
            const double gy = ws.gy(s)[i];
            t[s] = std::sqrt(gx * gx + gy * gy) - (gx * q[(2 * s) * n + i] + gy * q[(2 * s + 1) * n + i]);
        }
        gap += 0.25 * pair_sum(t);
    }
    return std::max(gap, 0.0);
}

double centered_squared_norm(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s;
}

// The direct solver scans left to right and is exact only up to rounding, so
// it is run in both directions and averaged; the sum of the two passes is
// symmetric, which keeps reversal of the signal a bit-exact symmetry.
ProxResult prox_1d(const GrayImage& f, double tau) {
    const std::size_t n = f.size();
    std::vector<double> reversed(f.values().rbegin(), f.values().rend());
    std::vector<double> forward(n), backward(n);
    detail::tv1d_denoise(f.values().data(), forward.data(), n, tau);
    detail::tv1d_denoise(reversed.data(), backward.data(), n, tau);
    GrayImage out(f.width(), f.height());
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (forward[i] + backward[n - 1 - i]);
    return {std::move(out), 0.0, 1, true};
}

}  // namespace

double tv_energy(const GrayImage& img, Boundary boundary) {
    const Stencil st(img.width(), img.height(), boundary);
    Workspace ws(st.size());
    ws.gradients(st, img.values().data());
    return energy_from_gradients(ws, st.size());
}

ProxResult rof_prox(const GrayImage& f, double tau, double tol, std::size_t max_iter, Boundary boundary) {
    TvDual dual;
    return rof_prox(f, tau, tol, max_iter, boundary, dual);
}

ProxResult rof_prox(const GrayImage& f, double tau, double tol, std::size_t max_iter, Boundary boundary,
                    TvDual& dual) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ContractError("rof_prox: tau must be positive");
    if (!(tol > 0.0)) throw ContractError("rof_prox: tol must be positive");
    if (max_iter < 1) throw ContractError("rof_prox: max_iter must be >= 1");

    if (f.is_constant()) {
        dual.q.clear();
        return {f, 0.0, 0, true};
    }
    if ((f.width() == 1 || f.height() == 1) && boundary == Boundary::neumann) {
        dual.q.clear();
        return prox_1d(f, tau);
    }

    const Stencil st(f.width(), f.height(), boundary);
    const std::size_t n = st.size();
    const double* fv = f.values().data();
    // ||f - mean||^2 <= ||f||^2, and the prox commutes with adding constants,
    // so the gap target ignores the DC offset.
    const double target = tol * (centered_squared_norm(f.values(), f.mean()) + 1.0);

    std::vector<double> u(n);
    std::vector<double> q(kPlanes * n, 0.0);
    Workspace ws(n);
    ws.gradients(st, fv);
    double gap = energy_from_gradients(ws, n);  // gap of q = 0
    if (dual.q.size() == q.size()) {
        primal_from_dual(st, fv, dual.q, tau, u.data());
        ws.gradients(st, u.data());
        const double warm_gap = duality_gap(ws, dual.q, n);
        if (warm_gap < gap) {
            q = dual.q;
            gap = warm_gap;
        }
    }

    std::vector<double> best_q = q;
    double best_gap = gap;
    std::size_t iter = 0;

    if (best_gap > target) {
        std::vector<double> q_prev = q;
        std::vector<double> y = q;
        std::vector<double> align_terms(n);
        const double alpha = 0.25 / (tau * kLipschitz);
        double t = 1.0;
        while (iter < max_iter) {
            primal_from_dual(st, fv, y, tau, u.data());
            ws.gradients(st, u.data());
            // The extrapolation weight assumes no restart; a restart resets y below.
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double beta = (t - 1.0) / t_next;
            std::swap(q, q_prev);
            double lanes[kStencils];
            for (int s = 0; s < kStencils; ++s) {
                const std::size_t off = (2 * s) * n;
                project_step(&y[off], &y[off + n], ws.gx(s), ws.gy(s), &q_prev[off], &q_prev[off + n], alpha,
                             beta, &q[off], &q[off + n], align_terms.data(), n);
                lanes[s] = lane_sum(align_terms.data(), n);
            }
            // Adaptive restart: drop momentum when it points against the step.
            if (pair_sum(lanes) > 0.0) {
                y = q;
                t = 0.5 * (1.0 + std::sqrt(5.0));  // successor of t = 1
            } else {
                t = t_next;
            }
            ++iter;

            if (iter % kCheckInterval == 0 || iter == max_iter) {
                primal_from_dual(st, fv, q, tau, u.data());
                ws.gradients(st, u.data());
                gap = duality_gap(ws, q, n);
                if (gap < best_gap) {
                    best_gap = gap;
                    best_q = q;
                }
                if (best_gap <= target) break;
            }
        }
    }

    GrayImage out(f.width(), f.height());
    primal_from_dual(st, fv, best_q, tau, out.values().data());
    dual.q = std::move(best_q);
    return {std::move(out), best_gap, iter, best_gap <= target};
}

ScaleSpace tv_flow(const GrayImage& f, const FlowConfig& config) {
    config.validate();
    ScaleSpace space;
    space.config = config;
    space.frames.reserve(config.steps() + 1);
    space.frames.push_back(f);
    space.iterations.reserve(config.steps());
    TvDual dual;
    for (std::size_t k = 0; k < config.steps(); ++k) {
        ProxResult r = rof_prox(space.frames.back(), config.dt, config.inner_tol, config.inner_max_iter,
                                config.boundary, dual);
        space.iterations.push_back(r.iterations);
        if (!r.converged) ++space.unconverged_steps;
        space.frames.push_back(std::move(r.image));
    }
    return space;
}

}  // namespace stv
