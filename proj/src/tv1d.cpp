// Direct (non-iterative) 1D total-variation denoising after L. Condat,
// "A direct algorithm for 1D total variation denoising", IEEE SPL 2013.

#include "stv/tvflow.hpp"

namespace stv::detail {

void tv1d_denoise(const double* input, double* output, std::size_t n, double lambda) {
    if (n == 0) return;
    if (n == 1) {
        output[0] = input[0];
        return;
    }
    const std::size_t last = n - 1;
    std::size_t k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lambda, umax = -lambda;
    double vmin = input[0] - lambda, vmax = input[0] + lambda;
    const double twolambda = 2.0 * lambda;
    const double minlambda = -lambda;
    for (;;) {
        while (k == last) {
            if (umin < 0.0) {
                do output[k0++] = vmin; while (k0 <= kminus);
                k = kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if (umax > 0.0) {
                do output[k0++] = vmax; while (k0 <= kplus);
                k = kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / static_cast<double>(k - k0 + 1);
                do output[k0++] = vmin; while (k0 <= k);
                return;
            }
        }
        if ((umin += input[k + 1] - vmin) < minlambda) {
            do output[k0++] = vmin; while (k0 <= kminus);
            k = kplus = kminus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
        } else if ((umax += input[k + 1] - vmax) > lambda) {
            do output[k0++] = vmax; while (k0 <= kplus);
            k = kplus = kminus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            ++k;
            if (umin >= lambda) {
                kminus = k;
                vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
                umin = lambda;
            }
            if (umax <= minlambda) {
                kplus = k;
                vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
                umax = minlambda;
            }
        }
    }
}

}  // namespace stv::detail
