#include "doctest.h"

#include <cmath>
#include <numeric>

#include "stv/spectral.hpp"
#include "support/oracles.hpp"

using namespace stv;

namespace {

FlowConfig config_with(std::size_t n, double dt = 0.25) {
    FlowConfig c;
    c.n_components = n;
    c.dt = dt;
    return c;
}

double squared_norm(const GrayImage& f) { return dot(f, f); }

// Fraction of sum |S_k| carried by 1-based indices lo..hi.
double mass_fraction(const std::vector<double>& s, std::size_t lo, std::size_t hi) {
    double inside = 0.0, total = 0.0;
    for (std::size_t k = 1; k <= s.size(); ++k) {
        total += std::fabs(s[k - 1]);
        if (k >= lo && k <= hi) inside += std::fabs(s[k - 1]);
    }
    return inside / total;
}

}  // namespace

TEST_CASE("constant input has zero components and residual f") {
    const GrayImage f(9, 7, -1.5);
    const SpectralStack s = decompose(f, config_with(8));
    REQUIRE(s.size() == 8);
    for (const auto& phi : s.components) CHECK(phi == GrayImage(9, 7, 0.0));
    CHECK(s.residual == f);
    CHECK(s.source_mean == doctest::Approx(-1.5));
    CHECK(s.time(4) == doctest::Approx(1.0));
}

TEST_CASE("stv_transform rejects a frame-count mismatch") {
    ScaleSpace space = tv_flow(GrayImage(4, 4, 1.0), config_with(5));
    space.frames.pop_back();
    CHECK_THROWS_AS(stv_transform(space), ContractError);
}

TEST_CASE("stv_transform matches the second-difference definition") {
    const GrayImage f = oracle::random_image(8, 6, 4);
    const ScaleSpace space = tv_flow(f, config_with(6));
    const SpectralStack s = stv_transform(space);
    const auto& u = space.frames;
    for (std::size_t k = 1; k <= 6; ++k)
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(s.components[k - 1][i] ==
                  doctest::Approx(k * (u[k + 1][i] - 2 * u[k][i] + u[k - 1][i])).epsilon(1e-12).scale(1.0));
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(s.residual[i] == doctest::Approx(7 * u[6][i] - 6 * u[7][i]).epsilon(1e-12));
}

TEST_CASE("reconstruction identity and Parseval hold for every input") {
    for (unsigned seed = 0; seed < 4; ++seed) {
        // CT-like offset and a unit-scale image.
        const double offset = seed % 2 ? 200.0 : 0.0;
        const GrayImage f = oracle::random_image(14, 11, seed, offset - 20.0, offset + 20.0);
        const SpectralStack s = decompose(f, config_with(40));
        CHECK(max_abs_diff(reconstruct(s), f) <= 1e-9);
        const Spectrum sp = spectrum(f, s);
        CHECK(std::fabs(sp.total() - squared_norm(f)) <= 1e-7 * squared_norm(f));
    }
}

TEST_CASE("spectrum of a constant image") {
    const GrayImage f(5, 5, 2.0);
    const Spectrum sp = spectrum(f, decompose(f, config_with(4)));
    for (double v : sp.values) CHECK(v == 0.0);
    CHECK(sp.residual_term == doctest::Approx(100.0));
}

TEST_CASE("spectrum rejects a dimension mismatch") {
    const SpectralStack s = decompose(GrayImage(5, 5, 1.0), config_with(4));
    CHECK_THROWS_AS(spectrum(GrayImage(4, 5, 1.0), s), ContractError);
}

TEST_CASE("disk spectrum is a delta at t = r / 2") {
    const GrayImage f = oracle::disk(64, 64, 32, 32, 8, 1.0);
    const SpectralStack s = decompose(f, FlowConfig{});
    const Spectrum sp = spectrum(f, s);
    CHECK(mass_fraction(sp.values, 13, 19) >= 0.85);
    // The flow is extinct long before t = 30, so the residual is the mean.
    CHECK(max_abs_diff(s.residual, GrayImage(64, 64, f.mean())) <= 1e-6);
    // Center pixel signature concentrates at the same scale.
    const SignatureField sig = extract_signatures(s);
    std::vector<double> center(sig.at(32, 32).begin(), sig.at(32, 32).end());
    CHECK(mass_fraction(center, 13, 19) >= 0.85);
}

TEST_CASE("zero-mean 1D step to extinction puts all energy in the components") {
    GrayImage f(64, 1);
    for (std::size_t i = 0; i < 64; ++i) f[i] = i < 24 ? 1.0 : -0.6;
    const double m = f.mean();
    for (auto& v : f.values()) v -= m;
    const Spectrum sp = spectrum(f, decompose(f, config_with(200, 0.5)));
    double sum = std::accumulate(sp.values.begin(), sp.values.end(), 0.0);
    CHECK(std::fabs(sum - squared_norm(f)) <= 1e-6 * squared_norm(f));
}

TEST_CASE("stv_filter identities") {
    const GrayImage f = oracle::random_image(10, 10, 8);
    const SpectralStack s = decompose(f, config_with(12));
    CHECK(stv_filter(s, {std::vector<double>(12, 1.0), 1.0}) == reconstruct(s));
    CHECK(stv_filter(s, {std::vector<double>(12, 0.0), 1.0}) == s.residual);
    CHECK_THROWS_AS(stv_filter(s, {std::vector<double>(11, 1.0), 1.0}), ContractError);
    CHECK_THROWS_AS(stv_filter(s, {std::vector<double>(12, NAN), 1.0}), ContractError);
    const GrayImage zero = stv_filter(SpectralStack{{}, GrayImage(3, 2, 4.0), 0.25, 4.0}, {{}, 1.0});
    CHECK(zero == GrayImage(3, 2, 4.0));
}

TEST_CASE("band-stop filter removes the small disk of a two-disk phantom") {
    // The grid must be large enough that the rising background does not pull
    // the big disk's extinction (t = 8 on an unbounded domain) below t = 6.
    const std::size_t w = 128;
    GrayImage f = oracle::disk(w, w, 30, 30, 4, 1.0);
    const GrayImage big = oracle::disk(w, w, 80, 80, 16, 1.0);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += big[i];
    const SpectralStack s = decompose(f, FlowConfig{});
    TransferFunction h{std::vector<double>(s.size()), 1.0};
    for (std::size_t k = 1; k <= s.size(); ++k) h.gains[k - 1] = s.time(k) <= 6.0 ? 0.0 : 1.0;
    const GrayImage out = stv_filter(s, h);
    auto interior_mean = [&](double cx, double cy, double r) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t y = 0; y < w; ++y)
            for (std::size_t x = 0; x < w; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                    sum += out.at(x, y);
                    ++count;
                }
        return sum / count;
    };
    CHECK(interior_mean(30, 30, 4) <= 0.10);
    CHECK(interior_mean(80, 80, 16) >= 0.80);
}

TEST_CASE("signatures are the raw per-pixel components") {
    const GrayImage f = oracle::random_image(6, 5, 3);
    const SpectralStack s = decompose(f, config_with(7));
    const SignatureField sig = extract_signatures(s);
    CHECK(sig.length() == 7);
    CHECK_FALSE(sig.enhanced);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 6; ++x)
            for (std::size_t k = 0; k < 7; ++k) CHECK(sig.at(x, y)[k] == s.components[k].at(x, y));
    const SignatureField flat = extract_signatures(decompose(GrayImage(4, 4, 3.0), config_with(5)));
    for (double v : flat.data()) CHECK(v == 0.0);
}

TEST_CASE("enhancement multiplies by the L1 norm to the power p") {
    SignatureField field(1, 1, 3);
    field.pixel(0)[0] = 1;
    field.pixel(0)[1] = -1;
    field.pixel(0)[2] = 2;
    const SignatureField e = enhance_signatures(field, 1.0);
    CHECK(e.enhanced);
    CHECK(e.pixel(0)[0] == 4.0);
    CHECK(e.pixel(0)[1] == -4.0);
    CHECK(e.pixel(0)[2] == 8.0);
    CHECK_THROWS_AS(enhance_signatures(e, 1.0), ContractError);
    CHECK_THROWS_AS(enhance_signatures(field, -0.5), ContractError);

    const SignatureField zero = enhance_signatures(SignatureField(2, 2, 4), 1.0);
    for (double v : zero.data()) CHECK(v == 0.0);

    for (double p : {0.0, 0.5, 1.0, 2.0}) {
        SignatureField scaled = field;
        const double c = 3.0;
        for (double& v : scaled.data()) v *= c;
        const SignatureField a = enhance_signatures(field, p);
        const SignatureField b = enhance_signatures(scaled, p);
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(b.pixel(0)[k] == doctest::Approx(std::pow(c, 1.0 + p) * a.pixel(0)[k]));
    }
}

TEST_CASE("flipped input gives exactly the flipped signature field") {
    const GrayImage f = oracle::random_image(10, 10, 77, 0.0, 3.0);
    const SpectralStack a = decompose(f, config_with(16));
    const SpectralStack b = decompose(flip_horizontal(f), config_with(16));
    for (std::size_t k = 0; k < 16; ++k) CHECK(b.components[k] == flip_horizontal(a.components[k]));
    CHECK(b.residual == flip_horizontal(a.residual));
}

TEST_CASE("1D components are nearly orthogonal") {
    std::mt19937 gen(5);
    for (int trial = 0; trial < 4; ++trial) {
        GrayImage f(96, 1);
        std::uniform_real_distribution<double> level(-1.0, 1.0);
        std::uniform_int_distribution<int> cut(1, 95);
        std::vector<int> cuts{0};
        for (int j = 0; j < 5; ++j) cuts.push_back(cut(gen));
        std::sort(cuts.begin(), cuts.end());
        double v = level(gen);
        std::size_t next = 1;
        for (std::size_t i = 0; i < 96; ++i) {
            while (next < cuts.size() && static_cast<int>(i) >= cuts[next]) {
                v = level(gen);
                ++next;
            }
            f[i] = v;
        }
        const SpectralStack s = decompose(f, config_with(120));
        const double floor = 1e-8 * l2_norm(f);
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = i + 2; j < s.size(); ++j) {
                const double ni = l2_norm(s.components[i]), nj = l2_norm(s.components[j]);
                if (ni <= floor || nj <= floor) continue;
                CHECK(std::fabs(dot(s.components[i], s.components[j])) / (ni * nj) <= 0.05);
            }
    }
}

TEST_CASE("pixel-replicated upsampling with doubled time step rescales a 1D stack") {
    // Replicating every sample doubles |u - f|^2 and keeps TV, so the prox
    // with doubled step maps replicated signals to replicated signals.
    GrayImage g(40, 1);
    for (std::size_t i = 0; i < 40; ++i) g[i] = i < 9 ? 0.0 : i < 17 ? 2.0 : i < 30 ? 0.5 : 1.25;
    GrayImage up(80, 1);
    for (std::size_t i = 0; i < 80; ++i) up[i] = g[i / 2];
    const SpectralStack coarse = decompose(g, config_with(60, 0.25));
    const SpectralStack fine = decompose(up, config_with(60, 0.5));
    for (std::size_t k = 0; k < 60; ++k)
        for (std::size_t i = 0; i < 80; ++i)
            CHECK(fine.components[k][i] == doctest::Approx(coarse.components[k][i / 2]).scale(1.0).epsilon(1e-9));
}

TEST_CASE("doubling the contrast equals halving the time step") {
    // prox of a*u with step dt is a times the prox of u with step dt/a.
    GrayImage f(32, 32);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            const double dx = static_cast<double>(x) - 15.0, dy = static_cast<double>(y) - 16.0;
            f.at(x, y) = dx * dx + dy * dy <= 25.0 ? 1.0 : 0.0;
        }
    GrayImage doubled = f;
    for (double& v : doubled.values()) v *= 2.0;
    const SpectralStack fine = decompose(f, config_with(48, 0.125));
    const SpectralStack coarse = decompose(doubled, config_with(48, 0.25));
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < 48; ++k)
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double d = coarse.components[k][i] - 2.0 * fine.components[k][i];
            num += d * d;
            den += coarse.components[k][i] * coarse.components[k][i];
        }
    CHECK(den > 0.0);
    CHECK(std::sqrt(num / den) <= 0.02);
}
