#include <doctest.h>

#include <cmath>

#include "wr/kernels.hpp"

using namespace wr;

namespace {

KernelConstants unitConstants(double alpha, double phiBar) {
    KernelConstants c;
    c.alpha = alpha;
    c.phiBar = phiBar;
    return c;
}

Point offset(const Domain& dom, double r) {
    Point p = dom.center();
    p[0] += r;
    return p;
}

}  // namespace

TEST_CASE("jumpRate") {
    const Domain dom(1, 10);
    const JumpKernel a(dom, JumpFamily::Gaussian, 1.0, 1.0);
    const Point x = offset(dom, 0.0), y = offset(dom, 0.8);
    {
        const KernelSet ks(dom, {a, a}, {RepulsionKernel(dom, RepulsionFamily::Zero, 0, 1), RepulsionKernel(dom, RepulsionFamily::Zero, 0, 1)});
        CHECK(jumpRate(ks, 0, x, y, {offset(dom, 0.9)}, 0.0) == doctest::Approx(a(dom.displacement(x, y))));
    }
    {
        const RepulsionKernel hc(dom, RepulsionFamily::HardCore, 1.0, 0.5);
        const KernelSet ks(dom, {a, a}, {hc, hc});
        CHECK(jumpRate(ks, 0, x, y, {offset(dom, 1.1)}, 0.0) == 0.0);
        CHECK(jumpRate(ks, 0, x, y, {offset(dom, 2.0)}, 0.0) > 0.0);
    }
    {
        // Several opposite particles multiply their Boltzmann factors.
        const RepulsionKernel th(dom, RepulsionFamily::Exponential, 1.0, 1.0);
        const KernelSet ks(dom, {a, a}, {th, th});
        const Point z1 = offset(dom, 0.5), z2 = offset(dom, 1.3);
        const double phiSum = th(dom.displacement(y, z1)) + th(dom.displacement(y, z2));
        CHECK(jumpRate(ks, 0, x, y, {z1, z2}, 0.0) ==
              doctest::Approx(a(dom.displacement(x, y)) * std::exp(-phiSum)).epsilon(1e-13));
    }
}

TEST_CASE("repulsion factor of two ln 2 contributions") {
    const Domain dom(1, 10);
    const JumpKernel a(dom, JumpFamily::Gaussian, 1.0, 1.0);
    // Gaussian amplitude chosen so that each opposite particle at distance 0 contributes ln 2.
    const RepulsionKernel g(dom, RepulsionFamily::Gaussian, std::log(2.0), 0.3);
    const KernelSet ks(dom, {a, a}, {g, g});
    const Point x = offset(dom, 0.0), y = offset(dom, 1.0);
    const double phi0 = g(Point{});
    CHECK(phi0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(jumpRate(ks, 0, x, y, {y, y}, 0.0) == doctest::Approx(a(dom.displacement(x, y)) / 4).epsilon(1e-12));
}

TEST_CASE("psiSigma") {
    const Domain dom(1, 10);
    CHECK(psiSigma(dom, offset(dom, 3.0), 0.0) == 1.0);
    CHECK(psiSigma(dom, offset(dom, 1.7), 1.0) == doctest::Approx(psi(dom, offset(dom, 1.7))));
    CHECK(psiSigma(dom, offset(dom, 2.0), 0.5) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("kernel moments match closed forms") {
    for (int d = 1; d <= 3; ++d) {
        const Domain dom(d, 12);
        for (auto fam : {JumpFamily::Gaussian, JumpFamily::Exponential, JumpFamily::TopHat}) {
            const JumpKernel a(dom, fam, 1.3, 0.7);
            CHECK(a.mass() == doctest::Approx(1.3).epsilon(1e-9));
            for (int l = 0; l <= d + 1; ++l) CHECK(a.moment(l) == doctest::Approx(a.exactMoment(l)).epsilon(1e-8));
        }
    }
}

TEST_CASE("phi bar matches closed forms") {
    const Domain dom(2, 12);
    for (auto fam : {RepulsionFamily::Gaussian, RepulsionFamily::Exponential, RepulsionFamily::HardCore}) {
        const RepulsionKernel phi(dom, fam, 0.4, 0.6);
        CHECK(phi.phiBar() == doctest::Approx(phi.exactPhiBar()).epsilon(1e-8));
    }
}

TEST_CASE("kernel constants") {
    const Domain dom(1, 10);
    const JumpKernel a0(dom, JumpFamily::Gaussian, 1.0, 1.0), a1(dom, JumpFamily::TopHat, 2.0, 0.5);
    const RepulsionKernel p0(dom, RepulsionFamily::Gaussian, 0.3, 0.5), p1(dom, RepulsionFamily::Zero, 0, 1);
    const KernelSet ks(dom, {a0, a1}, {p0, p1});
    CHECK(ks.c.alpha == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(ks.c.phiBar == doctest::Approx(p0.phiBar()));
    CHECK(ks.c.cA == doctest::Approx(std::max(ks.c.alphaBarI[0], ks.c.alphaBarI[1]) + 1));
    CHECK(ks.c.aNorm > 0);
}

TEST_CASE("convolveTheta") {
    const Domain dom(1, 10);
    const KernelSet ks(dom, {JumpKernel(dom, JumpFamily::Gaussian, 1.0, 0.8), JumpKernel(dom, JumpFamily::TopHat, 1.0, 1.0)},
                       {RepulsionKernel(dom, RepulsionFamily::Zero, 0, 1), RepulsionKernel(dom, RepulsionFamily::Zero, 0, 1)});
    const ConvolutionResult zero = convolveTheta(ks, 0, Theta::zero(dom, PsiMode::Centered));
    CHECK(zero.conv(dom.center()) == 0.0);

    // Flat mode: θ = c ψ ≡ c, so a * θ = c ā^(0) everywhere.
    const ConvolutionResult flat = convolveTheta(ks, 1, Theta::scaledPsi(dom, PsiMode::Flat, 0.7));
    CHECK(flat.conv(dom.center()) == doctest::Approx(0.7).epsilon(1e-6));

    // Gaussian kernel (variance 0.64) on a gaussian bump (variance 1): a gaussian of variance 1.64.
    const Theta bump = Theta::gaussianBump(dom, PsiMode::Centered, 0.5, 1.0, dom.center());
    const ConvolutionResult g = convolveTheta(ks, 0, bump);
    // Checked at grid nodes, where the tabulation is exact up to quadrature.
    for (int k : {0, 13, 33, 69}) {
        const double r = k * dom.L / 256;
        const double exact = 0.5 * std::sqrt(1.0 / 1.64) * std::exp(-r * r / (2 * 1.64));
        CHECK(g.conv(offset(dom, r)) == doctest::Approx(exact).epsilon(1e-6));
    }
    CHECK(g.worstViolation <= 1e-9);
}

TEST_CASE("timeRadius") {
    CHECK(timeRadius(unitConstants(1, 1), 0, 1) == doctest::Approx(0.25 * std::exp(-std::exp(1.0))).epsilon(1e-12));
    CHECK(timeRadius(unitConstants(2, 1), 0, 1) == doctest::Approx(0.5 * timeRadius(unitConstants(1, 1), 0, 1)));
    CHECK(timeRadius(unitConstants(1.5, 0), 0.2, 0.9) == doctest::Approx(0.7 / 6.0));
}

TEST_CASE("tStar") {
    const KernelConstants c = unitConstants(1, 1);
    const TStar s = tStar(c, 0);
    CHECK(s.delta == doctest::Approx(0.5671432904097838).epsilon(1e-10));
    CHECK(s.delta * std::exp(s.delta) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.T == doctest::Approx(timeRadius(c, 0, s.delta)).epsilon(1e-10));
    CHECK(s.T == doctest::Approx(0.024317).epsilon(1e-4));
    CHECK(tStar(c, -1).delta > s.delta);
    CHECK(tStar(c, -3).delta > tStar(c, -1).delta);
}

TEST_CASE("tSigma") {
    const KernelConstants c = unitConstants(1, 0.5);
    CHECK(tSigma(c, 1, 0.5, 1) == doctest::Approx(0.5 / std::exp(1.0)).epsilon(1e-5));
    CHECK(tSigma(c, 1, 0.5, 0.5) == doctest::Approx(0.5 * tSigma(c, 1, 0.5, 1)));
    CHECK(tSigma(c, 1, 1 - 1e-9, 1) < 1e-8);
}

TEST_CASE("fourier transform of the jump kernels") {
    const Domain dom(1, 10);
    for (auto fam : {JumpFamily::Gaussian, JumpFamily::Exponential, JumpFamily::TopHat}) {
        const JumpKernel a(dom, fam, 1.5, 0.9);
        CHECK(a.fourier(0.0) == doctest::Approx(1.5));
        // Compare with direct quadrature of ∫ a(x) cos(ξx) dx.
        const double xi = 1.7;
        double s = 0;
        const int n = 400000;
        const double R = 40.0, h = 2 * R / n;
        for (int j = 0; j < n; ++j) {
            const double x = -R + (j + 0.5) * h;
            s += a.radial(std::abs(x)) * std::cos(xi * x) * h;
        }
        CHECK(a.fourier(xi) == doctest::Approx(s).epsilon(1e-5));
    }
}
