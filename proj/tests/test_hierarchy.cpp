#include <doctest.h>

#include <cmath>
#include <sstream>

#include "wr/hierarchy.hpp"

using namespace wr;

namespace {

KernelSet kernels(const Domain& dom, double amp) {
    const JumpKernel a(dom, JumpFamily::Gaussian, 1.0, 1.0);
    const RepulsionKernel phi = amp > 0 ? RepulsionKernel(dom, RepulsionFamily::Gaussian, amp, 0.5)
                                        : RepulsionKernel(dom, RepulsionFamily::Zero, 0, 1);
    return KernelSet(dom, {a, a}, {phi, phi});
}

double bump(const Point& x) { return 0.5 + 0.4 * std::cos(2 * M_PI * x[0] / 10.0) + 0.1 * std::sin(6 * M_PI * x[0] / 10.0); }

HierarchyParams params(int M, Closure c) {
    HierarchyParams p;
    p.M = M;
    p.closure = c;
    return p;
}

}  // namespace

TEST_CASE("upsilon") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 64);
    {
        const KernelSet ks = kernels(dom, 0.0);
        const HierarchyOperators ops(ks, grid, 0.0);
        const CorrelationField k = poissonField(grid, 3, [](const Point& x) { return bump(x); },
                                                [](const Point& x) { return 1 - 0.5 * bump(x); });
        for (std::size_t idx : {0ul, 17ul, 40ul})
            CHECK(upsilonApply(ops, k.k, 5, 0, {1, 0}, idx, 3, Closure::Truncate) == doctest::Approx(k.k.at({1, 0})[idx]));
    }
    const KernelSet ks = kernels(dom, 0.3);
    const HierarchyOperators ops(ks, grid, 0.0);
    const double kappa = 0.7;
    const CorrelationField k = poissonField(grid, 3, kappa, kappa);
    CHECK(upsilonApply(ops, k.k, 3, 0, {1, 0}, 11, 0, Closure::Truncate) == doctest::Approx(kappa));
    // One n = 1 term on a constant field: κ^{|m|+1} ∫ t = -κ^{|m|+1} φ̄.
    const double one = upsilonApply(ops, k.k, 3, 0, {1, 0}, 11, 1, Closure::Truncate) -
                       upsilonApply(ops, k.k, 3, 0, {1, 0}, 11, 0, Closure::Truncate);
    CHECK(one == doctest::Approx(-kappa * kappa * ks.phi[1].phiBar()).epsilon(1e-8));
}

TEST_CASE("forward generator") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 32);
    {
        const KernelSet ks = kernels(dom, 0.0);
        const HierarchyOperators ops(ks, grid, 0.0);
        const CorrelationField k = poissonField(grid, 2, [](const Point& x) { return bump(x); },
                                                [](const Point&) { return 0.5; });
        const MultiField Lk = forwardGenerator(ops, k.k, params(2, Closure::Truncate));
        const auto& k10 = k.k.at({1, 0});
        for (std::size_t j = 0; j < grid.nodes(); ++j) {
            const double* row = ops.jumpRow(0, j);
            double conv = 0;
            for (std::size_t l = 0; l < grid.nodes(); ++l) conv += row[l] * k10[l];
            CHECK(Lk.at({1, 0})[j] == doctest::Approx(conv - ops.jumpMass(0) * k10[j]).epsilon(1e-12));
        }
        const MultiField zero = forwardGenerator(ops, poissonField(grid, 2, 0.5, 0.8).k, params(2, Closure::Truncate));
        for (const auto& m : MultiField::orders(2)) CHECK(zero.maxAbs(m) < 1e-13);
    }
    {
        const KernelSet ks = kernels(dom, 0.265);
        const HierarchyOperators ops(ks, grid, 0.0);
        const double theta = 0.0, thetaPrime = 0.5;
        const CorrelationField k = poissonField(grid, 2, 0.5, 0.5);
        const MultiField Lk = forwardGenerator(ops, k.k, params(2, Closure::PoissonProduct), theta);
        const KernelConstants& c = ks.c;
        const double bound = 4 * c.alpha * fieldNorm(k.k, theta) * std::exp(c.phiBar * std::exp(theta)) /
                             (std::exp(1.0) * (thetaPrime - theta));
        CHECK(fieldNorm(Lk, thetaPrime) <= bound);
    }
}

TEST_CASE("forward evolution") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 32);
    {
        const KernelSet ks = kernels(dom, 0.0);
        const HierarchyOperators ops(ks, grid, 0.0);
        const CorrelationField k0 = poissonField(grid, 2, [](const Point& x) { return bump(x); },
                                                 [](const Point&) { return 0.5; });
        const EvolutionReport r0 = evolveForward(ops, k0, 0.0, params(2, Closure::Truncate));
        CHECK(r0.field.at({1, 0}) == k0.k.at({1, 0}));
        const FreeSpectralSolution exact(grid, ks.a[0], k0.k.at({1, 0}));
        for (double t : {0.25, 0.5, 1.0}) {
            const EvolutionReport r = evolveForward(ops, k0, t, params(2, Closure::Truncate));
            const auto ref = exact.atNodes(t);
            for (std::size_t j = 0; j < grid.nodes(); ++j)
                CHECK(r.field.at({1, 0})[j] == doctest::Approx(ref[j]).epsilon(1e-6));
        }
    }
    {
        const KernelSet ks = kernels(dom, 0.265);
        const HierarchyOperators ops(ks, grid, 0.3);
        HierarchyParams p = params(2, Closure::PoissonProduct);
        p.theta0 = std::log(0.5);
        CorrelationField k0 = poissonField(grid, 2, 0.5, 0.5);
        k0.theta = p.theta0;
        for (double t : {0.2, 0.5}) {
            const EvolutionReport r = evolveForward(ops, k0, t, p);
            CHECK(ruelleViolation(r.field, p.theta0 + ks.c.alpha * t) <= 1e-6);
        }
    }
}

TEST_CASE("dual generator") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 16);
    {
        const KernelSet ks = kernels(dom, 0.3);
        const HierarchyOperators ops(ks, grid, 0.3);
        MultiField G(grid, 3);
        G.at({0, 0})[0] = 2.0;
        const MultiField LG = dualGenerator(ops, G);
        for (const auto& m : MultiField::orders(3)) CHECK(LG.maxAbs(m) == 0.0);
    }
    {
        const KernelSet ks = kernels(dom, 0.0);
        const HierarchyOperators ops(ks, grid, 0.0);
        MultiField G(grid, 2);
        G.fill({1, 0}, [](const std::vector<Point>& x, const std::vector<Point>&) { return bump(x[0]); });
        const MultiField LG = dualGenerator(ops, G);
        const auto& g = G.at({1, 0});
        for (std::size_t j = 0; j < grid.nodes(); ++j) {
            double conv = 0;
            for (std::size_t l = 0; l < grid.nodes(); ++l) conv += ops.jumpRow(0, j)[l] * g[l];
            CHECK(LG.at({1, 0})[j] == doctest::Approx(conv - ops.jumpMass(0) * g[j]).epsilon(1e-12));
        }
    }
    {
        // The dual raises order: (1,1) feeds (1,1) and, through the repulsion, (2,1) and (1,2).
        const KernelSet ks = kernels(dom, 0.265);
        const HierarchyOperators ops(ks, grid, 0.3);
        MultiField G(grid, 3);
        G.fill({1, 1}, [](const std::vector<Point>& x, const std::vector<Point>& y) { return bump(x[0]) * bump(y[0]); });
        const MultiField LG = dualGenerator(ops, G);
        for (const auto& m : MultiField::orders(3)) {
            const bool support = m == OrderPair{1, 1} || m == OrderPair{2, 1} || m == OrderPair{1, 2};
            if (support)
                CHECK(LG.maxAbs(m) > 0.0);
            else
                CHECK(LG.maxAbs(m) == 0.0);
        }
    }
}

TEST_CASE("dual evolution") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 32);
    {
        const KernelSet ks = kernels(dom, 0.0);
        const HierarchyOperators ops(ks, grid, 0.0);
        MultiField G(grid, 2);
        G.fill({1, 0}, [](const std::vector<Point>& x, const std::vector<Point>&) { return bump(x[0]); });
        CHECK(evolveDual(ops, G, 0.0, params(2, Closure::Truncate)).field.at({1, 0}) == G.at({1, 0}));
        const FreeSpectralSolution exact(grid, ks.a[0], G.at({1, 0}));
        const EvolutionReport r = evolveDual(ops, G, 0.8, params(2, Closure::Truncate));
        const auto ref = exact.atNodes(0.8);
        for (std::size_t j = 0; j < grid.nodes(); ++j) CHECK(r.field.at({1, 0})[j] == doctest::Approx(ref[j]).epsilon(1e-6));
    }
    {
        const KernelSet ks = kernels(dom, 0.265);
        const TorusGrid small(dom, 16);
        const HierarchyOperators ops(ks, small, 0.3);
        HierarchyParams p = params(3, Closure::Truncate);
        MultiField G(small, 3);
        G.fill({1, 1}, [](const std::vector<Point>& x, const std::vector<Point>& y) { return bump(x[0]) * bump(y[0]); });
        const SubStep plan = plannedStep(ks.c, p.theta0, p);
        const double h = 0.5 * plan.horizon;
        const EvolutionReport r = seriesDual(ops, G, h, p.theta0, p);
        const double ratio = quasiNorm(r.field, p.theta0) / quasiNorm(G, plan.thetaPrime);
        CHECK(ratio <= plan.horizon / (plan.horizon - h) * (1 + 1e-6));
    }
}

TEST_CASE("pairing and duality") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 32);
    const KernelSet ks0 = kernels(dom, 0.0);
    const HierarchyOperators free(ks0, grid, 0.0);
    const CorrelationField poisson = poissonField(grid, 2, 0.6, 0.4);
    MultiField G(grid, 2);
    G.at({0, 0})[0] = 1.75;
    CHECK(pairKG(poisson.k, G) == doctest::Approx(1.75));

    MultiField H(grid, 2);
    H.fill({1, 0}, [](const std::vector<Point>& x, const std::vector<Point>&) { return bump(x[0]); });
    double mass = 0;
    for (double v : H.at({1, 0})) mass += v * grid.cellVolume();
    CHECK(pairKG(poisson.k, H) == doctest::Approx(0.6 * mass));
    for (double t : {0.0, 0.5, 1.0}) {
        const DualExpectation e = expectationViaDual(free, poisson, H, t, params(2, Closure::Truncate));
        CHECK(e.value == doctest::Approx(0.6 * mass).epsilon(1e-10));
    }

    // ⟨⟨Ξ(t)k0, G⟩⟩ = ⟨⟨k0, Σ(t)G⟩⟩ in the interacting case with the truncated closure.
    const KernelSet ks = kernels(dom, 0.265);
    const TorusGrid small(dom, 16);
    const HierarchyOperators ops(ks, small, 0.3);
    HierarchyParams p = params(3, Closure::Truncate);
    const CorrelationField k0 = poissonField(small, 3, [](const Point& x) { return 0.5 * bump(x); },
                                             [](const Point& x) { return 0.6 - 0.2 * bump(x); });
    MultiField G3(small, 3);
    G3.fill({1, 1}, [](const std::vector<Point>& x, const std::vector<Point>& y) { return bump(x[0]) * bump(y[0]); });
    G3.fill({1, 0}, [](const std::vector<Point>& x, const std::vector<Point>&) { return bump(x[0]); });
    const double t = 0.5 * plannedStep(ks.c, 0.0, p).horizon;
    const EvolutionReport fwd = seriesForward(ops, k0, t, p);
    const EvolutionReport dual = seriesDual(ops, G3, t, 0.0, p);
    CHECK(pairKG(fwd.field, G3) == doctest::Approx(pairKG(k0.k, dual.field)).epsilon(1e-11));
}

TEST_CASE("field dump round trip") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 8);
    const CorrelationField k = poissonField(grid, 2, [](const Point& x) { return bump(x); }, [](const Point&) { return 0.3; });
    std::stringstream s;
    writeField(s, k.k, 0.25, "sample");
    double theta = 0;
    std::string label;
    const MultiField back = readField(s, dom, &theta, &label);
    CHECK(theta == 0.25);
    CHECK(label == "sample");
    for (const auto& m : MultiField::orders(2)) CHECK(back.at(m) == k.k.at(m));
}

TEST_CASE("closure names") {
    for (Closure c : {Closure::Truncate, Closure::PoissonProduct, Closure::RuelleCap}) CHECK((closureFromString(toString(c)) == c));
    CHECK_THROWS(closureFromString("bogus"));
}
