#include <doctest.h>

#include <cmath>
#include <sstream>

#include "wr/geometry.hpp"
#include "wr/grid.hpp"
#include "wr/rng.hpp"

using namespace wr;

namespace {

Point at(const Domain& dom, double r) {
    Point p = dom.center();
    p[0] += r;
    return p;
}

Configuration randomConfig(const Domain& dom, CounterRng& rng, int n0, int n1) {
    std::vector<Point> p0, p1;
    for (int j = 0; j < n0 + n1; ++j) {
        Point x{};
        for (int k = 0; k < dom.d; ++k) x[k] = rng.uniform() * dom.L;
        (j < n0 ? p0 : p1).push_back(x);
    }
    return Configuration::fromPoints(p0, p1);
}

}  // namespace

TEST_CASE("psi weights") {
    const Domain d1(1, 10), d2(2, 10);
    CHECK(psi(d1, d1.center()) == 1.0);
    CHECK(psi(d1, at(d1, 1.0)) == doctest::Approx(0.5));
    CHECK(psi(d2, at(d2, 2.0)) == doctest::Approx(1.0 / 9.0));
    CHECK(psi(d1, at(d1, 3.0), PsiMode::Flat) == 1.0);
}

TEST_CASE("domain canonicalization and minimum image") {
    const Domain dom(2, 10);
    const Point p = dom.wrap({-1.0, 23.5, 0});
    CHECK(p[0] == doctest::Approx(9.0));
    CHECK(p[1] == doctest::Approx(3.5));
    CHECK(dom.dist({0.5, 0.5, 0}, {9.5, 9.5, 0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("bigPsi") {
    const Domain dom(1, 10);
    CHECK(bigPsi(dom, Configuration{}) == 0.0);
    CHECK(bigPsi(dom, Configuration::fromPoints({dom.center()}, {dom.center()})) == doctest::Approx(2.0));
    CHECK(bigPsi(dom, Configuration::fromPoints({at(dom, 0), at(dom, 1)}, {})) == doctest::Approx(1.5));
}

TEST_CASE("countQ enumerates ordered tuples of distinct particles") {
    const Domain dom(1, 10);
    const Box box{{2, 0, 0}, {8, 0, 0}};
    const Configuration g = Configuration::fromPoints({{3, 0, 0}, {4, 0, 0}, {5, 0, 0}, {9, 0, 0}}, {{6, 0, 0}, {7, 0, 0}});
    CHECK(countQ(dom, g, {0, 0}, box) == 1);
    CHECK(countQ(dom, Configuration::fromPoints({{3, 0, 0}, {4, 0, 0}}, {}), {2, 0}, box) == 2);
    CHECK(countQ(dom, g, {1, 1}, box) == 6);
    CHECK(countQ(dom, g, {1, 0}, box) == 3);
}

TEST_CASE("evalFtilde") {
    const Domain dom(1, 10);
    const Theta z = Theta::zero(dom, PsiMode::Centered);
    CHECK(evalFtilde(dom, z, z, 1.0, 1.0, Configuration{}) == 1.0);
    CHECK(evalFtilde(dom, z, z, 0.0, 0.0, Configuration::fromPoints({at(dom, 1)}, {at(dom, 2)})) == 1.0);
    // A single type-0 particle at ψ = 0.5 with θ0 = 0.2 there.
    const Theta th = Theta::scaledPsi(dom, PsiMode::Centered, 0.4);
    const Configuration g = Configuration::fromPoints({at(dom, 1)}, {});
    CHECK(th(at(dom, 1)) == doctest::Approx(0.2));
    CHECK(evalFtilde(dom, th, z, 1.0, 1.0, g) == doctest::Approx(1.2 * std::exp(-0.5)).epsilon(1e-12));
    CHECK_THROWS(evalFtilde(dom, th, z, 0.1, 1.0, g));
}

TEST_CASE("evalFhat") {
    const Domain dom(1, 10);
    const Theta th = Theta::gaussianBump(dom, PsiMode::Centered, 0.5, 1.0, dom.center());
    const auto v = asFns({th});
    CHECK(evalFhat(dom, {0, 0}, {1, 1}, {}, Configuration::fromPoints({at(dom, 1)}, {})) == 0.0);
    const Point x = at(dom, 0.7);
    CHECK(evalFhat(dom, {1, 0}, {1, 1}, {v, {}}, Configuration::fromPoints({x}, {})) == doctest::Approx(th(x)));
    // m = (2,0) on three particles: six ordered pairs, each damped by the remaining particle.
    const std::vector<Point> pts{at(dom, 0.3), at(dom, -1.1), at(dom, 2.0)};
    const auto v2 = asFns({th, th.scaled(0.5)});
    double brute = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            const int c = 3 - a - b;
            brute += v2[0](pts[a]) * v2[1](pts[b]) * std::exp(-0.8 * psi(dom, pts[c]));
        }
    CHECK(evalFhat(dom, {2, 0}, {0.8, 1}, {v2, {}}, Configuration::fromPoints(pts, {})) ==
          doctest::Approx(brute).epsilon(1e-13));
    CHECK_THROWS(evalFhat(dom, {1, 0}, {0.0, 1}, {v, {}}, Configuration::fromPoints({x}, {})));
}

TEST_CASE("theta constants") {
    const Domain dom(1, 10);
    for (const Theta& th : {Theta::gaussianBump(dom, PsiMode::Centered, 0.5, 1.0, {3, 0, 0}),
                            Theta::cosineBump(dom, PsiMode::Centered, 0.8, 2.0, {6, 0, 0}),
                            Theta::scaledPsi(dom, PsiMode::Centered, 0.7)}) {
        CHECK(th.boundViolation() <= 1e-12);
        CHECK(th.l1() > 0);
        CHECK(std::isfinite(th.l1()));
    }
}

TEST_CASE("kTransform") {
    const Domain dom(1, 10);
    const TorusGrid grid(dom, 16);
    CounterRng rng(5);
    const Configuration g = randomConfig(dom, rng, 3, 2);

    MultiField G(grid, 2);
    G.at({0, 0})[0] = 2.5;
    CHECK(kTransform(G, g) == doctest::Approx(2.5));

    QuasiObservableFn one;
    const Theta th = Theta::gaussianBump(dom, PsiMode::Centered, 0.5, 1.0, dom.center());
    one.parts[{1, 0}] = [&](const std::vector<Point>& x, const std::vector<Point>&) { return th(x[0]); };
    double direct = 0;
    for (const auto& p : g.type[0]) direct += th(p.x);
    CHECK(kTransform(one, g) == doctest::Approx(direct));
}

TEST_CASE("kTransform of the product quasi-observable reproduces evalFtilde") {
    const Domain dom(1, 10);
    const Theta th0 = Theta::gaussianBump(dom, PsiMode::Centered, 0.5, 1.0, {4, 0, 0});
    const Theta th1 = Theta::cosineBump(dom, PsiMode::Centered, 0.8, 2.0, {6, 0, 0});
    const double tau0 = th0.cTheta() + 0.1, tau1 = th1.cTheta() + 0.3;
    // G̃^(m) = Π (e^{-τ0 ψ}(1+θ0) - 1) Π (e^{-τ1 ψ}(1+θ1) - 1) up to order 6.
    auto e0 = [&](const Point& x) { return std::exp(-tau0 * psi(dom, x)) * (1 + th0(x)) - 1; };
    auto e1 = [&](const Point& x) { return std::exp(-tau1 * psi(dom, x)) * (1 + th1(x)) - 1; };
    QuasiObservableFn G;
    for (int m0 = 0; m0 <= 4; ++m0)
        for (int m1 = 0; m1 <= 4; ++m1)
            G.parts[{m0, m1}] = [&](const std::vector<Point>& x, const std::vector<Point>& y) {
                double v = 1;
                for (const auto& p : x) v *= e0(p);
                for (const auto& p : y) v *= e1(p);
                return v;
            };
    CounterRng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Configuration g = randomConfig(dom, rng, 1 + trial % 4, trial % 5);
        CHECK(kTransform(G, g) == doctest::Approx(evalFtilde(dom, th0, th1, tau0, tau1, g)).epsilon(1e-10));
    }
}

TEST_CASE("evalFexp") {
    const Domain dom(1, 10);
    const Theta z = Theta::zero(dom, PsiMode::Centered);
    CHECK(evalFexp(z, z, Configuration{}) == 1.0);
    CHECK(evalFexp(z, z, Configuration::fromPoints({at(dom, 1)}, {at(dom, 2)})) == 1.0);
}

TEST_CASE("path metric surrogate") {
    const Domain dom(1, 10);
    CounterRng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const Configuration a = randomConfig(dom, rng, 3, 2), b = randomConfig(dom, rng, 2, 4),
                            c = randomConfig(dom, rng, 1, 1);
        CHECK(pathMetric(dom, a, a) == 0.0);
        CHECK(pathMetric(dom, a, b) == pathMetric(dom, b, a));
        CHECK(pathMetric(dom, a, c) <= pathMetric(dom, a, b) + pathMetric(dom, b, c) + 1e-12);
    }
    // Deleting a type-0 particle of weight 0.5: at least 0.5 through the constant dictionary element.
    const Point x = at(dom, 1.0);
    const Configuration full = Configuration::fromPoints({x, at(dom, 3)}, {});
    const Configuration less = Configuration::fromPoints({at(dom, 3)}, {});
    const double dist = pathMetric(dom, full, less);
    CHECK(dist >= 0.5 - 1e-12);
    CHECK(dist <= 1.0);
}

TEST_CASE("configuration text round trip") {
    const Domain dom(2, 7.5);
    CounterRng rng(3);
    const Configuration g = randomConfig(dom, rng, 4, 3);
    std::stringstream s;
    writeConfiguration(s, dom, PsiMode::Flat, g);
    Domain back;
    PsiMode mode = PsiMode::Centered;
    const Configuration h = readConfiguration(s, &back, &mode);
    CHECK(h == g);
    CHECK(back.d == 2);
    CHECK(back.L == 7.5);
    CHECK((mode == PsiMode::Flat));
    CHECK(g.isSimple(dom));
}
