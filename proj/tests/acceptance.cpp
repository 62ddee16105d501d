#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "wr/combinatorics.hpp"
#include "wr/config.hpp"
#include "wr/estimators.hpp"
#include "wr/hierarchy.hpp"
#include "wr/orchestrator.hpp"
#include "wr/simulator.hpp"

using namespace wr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s c%d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), seconds(t0));
    std::fflush(stdout);
}

const Domain kDom(1, 10);
constexpr std::size_t kPaths = 10000;

KernelSet freeKernels(JumpFamily fam) {
    const JumpKernel a(kDom, fam, 1.0, 1.0);
    const RepulsionKernel zero(kDom, RepulsionFamily::Zero, 0, 1);
    return KernelSet(kDom, {a, a}, {zero, zero});
}

InitialSampler poissonSampler(double kappa) {
    return [kappa](CounterRng& r) { return samplePoissonInitial(kappa, kappa, kDom, r); };
}

// Every trace produced here is audited for criterion 11.
struct AuditTally {
    std::size_t paths = 0, events = 0, bad = 0;
    std::string first;
    void add(const std::vector<EventTrace>& traces, const KernelSet& ks) {
        for (const auto& t : traces) {
            ++paths;
            events += t.events.size();
            const std::string a = auditTrace(t, &ks);
            if (!a.empty() && bad++ == 0) first = a;
        }
    }
} audits;

std::vector<EventTrace> simulate(const KernelSet& ks, const InitialSampler& s, double tEnd, double sigma,
                                 std::uint64_t seed, std::size_t n = kPaths) {
    auto tr = batchSimulate(ks, s, n, tEnd, sigma, seed);
    audits.add(tr, ks);
    return tr;
}

double zScore(double exact, const EstimateWithError& e) { return e.se > 0 ? (e.value - exact) / e.se : 0.0; }

}  // namespace

int main() {
    const auto start = Clock::now();
    const ExperimentConfig inter = loadConfig(WR_SOURCE_DIR "/configs/interacting.ini");
    const KernelSet iks = inter.kernels();
    const Theta th0 = inter.makeTheta(0), th1 = inter.makeTheta(1);
    std::vector<EventTrace> interTraces;
    auto interacting = [&]() -> const std::vector<EventTrace>& {
        if (interTraces.empty())
            interTraces = simulate(iks, inter.sampler(), inter.tEnd, inter.sigma, inter.seed, inter.paths);
        return interTraces;
    };

    report(1, "exact identities", [] {
        const auto t0 = Clock::now();
        const auto checks = verifyIdentities();
        const double dt = seconds(t0);
        int bad = 0;
        for (const auto& c : checks) bad += !c.pass;
        return Outcome{bad == 0 && dt < 1.0, fmt("%zu identities, %d failed, %.3f s", checks.size(), bad, dt)};
    });

    report(2, "free-case spectral oracle", [] {
        const auto t0 = Clock::now();
        const KernelSet ks = freeKernels(JumpFamily::TopHat);
        const TorusGrid grid(kDom, 256);
        const HierarchyOperators ops(ks, grid, 0.0);
        HierarchyParams p;
        p.M = 1;
        p.closure = Closure::Truncate;
        const Theta th = Theta::gaussianBump(kDom, PsiMode::Centered, 0.5, 1.0, {4, 0, 0});
        const Theta none = Theta::zero(kDom, PsiMode::Centered);
        MultiField G(grid, 1);
        G.fill({1, 0}, [&](const std::vector<Point>& x, const std::vector<Point>&) { return th(x[0]); });
        const std::vector<double> times{0.25, 0.5, 0.75, 1.0};
        const FreeSpectralSolution exact(grid, ks.a[0], G.at({1, 0}));
        const auto reps = evolveDualGrid(ops, G, times, p);

        auto rho0 = [](const Point& x) { return 0.5 + 0.4 * std::cos(2 * std::numbers::pi * x[0] / kDom.L); };
        auto rho1 = [](const Point&) { return 0.5; };
        const CorrelationField k0 = poissonField(grid, 1, rho0, rho1);
        const InitialSampler sampler = [&](CounterRng& r) {
            return samplePoissonInhomogeneous({rho0, rho1}, {0.9, 0.5}, kDom, r);
        };
        const auto tr = simulate(ks, sampler, 1.0, 0.0, 21);
        double worstRel = 0, worstZ = 0;
        for (std::size_t j = 0; j < times.size(); ++j) {
            const auto ref = exact.atNodes(times[j]);
            const auto& got = reps[j].field.at({1, 0});
            double err = 0, scale = 0;
            for (std::size_t q = 0; q < ref.size(); ++q) {
                err = std::max(err, std::abs(got[q] - ref[q]));
                scale = std::max(scale, std::abs(ref[q]));
            }
            worstRel = std::max(worstRel, err / scale);
            const double value = pairKG(k0.k, reps[j].field);
            worstZ = std::max(worstZ, std::abs(zScore(value, empiricalChi(tr, times[j], {1, 0}, th, none))));
        }
        const double dt = seconds(t0);
        return Outcome{worstRel <= 1e-6 && worstZ < 3 && dt < 120,
                       fmt("max relative error %.2e, max |z| %.2f, %.0f s", worstRel, worstZ, dt)};
    });

    std::vector<EventTrace> freeTraces;
    report(3, "Poisson invariance (free)", [&] {
        const KernelSet ks = freeKernels(JumpFamily::Gaussian);
        freeTraces = simulate(ks, poissonSampler(0.5), 1.0, 0.0, 31);
        double worst = 0;
        for (OrderPair m : {OrderPair{1, 0}, OrderPair{0, 1}, OrderPair{1, 1}}) {
            const double exact = std::pow(0.5 * th0.l1(), m.m0) * std::pow(0.5 * th1.l1(), m.m1);
            for (double t : {0.0, 0.5, 1.0})
                worst = std::max(worst, std::abs(zScore(exact, empiricalChi(freeTraces, t, m, th0, th1))));
        }
        return Outcome{worst < 3, fmt("max |z| %.2f over 3 orders x 3 times", worst)};
    });

    report(4, "duality", [&] {
        const TorusGrid grid(kDom, 16);
        const HierarchyOperators ops(iks, grid, inter.sigma);
        HierarchyParams p;
        p.M = 3;
        p.closure = Closure::Truncate;
        const SubStep plan = plannedStep(iks.c, p.theta0, p);
        CounterRng rng(404);
        double worstRatio = 0;
        int bad = 0;
        for (int trial = 0; trial < 10; ++trial) {
            std::array<double, 6> c;
            for (double& v : c) v = rng.uniform();
            auto rho = [&, c](int i) {
                return [c, i](const Point& x) {
                    return 0.3 + 0.4 * c[i] + 0.25 * std::cos(2 * std::numbers::pi * x[0] / kDom.L + 6 * c[i + 1]);
                };
            };
            CorrelationField k0 = poissonField(grid, p.M, rho(0), rho(2));
            k0.theta = p.theta0;
            MultiField G(grid, p.M);
            auto f = [c](const Point& x) { return std::exp(-std::pow(std::sin(std::numbers::pi * (x[0] / kDom.L - c[4])), 2) * 8); };
            for (OrderPair m : MultiField::orders(p.M)) {
                if (m.total() == 0) continue;
                const double w = rng.uniform() - 0.3;
                G.fill(m, [&](const std::vector<Point>& x, const std::vector<Point>& y) {
                    double v = w;
                    for (const auto& q : x) v *= f(q);
                    for (const auto& q : y) v *= 1 - 0.5 * f(q);
                    return v;
                });
            }
            const double t = (0.1 + 0.9 * rng.uniform()) * 0.5 * plan.horizon;
            const EvolutionReport fwd = seriesForward(ops, k0, t, p);
            const EvolutionReport dual = seriesDual(ops, G, t, p.theta0, p);
            const double lhs = pairKG(fwd.field, G), rhs = pairKG(k0.k, dual.field);
            const DualExpectation e = pairWithBudget(ops, k0, dual);
            const double budget = e.seriesRemainder + fwd.remainder * quasiNorm(G, fwd.theta) + e.quadrature;
            const double ratio = std::abs(lhs - rhs) / budget;
            worstRatio = std::max(worstRatio, ratio);
            bad += !(ratio <= 10);
        }
        return Outcome{bad == 0, fmt("worst |diff|/budget %.2e over 10 triples, horizon T = %.4f", worstRatio, plan.horizon)};
    });

    report(5, "interacting dual vs Monte Carlo", [&] {
        const auto t0 = Clock::now();
        const auto rows = compareDualVsMC(inter, interacting(), inter.times);
        double worst = 0;
        bool ok = rows.size() == inter.times.size() * inter.orders.size();
        for (const auto& r : rows) {
            ok = ok && r.error.empty() && std::abs(r.z) < 3;
            worst = std::max(worst, std::abs(r.z));
        }
        const double dt = seconds(t0);
        return Outcome{ok && dt < 600, fmt("phibar %.3f, %zu rows, max |z| %.2f, %.0f s incl. simulation",
                                           iks.c.phiBar, rows.size(), worst, dt)};
    });

    report(6, "Ruelle and type bounds", [&] {
        const TorusGrid grid(kDom, inter.n);
        const HierarchyOperators ops(iks, grid, inter.sigma);
        const HierarchyParams p = inter.hierarchy();
        CorrelationField k = poissonField(grid, inter.M, inter.kappa0, inter.kappa1);
        k.theta = p.theta0;
        double worstViolation = -1, worstTypeMargin = -1e300, tPrev = 0;
        for (double t : inter.times) {
            HierarchyParams q = p;
            q.theta0 = k.theta;
            const EvolutionReport r = evolveForward(ops, k, t - tPrev, q);
            k.k = r.field;
            k.theta = r.theta;
            tPrev = t;
            worstViolation = std::max(worstViolation, ruelleViolation(k.k, p.theta0 + iks.c.alpha * t));
            const TypeEstimate te = typeEstimate(interacting(), t, th0, th1, 3);
            const double bound = std::exp(p.theta0 + (iks.c.alpha + 1) * t);
            worstTypeMargin = std::max(worstTypeMargin, te.estimate.value - bound - 3 * te.estimate.se);
        }
        return Outcome{worstViolation <= 1e-6 && worstTypeMargin <= 0,
                       fmt("max Ruelle violation %.2e, max type excess %.3f", worstViolation, worstTypeMargin)};
    });

    report(7, "martingale residuals", [&] {
        const auto& tr = interacting();
        const double s = inter.sigma;
        const Theta c0 = Theta::cosineBump(kDom, PsiMode::Centered, 0.8, 2.0, {3, 0, 0});
        const Theta c1 = Theta::cosineBump(kDom, PsiMode::Centered, 0.6, 1.5, {7, 0, 0});
        std::vector<TestFunction> fs{
            ftildeTest(iks, s, th0, th1, th0.cTheta() + 0.2, th1.cTheta() + 0.2),
            ftildeTest(iks, s, th0.scaled(0.5), th1, th0.cTheta() + 0.5, th1.cTheta() + 1.0),
            ftildeTest(iks, s, c0, c1, c0.cTheta() + 0.3, c1.cTheta() + 0.3),
            fhatTest(iks, s, {1, 1}, {0.5, 0.5}, {std::vector<Theta>{th0}, std::vector<Theta>{th1}})};
        const double mean = inter.kappa0 * kDom.volume();
        auto weight = [mean](const Configuration& g) { return 1.0 + std::tanh(double(g.type[0].size()) - mean); };
        const double t1 = inter.tEnd / 4, t2 = 3 * inter.tEnd / 4;
        int bad = 0;
        double worst = 0;
        for (const auto& F : fs)
            for (const auto& r : martingaleResidualPair(tr, F, t1, t2, weight, inter.tEnd / 8)) {
                bad += !r.within3SE();
                worst = std::max(worst, std::abs(r.residual.value) / std::max(r.residual.se, 1e-300));
            }
        return Outcome{bad == 0, fmt("%zu residuals, max |mean|/SE %.2f", 2 * fs.size(), worst)};
    });

    report(8, "generator inequality and growth bound", [&] {
        const Theta th = Theta::gaussianBump(kDom, PsiMode::Centered, 0.5, 1.0, kDom.center());
        const double tau = 0.6, eps = 0.5;
        const PhiFamily fam(iks, {th, th}, {tau, tau}, 4);
        CounterRng rng(808);
        double worstGen = -1e300, worstGrowth = -1e300;
        int bad = 0;
        const double rho = fam.rho(eps);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Point> p0, p1;
            const int n0 = 1 + int(rng.uniform() * 5), n1 = 1 + int(rng.uniform() * 5);
            for (int j = 0; j < n0 + n1; ++j) (j < n0 ? p0 : p1).push_back(Point{rng.uniform() * kDom.L, 0, 0});
            const Configuration g = Configuration::fromPoints(p0, p1);
            for (OrderPair m : {OrderPair{1, 0}, OrderPair{1, 1}}) {
                for (int q = 0; q <= 2; ++q) {
                    const double excess = std::abs(fam.generator(m, q, g)) - fam.eval(m, q + 1, g);
                    worstGen = std::max(worstGen, excess);
                    bad += excess > 1e-6;
                }
                const double local = fam.localMajorant(m, eps, g), cbar = fam.growthConstant(m, eps);
                bad += !(local <= cbar);
                for (int q = 0; q <= 3; ++q) {
                    const double cap = std::tgamma(q + 1.0) / std::pow(rho, q) * local;
                    const double rel = fam.eval(m, q, g) / cap - 1;
                    worstGrowth = std::max(worstGrowth, rel);
                    bad += rel > 1e-9;
                }
            }
        }
        return Outcome{bad == 0, fmt("max |LPhi_q| - Phi_{q+1} = %.2e, max Phi_q / growth cap - 1 = %.2e, C-bar(1,1) = %.3g",
                                     worstGen, worstGrowth, fam.growthConstant({1, 1}, eps))};
    });

    report(9, "Chentsov scaling", [&] {
        std::string detail;
        bool ok = true;
        for (double sigma : {0.0, 0.1, 1.0}) {
            const auto tr = simulate(iks, poissonSampler(0.5), 0.6, sigma, 900 + std::uint64_t(sigma * 10));
            const ChentsovSweep s = chentsovSweep(tr, 0.5, {0.02, 0.04, 0.08, 0.16});
            ok = ok && s.slope >= 1.7;
            detail += fmt("%ssigma=%g slope %.2f+-%.2f", detail.empty() ? "" : ", ", sigma, s.slope, s.slopeSE);
        }
        return Outcome{ok, detail};
    });

    report(10, "sigma convergence", [&] {
        const double tau0 = th0.cTheta() + 0.2, tau1 = th1.cTheta() + 0.2;
        auto F = [&](const Configuration& g) { return evalFtilde(kDom, th0, th1, tau0, tau1, g); };
        const auto rows = sigmaConvergenceSweep(iks, poissonSampler(0.5), kPaths, 1001, F, 0.5, {1, 0.3, 0.1, 0.03});
        std::string detail;
        for (const auto& r : rows)
            detail += fmt("%s%g:%.2e(%.1e)", detail.empty() ? "" : " ", r.sigma, r.difference.value, r.difference.se);
        return Outcome{sigmaMonotone(rows), "sigma:difference(se) " + detail};
    });

    report(11, "structural exactness", [&] {
        const auto& tr = interacting();
        std::size_t replayBad = 0;
        for (std::size_t p = 0; p < 200; ++p) {
            std::stringstream s1;
            writeTrace(s1, tr[p]);
            const EventTrace back = readTrace(s1);
            std::ostringstream s2;
            writeTrace(s2, back);
            replayBad += s1.str() != s2.str() || !(finalConfiguration(back) == finalConfiguration(tr[p]));
        }
        std::size_t schedBad = 0;
        const auto serial = batchSimulate(iks, inter.sampler(), 200, inter.tEnd, inter.sigma, inter.seed, 1);
        const auto eight = batchSimulate(iks, inter.sampler(), 200, inter.tEnd, inter.sigma, inter.seed, 8);
        for (std::size_t p = 0; p < 200; ++p) {
            std::ostringstream a, b, c;
            writeTrace(a, tr[p]);
            writeTrace(b, serial[p]);
            writeTrace(c, eight[p]);
            schedBad += a.str() != b.str() || a.str() != c.str();
        }
        return Outcome{audits.bad == 0 && replayBad == 0 && schedBad == 0,
                       fmt("%zu paths, %zu events audited, %zu structural, %zu replay, %zu schedule failures%s",
                           audits.paths, audits.events, audits.bad, replayBad, schedBad,
                           audits.first.empty() ? "" : (" (" + audits.first + ")").c_str())};
    });

    report(12, "moment bounds", [&] {
        const Box box{{2.5, 0, 0}, {7.5, 0, 0}};
        std::string detail;
        bool ok = true;
        auto check = [&](const char* name, const std::vector<EventTrace>& tr, double t, double kappa) {
            const BoundReport mb = momentBoundCheck(tr, t, box, 4, kappa);
            const BoundReport eb = expMomentCheck(tr, t, {0.5, 1.0}, kappa);
            ok = ok && mb.pass() && eb.pass() && mb.rows.size() == 5 && eb.rows.size() == 2;
            detail += fmt("%s%s t=%g kappa=%.3f %s", detail.empty() ? "" : ", ", name, t, kappa,
                          mb.pass() && eb.pass() ? "ok" : "violated");
        };
        check("free", freeTraces, 0.0, 0.5);
        check("free", freeTraces, 0.5, 0.5);
        check("interacting", interacting(), 0.0, 0.5);
        check("interacting", interacting(), 0.5, typeEnvelope(std::log(0.5), iks.c.alpha, 0.5));
        return Outcome{ok, detail};
    });

    std::printf("%d of 12 criteria failed, total %.0f s\n", failures, seconds(start));
    return failures == 0 ? 0 : 1;
}
