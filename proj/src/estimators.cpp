#include "wr/estimators.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "wr/parallel.hpp"

namespace wr {

double pairwiseSum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += x[j];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwiseSum(x, h) + pairwiseSum(x + h, n - h);
}

EstimateWithError meanWithError(const std::vector<double>& samples) {
    EstimateWithError e;
    e.n = samples.size();
    if (e.n == 0) return e;
    e.value = pairwiseSum(samples.data(), e.n) / double(e.n);
    if (e.n < 2) return e;
    std::vector<double> dev(e.n);
    for (std::size_t j = 0; j < e.n; ++j) dev[j] = (samples[j] - e.value) * (samples[j] - e.value);
    const double var = pairwiseSum(dev.data(), e.n) / double(e.n - 1);
    e.se = std::sqrt(var / double(e.n));
    return e;
}

std::vector<double> perPath(const std::vector<EventTrace>& traces, const std::function<double(const EventTrace&)>& f,
                            int workers) {
    std::vector<double> out(traces.size());
    parallelFor(traces.size(), [&](std::size_t p) { out[p] = f(traces[p]); }, workers);
    return out;
}

double typeEnvelope(double theta0, double alpha, double t) { return std::exp(theta0 + alpha * t); }

namespace {

// k! e_k of the values: the ordered distinct-tuple sum of identical weights.
double orderedSymmetric(const std::vector<double>& v, int k) {
    std::vector<double> e(k + 1, 0.0);
    e[0] = 1;
    for (double x : v)
        for (int j = k; j >= 1; --j) e[j] += e[j - 1] * x;
    return e[k] * factorial(k);
}

}  // namespace

double orderedProductSum(const Configuration& g, OrderPair m, const Theta& th0, const Theta& th1) {
    double out = 1;
    for (int i = 0; i < 2; ++i) {
        if (m[i] == 0) continue;
        const Theta& th = i == 0 ? th0 : th1;
        std::vector<double> v;
        v.reserve(g.type[i].size());
        for (const auto& p : g.type[i]) v.push_back(th(p.x));
        out *= orderedSymmetric(v, m[i]);
    }
    return out;
}

EstimateWithError empiricalChi(const std::vector<EventTrace>& traces, double t, OrderPair m, const Theta& th0,
                               const Theta& th1) {
    if (m.total() > 3) throw std::invalid_argument("empiricalChi supports |m| <= 3");
    if (m.total() == 0) return {1.0, 0.0, traces.size()};
    return meanWithError(
        perPath(traces, [&](const EventTrace& tr) { return orderedProductSum(sampleAt(tr, t), m, th0, th1); }));
}

bool BoundReport::pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const BoundRow& r) { return r.pass; });
}

std::size_t countIn(const Domain& dom, const Configuration& g, const Box& box) {
    std::size_t n = 0;
    for (int i = 0; i < 2; ++i)
        for (const auto& p : g.type[i])
            if (box.contains(dom, p.x)) ++n;
    return n;
}

BoundReport momentBoundCheck(const std::vector<EventTrace>& traces, double t, const Box& box, int nMax, double kappa) {
    if (nMax < 0 || nMax > 6) throw std::invalid_argument("momentBoundCheck supports 0 <= nMax <= 6");
    BoundReport rep;
    if (traces.empty()) return rep;
    const Domain& dom = traces.front().dom;
    const std::vector<double> counts =
        perPath(traces, [&](const EventTrace& tr) { return double(countIn(dom, sampleAt(tr, t), box)); });
    const double x = 2 * kappa * box.volume(dom);
    for (int n = 0; n <= nMax; ++n) {
        std::vector<double> pw(counts.size());
        for (std::size_t p = 0; p < counts.size(); ++p) pw[p] = std::pow(counts[p], n);
        BoundRow r;
        r.parameter = n;
        r.estimate = meanWithError(pw);
        r.bound = touchardValue(n, x);
        r.pass = r.estimate.value - 3 * r.estimate.se <= r.bound * (1 + 1e-12);
        rep.rows.push_back(r);
    }
    return rep;
}

namespace {

// ∫_torus f(ψ(x)) dx.
double integrateOverPsi(const Domain& dom, PsiMode mode, const std::function<double(double)>& f) {
    if (mode == PsiMode::Flat) return f(1.0) * dom.volume();
    if (dom.d == 1) {
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        const double half = dom.L / 2;
        return 2 * GK::integrate([&](double r) { return f(1.0 / (1.0 + r * r)); }, 0.0, half, 15, 1e-14);
    }
    const int n = dom.d == 2 ? 1024 : 128;
    const double h = dom.L / n;
    double s = 0;
    std::array<int, kMaxDim> idx{};
    while (true) {
        Point x{};
        for (int k = 0; k < dom.d; ++k) x[k] = (idx[k] + 0.5) * h;
        s += f(psi(dom, x, mode));
        int k = 0;
        while (k < dom.d && ++idx[k] == n) idx[k++] = 0;
        if (k == dom.d) break;
    }
    return s * std::pow(h, dom.d);
}

}  // namespace

double psiIntegral(const Domain& dom, PsiMode mode) {
    return integrateOverPsi(dom, mode, [](double p) { return p; });
}

double poissonExpMoment(const Domain& dom, double kappa, double beta, PsiMode mode) {
    return std::exp(2 * kappa * integrateOverPsi(dom, mode, [&](double p) { return std::expm1(beta * p); }));
}

BoundReport expMomentCheck(const std::vector<EventTrace>& traces, double t, const std::vector<double>& betas,
                           double kappa, PsiMode mode) {
    BoundReport rep;
    if (traces.empty()) return rep;
    const Domain& dom = traces.front().dom;
    const std::vector<double> Psi =
        perPath(traces, [&](const EventTrace& tr) { return bigPsi(dom, sampleAt(tr, t), mode); });
    const double mean = psiIntegral(dom, mode);
    for (double beta : betas) {
        if (beta > 2) throw std::invalid_argument("expMomentCheck supports beta <= 2");
        std::vector<double> v(Psi.size());
        for (std::size_t p = 0; p < v.size(); ++p) v[p] = std::exp(beta * Psi[p]);
        BoundRow r;
        r.parameter = beta;
        r.estimate = meanWithError(v);
        r.bound = std::exp(2 * kappa * mean * std::expm1(beta));
        r.pass = r.estimate.value - 3 * r.estimate.se <= r.bound * (1 + 1e-12);
        rep.rows.push_back(r);
    }
    return rep;
}

namespace {

using GK31 = boost::math::quadrature::gauss_kronrod<double, 31>;
using GL20 = boost::math::quadrature::gauss<double, 20>;
using GL30 = boost::math::quadrature::gauss<double, 30>;

// ∫ a_i(u) e^{-Σ_z φ_i(z - y)} g(y) du over the destination y = x + u.
template <class G>
double destinationIntegral(const KernelSet& ks, int i, const Point& x, const std::vector<Point>& opp, G&& g,
                           double* err) {
    const Domain& dom = ks.dom;
    const JumpKernel& a = ks.a[i];
    const RepulsionKernel& phi = ks.phi[i];
    auto integrand = [&](const Point& u) {
        const double w = a.radial(dom.norm(u));
        if (w == 0.0) return 0.0;
        Point y = x;
        for (int k = 0; k < dom.d; ++k) y[k] += u[k];
        y = dom.wrap(y);
        double boltz = 1.0;
        if (!phi.isZero() || phi.isHardCore()) {
            double s = 0;
            for (const auto& z : opp) {
                const double v = phi(dom.displacement(y, z));
                if (std::isinf(v)) return 0.0;
                s += v;
            }
            boltz = std::exp(-s);
        }
        return w * boltz * g(y);
    };
    const double R = a.reach();
    if (dom.d == 1) {
        const int panels = a.family() == JumpFamily::TopHat ? 8 : 16;
        double total = 0;
        for (int p = 0; p < panels; ++p) {
            const double lo = -R + 2 * R * p / panels, hi = -R + 2 * R * (p + 1) / panels;
            double e = 0;
            total += GK31::integrate([&](double u) { return integrand(Point{u, 0, 0}); }, lo, hi, 0, 0, &e);
            if (err) *err += e;
        }
        return total;
    }
    auto tensor = [&](auto rule) {
        std::function<double(int, Point)> rec = [&](int axis, Point u) -> double {
            if (axis == dom.d) return integrand(u);
            return decltype(rule)::integrate(
                [&](double s) {
                    Point v = u;
                    v[axis] = s;
                    return rec(axis + 1, v);
                },
                -R, R);
        };
        return rec(0, Point{});
    };
    const double fine = tensor(GL30{});
    if (err) *err += std::abs(fine - tensor(GL20{}));
    return fine;
}

std::vector<Point> pointsOf(const std::vector<Particle>& g) {
    std::vector<Point> out;
    out.reserve(g.size());
    for (const auto& p : g) out.push_back(p.x);
    return out;
}

// Uniform torus rule for the destination integral when the integrand is smooth and periodic
// (gaussian jumps, gaussian or vanishing repulsion); the trapezoid sum then converges spectrally.
class DestinationRule {
public:
    explicit DestinationRule(const KernelSet& ks) : ks_(&ks) {
        const Domain& dom = ks.dom;
        const int n = dom.d == 1 ? 256 : (dom.d == 2 ? 64 : 24);
        TorusGrid grid(dom, n);
        hd_ = grid.cellVolume();
        for (std::size_t k = 0; k < grid.nodes(); ++k) {
            nodes_.push_back(grid.node(k));
            bool even = true;
            std::size_t r = k;
            for (int a = 0; a < dom.d; ++a, r /= n) even = even && (r % n) % 2 == 0;
            coarse_.push_back(even);
        }
        for (int i = 0; i < 2; ++i) {
            const auto fam = ks.phi[i].family();
            smooth_[i] = ks.a[i].family() == JumpFamily::Gaussian &&
                         (ks.phi[i].isZero() || fam == RepulsionFamily::Gaussian) && !ks.phi[i].isHardCore();
        }
    }

    bool smooth(int i) const { return smooth_[i]; }
    const std::vector<Point>& nodes() const { return nodes_; }

    std::vector<double> boltzmann(int i, const std::vector<Point>& opp) const {
        std::vector<double> B(nodes_.size(), 1.0);
        const RepulsionKernel& phi = ks_->phi[i];
        if (phi.isZero()) return B;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            double s = 0;
            for (const auto& z : opp) s += phi(ks_->dom.displacement(nodes_[k], z));
            B[k] = std::exp(-s);
        }
        return B;
    }

    // Σ_k a_i(x - y_k) B_k g(k) h^d, with |full - half-grid| as the error estimate.
    template <class G>
    double integrate(int i, const Point& x, const std::vector<double>& B, G&& g, double* err) const {
        const JumpKernel& a = ks_->a[i];
        double full = 0, half = 0;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const double v = a(ks_->dom.displacement(x, nodes_[k])) * B[k] * g(k);
            full += v;
            if (coarse_[k]) half += v;
        }
        full *= hd_;
        half *= hd_ * std::pow(2.0, ks_->dom.d);
        if (err) *err += std::abs(full - half);
        return full;
    }

private:
    const KernelSet* ks_;
    std::vector<Point> nodes_;
    std::vector<char> coarse_;
    double hd_ = 0;
    std::array<bool, 2> smooth_{};
};

}  // namespace

TestFunction productTest(const KernelSet& ks, double sigma, ScalarFn f0, ScalarFn f1, std::string name) {
    TestFunction tf;
    tf.name = std::move(name);
    tf.F = [f0, f1](const Configuration& g) {
        double v = 1;
        for (const auto& p : g.type[0]) v *= f0(p.x);
        for (const auto& p : g.type[1]) v *= f1(p.x);
        return v;
    };
    auto rule = std::make_shared<DestinationRule>(ks);
    auto tab = std::make_shared<std::array<std::vector<double>, 2>>();
    for (const auto& y : rule->nodes()) {
        (*tab)[0].push_back(f0(y));
        (*tab)[1].push_back(f1(y));
    }
    auto F = tf.F;
    tf.LF = [&ks, sigma, f0, f1, F, rule, tab](const Configuration& g, double* err) {
        const std::array<ScalarFn, 2> f{f0, f1};
        double s = 0, e = 0;
        for (int i = 0; i < 2; ++i) {
            if (g.type[i].empty()) continue;
            const std::vector<Point> opp = pointsOf(g.type[1 - i]);
            std::vector<double> B;
            if (rule->smooth(i)) B = rule->boltzmann(i, opp);
            const auto& ft = (*tab)[i];
            for (const auto& p : g.type[i]) {
                const double fx = f[i](p.x);
                double ei = 0;
                const double I =
                    rule->smooth(i)
                        ? rule->integrate(i, p.x, B, [&](std::size_t k) { return ft[k] / fx - 1.0; }, &ei)
                        : destinationIntegral(ks, i, p.x, opp, [&](const Point& y) { return f[i](y) / fx - 1.0; }, &ei);
                const double ps = psiSigma(ks.dom, p.x, sigma);
                s += ps * I;
                e += ps * ei;
            }
        }
        const double Fv = F(g);
        if (err) *err += e * std::abs(Fv);
        return Fv * s;
    };
    return tf;
}

TestFunction ftildeTest(const KernelSet& ks, double sigma, const Theta& th0, const Theta& th1, double tau0,
                        double tau1, PsiMode mode) {
    if (tau0 < th0.cTheta() || tau1 < th1.cTheta()) throw std::invalid_argument("ftildeTest requires tau_i >= c_theta_i");
    const Domain dom = ks.dom;
    ScalarFn f0 = [dom, th0, tau0, mode](const Point& x) { return (1 + th0(x)) * std::exp(-tau0 * psi(dom, x, mode)); };
    ScalarFn f1 = [dom, th1, tau1, mode](const Point& x) { return (1 + th1(x)) * std::exp(-tau1 * psi(dom, x, mode)); };
    return productTest(ks, sigma, f0, f1, "Ftilde[" + th0.describe() + "; " + th1.describe() + "]");
}

namespace {

// Running sums of one type's F̂ component: e^{-τΨ} times the ordered tuple sum of u_s = v_s e^{τψ}.
struct FhatParts {
    double Psi = 0;
    std::array<double, 2> S{};
    double P = 0;  // Σ u_1 u_2 over single points
    int m = 0;

    double tuple() const {
        if (m == 0) return 1.0;
        if (m == 1) return S[0];
        return S[0] * S[1] - P;
    }
    double value(double tau) const { return std::exp(-tau * Psi) * tuple(); }
};

// Per-point ingredients of F̂: ψ(x) and u_s(x).
struct FhatPoint {
    double psi = 0;
    std::array<double, 2> u{};
};

}  // namespace

TestFunction fhatTest(const KernelSet& ks, double sigma, OrderPair m, std::array<double, 2> tau,
                      const std::array<std::vector<Theta>, 2>& v, PsiMode mode) {
    for (int i = 0; i < 2; ++i) {
        if (m[i] > 2) throw std::invalid_argument("fhatTest supports m_i <= 2");
        if (int(v[i].size()) != m[i]) throw std::invalid_argument("fhatTest: |v_i| must equal m_i");
        if (!(tau[i] > 0)) throw std::invalid_argument("fhatTest requires tau_i > 0");
    }
    if (m.total() == 0) throw std::invalid_argument("fhatTest requires |m| >= 1");
    const Domain dom = ks.dom;
    auto at = [dom, v, tau, mode, m](int i, const Point& x) {
        FhatPoint q;
        q.psi = psi(dom, x, mode);
        for (int s = 0; s < m[i]; ++s) q.u[s] = v[i][s](x) * std::exp(tau[i] * q.psi);
        return q;
    };
    auto parts = [m, at](int i, const std::vector<Particle>& g) {
        FhatParts f;
        f.m = m[i];
        for (const auto& p : g) {
            const FhatPoint q = at(i, p.x);
            f.Psi += q.psi;
            for (int s = 0; s < m[i]; ++s) f.S[s] += q.u[s];
            if (m[i] == 2) f.P += q.u[0] * q.u[1];
        }
        return f;
    };
    auto rule = std::make_shared<DestinationRule>(ks);
    auto tab = std::make_shared<std::array<std::vector<FhatPoint>, 2>>();
    for (const auto& y : rule->nodes())
        for (int i = 0; i < 2; ++i) (*tab)[i].push_back(at(i, y));
    TestFunction tf;
    tf.name = "Fhat(" + std::to_string(m.m0) + "," + std::to_string(m.m1) + ")";
    tf.F = [parts, tau](const Configuration& g) {
        return parts(0, g.type[0]).value(tau[0]) * parts(1, g.type[1]).value(tau[1]);
    };
    tf.LF = [&ks, sigma, parts, at, tau, m, rule, tab](const Configuration& g, double* err) {
        const std::array<FhatParts, 2> base{parts(0, g.type[0]), parts(1, g.type[1])};
        const std::array<double, 2> val{base[0].value(tau[0]), base[1].value(tau[1])};
        double s = 0, e = 0;
        for (int i = 0; i < 2; ++i) {
            const double other = val[1 - i];
            if (other == 0.0 || g.type[i].empty()) continue;
            const std::vector<Point> opp = pointsOf(g.type[1 - i]);
            std::vector<double> B;
            if (rule->smooth(i)) B = rule->boltzmann(i, opp);
            for (const auto& p : g.type[i]) {
                const FhatPoint qx = at(i, p.x);
                auto moved = [&](const FhatPoint& qy) {
                    FhatParts f = base[i];
                    f.Psi += qy.psi - qx.psi;
                    for (int r = 0; r < m[i]; ++r) f.S[r] += qy.u[r] - qx.u[r];
                    if (m[i] == 2) f.P += qy.u[0] * qy.u[1] - qx.u[0] * qx.u[1];
                    return f.value(tau[i]) - val[i];
                };
                double ei = 0;
                const double I = rule->smooth(i)
                                     ? rule->integrate(i, p.x, B, [&](std::size_t k) { return moved((*tab)[i][k]); }, &ei)
                                     : destinationIntegral(ks, i, p.x, opp, [&](const Point& y) { return moved(at(i, y)); },
                                                           &ei);
                const double ps = psiSigma(ks.dom, p.x, sigma);
                s += ps * I * other;
                e += ps * ei * std::abs(other);
            }
        }
        if (err) *err += e;
        return s;
    };
    return tf;
}

TestFunction phiTest(const PhiFamily& fam, OrderPair m, int q) {
    TestFunction tf;
    tf.name = "Phi(" + std::to_string(m.m0) + "," + std::to_string(m.m1) + ";q=" + std::to_string(q) + ")";
    tf.F = [&fam, m, q](const Configuration& g) { return fam.eval(m, q, g); };
    tf.LF = [&fam, m, q](const Configuration& g, double* err) {
        if (err) *err += 1e-10;
        return fam.generator(m, q, g, 1e-10);
    };
    return tf;
}

bool MartingaleReport::within3SE() const { return std::abs(residual.value) < 3 * residual.se || residual.value == 0.0; }

namespace {

// One replay per path; res[p] is the raw residual and w[p] the conditioning factor.
struct ResidualSamples {
    std::vector<double> res, w, err;
};

ResidualSamples residualSamples(const std::vector<EventTrace>& traces, const TestFunction& F, double t1, double t2,
                                const std::function<double(const Configuration&)>& weight, double s1) {
    if (!(t1 < t2)) throw std::invalid_argument("martingaleResidual requires t1 < t2");
    if (weight && s1 > t1) throw std::invalid_argument("conditioning time must not exceed t1");
    ResidualSamples out;
    out.res.assign(traces.size(), 0.0);
    out.w.assign(traces.size(), 1.0);
    out.err.assign(traces.size(), 0.0);
    parallelFor(traces.size(), [&](std::size_t p) {
        const EventTrace& tr = traces[p];
        if (t2 > tr.tEnd) throw std::out_of_range("martingaleResidual: t2 beyond the trace");
        TraceCursor cur(tr);
        if (weight) out.w[p] = weight(cur.advanceTo(s1));
        const double F1 = F.F(cur.advanceTo(t1));
        double integral = 0, u = t1, err = 0;
        while (cur.nextEventTime() <= t2) {
            const double te = cur.nextEventTime();
            double e = 0;
            integral += F.LF(cur.current(), &e) * (te - u);
            err = std::max(err, e);
            cur.advanceTo(te);
            u = te;
        }
        double e = 0;
        integral += F.LF(cur.current(), &e) * (t2 - u);
        err = std::max(err, e);
        const double F2 = F.F(cur.advanceTo(t2));
        out.res[p] = F2 - F1 - integral;
        out.err[p] = err;
    });
    return out;
}

MartingaleReport reportFrom(const std::string& name, double t1, double t2, const std::vector<double>& res,
                            const std::vector<double>& err) {
    MartingaleReport rep;
    rep.name = name;
    rep.t1 = t1;
    rep.t2 = t2;
    rep.residual = meanWithError(res);
    for (double e : err) rep.maxQuadError = std::max(rep.maxQuadError, e);
    return rep;
}

}  // namespace

MartingaleReport martingaleResidual(const std::vector<EventTrace>& traces, const TestFunction& F, double t1, double t2,
                                    const std::function<double(const Configuration&)>& weight, double s1) {
    ResidualSamples s = residualSamples(traces, F, t1, t2, weight, s1);
    for (std::size_t p = 0; p < s.res.size(); ++p) s.res[p] *= s.w[p];
    return reportFrom(F.name + (weight ? " weighted" : ""), t1, t2, s.res, s.err);
}

std::array<MartingaleReport, 2> martingaleResidualPair(const std::vector<EventTrace>& traces, const TestFunction& F,
                                                       double t1, double t2,
                                                       const std::function<double(const Configuration&)>& weight,
                                                       double s1) {
    if (!weight) throw std::invalid_argument("martingaleResidualPair needs a conditioning factor");
    const ResidualSamples s = residualSamples(traces, F, t1, t2, weight, s1);
    std::vector<double> weighted(s.res.size());
    for (std::size_t p = 0; p < s.res.size(); ++p) weighted[p] = s.res[p] * s.w[p];
    return {reportFrom(F.name, t1, t2, s.res, s.err), reportFrom(F.name + " weighted", t1, t2, weighted, s.err)};
}

EstimateWithError chentsovDiagnostic(const std::vector<EventTrace>& traces, double t1, double t2, double t3,
                                     PsiMode mode) {
    if (!(t1 <= t2 && t2 <= t3)) throw std::invalid_argument("chentsovDiagnostic requires t1 <= t2 <= t3");
    if (traces.empty()) return {};
    const PathMetric metric(traces.front().dom, mode);
    return meanWithError(perPath(traces, [&](const EventTrace& tr) {
        TraceCursor cur(tr);
        const Configuration a = cur.advanceTo(t1);
        const Configuration b = cur.advanceTo(t2);
        const Configuration& c = cur.advanceTo(t3);
        return metric(a, b) * metric(b, c);
    }));
}

std::array<double, 3> fitLogLog(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("fitLogLog needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!(x[j] > 0) || !(y[j] > 0)) throw std::domain_error("fitLogLog needs positive data");
        mx += std::log(x[j]);
        my += std::log(y[j]);
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < n; ++j) {
        sxx += (std::log(x[j]) - mx) * (std::log(x[j]) - mx);
        sxy += (std::log(x[j]) - mx) * (std::log(y[j]) - my);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx, sxx};
}

ChentsovSweep chentsovSweep(const std::vector<EventTrace>& traces, double center, const std::vector<double>& spacings,
                            PsiMode mode) {
    ChentsovSweep out;
    if (traces.empty()) return out;
    for (double dlt : spacings) {
        if (center - dlt / 2 < 0) throw std::invalid_argument("chentsovSweep: window starts before time 0");
        out.points.push_back({dlt, chentsovDiagnostic(traces, center - dlt / 2, center, center + dlt / 2, mode)});
    }
    std::vector<double> x, y;
    for (const auto& p : out.points)
        if (p.w.value > 0) {
            x.push_back(p.spacing);
            y.push_back(p.w.value);
        }
    if (x.size() < 2) return out;
    const auto fit = fitLogLog(x, y);
    out.slope = fit[0];
    out.intercept = fit[1];
    // Propagate the per-point relative standard errors through the least-squares slope.
    double mx = 0;
    for (double v : x) mx += std::log(v);
    mx /= x.size();
    double var = 0;
    std::size_t k = 0;
    for (const auto& p : out.points) {
        if (!(p.w.value > 0)) continue;
        const double rel = p.w.se / p.w.value;
        const double c = (std::log(x[k++]) - mx) / fit[2];
        var += c * c * rel * rel;
    }
    out.slopeSE = std::sqrt(var);
    return out;
}

std::vector<SigmaRow> sigmaConvergenceSweep(const KernelSet& ks, const InitialSampler& sampler, std::size_t nPaths,
                                            std::uint64_t seed, const std::function<double(const Configuration&)>& F,
                                            double t, const std::vector<double>& sigmas, int workers) {
    auto finalValues = [&](double sigma) {
        std::vector<double> v(nPaths);
        parallelFor(
            nPaths,
            [&](std::size_t p) {
                const std::uint64_t s = pathSeed(seed, p);
                CounterRng init = CounterRng(s).split(0);
                const Configuration g0 = sampler(init);
                v[p] = t > 0 ? F(finalConfiguration(simulatePath(ks, g0, t, sigma, s))) : F(g0);
            },
            workers);
        return v;
    };
    const std::vector<double> base = finalValues(0.0);
    std::vector<SigmaRow> rows;
    for (double sigma : sigmas) {
        const std::vector<double> v = sigma == 0.0 ? base : finalValues(sigma);
        std::vector<double> diff(nPaths);
        for (std::size_t p = 0; p < nPaths; ++p) diff[p] = v[p] - base[p];
        rows.push_back({sigma, meanWithError(v), meanWithError(diff)});
    }
    return rows;
}

bool sigmaMonotone(const std::vector<SigmaRow>& rows) {
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        if (!(rows[k].sigma > rows[k + 1].sigma)) throw std::invalid_argument("sigma list must be descending");
        const double joint = std::hypot(rows[k].difference.se, rows[k + 1].difference.se);
        if (std::abs(rows[k + 1].difference.value) > std::abs(rows[k].difference.value) + joint) return false;
    }
    return true;
}

TypeEstimate typeEstimate(const std::vector<EventTrace>& traces, double t, const Theta& th0, const Theta& th1,
                          int mMax) {
    if (mMax < 1 || mMax > 3) throw std::invalid_argument("typeEstimate supports 1 <= mMax <= 3");
    TypeEstimate best{{-std::numeric_limits<double>::infinity(), 0, 0}, {0, 0}};
    for (const auto& m : MultiField::orders(mMax)) {
        if (m.total() == 0) continue;
        const double norm = std::pow(th0.l1(), m.m0) * std::pow(th1.l1(), m.m1);
        if (!(norm > 0)) continue;
        const EstimateWithError chi = empiricalChi(traces, t, m, th0, th1);
        const double r = std::max(chi.value / norm, 0.0);
        const double k = m.total();
        const double val = std::pow(r, 1.0 / k);
        const double se = r > 0 ? chi.se / norm / k * std::pow(r, 1.0 / k - 1) : chi.se / norm;
        if (val > best.estimate.value) best = {{val, se, chi.n}, m};
    }
    return best;
}

}  // namespace wr
