#include "wr/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/lambert_w.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace wr {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

double sphereArea(int d) { return 2 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d); }

double ballVolume(int d, double r) { return std::pow(std::numbers::pi, 0.5 * d) * std::pow(r, d) / std::tgamma(0.5 * d + 1); }

// ∫_{R^d} f(|x|) dx as a radial integral over [0, R], split into panels.
template <class F>
double radialIntegral(int d, F f, double R, int panels = 8) {
    const double S = sphereArea(d);
    double total = 0;
    for (int p = 0; p < panels; ++p) {
        double a = R * p / panels, b = R * (p + 1) / panels;
        total += GK::integrate([&](double r) { return S * std::pow(r, d - 1) * f(r); }, a, b, 15, 1e-14);
    }
    return total;
}

Point unitDirection(int d, CounterRng& rng) {
    Point e{};
    if (d == 1) {
        e[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else if (d == 2) {
        double a = 2 * std::numbers::pi * rng.uniform();
        e[0] = std::cos(a);
        e[1] = std::sin(a);
    } else {
        double z = 2 * rng.uniform() - 1;
        double a = 2 * std::numbers::pi * rng.uniform();
        double s = std::sqrt(std::max(0.0, 1 - z * z));
        e = {s * std::cos(a), s * std::sin(a), z};
    }
    return e;
}

// Calls f(shift) for every lattice image shift n L with |n_k| ≤ K.
template <class F>
void forImages(const Domain& dom, int K, F f) {
    std::array<int, kMaxDim> n{};
    for (int k = 0; k < dom.d; ++k) n[k] = -K;
    while (true) {
        Point s{};
        for (int k = 0; k < dom.d; ++k) s[k] = n[k] * dom.L;
        f(s);
        int k = 0;
        while (k < dom.d && ++n[k] > K) n[k++] = -K;
        if (k == dom.d) break;
    }
}

}  // namespace

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    double r = 1;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return std::round(r);
}

JumpKernel::JumpKernel(const Domain& dom, JumpFamily family, double mass, double scale)
    : dom_(dom), family_(family), scale_(scale) {
    if (!(mass >= 0) || !(scale > 0)) throw std::invalid_argument("jump kernel needs mass >= 0 and scale > 0");
    const int d = dom.d;
    switch (family) {
        case JumpFamily::Gaussian: norm_ = mass * std::pow(2 * std::numbers::pi * scale * scale, -0.5 * d); break;
        case JumpFamily::Exponential: norm_ = mass / (sphereArea(d) * std::pow(scale, d) * std::tgamma(d)); break;
        case JumpFamily::TopHat: norm_ = mass / ballVolume(d, scale); break;
    }
    moments_.resize(d + 2);
    for (int l = 0; l <= d + 1; ++l)
        moments_[l] = radialIntegral(d, [&](double r) { return std::pow(r, l) * radial(r); }, reach(),
                                     family == JumpFamily::TopHat ? 1 : 16);
}

double JumpKernel::radial(double r) const {
    switch (family_) {
        case JumpFamily::Gaussian: return norm_ * std::exp(-r * r / (2 * scale_ * scale_));
        case JumpFamily::Exponential: return norm_ * std::exp(-r / scale_);
        case JumpFamily::TopHat: return r <= scale_ ? norm_ : 0.0;
    }
    return 0.0;
}

double JumpKernel::reach() const {
    switch (family_) {
        case JumpFamily::Gaussian: return scale_ * (9.0 + std::sqrt(double(dom_.d)));
        case JumpFamily::Exponential: return scale_ * 40.0;
        case JumpFamily::TopHat: return scale_;
    }
    return scale_;
}

double JumpKernel::exactMoment(int l) const {
    const int d = dom_.d;
    double mass = 0;
    switch (family_) {
        case JumpFamily::Gaussian:
            mass = norm_ * std::pow(2 * std::numbers::pi * scale_ * scale_, 0.5 * d);
            return mass * std::pow(std::sqrt(2.0) * scale_, l) * std::tgamma(0.5 * (d + l)) / std::tgamma(0.5 * d);
        case JumpFamily::Exponential:
            mass = norm_ * sphereArea(d) * std::pow(scale_, d) * std::tgamma(d);
            return mass * std::pow(scale_, l) * std::tgamma(double(d + l)) / std::tgamma(double(d));
        case JumpFamily::TopHat:
            mass = norm_ * ballVolume(d, scale_);
            return mass * d * std::pow(scale_, l) / (d + l);
    }
    return 0;
}

double JumpKernel::fourier(double xi) const {
    const int d = dom_.d;
    const double m = mass();
    const double u = std::abs(xi) * scale_;
    switch (family_) {
        case JumpFamily::Gaussian: return m * std::exp(-0.5 * u * u);
        case JumpFamily::Exponential: return m * std::pow(1 + u * u, -0.5 * (d + 1));
        case JumpFamily::TopHat:
            if (u < 1e-6) return m * (1 - u * u / (2.0 * (d + 2)));
            if (d == 1) return m * std::sin(u) / u;
            if (d == 2) return m * 2 * std::cyl_bessel_j(1.0, u) / u;
            return m * 3 * (std::sin(u) - u * std::cos(u)) / (u * u * u);
    }
    return 0.0;
}

double JumpKernel::supNorm() const { return (*this)(Point{}); }

double JumpKernel::operator()(const Point& u) const {
    const int K = static_cast<int>(std::ceil(reach() / dom_.L));
    Point v = dom_.displacement(Point{}, u);
    double s = 0;
    forImages(dom_, K, [&](const Point& sh) {
        Point w{};
        for (int k = 0; k < dom_.d; ++k) w[k] = v[k] + sh[k];
        s += radial(dom_.norm(w));
    });
    return s;
}

double JumpKernel::cellMass(const Point& u, double h) const {
    if (dom_.d == 1 && family_ == JumpFamily::TopHat) {
        // Exact overlap of the cell with the periodized support.
        const Point v = dom_.displacement(Point{}, u);
        const int K = static_cast<int>(std::ceil(reach() / dom_.L)) + 1;
        double len = 0;
        for (int j = -K; j <= K; ++j) {
            double c = v[0] + j * dom_.L;
            double lo = std::max(c - 0.5 * h, -scale_), hi = std::min(c + 0.5 * h, scale_);
            len += std::max(0.0, hi - lo);
        }
        return norm_ * len;
    }
    // Tensor midpoint rule on an 8^d sub-grid of the cell.
    const int s = 8;
    double total = 0;
    int count = 1;
    for (int k = 0; k < dom_.d; ++k) count *= s;
    for (int j = 0; j < count; ++j) {
        Point w = u;
        int r = j;
        for (int k = 0; k < dom_.d; ++k) {
            w[k] += ((r % s) + 0.5) * h / s - 0.5 * h;
            r /= s;
        }
        total += (*this)(w);
    }
    return total / count * std::pow(h, dom_.d);
}

Point JumpKernel::sampleDisplacement(CounterRng& rng) const {
    Point u{};
    const int d = dom_.d;
    switch (family_) {
        case JumpFamily::Gaussian:
            for (int k = 0; k < d; ++k) u[k] = scale_ * normalDraw(rng);
            return u;
        case JumpFamily::Exponential: {
            double prod = 1;
            for (int k = 0; k < d; ++k) prod *= rng.uniform();
            double r = -scale_ * std::log(prod);
            Point e = unitDirection(d, rng);
            for (int k = 0; k < d; ++k) u[k] = r * e[k];
            return u;
        }
        case JumpFamily::TopHat: {
            double r = scale_ * std::pow(rng.uniform(), 1.0 / d);
            Point e = unitDirection(d, rng);
            for (int k = 0; k < d; ++k) u[k] = r * e[k];
            return u;
        }
    }
    return u;
}

std::string JumpKernel::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    const char* names[] = {"gaussian", "exponential", "top-hat"};
    os << names[int(family_)] << " mass=" << mass() << " scale=" << scale_;
    return os.str();
}

RepulsionKernel::RepulsionKernel(const Domain& dom, RepulsionFamily family, double amp, double scale)
    : dom_(dom), family_(family), amp_(amp), scale_(scale) {
    const int d = dom.d;
    switch (family) {
        case RepulsionFamily::Zero:
            amp_ = 0;
            cutoff_ = 0;
            phiBar_ = 0;
            return;
        case RepulsionFamily::HardCore:
            if (!(scale > 0) || 2 * scale >= dom.L) throw std::invalid_argument("hard-core radius must satisfy 0 < 2r < L");
            cutoff_ = scale;
            phiBar_ = ballVolume(d, scale);
            return;
        case RepulsionFamily::Gaussian:
            if (!(amp >= 0) || !(scale > 0)) throw std::invalid_argument("repulsion kernel needs amp >= 0 and scale > 0");
            cutoff_ = amp > 1e-14 ? scale * std::sqrt(2 * std::log(amp / 1e-14)) : 0.0;
            break;
        case RepulsionFamily::Exponential:
            if (!(amp >= 0) || !(scale > 0)) throw std::invalid_argument("repulsion kernel needs amp >= 0 and scale > 0");
            cutoff_ = amp > 1e-14 ? scale * std::log(amp / 1e-14) : 0.0;
            break;
    }
    phiBar_ = cutoff_ > 0 ? radialIntegral(d, [&](double r) { return -std::expm1(-radial(r)); }, cutoff_, 16) : 0.0;
}

double RepulsionKernel::exactPhiBar() const {
    // Smooth families: 1 - e^{-φ} = Σ (-1)^{n+1} φ^n/n!, and ∫ profile^n has a closed form.
    const int d = dom_.d;
    if (family_ == RepulsionFamily::Zero) return 0;
    if (family_ == RepulsionFamily::HardCore) return ballVolume(d, scale_);
    double total = 0, term = 1;
    for (int n = 1; n < 200; ++n) {
        term *= amp_ / n;
        double integral = family_ == RepulsionFamily::Gaussian
                              ? std::pow(2 * std::numbers::pi * scale_ * scale_ / n, 0.5 * d)
                              : sphereArea(d) * std::tgamma(double(d)) * std::pow(scale_ / n, d);
        double add = (n % 2 ? 1 : -1) * term * integral;
        total += add;
        if (std::abs(add) < 1e-18 * std::abs(total)) break;
    }
    return total;
}

double RepulsionKernel::radial(double r) const {
    switch (family_) {
        case RepulsionFamily::Zero: return 0.0;
        case RepulsionFamily::HardCore: return r <= scale_ ? std::numeric_limits<double>::infinity() : 0.0;
        case RepulsionFamily::Gaussian: return amp_ * std::exp(-r * r / (2 * scale_ * scale_));
        case RepulsionFamily::Exponential: return amp_ * std::exp(-r / scale_);
    }
    return 0.0;
}

double RepulsionKernel::operator()(const Point& u) const {
    if (isZero() && !isHardCore()) return 0.0;
    Point v = dom_.displacement(Point{}, u);
    if (cutoff_ < 0.5 * dom_.L) {
        double r = dom_.norm(v);
        return r <= cutoff_ ? radial(r) : 0.0;
    }
    const int K = static_cast<int>(std::ceil(cutoff_ / dom_.L));
    double s = 0;
    forImages(dom_, K, [&](const Point& sh) {
        Point w{};
        for (int k = 0; k < dom_.d; ++k) w[k] = v[k] + sh[k];
        double r = dom_.norm(w);
        if (r <= cutoff_) s += radial(r);
    });
    return s;
}

double RepulsionKernel::boltzmann(const Point& u) const {
    if (isHardCore()) return dom_.dist(Point{}, u) <= scale_ ? 0.0 : 1.0;
    if (isZero()) return 1.0;
    return std::exp(-(*this)(u));
}

std::string RepulsionKernel::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    const char* names[] = {"gaussian", "exponential", "hard-core", "zero"};
    os << names[int(family_)] << " amp=" << amp_ << " scale=" << scale_;
    return os.str();
}

KernelConstants computeConstants(const Domain& dom, const std::array<JumpKernel, 2>& a,
                                 const std::array<RepulsionKernel, 2>& phi) {
    KernelConstants c;
    const int d = dom.d;
    for (int i = 0; i < 2; ++i) {
        c.alpha = std::max(c.alpha, a[i].moment(0));
        c.aNorm = std::max(c.aNorm, a[i].supNorm());
        c.phiBar = std::max(c.phiBar, phi[i].phiBar());
        double s = a[i].moment(0);
        for (int l = 0; l <= d + 1; ++l) s += binomial(d + 1, l) * a[i].moment(l);
        c.alphaBarI[i] = s;
        double h = 0;
        for (int l = 1; l <= d + 1; ++l) h += binomial(d + 1, l) * a[i].moment(l);
        c.alphaBar = std::max(c.alphaBar, h);
    }
    c.cA = std::max(c.alphaBarI[0], c.alphaBarI[1]) + 1;
    return c;
}

KernelSet::KernelSet(const Domain& domain, std::array<JumpKernel, 2> ja, std::array<RepulsionKernel, 2> rp)
    : dom(domain), a(std::move(ja)), phi(std::move(rp)), c(computeConstants(domain, a, phi)) {}

std::string KernelSet::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (int i = 0; i < 2; ++i) os << "a" << i << ": " << a[i].describe() << "\n";
    for (int i = 0; i < 2; ++i) os << "phi" << i << ": " << phi[i].describe() << "\n";
    os << "alpha=" << c.alpha << " |a|=" << c.aNorm << " phibar=" << c.phiBar << " c_a=" << c.cA
       << " alphabar=" << c.alphaBar << " alphabar_0=" << c.alphaBarI[0] << " alphabar_1=" << c.alphaBarI[1] << "\n";
    return os.str();
}

double psiSigma(const Domain& dom, const Point& x, double sigma) {
    if (sigma == 0.0) return 1.0;
    double r = dom.centeredDist(x);
    return 1.0 / (1.0 + sigma * std::pow(r, dom.d + 1));
}

double jumpRate(const KernelSet& ks, int i, const Point& x, const Point& y, const std::vector<Point>& opposite,
                double sigma) {
    double rate = ks.a[i](ks.dom.displacement(x, y)) * psiSigma(ks.dom, x, sigma);
    if (rate == 0.0) return 0.0;
    const auto& phi = ks.phi[i];
    if (phi.isHardCore()) {
        for (const auto& z : opposite)
            if (phi.boltzmann(ks.dom.displacement(y, z)) == 0.0) return 0.0;
        return rate;
    }
    double s = 0;
    for (const auto& z : opposite) s += phi(ks.dom.displacement(y, z));
    return rate * std::exp(-s);
}

ConvolutionResult convolveTheta(const KernelSet& ks, int i, const Theta& theta, int n) {
    const Domain& dom = ks.dom;
    if (n <= 0) n = dom.d == 1 ? 256 : (dom.d == 2 ? 48 : 16);
    TorusGrid grid(dom, n);
    const JumpKernel& a = ks.a[i];
    const double R = a.reach();
    std::vector<double> vals(grid.nodes());
    for (std::size_t j = 0; j < grid.nodes(); ++j) {
        Point x = grid.node(j);
        if (dom.d == 1) {
            auto f = [&](double u) { return a.radial(std::abs(u)) * theta(Point{x[0] - u, 0, 0}); };
            double s = 0;
            const int panels = a.family() == JumpFamily::TopHat ? 4 : 16;
            for (int p = 0; p < panels; ++p) {
                double lo = -R + 2 * R * p / panels, hi = -R + 2 * R * (p + 1) / panels;
                s += GK::integrate(f, lo, hi, 12, 1e-13);
            }
            vals[j] = s;
        } else {
            // Tensor Gauss-Legendre over the kernel's bounding cube.
            using GL = boost::math::quadrature::gauss<double, 40>;
            std::function<double(int, Point)> rec = [&](int axis, Point u) -> double {
                if (axis == dom.d) {
                    Point y = x;
                    for (int k = 0; k < dom.d; ++k) y[k] -= u[k];
                    return a.radial(dom.norm(u)) * theta(y);
                }
                return GL::integrate([&](double s) { Point v = u; v[axis] = s; return rec(axis + 1, v); }, -R, R);
            };
            vals[j] = rec(0, Point{});
        }
    }
    ConvolutionResult out{Theta::tabulated(dom, theta.psiMode(), n, vals), -std::numeric_limits<double>::infinity()};
    const double bound = theta.cBar() * ks.c.alphaBarI[i];
    for (std::size_t j = 0; j < grid.nodes(); ++j)
        out.worstViolation = std::max(out.worstViolation, vals[j] - bound * psi(dom, grid.node(j), theta.psiMode()));
    return out;
}

Theta aTheta(const KernelSet& ks, int i, const Theta& theta) {
    const JumpKernel& a = ks.a[i];
    const bool gaussianTheta =
        theta.family() == ThetaFamily::GaussianBump || theta.family() == ThetaFamily::GaussianMixture;
    if (a.family() == JumpFamily::Gaussian && gaussianTheta) {
        const double s2 = a.scale() * a.scale();
        const double A = a.mass();
        auto terms = theta.terms();
        const std::size_t k = terms.size();
        for (std::size_t j = 0; j < k; ++j) {
            const auto t = terms[j];
            terms.push_back({t.coef * A * std::pow(t.var / (t.var + s2), 0.5 * ks.dom.d), t.var + s2});
        }
        return Theta::mixture(ks.dom, theta.psiMode(), theta.center(), terms);
    }
    auto conv = convolveTheta(ks, i, theta);
    const int n = ks.dom.d == 1 ? 256 : (ks.dom.d == 2 ? 48 : 16);
    TorusGrid grid(ks.dom, n);
    std::vector<double> vals(grid.nodes());
    for (std::size_t j = 0; j < grid.nodes(); ++j) vals[j] = conv.conv(grid.node(j)) + theta(grid.node(j));
    return Theta::tabulated(ks.dom, theta.psiMode(), n, vals);
}

double timeRadius(const KernelConstants& c, double theta, double thetaPrime) {
    if (!(thetaPrime > theta)) throw std::invalid_argument("timeRadius requires theta' > theta");
    return (thetaPrime - theta) / (4 * c.alpha) * std::exp(-c.phiBar * std::exp(thetaPrime));
}

TStar tStar(const KernelConstants& c, double theta) {
    if (!(c.phiBar > 0)) throw std::invalid_argument("tStar requires phibar > 0; use timeRadius directly");
    const double target = std::exp(-theta - std::log(c.phiBar));
    double delta = boost::math::lambert_w0(target);
    // Newton polish on δ e^δ = target.
    for (int it = 0; it < 4; ++it) {
        double f = delta * std::exp(delta) - target;
        if (std::abs(f) <= 1e-14 * target) break;
        delta -= f / ((1 + delta) * std::exp(delta));
    }
    return {delta, delta / (4 * c.alpha) * std::exp(-1.0 / delta)};
}

double tSigma(const KernelConstants& c, double beta, double betaPrime, double sigma) {
    if (!(beta > betaPrime) || !(betaPrime > 0)) throw std::invalid_argument("tSigma requires beta > beta' > 0");
    if (!(sigma > 0) || sigma > 1) throw std::invalid_argument("tSigma requires sigma in (0, 1]");
    return sigma * (beta - betaPrime) / (c.alpha * std::exp(beta));
}

}  // namespace wr
