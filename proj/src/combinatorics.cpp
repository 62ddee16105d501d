#include "wr/combinatorics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace wr {

BigInt factorialBig(int n) {
    BigInt r = 1;
    for (int j = 2; j <= n; ++j) r *= j;
    return r;
}

BigInt binomialBig(int n, int k) {
    if (k < 0 || k > n) return 0;
    BigInt r = 1;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

BigInt powBig(const BigInt& base, unsigned e) {
    BigInt r = 1;
    for (unsigned j = 0; j < e; ++j) r *= base;
    return r;
}

namespace {

const std::vector<std::vector<BigInt>>& stirlingTable() {
    static const std::vector<std::vector<BigInt>> table = [] {
        const int P = 30;
        std::vector<std::vector<BigInt>> s(P + 1, std::vector<BigInt>(P + 1, 0));
        s[0][0] = 1;
        for (int p = 1; p <= P; ++p)
            for (int l = 1; l <= p; ++l) s[p][l] = BigInt(l) * s[p - 1][l] + s[p - 1][l - 1];
        return s;
    }();
    return table;
}

}  // namespace

BigInt stirling2(int p, int l) {
    if (p < 0 || p > 30 || l < 0 || l > p) throw std::out_of_range("stirling2 requires 0 <= l <= p <= 30");
    return stirlingTable()[p][l];
}

Polynomial::Polynomial(std::vector<BigInt> coeffs) : c(std::move(coeffs)) { trim(); }

void Polynomial::trim() {
    while (!c.empty() && c.back() == 0) c.pop_back();
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    std::vector<BigInt> r(std::max(c.size(), o.c.size()), 0);
    for (std::size_t j = 0; j < c.size(); ++j) r[j] += c[j];
    for (std::size_t j = 0; j < o.c.size(); ++j) r[j] += o.c[j];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    if (c.empty() || o.c.empty()) return Polynomial();
    std::vector<BigInt> r(c.size() + o.c.size() - 1, 0);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < o.c.size(); ++j) r[i + j] += c[i] * o.c[j];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator*(const BigInt& s) const {
    std::vector<BigInt> r = c;
    for (auto& v : r) v *= s;
    return Polynomial(std::move(r));
}

Polynomial Polynomial::dilate(const BigInt& lambda) const {
    std::vector<BigInt> r = c;
    BigInt f = 1;
    for (auto& v : r) {
        v *= f;
        f *= lambda;
    }
    return Polynomial(std::move(r));
}

Rational Polynomial::operator()(const Rational& x) const {
    Rational acc = 0;
    for (std::size_t j = c.size(); j-- > 0;) acc = acc * x + Rational(c[j]);
    return acc;
}

bool Polynomial::operator==(const Polynomial& o) const { return c == o.c; }

std::string Polynomial::str() const {
    std::ostringstream os;
    bool first = true;
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (c[j] == 0) continue;
        if (!first) os << " + ";
        os << c[j];
        if (j > 0) os << "x^" << j;
        first = false;
    }
    if (first) os << "0";
    return os.str();
}

Polynomial touchard(int n) {
    std::vector<BigInt> co(n + 1, 0);
    for (int l = 0; l <= n; ++l) co[l] = stirling2(n, l);
    return Polynomial(std::move(co));
}

Rational touchard(int n, const Rational& x) { return touchard(n)(x); }

double touchardValue(int n, double x) {
    double acc = 0;
    for (int l = n; l >= 0; --l) acc = acc * x + stirling2(n, l).convert_to<double>();
    return acc;
}

Polynomial fallingPolynomial(int l) {
    Polynomial p(std::vector<BigInt>{1});
    for (int j = 0; j < l; ++j) p = p * Polynomial(std::vector<BigInt>{BigInt(-j), BigInt(1)});
    return p;
}

bool SequenceC::valid() const {
    long sum = 0, weighted = 0;
    for (std::size_t l = 0; l < c.size(); ++l) {
        if (c[l] < 0) return false;
        sum += c[l];
        weighted += long(l) * c[l];
    }
    return sum == p && weighted == q;
}

std::vector<SequenceC> enumerateC(int p, int q) {
    if (p < 1 || q < 0 || q > 12) throw std::out_of_range("enumerateC requires p >= 1 and 0 <= q <= 12");
    std::vector<SequenceC> out;
    std::vector<int> c(q + 1, 0);
    // Assign c_q, c_{q-1}, ..., c_1 in turn (lexicographically descending on high levels); c_0 takes the rest.
    std::function<void(int, int, int)> rec = [&](int l, int remainingQ, int remainingP) {
        if (l == 0) {
            if (remainingQ == 0) {
                c[0] = remainingP;
                out.push_back({p, q, c});
            }
            return;
        }
        for (int k = std::min(remainingQ / l, remainingP); k >= 0; --k) {
            c[l] = k;
            rec(l - 1, remainingQ - k * l, remainingP - k);
        }
        c[l] = 0;
    };
    rec(q, q, p);
    return out;
}

BigInt weightC(const SequenceC& s) {
    if (!s.valid()) throw std::invalid_argument("weightC: sequence violates the defining constraints");
    BigInt num = factorialBig(s.p) * factorialBig(s.q);
    BigInt den = 1;
    for (std::size_t l = 0; l < s.c.size(); ++l)
        den *= factorialBig(s.c[l]) * powBig(factorialBig(int(l)), unsigned(s.c[l]));
    if (num % den != 0) throw std::logic_error("weightC: non-integral weight");
    return num / den;
}

BigInt finiteDiffW(int k, int p, int q) {
    if (k < 0 || q < 0 || k > 20 || q > 20) throw std::out_of_range("finiteDiffW requires 0 <= k, q <= 20");
    BigInt s = 0;
    for (int l = 0; l <= k; ++l) {
        BigInt term = binomialBig(k, l) * powBig(BigInt(p + l), unsigned(q));
        if ((k - l) % 2) s -= term;
        else s += term;
    }
    BigInt kf = factorialBig(k);
    if (s % kf != 0) throw std::logic_error("finiteDiffW: non-integral value");
    return s / kf;
}

std::vector<IdentityCheck> verifyIdentities() {
    std::vector<IdentityCheck> out;
    {
        bool ok = true;
        std::ostringstream why;
        for (int p = 1; p <= 8; ++p)
            for (int q = 0; q <= 8; ++q) {
                BigInt s = 0;
                for (const auto& c : enumerateC(p, q)) s += weightC(c);
                if (s != powBig(BigInt(p), unsigned(q))) {
                    ok = false;
                    why << "(p=" << p << ",q=" << q << ") ";
                }
            }
        out.push_back({"sum_c C_pq(c) = p^q, 1<=p<=8, 0<=q<=8", ok, ok ? "72 cases exact" : why.str()});
    }
    {
        bool ok = true;
        std::ostringstream why;
        for (int n = 0; n <= 10; ++n) {
            Polynomial lhs;
            for (int p = 0; p <= n; ++p) lhs = lhs + touchard(p) * touchard(n - p) * binomialBig(n, p);
            if (!(lhs == touchard(n).dilate(2))) {
                ok = false;
                why << "n=" << n << " ";
            }
        }
        out.push_back({"sum_p C(n,p) T_p T_{n-p} = T_n(2x), n<=10", ok, ok ? "11 polynomial identities exact" : why.str()});
    }
    {
        bool ok = true;
        int cases = 0;
        for (int q = 0; q <= 20; ++q)
            for (int k = q + 1; k <= 20; ++k)
                for (int p = 0; p <= 20; ++p) {
                    ++cases;
                    if (finiteDiffW(k, p, q) != 0) ok = false;
                }
        out.push_back({"w_k(p,q) = 0 for k > q, p,k,q <= 20", ok, std::to_string(cases) + " cases"});
    }
    {
        bool ok = true;
        for (int q = 0; q <= 20; ++q)
            for (int p = 0; p <= 20; ++p) {
                if (finiteDiffW(0, p, q) != powBig(BigInt(p), unsigned(q))) ok = false;
                for (int k = 0; k <= q && q <= 30; ++k)
                    if (finiteDiffW(k, 0, q) != stirling2(q, k)) ok = false;
            }
        out.push_back({"w_0(p,q) = p^q and w_k(0,q) = S(q,k)", ok, "p,q <= 20"});
    }
    {
        bool ok = true;
        for (int p = 0; p <= 12; ++p) {
            Polynomial rhs;
            for (int l = 0; l <= p; ++l) rhs = rhs + fallingPolynomial(l) * stirling2(p, l);
            std::vector<BigInt> mono(p + 1, 0);
            mono[p] = 1;
            if (!(rhs == Polynomial(mono))) ok = false;
        }
        out.push_back({"x^p = sum_l S(p,l) (x)_l, p<=12", ok, "13 polynomial identities exact"});
    }
    return out;
}

PhiFamily::PhiFamily(const KernelSet& ks, const std::array<Theta, 2>& theta, std::array<double, 2> tau, int maxLevel,
                     PsiMode mode)
    : ks_(ks), tau_(tau), mode_(mode) {
    for (int i = 0; i < 2; ++i) {
        if (!(tau[i] > 0) || tau[i] > 1) throw std::invalid_argument("PhiFamily requires tau_i in (0, 1]");
        Theta t0 = theta[i].cBar() > 0 ? theta[i].normalizedCBar() : theta[i];
        levels_[i].push_back(t0);
        for (int l = 1; l <= maxLevel; ++l) levels_[i].push_back(aTheta(ks_, i, levels_[i].back()));
    }
}

double PhiFamily::fhatPsi(int i, int n, const std::vector<Particle>& g) const {
    const Domain dom = ks_.dom;
    const PsiMode mode = mode_;
    std::vector<ScalarFn> v(n, [dom, mode](const Point& x) { return psi(dom, x, mode); });
    return evalFhatComponent(ks_.dom, v, tau_[i], g, mode_);
}

double PhiFamily::component(int i, int mi, int q, const std::vector<Particle>& g) const {
    double first = 0;
    if (mi == 0) {
        if (q == 0) first = std::exp(-tau_[i] * bigPsi(ks_.dom, g, mode_));
    } else {
        for (const auto& c : enumerateC(mi, q)) {
            std::vector<ScalarFn> v;
            for (std::size_t l = 0; l < c.c.size(); ++l)
                for (int r = 0; r < c.c[l]; ++r) {
                    if (int(l) >= int(levels_[i].size())) throw std::out_of_range("PhiFamily: level not prepared");
                    const Theta* t = &levels_[i][l];
                    v.push_back([t](const Point& x) { return (*t)(x); });
                }
            first += weightC(c).convert_to<double>() * evalFhatComponent(ks_.dom, v, tau_[i], g, mode_);
        }
    }
    double second = 0;
    for (int k = 1; k <= q; ++k) {
        if (mi + k > int(g.size())) break;
        second += std::pow(tau_[i], k) * finiteDiffW(k, mi, q).convert_to<double>() * fhatPsi(i, mi + k, g);
    }
    return first + std::pow(ks_.c.cA, q) * second;
}

double PhiFamily::eval(OrderPair m, int q, const Configuration& g) const {
    double s = 0;
    for (int l = 0; l <= q; ++l)
        s += binomial(q, l) * component(0, m.m0, q - l, g.type[0]) * component(1, m.m1, l, g.type[1]);
    return s;
}

double PhiFamily::generator(OrderPair m, int q, const Configuration& g, double tol) const {
    const Domain& dom = ks_.dom;
    std::array<std::vector<double>, 2> base;
    for (int i = 0; i < 2; ++i)
        for (int l = 0; l <= q; ++l) base[i].push_back(component(i, m[i], l, g.type[i]));
    auto combine = [&](int i, const std::vector<double>& moved) {
        double s = 0;
        for (int l = 0; l <= q; ++l)
            s += i == 0 ? binomial(q, l) * moved[q - l] * base[1][l] : binomial(q, l) * base[0][q - l] * moved[l];
        return s;
    };
    const double phiNow = combine(0, base[0]);
    double total = 0;
    for (int i = 0; i < 2; ++i) {
        const auto opposite = g.points(1 - i);
        const JumpKernel& a = ks_.a[i];
        for (std::size_t j = 0; j < g.type[i].size(); ++j) {
            const Point x = g.type[i][j].x;
            std::vector<Particle> moved = g.type[i];
            auto integrand = [&](const Point& u) {
                double w = a.radial(dom.norm(u));
                if (w == 0.0) return 0.0;
                Point y = x;
                for (int k = 0; k < dom.d; ++k) y[k] += u[k];
                y = dom.wrap(y);
                double boltz = 1;
                for (const auto& z : opposite) boltz *= ks_.phi[i].boltzmann(dom.displacement(y, z));
                if (boltz == 0.0) return 0.0;
                moved[j].x = y;
                std::vector<double> comp(q + 1);
                for (int l = 0; l <= q; ++l) comp[l] = component(i, m[i], l, moved);
                return w * boltz * (combine(i, comp) - phiNow);
            };
            const double R = a.reach();
            if (dom.d == 1) {
                // Split at the kinks: kernel edge, and where ψ's centered distance folds (y ≡ 0 mod L).
                std::vector<double> cuts{-R, R, 0.0};
                for (int s = -4; s <= 4; ++s) {
                    double c = s * dom.L - x[0];
                    if (c > -R && c < R) cuts.push_back(c);
                    c = s * dom.L + 0.5 * dom.L - x[0];
                    if (c > -R && c < R) cuts.push_back(c);
                }
                std::sort(cuts.begin(), cuts.end());
                for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                    if (cuts[c + 1] - cuts[c] < 1e-15) continue;
                    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                        [&](double u) { return integrand(Point{u, 0, 0}); }, cuts[c], cuts[c + 1], 15, tol);
                }
            } else {
                using GL = boost::math::quadrature::gauss<double, 30>;
                std::function<double(int, Point)> rec = [&](int axis, Point u) -> double {
                    if (axis == dom.d) return integrand(u);
                    return GL::integrate([&](double s) { Point v = u; v[axis] = s; return rec(axis + 1, v); }, -R, R);
                };
                total += rec(0, Point{});
            }
        }
    }
    return total;
}

double PhiFamily::rho(double eps) const { return std::log1p(eps) / ks_.c.cA; }

double PhiFamily::localMajorant(OrderPair m, double eps, const Configuration& g) const {
    double prod = std::pow(1 + eps, m.total());
    for (int i = 0; i < 2; ++i) {
        double s = 0;
        double f = 1;  // (τε)^k / k!
        for (int k = 0; m[i] + k <= int(g.type[i].size()); ++k) {
            if (k > 0) f *= tau_[i] * eps / k;
            double fh = m[i] + k == 0 ? std::exp(-tau_[i] * bigPsi(ks_.dom, g.type[i], mode_))
                                      : fhatPsi(i, m[i] + k, g.type[i]);
            s += f * fh;
        }
        prod *= s;
    }
    return prod;
}

double PhiFamily::growthConstant(OrderPair m, double eps) const {
    double prod = std::pow(1 + eps, m.total());
    for (int i = 0; i < 2; ++i) {
        if (eps * std::exp(tau_[i]) >= 1) return std::numeric_limits<double>::infinity();
        // Σ_k ε^k/k! n^n e^{n(τ-1)}, n = m_i + k, times τ^{-m_i}; summed in log space.
        double s = 0;
        for (int k = 0; k < 4000; ++k) {
            const int n = m[i] + k;
            double logTerm = k * std::log(eps) - std::lgamma(k + 1.0) + (n > 0 ? n * std::log(double(n)) : 0.0) +
                             n * (tau_[i] - 1);
            double term = std::exp(logTerm);
            s += term;
            if (k > 10 && term < 1e-17 * s) break;
        }
        prod *= s * std::pow(tau_[i], -m[i]);
    }
    return prod;
}

double evalPhiQ(const PhiFamily& fam, OrderPair m, int q, const Configuration& g) { return fam.eval(m, q, g); }

}  // namespace wr
