#include "wr/geometry.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace wr {

Domain::Domain(int dim, double side) : d(dim), L(side) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension must be in 1..3");
    if (!(L > 0)) throw std::invalid_argument("box side must be positive");
}

Point Domain::wrap(Point p) const {
    for (int k = 0; k < d; ++k) {
        double v = std::fmod(p[k], L);
        if (v < 0) v += L;
        if (v >= L) v = 0.0;  // fmod of a tiny negative can round up to L
        p[k] = v;
    }
    for (int k = d; k < kMaxDim; ++k) p[k] = 0.0;
    return p;
}

Point Domain::displacement(const Point& a, const Point& b) const {
    Point u{};
    for (int k = 0; k < d; ++k) {
        double v = b[k] - a[k];
        v -= L * std::round(v / L);
        u[k] = v;
    }
    return u;
}

double Domain::norm(const Point& u) const {
    double s = 0;
    for (int k = 0; k < d; ++k) s += u[k] * u[k];
    return std::sqrt(s);
}

double Domain::dist(const Point& a, const Point& b) const { return norm(displacement(a, b)); }

Point Domain::center() const {
    Point c{};
    for (int k = 0; k < d; ++k) c[k] = 0.5 * L;
    return c;
}

double Domain::centeredDist(const Point& x) const { return dist(center(), x); }

double Domain::volume() const { return std::pow(L, d); }

std::string toString(PsiMode m) { return m == PsiMode::Flat ? "flat" : "centered"; }

PsiMode psiModeFromString(const std::string& s) {
    if (s == "flat") return PsiMode::Flat;
    if (s == "centered") return PsiMode::Centered;
    throw std::invalid_argument("unknown psi mode '" + s + "'");
}

double psi(const Domain& dom, const Point& x, PsiMode mode) {
    if (mode == PsiMode::Flat) return 1.0;
    double r = dom.centeredDist(x);
    return 1.0 / (1.0 + std::pow(r, dom.d + 1));
}

std::vector<Point> Configuration::points(int i) const {
    std::vector<Point> out;
    out.reserve(type[i].size());
    for (const auto& p : type[i]) out.push_back(p.x);
    return out;
}

bool Configuration::isSimple(const Domain& dom) const {
    std::vector<Point> all;
    all.reserve(size());
    for (int i = 0; i < 2; ++i)
        for (const auto& p : type[i]) all.push_back(dom.wrap(p.x));
    std::sort(all.begin(), all.end());
    return std::adjacent_find(all.begin(), all.end()) == all.end();
}

Configuration Configuration::fromPoints(const std::vector<Point>& p0, const std::vector<Point>& p1) {
    Configuration g;
    std::uint64_t id = 0;
    for (const auto& x : p0) g.type[0].push_back({id++, x});
    for (const auto& x : p1) g.type[1].push_back({id++, x});
    return g;
}

bool operator==(const Configuration& a, const Configuration& b) {
    for (int i = 0; i < 2; ++i) {
        if (a.type[i].size() != b.type[i].size()) return false;
        for (std::size_t j = 0; j < a.type[i].size(); ++j)
            if (a.type[i][j].id != b.type[i][j].id || a.type[i][j].x != b.type[i][j].x) return false;
    }
    return true;
}

double bigPsi(const Domain& dom, const std::vector<Particle>& g, PsiMode mode) {
    double s = 0;
    for (const auto& p : g) s += psi(dom, p.x, mode);
    return s;
}

double bigPsi(const Domain& dom, const Configuration& g, PsiMode mode) {
    return bigPsi(dom, g.type[0], mode) + bigPsi(dom, g.type[1], mode);
}

bool Box::contains(const Domain& dom, const Point& x) const {
    for (int k = 0; k < dom.d; ++k)
        if (x[k] < lo[k] || x[k] >= hi[k]) return false;
    return true;
}

double Box::volume(const Domain& dom) const {
    double v = 1;
    for (int k = 0; k < dom.d; ++k) v *= std::max(0.0, hi[k] - lo[k]);
    return v;
}

double fallingFactorial(std::size_t n, int k) {
    double r = 1;
    for (int j = 0; j < k; ++j) r *= static_cast<double>(n) - j;
    return std::max(r, 0.0);
}

std::uint64_t countQ(const Domain& dom, const Configuration& g, OrderPair m, const Box& box) {
    std::array<std::size_t, 2> inside{0, 0};
    for (int i = 0; i < 2; ++i)
        for (const auto& p : g.type[i])
            if (box.contains(dom, p.x)) ++inside[i];
    double tuples = std::pow(double(inside[0]), m.m0) * std::pow(double(inside[1]), m.m1);
    if (tuples > kTupleBudget) throw BudgetError("countQ: tuple budget exceeded");
    return static_cast<std::uint64_t>(fallingFactorial(inside[0], m.m0) * fallingFactorial(inside[1], m.m1));
}

double periodicGaussian(const Domain& dom, const Point& u, double var) {
    // Images beyond this many box lengths contribute below 1e-17 relative.
    const double reach = std::sqrt(2.0 * var * 40.0);
    const int K = static_cast<int>(std::ceil(reach / dom.L));
    double total = 1.0;
    Point v = u;
    for (int k = 0; k < dom.d; ++k) {
        double s = 0;
        for (int j = -K; j <= K; ++j) {
            double z = v[k] + j * dom.L;
            s += std::exp(-z * z / (2 * var));
        }
        total *= s;
    }
    return total;
}

std::vector<Point> denseSamples(const Domain& dom) {
    const int n = dom.d == 1 ? 8192 : (dom.d == 2 ? 256 : 48);
    std::size_t total = 1;
    for (int k = 0; k < dom.d; ++k) total *= n;
    std::vector<Point> pts(total);
    const double h = dom.L / n;
    for (std::size_t j = 0; j < total; ++j) {
        std::size_t r = j;
        Point p{};
        for (int k = dom.d - 1; k >= 0; --k) {
            p[k] = (r % n) * h;
            r /= n;
        }
        pts[j] = p;
    }
    // Always include the box center, where ψ peaks.
    pts.push_back(dom.center());
    return pts;
}

Theta Theta::zero(const Domain& dom, PsiMode mode) { return mixture(dom, mode, dom.center(), {}); }

Theta Theta::gaussianBump(const Domain& dom, PsiMode mode, double amp, double width, Point center) {
    Theta t;
    t.dom_ = dom;
    t.mode_ = mode;
    t.family_ = ThetaFamily::GaussianBump;
    t.amp_ = amp;
    t.width_ = width;
    t.center_ = dom.wrap(center);
    t.terms_ = {{amp, width * width}};
    t.finalize();
    return t;
}

Theta Theta::mixture(const Domain& dom, PsiMode mode, Point center, std::vector<Term> terms) {
    Theta t;
    t.dom_ = dom;
    t.mode_ = mode;
    t.family_ = ThetaFamily::GaussianMixture;
    t.center_ = dom.wrap(center);
    t.amp_ = 1.0;
    t.terms_ = std::move(terms);
    t.finalize();
    return t;
}

Theta Theta::cosineBump(const Domain& dom, PsiMode mode, double amp, double radius, Point center) {
    if (!(radius > 0) || 2 * radius >= dom.L) throw std::invalid_argument("cosine bump radius must satisfy 0 < 2R < L");
    Theta t;
    t.dom_ = dom;
    t.mode_ = mode;
    t.family_ = ThetaFamily::CosineBump;
    t.amp_ = amp;
    t.width_ = radius;
    t.center_ = dom.wrap(center);
    t.finalize();
    return t;
}

Theta Theta::scaledPsi(const Domain& dom, PsiMode mode, double amp) {
    Theta t;
    t.dom_ = dom;
    t.mode_ = mode;
    t.family_ = ThetaFamily::ScaledPsi;
    t.amp_ = amp;
    t.center_ = dom.center();
    t.finalize();
    return t;
}

Theta Theta::tabulated(const Domain& dom, PsiMode mode, int n, std::vector<double> values) {
    std::size_t total = 1;
    for (int k = 0; k < dom.d; ++k) total *= n;
    if (values.size() != total) throw std::invalid_argument("tabulated theta: wrong value count");
    Theta t;
    t.dom_ = dom;
    t.mode_ = mode;
    t.family_ = ThetaFamily::Tabulated;
    t.amp_ = 1.0;
    t.tabN_ = n;
    t.tab_ = std::move(values);
    for (double& v : t.tab_) v = std::max(v, 0.0);
    t.finalize();
    return t;
}

double Theta::evalRaw(const Point& x) const {
    switch (family_) {
        case ThetaFamily::GaussianBump:
        case ThetaFamily::GaussianMixture: {
            Point u = dom_.displacement(center_, x);
            double s = 0;
            for (const auto& t : terms_) s += t.coef * periodicGaussian(dom_, u, t.var);
            return s;
        }
        case ThetaFamily::CosineBump: {
            double r = dom_.dist(center_, x);
            if (r >= width_) return 0.0;
            return amp_ * 0.5 * (1.0 + std::cos(std::numbers::pi * r / width_));
        }
        case ThetaFamily::ScaledPsi:
            return amp_ * psi(dom_, x, mode_);
        case ThetaFamily::Tabulated: {
            const double h = dom_.L / tabN_;
            std::array<int, kMaxDim> i0{};
            std::array<double, kMaxDim> f{};
            Point w = dom_.wrap(x);
            for (int k = 0; k < dom_.d; ++k) {
                double s = w[k] / h;
                int j = static_cast<int>(std::floor(s));
                f[k] = s - j;
                i0[k] = ((j % tabN_) + tabN_) % tabN_;
            }
            double v = 0;
            for (int corner = 0; corner < (1 << dom_.d); ++corner) {
                double wt = 1;
                std::size_t idx = 0;
                for (int k = 0; k < dom_.d; ++k) {
                    int bit = (corner >> k) & 1;
                    wt *= bit ? f[k] : 1 - f[k];
                    idx = idx * tabN_ + (i0[k] + bit) % tabN_;
                }
                v += wt * tab_[idx];
            }
            return v;
        }
    }
    return 0.0;
}

double Theta::operator()(const Point& x) const { return evalRaw(x); }

void Theta::finalize() {
    // L1 norm: closed form for gaussians (periodization preserves mass), quadrature otherwise.
    if (family_ == ThetaFamily::GaussianBump || family_ == ThetaFamily::GaussianMixture) {
        l1_ = 0;
        for (const auto& t : terms_) l1_ += t.coef * std::pow(2 * std::numbers::pi * t.var, 0.5 * dom_.d);
    } else if (dom_.d == 1) {
        auto f = [this](double s) { return evalRaw(Point{s, 0, 0}); };
        l1_ = 0;
        const int panels = 16;
        for (int p = 0; p < panels; ++p) {
            double a = dom_.L * p / panels, b = dom_.L * (p + 1) / panels;
            l1_ += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-13);
        }
    } else {
        auto pts = denseSamples(dom_);
        pts.pop_back();
        double s = 0;
        for (const auto& p : pts) s += evalRaw(p);
        l1_ = s * dom_.volume() / pts.size();
    }
    double c = 0;
    for (const auto& p : denseSamples(dom_)) c = std::max(c, std::log1p(evalRaw(p)) / psi(dom_, p, mode_));
    c_ = c;
    cbar_ = std::expm1(c_);
}

Theta Theta::scaled(double f) const {
    Theta t = *this;
    t.amp_ *= f;
    for (auto& term : t.terms_) term.coef *= f;
    for (auto& v : t.tab_) v *= f;
    t.finalize();
    return t;
}

Theta Theta::normalizedCBar() const {
    if (cbar_ <= 0) throw std::invalid_argument("cannot normalize the zero test function");
    // c̄ is increasing in the amplitude; bracket and bisect.
    double lo = 0, hi = 1;
    while (scaled(hi).cBar() < 1) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (scaled(mid).cBar() < 1 ? lo : hi) = mid;
    }
    return scaled(lo);
}

double Theta::boundViolation() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : denseSamples(dom_)) worst = std::max(worst, evalRaw(p) - cbar_ * psi(dom_, p, mode_));
    return worst;
}

std::string Theta::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    switch (family_) {
        case ThetaFamily::GaussianBump: os << "gaussian-bump amp=" << amp_ << " width=" << width_; break;
        case ThetaFamily::CosineBump: os << "cosine-bump amp=" << amp_ << " radius=" << width_; break;
        case ThetaFamily::ScaledPsi: os << "scaled-psi amp=" << amp_; break;
        case ThetaFamily::GaussianMixture: os << "gaussian-mixture terms=" << terms_.size(); break;
        case ThetaFamily::Tabulated: os << "tabulated n=" << tabN_; break;
    }
    return os.str();
}

double evalFtilde(const Domain& dom, const Theta& th0, const Theta& th1, double tau0, double tau1,
                  const Configuration& g, PsiMode mode) {
    if (tau0 < th0.cTheta() || tau1 < th1.cTheta())
        throw std::invalid_argument("evalFtilde requires tau_i >= c_theta_i");
    double v = 1;
    for (const auto& p : g.type[0]) v *= (1 + th0(p.x)) * std::exp(-tau0 * psi(dom, p.x, mode));
    for (const auto& p : g.type[1]) v *= (1 + th1(p.x)) * std::exp(-tau1 * psi(dom, p.x, mode));
    return v;
}

double evalFexp(const Theta& th0, const Theta& th1, const Configuration& g) {
    double v = 1;
    for (const auto& p : g.type[0]) v *= 1 + th0(p.x);
    for (const auto& p : g.type[1]) v *= 1 + th1(p.x);
    return v;
}

namespace {

double orderedTupleSum(const std::vector<std::vector<double>>& u, std::size_t slot, std::vector<char>& used) {
    if (slot == u.size()) return 1.0;
    double s = 0;
    const auto& row = u[slot];
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (used[j] || row[j] == 0.0) continue;
        used[j] = 1;
        s += row[j] * orderedTupleSum(u, slot + 1, used);
        used[j] = 0;
    }
    return s;
}

}  // namespace

double evalFhatComponent(const Domain& dom, const std::vector<ScalarFn>& v, double tau,
                         const std::vector<Particle>& g, PsiMode mode) {
    if (!(tau > 0)) throw std::invalid_argument("evalFhat requires tau > 0");
    const std::size_t m = v.size();
    if (m > g.size()) return 0.0;
    if (std::pow(double(g.size()), double(m)) > kTupleBudget) throw BudgetError("evalFhat: tuple budget exceeded");
    // exp(-τΨ(γ∖x)) = exp(-τΨ(γ)) Π exp(τψ(x_j)): fold the boost into u_j = v_j e^{τψ}.
    std::vector<double> ps(g.size());
    double Psi = 0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        ps[j] = psi(dom, g[j].x, mode);
        Psi += ps[j];
    }
    std::vector<std::vector<double>> u(m, std::vector<double>(g.size()));
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t j = 0; j < g.size(); ++j) u[s][j] = v[s](g[j].x) * std::exp(tau * ps[j]);
    std::vector<char> used(g.size(), 0);
    return std::exp(-tau * Psi) * orderedTupleSum(u, 0, used);
}

double evalFhat(const Domain& dom, OrderPair m, std::array<double, 2> tau,
                const std::array<std::vector<ScalarFn>, 2>& v, const Configuration& g, PsiMode mode) {
    if (!(tau[0] > 0) || !(tau[1] > 0)) throw std::invalid_argument("evalFhat requires tau_i > 0");
    if (int(v[0].size()) != m.m0 || int(v[1].size()) != m.m1)
        throw std::invalid_argument("evalFhat: |v_i| must equal m_i");
    if (m.total() == 0) return 0.0;
    return evalFhatComponent(dom, v[0], tau[0], g.type[0], mode) *
           evalFhatComponent(dom, v[1], tau[1], g.type[1], mode);
}

std::vector<ScalarFn> asFns(const std::vector<Theta>& th) {
    std::vector<ScalarFn> out;
    for (const auto& t : th) out.push_back([t](const Point& x) { return t(x); });
    return out;
}

namespace {

double tupleSumFn(const QuasiObservableFn::Fn& f, const std::array<std::vector<Point>, 2>& pts, OrderPair m,
                  std::vector<Point>& x0, std::vector<Point>& x1, std::array<std::vector<char>, 2>& used) {
    int type = int(x0.size()) < m.m0 ? 0 : (int(x1.size()) < m.m1 ? 1 : -1);
    if (type < 0) return f(x0, x1);
    auto& dst = type == 0 ? x0 : x1;
    double s = 0;
    for (std::size_t j = 0; j < pts[type].size(); ++j) {
        if (used[type][j]) continue;
        used[type][j] = 1;
        dst.push_back(pts[type][j]);
        s += tupleSumFn(f, pts, m, x0, x1, used);
        dst.pop_back();
        used[type][j] = 0;
    }
    return s;
}

}  // namespace

double kTransform(const QuasiObservableFn& G, const Configuration& g) {
    std::array<std::vector<Point>, 2> pts{g.points(0), g.points(1)};
    double total = 0;
    for (const auto& [m, f] : G.parts) {
        if (m.m0 > int(pts[0].size()) || m.m1 > int(pts[1].size())) continue;
        double tuples = std::pow(double(pts[0].size()), m.m0) * std::pow(double(pts[1].size()), m.m1);
        if (tuples > kTupleBudget) throw BudgetError("kTransform: tuple budget exceeded");
        std::vector<Point> x0, x1;
        std::array<std::vector<char>, 2> used{std::vector<char>(pts[0].size(), 0), std::vector<char>(pts[1].size(), 0)};
        double fact = std::tgamma(m.m0 + 1.0) * std::tgamma(m.m1 + 1.0);
        total += tupleSumFn(f, pts, m, x0, x1, used) / fact;
    }
    return total;
}

PathMetric::PathMetric(const Domain& dom, PsiMode mode) : dom_(dom), mode_(mode) {
    // Each element is scaled so that sup|g| + Lip(g) ≤ 1.
    const double w1 = 2 * std::numbers::pi / dom.L;
    const double w2 = 2 * w1;
    const double wd = w1 * std::sqrt(double(dom.d));
    const double s = dom.L / 8;
    bumpVar_ = s * s;
    const double bumpLip = 1.0 / (s * std::sqrt(std::exp(1.0)));
    scale_ = {1.0,
              1.0 / (1 + w1), 1.0 / (1 + w1),
              1.0 / (1 + w2), 1.0 / (1 + w2),
              1.0 / (1 + wd), 1.0 / (1 + wd),
              1.0 / (1 + bumpLip)};
}

double PathMetric::dictionaryValue(int j, const Point& x) const {
    const double w1 = 2 * std::numbers::pi / dom_.L;
    double diag = 0;
    for (int k = 0; k < dom_.d; ++k) diag += x[k];
    switch (j) {
        case 0: return scale_[0];
        case 1: return scale_[1] * std::cos(w1 * x[0]);
        case 2: return scale_[2] * std::sin(w1 * x[0]);
        case 3: return scale_[3] * std::cos(2 * w1 * x[0]);
        case 4: return scale_[4] * std::sin(2 * w1 * x[0]);
        case 5: return scale_[5] * std::cos(w1 * diag);
        case 6: return scale_[6] * std::sin(w1 * diag);
        default: {
            double r = dom_.centeredDist(x);
            return scale_[7] * std::exp(-r * r / (2 * bumpVar_));
        }
    }
}

std::array<double, 8> PathMetric::moments(const std::vector<Particle>& g) const {
    std::array<double, 8> m{};
    for (const auto& p : g) {
        double w = psi(dom_, p.x, mode_);
        for (int j = 0; j < 8; ++j) m[j] += dictionaryValue(j, p.x) * w;
    }
    return m;
}

double PathMetric::operator()(const Configuration& a, const Configuration& b) const {
    double total = 0;
    for (int i = 0; i < 2; ++i) {
        auto ma = moments(a.type[i]);
        auto mb = moments(b.type[i]);
        double sup = 0;
        for (int j = 0; j < 8; ++j) sup = std::max(sup, std::abs(ma[j] - mb[j]));
        total += std::min(1.0, sup);
    }
    return total;
}

double pathMetric(const Domain& dom, const Configuration& a, const Configuration& b, PsiMode mode) {
    return PathMetric(dom, mode)(a, b);
}

void writeConfiguration(std::ostream& os, const Domain& dom, PsiMode mode, const Configuration& g) {
    auto old = os.precision(17);
    os << "# two-type configuration\n";
    os << "d " << dom.d << " L " << dom.L << " psi " << toString(mode) << "\n";
    for (int i = 0; i < 2; ++i)
        for (const auto& p : g.type[i]) {
            os << i << ' ' << p.id;
            for (int k = 0; k < dom.d; ++k) os << ' ' << p.x[k];
            os << '\n';
        }
    os.precision(old);
}

Configuration readConfiguration(std::istream& is, Domain* domOut, PsiMode* modeOut) {
    std::string line;
    Domain dom;
    PsiMode mode = PsiMode::Centered;
    bool header = false;
    Configuration g;
    int lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (!header) {
            std::string kd, kl, kp, ms;
            int d;
            double L;
            if (!(ls >> kd >> d >> kl >> L >> kp >> ms) || kd != "d" || kl != "L" || kp != "psi")
                throw std::runtime_error("configuration header malformed at line " + std::to_string(lineNo));
            dom = Domain(d, L);
            mode = psiModeFromString(ms);
            header = true;
            continue;
        }
        int type;
        Particle p;
        if (!(ls >> type >> p.id) || (type != 0 && type != 1))
            throw std::runtime_error("bad particle record at line " + std::to_string(lineNo));
        for (int k = 0; k < dom.d; ++k)
            if (!(ls >> p.x[k])) throw std::runtime_error("missing coordinate at line " + std::to_string(lineNo));
        g.type[type].push_back(p);
    }
    if (!header) throw std::runtime_error("configuration header missing");
    if (domOut) *domOut = dom;
    if (modeOut) *modeOut = mode;
    return g;
}

}  // namespace wr
