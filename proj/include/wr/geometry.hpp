#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wr {

constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;

// Thrown when a tuple enumeration would exceed the configured budget.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kTupleBudget = 1e7;

struct Domain {
    int d = 1;
    double L = 10.0;

    Domain() = default;
    Domain(int dim, double side);

    Point wrap(Point p) const;
    // Minimum-image displacement pointing from a to b.
    Point displacement(const Point& a, const Point& b) const;
    double dist(const Point& a, const Point& b) const;
    double norm(const Point& u) const;
    Point center() const;
    double centeredDist(const Point& x) const;
    double volume() const;
};

enum class PsiMode { Centered, Flat };

std::string toString(PsiMode m);
PsiMode psiModeFromString(const std::string& s);

// Tempered weight 1/(1 + r^{d+1}), r the centered distance; identically 1 in flat mode.
double psi(const Domain& dom, const Point& x, PsiMode mode = PsiMode::Centered);

struct Particle {
    std::uint64_t id = 0;
    Point x{};
};

struct Configuration {
    std::array<std::vector<Particle>, 2> type;

    std::size_t size() const { return type[0].size() + type[1].size(); }
    bool empty() const { return size() == 0; }
    std::vector<Point> points(int i) const;
    // Exact check: no two points (of either type) share coordinates.
    bool isSimple(const Domain& dom) const;
    static Configuration fromPoints(const std::vector<Point>& p0, const std::vector<Point>& p1);
};

bool operator==(const Configuration& a, const Configuration& b);

double bigPsi(const Domain& dom, const Configuration& g, PsiMode mode = PsiMode::Centered);
double bigPsi(const Domain& dom, const std::vector<Particle>& g, PsiMode mode = PsiMode::Centered);

struct OrderPair {
    int m0 = 0;
    int m1 = 0;
    int total() const { return m0 + m1; }
    int operator[](int i) const { return i == 0 ? m0 : m1; }
    auto operator<=>(const OrderPair&) const = default;
};

// Axis-aligned box [lo, hi) in domain coordinates (no wrapping across the seam).
struct Box {
    Point lo{};
    Point hi{};
    bool contains(const Domain& dom, const Point& x) const;
    double volume(const Domain& dom) const;
};

double fallingFactorial(std::size_t n, int k);

// Number of ordered tuples of distinct particles (m0 of type 0, m1 of type 1) inside the box.
std::uint64_t countQ(const Domain& dom, const Configuration& g, OrderPair m, const Box& box);

enum class ThetaFamily { GaussianBump, CosineBump, ScaledPsi, GaussianMixture, Tabulated };

// Nonnegative test function θ on the torus with cached ⟨θ⟩, c_θ and c̄_θ.
class Theta {
public:
    struct Term {
        double coef;
        double var;
    };

    Theta() = default;
    static Theta zero(const Domain& dom, PsiMode mode);
    static Theta gaussianBump(const Domain& dom, PsiMode mode, double amp, double width, Point center);
    static Theta cosineBump(const Domain& dom, PsiMode mode, double amp, double radius, Point center);
    static Theta scaledPsi(const Domain& dom, PsiMode mode, double amp);
    static Theta mixture(const Domain& dom, PsiMode mode, Point center, std::vector<Term> terms);
    // Periodic multilinear interpolation of values on an n^d node grid.
    static Theta tabulated(const Domain& dom, PsiMode mode, int n, std::vector<double> values);

    double operator()(const Point& x) const;
    double l1() const { return l1_; }
    double cTheta() const { return c_; }
    double cBar() const { return cbar_; }
    ThetaFamily family() const { return family_; }
    const Domain& domain() const { return dom_; }
    PsiMode psiMode() const { return mode_; }
    const Point& center() const { return center_; }
    const std::vector<Term>& terms() const { return terms_; }
    std::string describe() const;

    Theta scaled(double f) const;
    // Rescales the amplitude so that c̄_θ = 1.
    Theta normalizedCBar() const;
    // Largest violation of θ ≤ c̄_θ ψ over the dense sample grid (≤ 0 when satisfied).
    double boundViolation() const;

private:
    void finalize();
    double evalRaw(const Point& x) const;

    Domain dom_;
    PsiMode mode_ = PsiMode::Centered;
    ThetaFamily family_ = ThetaFamily::GaussianMixture;
    double amp_ = 0.0;
    double width_ = 1.0;
    Point center_{};
    std::vector<Term> terms_;
    int tabN_ = 0;
    std::vector<double> tab_;
    double l1_ = 0.0;
    double c_ = 0.0;
    double cbar_ = 0.0;
};

// Periodized isotropic gaussian exp(-|u|^2/(2 var)) on the torus.
double periodicGaussian(const Domain& dom, const Point& u, double var);

// Dense sample grid used for sup-type constants.
std::vector<Point> denseSamples(const Domain& dom);

double evalFtilde(const Domain& dom, const Theta& th0, const Theta& th1, double tau0, double tau1,
                  const Configuration& g, PsiMode mode = PsiMode::Centered);

double evalFexp(const Theta& th0, const Theta& th1, const Configuration& g);

using ScalarFn = std::function<double(const Point&)>;

// Per-type factor of F̂: ordered distinct tuples of v's times exp(-τ Ψ(γ_i \ x)).
double evalFhatComponent(const Domain& dom, const std::vector<ScalarFn>& v, double tau,
                         const std::vector<Particle>& g, PsiMode mode = PsiMode::Centered);

double evalFhat(const Domain& dom, OrderPair m, std::array<double, 2> tau,
                const std::array<std::vector<ScalarFn>, 2>& v, const Configuration& g,
                PsiMode mode = PsiMode::Centered);

std::vector<ScalarFn> asFns(const std::vector<Theta>& th);

// Quasi-observable given by callables per order; used where G is known analytically.
struct QuasiObservableFn {
    using Fn = std::function<double(const std::vector<Point>&, const std::vector<Point>&)>;
    std::map<OrderPair, Fn> parts;
};

double kTransform(const QuasiObservableFn& G, const Configuration& g);

// Dictionary surrogate of the bounded-Lipschitz path metric.
class PathMetric {
public:
    PathMetric(const Domain& dom, PsiMode mode);
    double operator()(const Configuration& a, const Configuration& b) const;
    std::array<double, 8> moments(const std::vector<Particle>& g) const;
    std::size_t size() const { return 8; }
    double dictionaryValue(int j, const Point& x) const;

private:
    Domain dom_;
    PsiMode mode_;
    std::array<double, 8> scale_{};
    double bumpVar_ = 1.0;
};

double pathMetric(const Domain& dom, const Configuration& a, const Configuration& b,
                  PsiMode mode = PsiMode::Centered);

void writeConfiguration(std::ostream& os, const Domain& dom, PsiMode mode, const Configuration& g);
Configuration readConfiguration(std::istream& is, Domain* dom = nullptr, PsiMode* mode = nullptr);

}  // namespace wr
