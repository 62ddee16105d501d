#pragma once

#include <array>
#include <string>
#include <vector>

#include "wr/geometry.hpp"
#include "wr/grid.hpp"
#include "wr/rng.hpp"

namespace wr {

enum class JumpFamily { Gaussian, Exponential, TopHat };

// Radial jump kernel a(x) = mass * (normalized profile), periodized on the torus.
// scale: gaussian standard deviation per axis, exponential decay length, or top-hat radius.
class JumpKernel {
public:
    JumpKernel() = default;
    JumpKernel(const Domain& dom, JumpFamily family, double mass, double scale);

    JumpFamily family() const { return family_; }
    double mass() const { return moments_[0]; }
    double scale() const { return scale_; }
    // ā^(l) = ∫|x|^l a(x) dx for l = 0..d+1, by adaptive radial quadrature.
    const std::vector<double>& moments() const { return moments_; }
    double moment(int l) const { return moments_.at(l); }
    // Closed-form moment, for cross-checks.
    double exactMoment(int l) const;
    double supNorm() const;
    double radial(double r) const;
    // Periodized density at displacement u.
    double operator()(const Point& u) const;
    // Mass of the periodized kernel over the grid cell centered at displacement u.
    double cellMass(const Point& u, double h) const;
    // Fourier transform â(ξ) = ∫ a(x) e^{-iξ·x} dx of the radial profile at |ξ| = xi.
    double fourier(double xi) const;
    // Radius beyond which the kernel's mass tail is below 1e-13.
    double reach() const;
    Point sampleDisplacement(CounterRng& rng) const;
    std::string describe() const;

private:
    Domain dom_;
    JumpFamily family_ = JumpFamily::Gaussian;
    double scale_ = 1.0;
    double norm_ = 0.0;
    std::vector<double> moments_;
};

enum class RepulsionFamily { Gaussian, Exponential, HardCore, Zero };

// φ(x) = amp * profile(|x|) (hard core: +∞ inside radius `scale`).
class RepulsionKernel {
public:
    RepulsionKernel() = default;
    RepulsionKernel(const Domain& dom, RepulsionFamily family, double amp, double scale);

    RepulsionFamily family() const { return family_; }
    double amp() const { return amp_; }
    double scale() const { return scale_; }
    double phiBar() const { return phiBar_; }
    double exactPhiBar() const;
    double cutoff() const { return cutoff_; }
    bool isZero() const { return family_ == RepulsionFamily::Zero || amp_ == 0.0; }
    bool isHardCore() const { return family_ == RepulsionFamily::HardCore; }
    double radial(double r) const;
    // Periodized value; may be +infinity.
    double operator()(const Point& u) const;
    // exp(-φ(u)), exactly 0 inside a hard core.
    double boltzmann(const Point& u) const;
    std::string describe() const;

private:
    Domain dom_;
    RepulsionFamily family_ = RepulsionFamily::Zero;
    double amp_ = 0.0;
    double scale_ = 1.0;
    double phiBar_ = 0.0;
    double cutoff_ = 0.0;
};

struct KernelConstants {
    double alpha = 0;                     // max_i ā_i^(0)
    double aNorm = 0;                     // max_i sup a_i
    double phiBar = 0;                    // max_i ∫(1 - e^{-φ_i})
    std::array<double, 2> alphaBarI{};    // ā_i^(0) + Σ_l C(d+1,l) ā_i^(l)
    double cA = 0;                        // max ᾱ_i + 1
    double alphaBar = 0;                  // max_i ∫ a_i h, h = Σ_{l≥1} C(d+1,l)|x|^l
};

struct KernelSet {
    Domain dom;
    std::array<JumpKernel, 2> a;
    std::array<RepulsionKernel, 2> phi;
    KernelConstants c;

    KernelSet() = default;
    KernelSet(const Domain& dom, std::array<JumpKernel, 2> a, std::array<RepulsionKernel, 2> phi);
    std::string describe() const;
};

KernelConstants computeConstants(const Domain& dom, const std::array<JumpKernel, 2>& a,
                                 const std::array<RepulsionKernel, 2>& phi);

double binomial(int n, int k);

// ψ_σ(x) = 1/(1 + σ r^{d+1}), r the centered distance.
double psiSigma(const Domain& dom, const Point& x, double sigma);

// a_i(x-y) ψ_σ(x) exp(-Σ_z φ_i(z - y)) for a type-i particle at x jumping to y.
double jumpRate(const KernelSet& ks, int i, const Point& x, const Point& y, const std::vector<Point>& opposite,
                double sigma);

// Grid samples of a_i * θ, plus a check of the bound a_i*θ ≤ c̄_θ ᾱ_i ψ.
struct ConvolutionResult {
    Theta conv;               // a_i * θ
    double worstViolation;    // max over grid of (a_i*θ) - c̄_θ ᾱ_i ψ; ≤ 0 expected
};

ConvolutionResult convolveTheta(const KernelSet& ks, int i, const Theta& theta, int n = 0);

// θ^l = a_i*θ^{l-1} + θ^{l-1}; closed form for gaussian kernels and gaussian-type θ.
Theta aTheta(const KernelSet& ks, int i, const Theta& theta);

double timeRadius(const KernelConstants& c, double theta, double thetaPrime);

struct TStar {
    double delta;
    double T;
};
TStar tStar(const KernelConstants& c, double theta);

double tSigma(const KernelConstants& c, double beta, double betaPrime, double sigma);

}  // namespace wr
