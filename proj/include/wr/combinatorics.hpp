#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <vector>

#include "wr/geometry.hpp"
#include "wr/kernels.hpp"

namespace wr {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

BigInt factorialBig(int n);
BigInt binomialBig(int n, int k);
BigInt powBig(const BigInt& base, unsigned e);

// Stirling numbers of the second kind, 0 ≤ l ≤ p ≤ 30.
BigInt stirling2(int p, int l);

// Dense polynomial with exact integer coefficients, c[j] multiplies x^j.
struct Polynomial {
    std::vector<BigInt> c;

    Polynomial() = default;
    explicit Polynomial(std::vector<BigInt> coeffs);
    int degree() const { return int(c.size()) - 1; }
    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(const BigInt& s) const;
    // p(λx) as a polynomial in x.
    Polynomial dilate(const BigInt& lambda) const;
    Rational operator()(const Rational& x) const;
    bool operator==(const Polynomial& o) const;
    std::string str() const;

private:
    void trim();
};

// T_n(x) = Σ_l S(n,l) x^l.
Polynomial touchard(int n);
Rational touchard(int n, const Rational& x);
double touchardValue(int n, double x);

// Falling factorial (x)_l as a polynomial.
Polynomial fallingPolynomial(int l);

struct SequenceC {
    int p = 0;
    int q = 0;
    std::vector<int> c;  // c[0..q]
    bool valid() const;
};

std::vector<SequenceC> enumerateC(int p, int q);
BigInt weightC(const SequenceC& s);
// w_k(p,q) = (1/k!) Σ_l (-1)^{k-l} C(k,l) (p+l)^q.
BigInt finiteDiffW(int k, int p, int q);

struct IdentityCheck {
    std::string name;
    bool pass;
    std::string detail;
};

// Exact-arithmetic battery of the combinatorial identities.
std::vector<IdentityCheck> verifyIdentities();

// Comparison functions Φ^m_{τ,q} built from θ^l = a_i θ^{l-1}, with c̄_θ normalized to 1.
class PhiFamily {
public:
    PhiFamily(const KernelSet& ks, const std::array<Theta, 2>& theta, std::array<double, 2> tau, int maxLevel,
              PsiMode mode = PsiMode::Centered);

    const Theta& theta(int i, int level) const { return levels_[i].at(level); }
    const KernelSet& kernels() const { return ks_; }
    std::array<double, 2> tau() const { return tau_; }
    PsiMode mode() const { return mode_; }

    // Per-type function Φ^{m_i}_{τ_i,q}(θ_i | γ_i).
    double component(int i, int mi, int q, const std::vector<Particle>& g) const;
    // Φ^m_{τ,q}(θ | γ) = Σ_l C(q,l) Φ^{m0}_{q-l}(γ0) Φ^{m1}_l(γ1).
    double eval(OrderPair m, int q, const Configuration& g) const;
    // (LΦ^m_q)(γ) by adaptive quadrature over the jump destination (σ = 0 dynamics).
    double generator(OrderPair m, int q, const Configuration& g, double tol = 1e-10) const;

    // Configuration-specific majorant (1+ε)^{|m|} Π_i Σ_k (τ_i ε)^k/k! F̂^{m_i+k}(γ_i).
    double localMajorant(OrderPair m, double eps, const Configuration& g) const;
    // Uniform constant C̄ using sup F̂^n ≤ (n/τ)^n e^{n(τ-1)}; infinite when ε e^{τ_i} ≥ 1.
    double growthConstant(OrderPair m, double eps) const;
    double rho(double eps) const;

private:
    double fhatPsi(int i, int n, const std::vector<Particle>& g) const;

    KernelSet ks_;
    std::array<double, 2> tau_;
    PsiMode mode_;
    std::array<std::vector<Theta>, 2> levels_;
};

double evalPhiQ(const PhiFamily& fam, OrderPair m, int q, const Configuration& g);

}  // namespace wr
