#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "wr/combinatorics.hpp"
#include "wr/geometry.hpp"
#include "wr/kernels.hpp"
#include "wr/simulator.hpp"

namespace wr {

struct EstimateWithError {
    double value = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Pairwise-tree sum; the reduction order depends only on the length.
double pairwiseSum(const double* x, std::size_t n);
EstimateWithError meanWithError(const std::vector<double>& samples);

// Evaluates f on every trace in parallel; the result is ordered by path.
std::vector<double> perPath(const std::vector<EventTrace>& traces, const std::function<double(const EventTrace&)>& f,
                            int workers = 0);

// e^{ϑ0 + αt}: the type envelope of the evolving state.
double typeEnvelope(double theta0, double alpha, double t);

// Σ over ordered tuples of distinct points of Π θ0(x_j) Π θ1(y_j).
double orderedProductSum(const Configuration& g, OrderPair m, const Theta& th0, const Theta& th1);

// χ^(m)(θ0^{⊗m0} ⊗ θ1^{⊗m1}) estimated at time t.
EstimateWithError empiricalChi(const std::vector<EventTrace>& traces, double t, OrderPair m, const Theta& th0,
                               const Theta& th1);

struct BoundRow {
    double parameter = 0.0;  // n for moments, β for exponential moments
    EstimateWithError estimate;
    double bound = 0.0;
    bool pass = false;
};

struct BoundReport {
    std::vector<BoundRow> rows;
    bool pass() const;
};

// Number of particles of both types inside the box.
std::size_t countIn(const Domain& dom, const Configuration& g, const Box& box);

// μ(N_Λ^n) against T_n(2κ|Λ|), n = 0..nMax; a row passes iff estimate - 3 SE ≤ bound.
BoundReport momentBoundCheck(const std::vector<EventTrace>& traces, double t, const Box& box, int nMax, double kappa);

// ∫ ψ over the torus.
double psiIntegral(const Domain& dom, PsiMode mode = PsiMode::Centered);
// E[e^{βΨ}] for a two-type Poisson law of intensity κ per type: exp(2κ ∫(e^{βψ} - 1)).
double poissonExpMoment(const Domain& dom, double kappa, double beta, PsiMode mode = PsiMode::Centered);

// E[e^{βΨ(X_t)}] against exp(2κ⟨ψ⟩(e^β - 1)).
BoundReport expMomentCheck(const std::vector<EventTrace>& traces, double t, const std::vector<double>& betas,
                           double kappa, PsiMode mode = PsiMode::Centered);

// Test function F with its generator image (LF)(γ); quadErr receives the quadrature error estimate.
struct TestFunction {
    std::string name;
    std::function<double(const Configuration&)> F;
    std::function<double(const Configuration&, double* quadErr)> LF;
};

// F(γ) = Π_{x∈γ0} f0(x) Π_{y∈γ1} f1(y), f_i > 0; LF via quadrature over the jump destination.
TestFunction productTest(const KernelSet& ks, double sigma, ScalarFn f0, ScalarFn f1, std::string name);
// F̃(γ) = Π (1+θ_i(x)) e^{-τ_i ψ(x)}.
TestFunction ftildeTest(const KernelSet& ks, double sigma, const Theta& th0, const Theta& th1, double tau0,
                        double tau1, PsiMode mode = PsiMode::Centered);
// F̂^m with m_i ≤ 2, evaluated through running sums so that a single move updates in O(1).
TestFunction fhatTest(const KernelSet& ks, double sigma, OrderPair m, std::array<double, 2> tau,
                      const std::array<std::vector<Theta>, 2>& v, PsiMode mode = PsiMode::Centered);
// Φ^m_{τ,q} with the family's own generator (σ = 0 dynamics only).
TestFunction phiTest(const PhiFamily& fam, OrderPair m, int q);

struct MartingaleReport {
    std::string name;
    double t1 = 0, t2 = 0;
    EstimateWithError residual;
    double maxQuadError = 0.0;
    std::string method = "exact piecewise-constant";
    bool within3SE() const;
};

// Per-path F(X_{t2}) - F(X_{t1}) - ∫_{t1}^{t2} (LF)(X_u) du, optionally multiplied by weight(X_{s1}).
MartingaleReport martingaleResidual(const std::vector<EventTrace>& traces, const TestFunction& F, double t1,
                                    double t2, const std::function<double(const Configuration&)>& weight = {},
                                    double s1 = 0.0);
// Unweighted and weighted residuals from a single replay of every path.
std::array<MartingaleReport, 2> martingaleResidualPair(const std::vector<EventTrace>& traces, const TestFunction& F,
                                                       double t1, double t2,
                                                       const std::function<double(const Configuration&)>& weight,
                                                       double s1 = 0.0);

// E[υ(X_{t1}, X_{t2}) υ(X_{t2}, X_{t3})] with υ the path-metric surrogate.
EstimateWithError chentsovDiagnostic(const std::vector<EventTrace>& traces, double t1, double t2, double t3,
                                     PsiMode mode = PsiMode::Centered);

struct ChentsovPoint {
    double spacing;
    EstimateWithError w;
};

struct ChentsovSweep {
    std::vector<ChentsovPoint> points;
    double slope = 0.0;
    double slopeSE = 0.0;
    double intercept = 0.0;
};

// For each spacing Δ = t3 - t1, the product moment on (center - Δ/2, center, center + Δ/2);
// then a least-squares fit of log W against log Δ.
ChentsovSweep chentsovSweep(const std::vector<EventTrace>& traces, double center, const std::vector<double>& spacings,
                            PsiMode mode = PsiMode::Centered);

// Least-squares line through (log x, log y).
std::array<double, 3> fitLogLog(const std::vector<double>& x, const std::vector<double>& y);

struct SigmaRow {
    double sigma;
    EstimateWithError mean;        // μ_t^σ(F)
    EstimateWithError difference;  // paired μ_t^σ(F) - μ_t^0(F)
};

// Same initial states and dynamics streams for every σ (coupled by seed).
std::vector<SigmaRow> sigmaConvergenceSweep(const KernelSet& ks, const InitialSampler& sampler, std::size_t nPaths,
                                            std::uint64_t seed, const std::function<double(const Configuration&)>& F,
                                            double t, const std::vector<double>& sigmas, int workers = 0);

// Monotone nonincreasing |difference| along the (descending) σ list, up to one joint SE.
bool sigmaMonotone(const std::vector<SigmaRow>& rows);

struct TypeEstimate {
    EstimateWithError estimate;
    OrderPair argmax;
};

// max over 1 ≤ |m| ≤ mMax of (χ̂^(m) / (⟨θ0⟩^{m0}⟨θ1⟩^{m1}))^{1/|m|}, with a delta-method SE.
TypeEstimate typeEstimate(const std::vector<EventTrace>& traces, double t, const Theta& th0, const Theta& th1,
                          int mMax);

}  // namespace wr
