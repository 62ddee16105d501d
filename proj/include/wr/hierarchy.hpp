#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "wr/grid.hpp"
#include "wr/kernels.hpp"

namespace wr {

// How the forward generator supplies correlation functions above the stored order M.
enum class Closure { Truncate, PoissonProduct, RuelleCap };

std::string toString(Closure c);
Closure closureFromString(const std::string& s);

struct HierarchyParams {
    int M = 2;
    int n = 32;
    int nMax = 3;  // Υ truncation depth
    Closure closure = Closure::PoissonProduct;
    double theta0 = 0.0;  // declared type e^{ϑ0}
    double safety = 0.5;
    int termCap = 80;
    double tol = 1e-12;
    // Upper bound on a sub-step when the analytic horizon is infinite (φ̄ = 0) or very long.
    double stepCap = 0.25;
};

struct CorrelationField {
    MultiField k;
    double theta = 0.0;  // ϑ of the tracked norm ‖k‖_ϑ
};

// k^(m) = κ0^{m0} κ1^{m1}: correlation functions of a homogeneous Poisson law.
CorrelationField poissonField(const TorusGrid& grid, int M, double kappa0, double kappa1);

// k^(m)(x, y) = Π ρ0(x_j) Π ρ1(y_j): inhomogeneous Poisson law.
CorrelationField poissonField(const TorusGrid& grid, int M, const ScalarFn& rho0, const ScalarFn& rho1);

// Grid discretization of the generator's ingredients at fixed σ.
class HierarchyOperators {
public:
    HierarchyOperators(const KernelSet& ks, const TorusGrid& grid, double sigma);

    const KernelSet& kernels() const { return *ks_; }
    const TorusGrid& grid() const { return grid_; }
    double sigma() const { return sigma_; }
    std::size_t nodes() const { return N_; }
    // Quadrature weight of ∫ a_i(x_j - y) f(y) dy on node y: band-limited (spectral) kernel times h^d.
    const double* jumpRow(int i, std::size_t j) const { return A_[i].data() + j * N_; }
    double jumpMass(int i) const { return mass_[i]; }
    double psiS(std::size_t j) const { return psiS_[j]; }
    // τ^i_y(z) = e^{-φ_i(z - y)} and t^i_y(z) = τ^i_y(z) - 1 on node pairs (y, z).
    const double* tauRow(int i, std::size_t y) const { return tau_[i].data() + y * N_; }
    const double* tRow(int i, std::size_t y) const { return t_[i].data() + y * N_; }
    bool interacting(int i) const { return interacting_[i]; }
    // ∫ |t^i_y| on the grid (independent of y by translation invariance).
    double tL1(int i) const { return tl1_[i]; }
    // Relative Fourier tail of the grid data above half the band, a proxy for aliasing error.
    double quadratureTail() const { return tail_; }

private:
    const KernelSet* ks_;
    TorusGrid grid_;
    double sigma_;
    std::size_t N_;
    std::array<std::vector<double>, 2> A_, tau_, t_;
    std::array<double, 2> mass_{}, tl1_{};
    std::array<bool, 2> interacting_{};
    std::vector<double> psiS_;
    double tail_ = 0.0;
};

// ‖k‖_ϑ = max_m e^{-ϑ|m|} max |k^(m)|.
double fieldNorm(const MultiField& k, double theta);
// |G|_ϑ = Σ_m e^{ϑ|m|}/(m0! m1!) Σ |G^(m)| h^{d|m|}.
double quasiNorm(const MultiField& G, double theta);

// Largest violation of 0 ≤ k^(m) ≤ e^{ϑ|m|} over all stored orders (≤ 0 when the bound holds).
double ruelleViolation(const MultiField& k, double theta);

// (Υ^i_y k)^(m) at grid index idx, y a node; orders above M from the closure.
// When the closure is RuelleCap, *radius receives the half-width of the closure interval.
double upsilonApply(const HierarchyOperators& ops, const MultiField& k, std::size_t y, int i, OrderPair m,
                    std::size_t idx, int nMax, Closure closure, double theta = 0.0, double* radius = nullptr);

// L^Δ k on every stored order. closureRadius (optional) receives the ϑ-weighted sup of the
// RuelleCap interval half-width.
MultiField forwardGenerator(const HierarchyOperators& ops, const MultiField& k, const HierarchyParams& p,
                            double theta = 0.0, double* closureRadius = nullptr);

// L̂ G on every stored order |m| ≤ M (contributions landing above M are dropped).
MultiField dualGenerator(const HierarchyOperators& ops, const MultiField& G);

struct SubStep {
    double t0;
    double h;
    double theta;
    double thetaPrime;
    double horizon;  // T(ϑ', ϑ)
    int terms;
    double remainder;
};

struct EvolutionReport {
    MultiField field;
    double theta = 0.0;         // ϑ after the last sub-step
    double remainder = 0.0;     // summed series remainder estimates (norm units)
    double closureRadius = 0.0;
    bool converged = true;
    std::vector<SubStep> ledger;
};

// Horizon errors: a requested step would exceed safety × T(ϑ', ϑ).
struct HorizonError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One series call Ξ(h) k = Σ h^n/n! (L^Δ)^n k. Throws HorizonError if h > safety × T(ϑ', ϑ).
EvolutionReport seriesForward(const HierarchyOperators& ops, const CorrelationField& k0, double h,
                              const HierarchyParams& p);
EvolutionReport seriesDual(const HierarchyOperators& ops, const MultiField& G0, double h, double theta,
                           const HierarchyParams& p);

// Sub-stepped evolution with ϑ(t) = ϑ0 + αt and per-step horizon safety × T(ϑ', ϑ).
EvolutionReport evolveForward(const HierarchyOperators& ops, const CorrelationField& k0, double t,
                              const HierarchyParams& p);
EvolutionReport evolveDual(const HierarchyOperators& ops, const MultiField& G0, double t, const HierarchyParams& p);

// Dual evolution sampled at increasing times, chaining sub-steps between them.
std::vector<EvolutionReport> evolveDualGrid(const HierarchyOperators& ops, const MultiField& G0,
                                            const std::vector<double>& times, const HierarchyParams& p);

// Largest admissible sub-step at the given ϑ, plus the associated ϑ' and T(ϑ', ϑ).
SubStep plannedStep(const KernelConstants& c, double theta, const HierarchyParams& p);

struct DualExpectation {
    double value = 0.0;
    double seriesRemainder = 0.0;
    double quadrature = 0.0;
    double truncation = 0.0;  // size of the top stored order's contribution, a proxy for the dropped tail
    double budget() const { return seriesRemainder + quadrature + truncation; }
};

DualExpectation expectationViaDual(const HierarchyOperators& ops, const CorrelationField& k0, const MultiField& G,
                                   double t, const HierarchyParams& p);
DualExpectation pairWithBudget(const HierarchyOperators& ops, const CorrelationField& k0,
                               const EvolutionReport& dual);

// Free one-point equation on the torus: f̂_t(ξ) = exp(t(â(ξ) - â(0))) f̂_0(ξ), from node values.
class FreeSpectralSolution {
public:
    FreeSpectralSolution(const TorusGrid& grid, const JumpKernel& a, const std::vector<double>& f0);
    double operator()(const Point& x, double t) const;
    std::vector<double> atNodes(double t) const;

private:
    TorusGrid grid_;
    std::vector<std::complex<double>> coef_;
    std::vector<std::array<int, kMaxDim>> freq_;
    std::vector<double> symbol_;
};

// Binary field dump with a text header (orders, grid, ϑ).
void writeField(std::ostream& os, const MultiField& k, double theta, const std::string& label);
MultiField readField(std::istream& is, const Domain& dom, double* theta = nullptr, std::string* label = nullptr);

}  // namespace wr
